//! Weak observable currents: surface-class functions on solutions with a
//! prescribed differential and integration constant. Construction from
//! locally Hamiltonian vector-field rules, the localized-measurement
//! algorithm, improvement of commutator-type rules to local currents, and
//! separation witnesses.
//!
//! Solutions are charted by first-order data on a reference horizontal cut
//! with frozen spatial boundary values; the explicit march realizes the
//! chart in both directions for any polynomial potential.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::currents::{flux_cochain, integrate, symplectic_product, Current, CurrentsError};
use crate::dynamics::{
    jet_sample, max_residual, multisymplectic_coefficient, History, Potential, VerticalVector,
};
use crate::lattice::{FaceId, LatticeError, OrientedSurface, RectLattice};
use crate::solver::{
    cut_row, first_variation, linearize, linearized_march, march_solution, presymplectic_matrix,
    CauchyData, SolverError, SpatialBoundary,
};

#[derive(Debug, Error)]
pub enum WeakOcError {
    #[error("surface is not homologous to the reference class or its reverse")]
    NonHomologous,
    #[error("path solve failed at s = {s}: {source}")]
    PathSolve { s: f64, source: SolverError },
    #[error("quadrature did not reach tolerance {tol:e} after {panels} panels")]
    QuadratureStalled { tol: f64, panels: usize },
    #[error("vector-field rule is not a first variation at a sample solution (residual {0:e})")]
    RuleNotFirstVariation(f64),
    #[error("vector-field rule is not locally Hamiltonian (d sigma residual {0:e})")]
    NotLocallyHamiltonian(f64),
    #[error("history is not a solution (residual {0:e})")]
    NotASolution(f64),
    #[error("seed support must lie on the reference cut")]
    SeedOffSurface,
    #[error("multisymplectic coefficient vanishes on a support face")]
    DegenerateFace,
    #[error("vector pairs to zero with the surface presymplectic form")]
    InNullSpace,
    #[error("witness pairing {pairing:e} below the normalized threshold {threshold:e}")]
    WitnessTooWeak { pairing: f64, threshold: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Currents(#[from] CurrentsError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Chart on the space of solutions: first-order data on a reference cut,
/// spatial boundary values frozen. `solve` marches the data to the unique
/// solution through it; `tangent` extends data variations to kernel
/// vectors of the linearized equations.
#[derive(Clone)]
pub struct CauchyChart {
    lattice: RectLattice,
    potential: Potential,
    row: usize,
    spatial: SpatialBoundary,
}

impl CauchyChart {
    pub fn new(
        lattice: RectLattice,
        potential: Potential,
        row: usize,
        spatial: SpatialBoundary,
    ) -> Result<Self, WeakOcError> {
        if row < 1 || row > lattice.n_t() - 1 {
            return Err(WeakOcError::Solver(SolverError::NotACut));
        }
        Ok(Self { lattice, potential, row, spatial })
    }

    pub fn lattice(&self) -> &RectLattice {
        &self.lattice
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn surface(&self) -> OrientedSurface {
        self.lattice.horizontal_cut(self.row).expect("validated row")
    }

    /// Dimension of the chart: two coordinates per cut column.
    pub fn dim(&self) -> usize {
        2 * self.lattice.n_x()
    }

    pub fn coords(&self, history: &History) -> DVector<f64> {
        CauchyData::from_history(&self.lattice, self.row, history)
            .expect("validated row")
            .to_coords()
    }

    pub fn solve(&self, z: &DVector<f64>) -> Result<History, WeakOcError> {
        let cauchy = CauchyData::from_coords(&self.lattice, self.row, z)?;
        Ok(march_solution(&self.lattice, &self.potential, &cauchy, &self.spatial)?)
    }

    /// Kernel vector of the linearized equations at `history` with the
    /// given chart-coordinate data and zero boundary variation.
    pub fn tangent(&self, history: &History, dz: &DVector<f64>) -> Result<VerticalVector, WeakOcError> {
        let variation = CauchyData::from_coords(&self.lattice, self.row, dz)?;
        Ok(linearized_march(
            &self.lattice,
            history,
            &self.potential,
            &variation,
            &SpatialBoundary::zeros(&self.lattice),
        )?)
    }

    /// Chart coordinates of a vertical vector (its restriction to the cut).
    pub fn restrict(&self, v: &VerticalVector) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for x in 0..self.lattice.n_x() {
            out[2 * x] = v.atom(self.lattice.atom(self.row - 1, x));
            out[2 * x + 1] = v.face(self.lattice.time_face(self.row, x));
        }
        out
    }

    /// The constant presymplectic matrix on the chart coordinates.
    pub fn omega(&self, history: &History) -> nalgebra::DMatrix<f64> {
        presymplectic_matrix(&self.lattice, &self.surface(), history)
            .matrix()
            .clone()
    }
}

type RuleFn = Arc<dyn Fn(&History) -> Result<VerticalVector, WeakOcError> + Send + Sync>;

/// A vector field on the solution manifold: a map from solutions to first
/// variations.
#[derive(Clone)]
pub struct VariationRule {
    rule: RuleFn,
}

impl VariationRule {
    pub fn new(
        rule: impl Fn(&History) -> Result<VerticalVector, WeakOcError> + Send + Sync + 'static,
    ) -> Self {
        Self { rule: Arc::new(rule) }
    }

    /// The rule that re-solves the linearized equations with fixed cut
    /// data at every solution.
    pub fn from_cut_data(chart: &CauchyChart, data: DVector<f64>) -> Self {
        let chart = chart.clone();
        Self::new(move |history| chart.tangent(history, &data))
    }

    /// The constant vertical vector as a rule (a first variation of every
    /// solution only in the shift-symmetric theory).
    pub fn constant_shift(lattice: &RectLattice, xi: f64) -> Self {
        let lattice = lattice.clone();
        Self::new(move |_| Ok(VerticalVector::constant(&lattice, xi)))
    }

    /// Hamiltonian rule of a chart function: solves
    /// `omega(., v) = grad H` on the cut and extends.
    pub fn from_chart_hamiltonian(
        chart: &CauchyChart,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        let chart = chart.clone();
        let omega = chart.omega(&History::zeros(&chart.lattice));
        let lu = omega.lu();
        Self::new(move |history| {
            let z = chart.coords(history);
            let data = lu.solve(&grad(&z)).ok_or(WeakOcError::InNullSpace)?;
            chart.tangent(history, &data)
        })
    }

    pub fn apply(&self, history: &History) -> Result<VerticalVector, WeakOcError> {
        (self.rule)(history)
    }

    /// Commutator of two rules as vector fields on the chart, by central
    /// finite differences of the rules' chart data along each other.
    pub fn commutator(chart: &CauchyChart, a: &VariationRule, b: &VariationRule, eps: f64) -> Self {
        let chart_c = chart.clone();
        let (a, b) = (a.clone(), b.clone());
        Self::new(move |history| {
            let z = chart_c.coords(history);
            let data_of = |rule: &VariationRule, z: &DVector<f64>| -> Result<DVector<f64>, WeakOcError> {
                let sol = chart_c.solve(z)?;
                Ok(chart_c.restrict(&rule.apply(&sol)?))
            };
            let za = data_of(&a, &z)?;
            let zb = data_of(&b, &z)?;
            // derivative of b along a minus derivative of a along b
            let d_b_along_a =
                (data_of(&b, &(&z + eps * &za))? - data_of(&b, &(&z - eps * &za))?) / (2.0 * eps);
            let d_a_along_b =
                (data_of(&a, &(&z + eps * &zb))? - data_of(&a, &(&z - eps * &zb))?) / (2.0 * eps);
            chart_c.tangent(history, &(d_b_along_a - d_a_along_b))
        })
    }
}

/// A weak observable current: reference surface class, vector-field rule,
/// reference solution and integration constant. Its value on a solution is
/// the line integral of the contraction `omega(gamma_dot, v)` along a path
/// of solutions from the reference, plus the constant.
#[derive(Clone)]
pub struct WeakCurrent {
    chart: CauchyChart,
    vf_rule: VariationRule,
    reference: History,
    k: f64,
    quad_tol: f64,
}

/// Composite Simpson with interval halving until two successive estimates
/// agree to `tol`.
fn simpson<E>(mut f: impl FnMut(f64) -> Result<f64, E>, tol: f64) -> Result<f64, (f64, usize, Option<E>)> {
    let mut eval = |s: f64| f(s).map_err(|e| (0.0, 0usize, Some(e)));
    let mut panels = 2usize;
    let mut prev = {
        let (a, m, b) = (eval(0.0)?, eval(0.5)?, eval(1.0)?);
        (a + 4.0 * m + b) / 6.0
    };
    loop {
        panels *= 2;
        let h = 1.0 / panels as f64;
        let mut sum = eval(0.0)? + eval(1.0)?;
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * eval(i as f64 * h)?;
        }
        let estimate = sum * h / 3.0;
        if (estimate - prev).abs() < tol {
            return Ok(estimate);
        }
        if panels >= 1024 {
            return Err(((estimate - prev).abs(), panels, None));
        }
        prev = estimate;
    }
}

impl WeakCurrent {
    pub fn reference_surface(&self) -> OrientedSurface {
        self.chart.surface()
    }

    pub fn reference_solution(&self) -> &History {
        &self.reference
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn vf_rule(&self) -> &VariationRule {
        &self.vf_rule
    }

    fn segment_integral(
        &self,
        surface: &OrientedSurface,
        from: &History,
        to: &History,
    ) -> Result<f64, WeakOcError> {
        let lattice = &self.chart.lattice;
        let row = self.chart.row;
        let z0 = CauchyData::from_history(lattice, row, from)?;
        let z1 = CauchyData::from_history(lattice, row, to)?;
        let bc0 = SpatialBoundary::from_history(lattice, from);
        let bc1 = SpatialBoundary::from_history(lattice, to);
        let dz = CauchyData::new(
            lattice,
            row,
            z0.pairs()
                .iter()
                .zip(z1.pairs())
                .map(|(&(f0, a0), &(f1, a1))| (f1 - f0, a1 - a0))
                .collect(),
        )?;
        let dbc = SpatialBoundary {
            left: bc0.left.iter().zip(&bc1.left).map(|(a, b)| b - a).collect(),
            right: bc0.right.iter().zip(&bc1.right).map(|(a, b)| b - a).collect(),
        };
        let integrand = |s: f64| -> Result<f64, WeakOcError> {
            let err = |source: WeakOcError| match source {
                WeakOcError::Solver(e) => WeakOcError::PathSolve { s, source: e },
                other => other,
            };
            let gamma = march_solution(
                lattice,
                &self.chart.potential,
                &z0.lerp(&z1, s),
                &bc0.lerp(&bc1, s),
            )
            .map_err(|e| WeakOcError::PathSolve { s, source: e })?;
            let gamma_dot =
                linearized_march(lattice, &gamma, &self.chart.potential, &dz, &dbc)
                    .map_err(|e| WeakOcError::PathSolve { s, source: e })?;
            let v = self.vf_rule.apply(&gamma).map_err(err)?;
            Ok(crate::solver::omega_surface(lattice, surface, &gamma_dot, &v))
        };
        simpson(integrand, self.quad_tol).map_err(|(gap, panels, source)| match source {
            Some(e) => e,
            None => WeakOcError::QuadratureStalled { tol: gap, panels },
        })
    }

    /// Evaluates the weak current on a surface homologous to the reference
    /// class (or its reverse, which negates the value).
    pub fn evaluate(&self, surface: &OrientedSurface, solution: &History) -> Result<f64, WeakOcError> {
        self.evaluate_via(surface, solution, None)
    }

    /// Same as `evaluate` but routing the solution path through an optional
    /// waypoint solution (a different homotopic path; the value must agree).
    pub fn evaluate_via(
        &self,
        surface: &OrientedSurface,
        solution: &History,
        waypoint: Option<&History>,
    ) -> Result<f64, WeakOcError> {
        let lattice = &self.chart.lattice;
        let res = max_residual(lattice, solution, &self.chart.potential);
        if res > 1e-8 {
            return Err(WeakOcError::NotASolution(res));
        }
        let reference = self.chart.surface();
        // On the finite rectangle every chain bounds relative to the
        // lattice edge, so membership in the cut class needs the chain
        // solve and the matching crossing number.
        let same_class = |a: &OrientedSurface, b: &OrientedSurface| {
            lattice.homologous(a, b).is_some()
                && a.crossing_number(lattice) == b.crossing_number(lattice)
        };
        if same_class(&reference, surface) {
            let mut total = self.k;
            match waypoint {
                None => total += self.segment_integral(surface, &self.reference, solution)?,
                Some(mid) => {
                    total += self.segment_integral(surface, &self.reference, mid)?;
                    total += self.segment_integral(surface, mid, solution)?;
                }
            }
            Ok(total)
        } else if same_class(&reference, &surface.reverse(lattice)) {
            let flipped = surface.reverse(lattice);
            Ok(-self.evaluate_via(&flipped, solution, waypoint)?)
        } else {
            Err(WeakOcError::NonHomologous)
        }
    }
}

/// Builds a weak observable current from a vector-field rule, an
/// integration constant and a reference solution. The rule is checked to
/// yield kernel vectors at the reference and at a nearby sample solution.
pub fn construct_weak(
    chart: &CauchyChart,
    vf_rule: VariationRule,
    k: f64,
    phi0: History,
) -> Result<WeakCurrent, WeakOcError> {
    let lattice = &chart.lattice;
    let res = max_residual(lattice, &phi0, &chart.potential);
    if res > 1e-9 {
        return Err(WeakOcError::NotASolution(res));
    }
    let mut samples = vec![phi0.clone()];
    let mut z = chart.coords(&phi0);
    for i in 0..z.len() {
        z[i] += 1e-3 * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    // A nearby solution with the chart's boundary values.
    let cauchy = CauchyData::from_coords(lattice, chart.row, &z)?;
    samples.push(march_solution(lattice, &chart.potential, &cauchy, &chart.spatial)?);
    for sample in &samples {
        let v = vf_rule.apply(sample)?;
        let lin = linearize(lattice, sample, &chart.potential);
        let res = lin.kernel_residual(lattice, &v);
        if res > 1e-9 * (1.0 + v.norm()) {
            return Err(WeakOcError::RuleNotFirstVariation(res));
        }
    }
    Ok(WeakCurrent { chart: chart.clone(), vf_rule, reference: phi0, k, quad_tol: 1e-8 })
}

/// A cochain supported on a subset of the faces of a designated surface.
#[derive(Clone)]
pub struct SeedCochain {
    support: std::collections::BTreeSet<FaceId>,
    current: Current,
}

impl SeedCochain {
    pub fn new(support: impl IntoIterator<Item = FaceId>, current: Current) -> Self {
        Self { support: support.into_iter().collect(), current }
    }

    pub fn support(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.support.iter().copied()
    }

    pub fn eval(&self, jet: &crate::dynamics::JetSample) -> f64 {
        if self.support.contains(&jet.oriented_face.face) {
            self.current.eval(jet)
        } else {
            0.0
        }
    }

    fn d_atom(&self, jet: &crate::dynamics::JetSample) -> f64 {
        if self.support.contains(&jet.oriented_face.face) {
            self.current.d_atom(jet)
        } else {
            0.0
        }
    }

    fn d_face(&self, jet: &crate::dynamics::JetSample) -> f64 {
        if self.support.contains(&jet.oriented_face.face) {
            self.current.d_face(jet)
        } else {
            0.0
        }
    }
}

/// The localized-measurement construction: from a seed cochain supported
/// on part of a cut, produce the weak observable current that measures it.
///
/// The direct impact solves `dF = -iota_v Omega` face by face on the
/// support (`v_face = (1/c) dF/d(phi_atom)`, `v_atom = -(1/c) dF/d(phi_face)`
/// at the reference solution, zero elsewhere); propagation extends it by
/// the linearized equations; the constant is the seed's integral at the
/// reference.
pub fn localized_measurement(
    chart: &CauchyChart,
    seed: &SeedCochain,
    phi0: &History,
) -> Result<WeakCurrent, WeakOcError> {
    let lattice = &chart.lattice;
    let sigma = chart.surface();
    let cut_faces: std::collections::BTreeSet<FaceId> =
        sigma.faces().iter().map(|of| of.face).collect();
    if !seed.support.iter().all(|f| cut_faces.contains(f)) {
        return Err(WeakOcError::SeedOffSurface);
    }
    let mut data = DVector::zeros(chart.dim());
    let mut k = 0.0;
    for (m, of) in sigma.faces().iter().enumerate() {
        let jet = jet_sample(lattice, phi0, *of);
        k += of.signf() * seed.eval(&jet);
        if seed.support.contains(&of.face) {
            let c = multisymplectic_coefficient(lattice, of);
            if c == 0.0 {
                return Err(WeakOcError::DegenerateFace);
            }
            data[2 * m] = -seed.d_face(&jet) / c; // atom component
            data[2 * m + 1] = seed.d_atom(&jet) / c; // face component
        }
    }
    let rule = VariationRule::from_cut_data(chart, data);
    construct_weak(chart, rule, k, phi0.clone())
}

/// A commutator-type weak current improved to a local object: the
/// symplectic product of the two rules evaluated at each solution, plus a
/// flux cochain calibrated so the reference-surface integral at the
/// reference solution equals `k`.
#[derive(Clone)]
pub struct ImprovedCurrent {
    chart: CauchyChart,
    x_rule: VariationRule,
    y_rule: VariationRule,
    kappa: f64,
}

impl ImprovedCurrent {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The local current bound to a particular solution.
    pub fn current_at(&self, solution: &History) -> Result<Current, WeakOcError> {
        let x = self.x_rule.apply(solution)?;
        let y = self.y_rule.apply(solution)?;
        let product =
            symplectic_product(&self.chart.lattice, &self.chart.potential, &x, &y, solution)?;
        Ok(product.add(&flux_cochain(&self.chart.lattice, self.kappa)))
    }

    pub fn integrate(
        &self,
        surface: &OrientedSurface,
        solution: &History,
    ) -> Result<f64, WeakOcError> {
        let current = self.current_at(solution)?;
        Ok(integrate(&self.chart.lattice, &current, surface, solution)?)
    }
}

/// Improves the weak current of the commutator `[x, y]` of two locally
/// Hamiltonian rules to a local current.
pub fn improve_to_local(
    chart: &CauchyChart,
    x_rule: &VariationRule,
    y_rule: &VariationRule,
    k: f64,
    phi0: &History,
) -> Result<ImprovedCurrent, WeakOcError> {
    for rule in [x_rule, y_rule] {
        let residual = locally_hamiltonian_residual(chart, rule, phi0)?;
        if residual > 1e-6 {
            return Err(WeakOcError::NotLocallyHamiltonian(residual));
        }
    }
    let mut improved = ImprovedCurrent {
        chart: chart.clone(),
        x_rule: x_rule.clone(),
        y_rule: y_rule.clone(),
        kappa: 0.0,
    };
    let base = improved.integrate(&chart.surface(), phi0)?;
    improved.kappa = k - base;
    Ok(improved)
}

/// Max antisymmetrized finite-difference exterior derivative of the
/// contraction 1-form `sigma_v` over the chart's coordinate basis.
///
/// The surface pairing only reads cut data, and extensions of basis
/// directions restrict to the basis itself, so the 1-form is
/// `sigma(z) = -omega_matrix * v_data(z)` and closedness is checked by
/// differencing the rule's cut data.
pub fn locally_hamiltonian_residual(
    chart: &CauchyChart,
    vf_rule: &VariationRule,
    phi: &History,
) -> Result<f64, WeakOcError> {
    let omega = chart.omega(phi);
    let z0 = chart.coords(phi);
    let sigma_at = |z: &DVector<f64>| -> Result<DVector<f64>, WeakOcError> {
        let sol = chart.solve(z)?;
        let v = vf_rule.apply(&sol)?;
        Ok(-(&omega * chart.restrict(&v)))
    };
    let eps = 1e-4;
    let dim = chart.dim();
    // d sigma / dz_a for every a, by central differences.
    let mut jacobian = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut zp = z0.clone();
        zp[a] += eps;
        let mut zm = z0.clone();
        zm[a] -= eps;
        jacobian.push((sigma_at(&zp)? - sigma_at(&zm)?) / (2.0 * eps));
    }
    let mut worst: f64 = 0.0;
    for a in 0..dim {
        for b in a + 1..dim {
            worst = worst.max((jacobian[a][b] - jacobian[b][a]).abs());
        }
    }
    Ok(worst)
}

/// True when the antisymmetrized derivative stays below `tol`: the rule's
/// contraction form is closed along two-parameter solution families.
pub fn locally_hamiltonian_check(
    chart: &CauchyChart,
    vf_rule: &VariationRule,
    phi: &History,
    tol: f64,
) -> Result<bool, WeakOcError> {
    let res = max_residual(&chart.lattice, phi, &chart.potential);
    if res > 1e-9 {
        return Err(WeakOcError::NotASolution(res));
    }
    Ok(locally_hamiltonian_residual(chart, vf_rule, phi)? <= tol)
}

/// Produces a first variation `v` with `|omega_{L,Sigma}(v, w)| > 0`,
/// witnessing that the surface observables separate the direction `w`.
pub fn separation_witness(
    lattice: &RectLattice,
    potential: &Potential,
    phi: &History,
    w: &VerticalVector,
    sigma: &OrientedSurface,
) -> Result<VerticalVector, WeakOcError> {
    let lin = linearize(lattice, phi, potential);
    let res = lin.kernel_residual(lattice, w);
    if res > 1e-9 * (1.0 + w.norm()) {
        return Err(WeakOcError::RuleNotFirstVariation(res));
    }
    let omega = presymplectic_matrix(lattice, sigma, phi);
    let w_data = omega.restrict(w);
    let paired = omega.matrix() * &w_data;
    if paired.norm() <= 1e-12 * (1.0 + w.norm()) {
        return Err(WeakOcError::InNullSpace);
    }
    // Solve on the non-null complement; for the nondegenerate cut this is
    // a plain inverse and the pairing is -|w_data|^2.
    let svd = omega.matrix().clone().svd(true, true);
    let v_data = svd
        .solve(&w_data, omega.tol().max(f64::EPSILON))
        .map_err(|_| WeakOcError::InNullSpace)?;
    let row = cut_row(lattice, sigma).ok_or(SolverError::NotACut)?;
    let mut pairs = vec![(0.0, 0.0); lattice.n_x()];
    for (m, of) in sigma.faces().iter().enumerate() {
        let (_, x) = lattice.face_coords(of.face);
        pairs[x] = (v_data[2 * m + 1], v_data[2 * m]);
    }
    let variation = CauchyData::new(lattice, row, pairs)?;
    let v = first_variation(lattice, phi, potential, &variation)?;
    let pairing = crate::solver::omega_surface(lattice, sigma, &v, w);
    let scale = sigma
        .faces()
        .iter()
        .map(|of| multisymplectic_coefficient(lattice, of).abs())
        .fold(0.0, f64::max);
    let threshold = 1e-6 * v.norm() * w.norm() * scale;
    if pairing.abs() < threshold {
        return Err(WeakOcError::WitnessTooWeak { pairing: pairing.abs(), threshold });
    }
    Ok(v)
}
