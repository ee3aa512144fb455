//! Observable currents: differentiable per-face functions of the jet
//! sample, their integration over oriented surfaces, the Noether and
//! symplectic-product families, the condition checker, and the Poisson
//! algebra (bracket and product).
//!
//! Per face the local phase space is two dimensional with coordinates
//! `(phi_atom, phi_face)` and symplectic form `c d(phi_atom) ^ d(phi_face)`;
//! a Hamiltonian current's vector-field rule reads
//! `v_face = (1/c) dF/d(phi_atom)`, `v_atom = -(1/c) dF/d(phi_face)`.

use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::{
    cartan_coefficient, jet_sample, multisymplectic_coefficient, History, JetSample, Potential,
    VerticalVector,
};
use crate::lattice::{Axis, FaceDir, OrientedFace, OrientedSurface, RectLattice};
use crate::solver::{linearize, presymplectic_matrix};

#[derive(Debug, Error)]
pub enum CurrentsError {
    #[error("potential breaks the shift symmetry: N' is not identically zero")]
    ShiftSymmetryBroken,
    #[error("vector is not a first variation: linearized residual {0:e}")]
    NotFirstVariation(f64),
    #[error("jet sample on face {0:?} is outside the current's domain")]
    DomainViolation(crate::lattice::FaceId),
}

type JetFn = Arc<dyn Fn(&JetSample) -> f64 + Send + Sync>;
type JetPred = Arc<dyn Fn(&JetSample) -> bool + Send + Sync>;

/// An (n-1)-cochain: a differentiable function of the local jet sample,
/// carried together with its two partial derivatives.
#[derive(Clone)]
pub struct Current {
    eval: JetFn,
    d_atom: JetFn,
    d_face: JetFn,
    domain: Option<JetPred>,
}

impl Current {
    pub fn new(
        eval: impl Fn(&JetSample) -> f64 + Send + Sync + 'static,
        d_atom: impl Fn(&JetSample) -> f64 + Send + Sync + 'static,
        d_face: impl Fn(&JetSample) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            d_atom: Arc::new(d_atom),
            d_face: Arc::new(d_face),
            domain: None,
        }
    }

    pub fn with_domain(mut self, pred: impl Fn(&JetSample) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(pred));
        self
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |_| value, |_| 0.0, |_| 0.0)
    }

    pub fn eval(&self, jet: &JetSample) -> f64 {
        (self.eval)(jet)
    }

    pub fn d_atom(&self, jet: &JetSample) -> f64 {
        (self.d_atom)(jet)
    }

    pub fn d_face(&self, jet: &JetSample) -> f64 {
        (self.d_face)(jet)
    }

    pub fn in_domain(&self, jet: &JetSample) -> bool {
        self.domain.as_ref().map(|p| p(jet)).unwrap_or(true)
    }

    pub fn add(&self, other: &Current) -> Current {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let (a3, b3) = (self.clone(), other.clone());
        let (a4, b4) = (self.clone(), other.clone());
        Current {
            eval: Arc::new(move |jet| a.eval(jet) + b.eval(jet)),
            d_atom: Arc::new(move |jet| a2.d_atom(jet) + b2.d_atom(jet)),
            d_face: Arc::new(move |jet| a3.d_face(jet) + b3.d_face(jet)),
            domain: Some(Arc::new(move |jet| a4.in_domain(jet) && b4.in_domain(jet))),
        }
    }

    pub fn scale(&self, factor: f64) -> Current {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        Current {
            eval: Arc::new(move |jet| factor * a.eval(jet)),
            d_atom: Arc::new(move |jet| factor * b.d_atom(jet)),
            d_face: Arc::new(move |jet| factor * c.d_face(jet)),
            domain: self.domain.clone(),
        }
    }
}

/// A current with second derivatives, enough to differentiate its
/// Hamiltonian vector-field rule.
#[derive(Clone)]
pub struct HamiltonianCurrent {
    current: Current,
    d2_aa: JetFn,
    d2_af: JetFn,
    d2_ff: JetFn,
}

impl HamiltonianCurrent {
    pub fn new(
        current: Current,
        d2_aa: impl Fn(&JetSample) -> f64 + Send + Sync + 'static,
        d2_af: impl Fn(&JetSample) -> f64 + Send + Sync + 'static,
        d2_ff: impl Fn(&JetSample) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            current,
            d2_aa: Arc::new(d2_aa),
            d2_af: Arc::new(d2_af),
            d2_ff: Arc::new(d2_ff),
        }
    }

    /// Wraps a plain current, supplying the missing second derivatives by
    /// central finite differences of the stored partials.
    pub fn from_current(current: Current) -> Self {
        let (c1, c2, c3) = (current.clone(), current.clone(), current.clone());
        let eps = 1e-6;
        let bump_atom = |jet: &JetSample, e: f64| JetSample { phi_atom: jet.phi_atom + e, ..*jet };
        let bump_face = |jet: &JetSample, e: f64| JetSample { phi_face: jet.phi_face + e, ..*jet };
        Self {
            current,
            d2_aa: Arc::new(move |jet| {
                (c1.d_atom(&bump_atom(jet, eps)) - c1.d_atom(&bump_atom(jet, -eps))) / (2.0 * eps)
            }),
            d2_af: Arc::new(move |jet| {
                (c2.d_atom(&bump_face(jet, eps)) - c2.d_atom(&bump_face(jet, -eps))) / (2.0 * eps)
            }),
            d2_ff: Arc::new(move |jet| {
                (c3.d_face(&bump_face(jet, eps)) - c3.d_face(&bump_face(jet, -eps))) / (2.0 * eps)
            }),
        }
    }

    pub fn current(&self) -> &Current {
        &self.current
    }

    pub fn eval(&self, jet: &JetSample) -> f64 {
        self.current.eval(jet)
    }

    /// The per-face Hamiltonian vector-field rule `(v_atom, v_face)`.
    pub fn vf(&self, lattice: &RectLattice, jet: &JetSample) -> (f64, f64) {
        let c = multisymplectic_coefficient(lattice, &jet.oriented_face);
        (-self.current.d_face(jet) / c, self.current.d_atom(jet) / c)
    }

    /// Jacobian of the vector-field rule on the local phase space:
    /// rows (v_atom, v_face), columns (d/d phi_atom, d/d phi_face).
    pub fn vf_jacobian(&self, lattice: &RectLattice, jet: &JetSample) -> [[f64; 2]; 2] {
        let c = multisymplectic_coefficient(lattice, &jet.oriented_face);
        let faa = (self.d2_aa)(jet);
        let faf = (self.d2_af)(jet);
        let fff = (self.d2_ff)(jet);
        [[-faf / c, -fff / c], [faa / c, faf / c]]
    }
}

/// `f_Sigma(phi)`: the signed sum of the current over the jet samples of an
/// oriented surface.
pub fn integrate(
    lattice: &RectLattice,
    current: &Current,
    surface: &OrientedSurface,
    history: &History,
) -> Result<f64, CurrentsError> {
    let mut total = 0.0;
    for &of in surface.faces() {
        let jet = jet_sample(lattice, history, of);
        if !current.in_domain(&jet) {
            return Err(CurrentsError::DomainViolation(of.face));
        }
        total += of.signf() * current.eval(&jet);
    }
    Ok(total)
}

/// The Noether current of the constant shift symmetry with generator `xi`:
/// per face `-xi * theta` with `theta` the Cartan coefficient, and the
/// constant shift as Hamiltonian vector field.
pub fn noether(
    lattice: &RectLattice,
    potential: &Potential,
    xi: f64,
) -> Result<HamiltonianCurrent, CurrentsError> {
    if !potential.is_shift_symmetric() {
        return Err(CurrentsError::ShiftSymmetryBroken);
    }
    let (l1, l2, l3) = (lattice.clone(), lattice.clone(), lattice.clone());
    let current = Current::new(
        move |jet| -xi * cartan_coefficient(&l1, jet),
        // theta = c (phi_face - phi_atom), so dF/d(phi_atom) = xi c and
        // dF/d(phi_face) = -xi c.
        move |jet| xi * multisymplectic_coefficient(&l2, &jet.oriented_face),
        move |jet| -xi * multisymplectic_coefficient(&l3, &jet.oriented_face),
    );
    Ok(HamiltonianCurrent::new(current, |_| 0.0, |_| 0.0, |_| 0.0))
}

/// The symplectic product of two first variations, frozen at the given
/// solution: per face `c (v_atom w_face - v_face w_atom)`. The stored
/// vectors are treated as constants, so the partial derivatives vanish;
/// the field dependence of `v`, `w` shows up only in integrated residuals.
pub fn symplectic_product(
    lattice: &RectLattice,
    potential: &Potential,
    v: &VerticalVector,
    w: &VerticalVector,
    history: &History,
) -> Result<Current, CurrentsError> {
    let lin = linearize(lattice, history, potential);
    for vec in [v, w] {
        let res = lin.kernel_residual(lattice, vec);
        if res > 1e-9 * (1.0 + vec.norm()) {
            return Err(CurrentsError::NotFirstVariation(res));
        }
    }
    let (l, va, wa) = (lattice.clone(), Arc::new(v.clone()), Arc::new(w.clone()));
    Ok(Current::new(
        move |jet| {
            let c = multisymplectic_coefficient(&l, &jet.oriented_face);
            let of = jet.oriented_face;
            c * (va.atom(of.side) * wa.face(of.face) - va.face(of.face) * wa.atom(of.side))
        },
        |_| 0.0,
        |_| 0.0,
    ))
}

/// The closed constant cochain counting signed time crossings: `kappa/n_x`
/// on time-like faces (negated when evaluated from the future side), zero
/// on space-like faces. Integrates to `kappa` on every future-oriented
/// horizontal cut and to zero on every region boundary.
pub fn flux_cochain(lattice: &RectLattice, kappa: f64) -> Current {
    let l = lattice.clone();
    let per_face = kappa / lattice.n_x() as f64;
    Current::new(
        move |jet| {
            let of = jet.oriented_face;
            match l.face_axis(of.face) {
                Axis::Space => 0.0,
                Axis::Time => {
                    let dir = l.face_direction(of.face, of.side).expect("incident side");
                    match dir {
                        FaceDir::TimePlus => per_face,
                        _ => -per_face,
                    }
                }
            }
        },
        |_| 0.0,
        |_| 0.0,
    )
}

/// Pointwise product of two currents; derivatives by the product rule.
pub fn product(f: &Current, g: &Current) -> Current {
    let (f1, g1) = (f.clone(), g.clone());
    let (f2, g2) = (f.clone(), g.clone());
    let (f3, g3) = (f.clone(), g.clone());
    let (f4, g4) = (f.clone(), g.clone());
    Current {
        eval: Arc::new(move |jet| f1.eval(jet) * g1.eval(jet)),
        d_atom: Arc::new(move |jet| f2.d_atom(jet) * g2.eval(jet) + f2.eval(jet) * g2.d_atom(jet)),
        d_face: Arc::new(move |jet| f3.d_face(jet) * g3.eval(jet) + f3.eval(jet) * g3.d_face(jet)),
        domain: Some(Arc::new(move |jet| f4.in_domain(jet) && g4.in_domain(jet))),
    }
}

/// Poisson bracket of two Hamiltonian currents. Per face
/// `{F,G} = c (w_atom v_face - w_face v_atom)` with `v`, `w` the rules of
/// `F`, `G`; equivalently `(F_face G_atom - F_atom G_face)/c`. Its
/// Hamiltonian vector-field rule is the commutator of the two rules.
pub fn poisson_bracket(
    lattice: &RectLattice,
    f: &HamiltonianCurrent,
    g: &HamiltonianCurrent,
) -> HamiltonianCurrent {
    let value = {
        let (l, f, g) = (lattice.clone(), f.clone(), g.clone());
        move |jet: &JetSample| {
            let c = multisymplectic_coefficient(&l, &jet.oriented_face);
            (f.current().d_face(jet) * g.current().d_atom(jet)
                - f.current().d_atom(jet) * g.current().d_face(jet))
                / c
        }
    };
    let d_atom = {
        let (l, f, g) = (lattice.clone(), f.clone(), g.clone());
        move |jet: &JetSample| {
            let c = multisymplectic_coefficient(&l, &jet.oriented_face);
            ((f.d2_af)(jet) * g.current().d_atom(jet) + f.current().d_face(jet) * (g.d2_aa)(jet)
                - (f.d2_aa)(jet) * g.current().d_face(jet)
                - f.current().d_atom(jet) * (g.d2_af)(jet))
                / c
        }
    };
    let d_face = {
        let (l, f, g) = (lattice.clone(), f.clone(), g.clone());
        move |jet: &JetSample| {
            let c = multisymplectic_coefficient(&l, &jet.oriented_face);
            ((f.d2_ff)(jet) * g.current().d_atom(jet) + f.current().d_face(jet) * (g.d2_af)(jet)
                - (f.d2_af)(jet) * g.current().d_face(jet)
                - f.current().d_atom(jet) * (g.d2_ff)(jet))
                / c
        }
    };
    HamiltonianCurrent::from_current(Current::new(value, d_atom, d_face))
}

/// Report of the three observable-current conditions over a sample of
/// solutions: orientation antisymmetry on interior faces, vanishing sums
/// over all rectangular subregion boundaries, and independence of the
/// null directions of the surface presymplectic form (vacuously true when
/// the null space is empty, as for horizontal cuts in this model).
#[derive(Debug, Clone, PartialEq)]
pub struct OcReport {
    pub antisymmetry: bool,
    pub closedness: bool,
    pub null_directions: bool,
    pub max_antisymmetry_violation: f64,
    pub max_closedness_violation: f64,
    pub max_null_violation: f64,
    pub null_space_dimension: usize,
}

impl OcReport {
    pub fn pass(&self) -> bool {
        self.antisymmetry && self.closedness && self.null_directions
    }
}

/// Evaluates conditions (orientation antisymmetry, closedness on subregion
/// boundaries, null-direction independence) on the given sample histories.
/// The caller is responsible for the samples being converged solutions;
/// the report is purely observational.
pub fn check_oc_conditions(
    lattice: &RectLattice,
    current: &Current,
    solutions: &[History],
    tol: f64,
) -> OcReport {
    let mut max_anti: f64 = 0.0;
    let mut max_closed: f64 = 0.0;
    let mut max_null: f64 = 0.0;
    let mut null_dim = 0;
    for history in solutions {
        for face in lattice.interior_faces() {
            let (a, b) = lattice.incident_atoms(face);
            let ja = jet_sample(
                lattice,
                history,
                OrientedFace::new(lattice, face, a.unwrap()).expect("incident"),
            );
            let jb = jet_sample(
                lattice,
                history,
                OrientedFace::new(lattice, face, b.unwrap()).expect("incident"),
            );
            max_anti = max_anti.max((current.eval(&ja) + current.eval(&jb)).abs());
        }
        for t0 in 0..lattice.n_t() {
            for t1 in t0 + 1..=lattice.n_t() {
                for x0 in 0..lattice.n_x() {
                    for x1 in x0 + 1..=lattice.n_x() {
                        let region =
                            crate::lattice::AtomRegion::rectangle(lattice, t0, t1, x0, x1)
                                .expect("in range");
                        let sigma = lattice.boundary(&region).expect("valid region");
                        let sum = integrate(lattice, current, &sigma, history)
                            .map(|v| v.abs())
                            .unwrap_or(f64::INFINITY);
                        max_closed = max_closed.max(sum);
                    }
                }
            }
        }
        // Null directions of the presymplectic form on a reference cut.
        let cut = lattice.horizontal_cut(1).expect("n_t >= 2");
        let omega = presymplectic_matrix(lattice, &cut, history);
        null_dim = null_dim.max(omega.null_basis().len());
        for null in omega.null_basis() {
            let mut df = 0.0;
            for (m, of) in cut.faces().iter().enumerate() {
                let jet = jet_sample(lattice, history, *of);
                df += current.d_atom(&jet) * null[2 * m] + current.d_face(&jet) * null[2 * m + 1];
            }
            max_null = max_null.max(df.abs());
        }
    }
    OcReport {
        antisymmetry: max_anti <= tol,
        closedness: max_closed <= tol,
        null_directions: max_null <= tol,
        max_antisymmetry_violation: max_anti,
        max_closedness_violation: max_closed,
        max_null_violation: max_null,
        null_space_dimension: null_dim,
    }
}

/// Bivariate polynomial in the jet coordinates,
/// `sum coeffs[i][j] * phi_atom^i * phi_face^j`, with exact derivatives.
/// Useful for building test currents with closed-form Hessians.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    coeffs: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, a: f64, f: f64) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                total += c * a.powi(i as i32) * f.powi(j as i32);
            }
        }
        total
    }

    fn d_a(&self) -> Poly2 {
        let mut out = Vec::new();
        for (i, row) in self.coeffs.iter().enumerate().skip(1) {
            out.push(row.iter().map(|&c| c * i as f64).collect());
        }
        Poly2 { coeffs: out }
    }

    fn d_f(&self) -> Poly2 {
        let out = self
            .coeffs
            .iter()
            .map(|row| row.iter().enumerate().skip(1).map(|(j, &c)| c * j as f64).collect())
            .collect();
        Poly2 { coeffs: out }
    }

    pub fn to_current(&self) -> Current {
        let (p, pa, pf) = (self.clone(), self.d_a(), self.d_f());
        Current::new(
            move |jet| p.eval(jet.phi_atom, jet.phi_face),
            move |jet| pa.eval(jet.phi_atom, jet.phi_face),
            move |jet| pf.eval(jet.phi_atom, jet.phi_face),
        )
    }

    pub fn to_hamiltonian(&self) -> HamiltonianCurrent {
        let (paa, paf, pff) = (self.d_a().d_a(), self.d_a().d_f(), self.d_f().d_f());
        HamiltonianCurrent::new(
            self.to_current(),
            move |jet| paa.eval(jet.phi_atom, jet.phi_face),
            move |jet| paf.eval(jet.phi_atom, jet.phi_face),
            move |jet| pff.eval(jet.phi_atom, jet.phi_face),
        )
    }
}
