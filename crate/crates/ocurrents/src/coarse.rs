//! Factor-3 refinement between lattices, the corrected coarse action
//! obtained by extremizing the fine action over the fiber of the
//! decimation map, and the transfer of coarse observable currents to the
//! fine scale through the localized-measurement machinery.
//!
//! The refinement factor is 3 so that coarse cell centers and face
//! midpoints land on fine cell centers and face midpoints; a factor of 2
//! would put coarse centers on fine corners, where no degree of freedom
//! lives.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::currents::{check_oc_conditions, integrate, Current, CurrentsError, OcReport};
use crate::dynamics::{
    action, cartan_coefficient, gluing_residual, internal_residual, jet_sample,
    multisymplectic_coefficient, History, Potential,
};
use crate::lattice::{AtomId, AtomRegion, Axis, FaceId, LatticeError, OrientedFace, RectLattice};
use crate::solver::{presymplectic_matrix, SolverError};
use crate::weakoc::{construct_weak, CauchyChart, VariationRule, WeakCurrent, WeakOcError};

#[derive(Debug, Error)]
pub enum CoarseError {
    #[error("inner extremization did not converge (gradient {0:e})")]
    InnerSolve(f64),
    #[error("inner Hessian is singular")]
    SingularHessian,
    #[error("coarse current rejected: not an observable current under the corrected dynamics ({0:?})")]
    TransferRejected(OcReport),
    #[error("no corrected-dynamics sample solutions available for this potential")]
    NoSamples,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Currents(#[from] CurrentsError),
    #[error(transparent)]
    WeakOc(#[from] WeakOcError),
}

/// The factor-3 refinement: each coarse atom center is the central fine
/// atom of its 3x3 block, each coarse face midpoint the central fine face
/// of its triple.
#[derive(Debug, Clone)]
pub struct RefinementMap {
    coarse: RectLattice,
    fine: RectLattice,
}

impl RefinementMap {
    pub fn new(coarse: RectLattice) -> Result<Self, LatticeError> {
        let fine = RectLattice::new(
            3 * coarse.n_t(),
            3 * coarse.n_x(),
            coarse.h() / 3.0,
            coarse.k() / 3.0,
        )?;
        Ok(Self { coarse, fine })
    }

    pub fn coarse(&self) -> &RectLattice {
        &self.coarse
    }

    pub fn fine(&self) -> &RectLattice {
        &self.fine
    }

    pub fn anchor_atom(&self, atom: AtomId) -> AtomId {
        let (t, x) = self.coarse.atom_coords(atom);
        self.fine.atom(3 * t + 1, 3 * x + 1)
    }

    pub fn anchor_face(&self, face: FaceId) -> FaceId {
        let (t, x) = self.coarse.face_coords(face);
        match self.coarse.face_axis(face) {
            Axis::Time => self.fine.time_face(3 * t, 3 * x + 1),
            Axis::Space => self.fine.space_face(3 * t + 1, 3 * x),
        }
    }

    /// Pull-back along the refinement: reads fine values at the anchors.
    pub fn decimate(&self, fine_history: &History) -> History {
        History::from_fn(
            &self.coarse,
            |a| fine_history.atom(self.anchor_atom(a)),
            |f| fine_history.face(self.anchor_face(f)),
        )
    }

    /// A fine history consistent with the coarse one at the anchors,
    /// filled by nearest-cell values elsewhere. Used as the inner solve's
    /// initial guess.
    pub fn prolong(&self, coarse_history: &History) -> History {
        let nearest_atom = |ft: usize, fx: usize| {
            self.coarse.atom((ft / 3).min(self.coarse.n_t() - 1), (fx / 3).min(self.coarse.n_x() - 1))
        };
        let mut fine = History::from_fn(
            &self.fine,
            |a| {
                let (t, x) = self.fine.atom_coords(a);
                coarse_history.atom(nearest_atom(t, x))
            },
            |f| {
                let (t, x) = self.fine.face_coords(f);
                match self.fine.face_axis(f) {
                    Axis::Time => coarse_history.atom(nearest_atom(t.min(self.fine.n_t() - 1), x)),
                    Axis::Space => coarse_history.atom(nearest_atom(t, x.min(self.fine.n_x() - 1))),
                }
            },
        );
        for a in self.coarse.atoms() {
            fine.set_atom(self.anchor_atom(a), coarse_history.atom(a));
        }
        for f in self.coarse.faces() {
            fine.set_face(self.anchor_face(f), coarse_history.face(f));
        }
        fine
    }

    fn anchor_variables(&self) -> BTreeSet<usize> {
        let n_atoms = self.fine.atom_count();
        let mut anchors = BTreeSet::new();
        for a in self.coarse.atoms() {
            anchors.insert(self.anchor_atom(a).0);
        }
        for f in self.coarse.faces() {
            anchors.insert(n_atoms + self.anchor_face(f).0);
        }
        anchors
    }
}

/// Full gradient of the action on a lattice as one vector over all
/// variables (atoms then faces): internal residual per atom, gluing
/// residual per interior face, one-sided Cartan coefficient per boundary
/// face.
pub fn natural_gradient(lattice: &RectLattice, history: &History, potential: &Potential) -> DVector<f64> {
    let n_atoms = lattice.atom_count();
    let mut g = DVector::zeros(n_atoms + lattice.face_count());
    for a in lattice.atoms() {
        g[a.0] = internal_residual(lattice, a, history, potential);
    }
    for f in lattice.faces() {
        let idx = n_atoms + f.0;
        if lattice.is_interior_face(f) {
            g[idx] = gluing_residual(lattice, f, history).expect("interior face");
        } else {
            let atom = match lattice.incident_atoms(f) {
                (Some(a), _) | (_, Some(a)) => a,
                _ => unreachable!("face has an incident atom"),
            };
            let of = OrientedFace::new(lattice, f, atom).expect("incident");
            g[idx] = cartan_coefficient(lattice, &jet_sample(lattice, history, of));
        }
    }
    g
}

/// Hessian of the action over all variables, rows aligned with
/// `natural_gradient`.
pub fn action_hessian(lattice: &RectLattice, history: &History, potential: &Potential) -> DMatrix<f64> {
    let n_atoms = lattice.atom_count();
    let n = n_atoms + lattice.face_count();
    let (h, k) = (lattice.h(), lattice.k());
    let mut m = DMatrix::zeros(n, n);
    for a in lattice.atoms() {
        m[(a.0, a.0)] =
            2.0 * h * k * (2.0 / (h * h) - 2.0 / (k * k) + 2.0 * potential.d2(history.atom(a)));
        for (face, dir) in lattice.faces_of_atom(a) {
            let col = n_atoms + face.0;
            m[(a.0, col)] += match dir.axis() {
                Axis::Time => -2.0 * k / h,
                Axis::Space => 2.0 * h / k,
            };
        }
    }
    for f in lattice.faces() {
        let row = n_atoms + f.0;
        let of = OrientedFace {
            face: f,
            side: match lattice.incident_atoms(f) {
                (Some(a), _) | (_, Some(a)) => a,
                _ => unreachable!(),
            },
            sign: 1,
        };
        let c = multisymplectic_coefficient(lattice, &of);
        match lattice.incident_atoms(f) {
            (Some(a), Some(b)) => {
                // gluing residual c (2 phi_f - phi_a - phi_b)
                m[(row, row)] = 2.0 * c;
                m[(row, a.0)] = -c;
                m[(row, b.0)] = -c;
            }
            (Some(a), None) | (None, Some(a)) => {
                // one-sided theta = c (phi_f - phi_a)
                m[(row, row)] = c;
                m[(row, a.0)] = -c;
            }
            (None, None) => unreachable!(),
        }
    }
    m
}

/// The corrected coarse action: the extremal value of the fine action over
/// all fine variables with the anchors constrained to the coarse history.
#[derive(Debug, Clone)]
pub struct CorrectedAction {
    pub value: f64,
    /// The extremizing fine history (anchors fixed to the coarse values).
    pub extremizer: History,
}

/// Newton on the stationarity system of the free fine variables. The
/// extremum is saddle-type for this hyperbolic action, so the plain
/// stationarity solve is used rather than a minimization.
pub fn corrected_action(
    map: &RefinementMap,
    coarse_history: &History,
    potential: &Potential,
) -> Result<CorrectedAction, CoarseError> {
    let fine = map.fine();
    let anchors = map.anchor_variables();
    let free: Vec<usize> =
        (0..fine.atom_count() + fine.face_count()).filter(|i| !anchors.contains(i)).collect();
    let n_atoms = fine.atom_count();

    let mut x = map.prolong(coarse_history);
    let tol = 1e-11;
    let mut converged = false;
    let mut last_gap = f64::INFINITY;
    for _ in 0..60 {
        let g_full = natural_gradient(fine, &x, potential);
        let g: DVector<f64> = DVector::from_iterator(free.len(), free.iter().map(|&i| g_full[i]));
        last_gap = g.amax();
        if last_gap <= tol {
            converged = true;
            break;
        }
        let h_full = action_hessian(fine, &x, potential);
        let mut h = DMatrix::zeros(free.len(), free.len());
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                h[(r, c)] = h_full[(i, j)];
            }
        }
        let delta = h.lu().solve(&(-&g)).ok_or(CoarseError::SingularHessian)?;
        let mut alpha = 1.0;
        let g_norm = g.norm();
        let mut stepped = false;
        for _ in 0..24 {
            let mut trial = x.clone();
            for (r, &i) in free.iter().enumerate() {
                let v = alpha * delta[r];
                if i < n_atoms {
                    trial.set_atom(AtomId(i), x.atom(AtomId(i)) + v);
                } else {
                    let f = FaceId(i - n_atoms);
                    trial.set_face(f, x.face(f) + v);
                }
            }
            let g_trial = natural_gradient(fine, &trial, potential);
            let g_trial_free: DVector<f64> =
                DVector::from_iterator(free.len(), free.iter().map(|&i| g_trial[i]));
            if g_trial_free.norm() < g_norm {
                x = trial;
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        if !stepped {
            return Err(CoarseError::InnerSolve(last_gap));
        }
    }
    if !converged {
        return Err(CoarseError::InnerSolve(last_gap));
    }
    let value = action(fine, &AtomRegion::full(fine), &x, potential);
    Ok(CorrectedAction { value, extremizer: x })
}

/// Gradient of the corrected action with respect to the coarse variables:
/// by stationarity of the inner extremum this is the fine gradient read at
/// the anchor variables of the extremizer.
pub fn corrected_action_gradient(
    map: &RefinementMap,
    coarse_history: &History,
    potential: &Potential,
) -> Result<DVector<f64>, CoarseError> {
    let corrected = corrected_action(map, coarse_history, potential)?;
    let g_fine = natural_gradient(map.fine(), &corrected.extremizer, potential);
    let n_fine_atoms = map.fine().atom_count();
    let coarse = map.coarse();
    let mut g = DVector::zeros(coarse.atom_count() + coarse.face_count());
    for a in coarse.atoms() {
        g[a.0] = g_fine[map.anchor_atom(a).0];
    }
    for f in coarse.faces() {
        g[coarse.atom_count() + f.0] = g_fine[n_fine_atoms + map.anchor_face(f).0];
    }
    Ok(g)
}

/// Constant histories that solve the corrected dynamics exactly (constants
/// are natural stationary points of the fine action whenever `N'` vanishes
/// at the value, and they decimate to themselves).
fn corrected_solution_samples(lattice: &RectLattice, potential: &Potential) -> Vec<History> {
    let mut samples = Vec::new();
    if potential.is_shift_symmetric() {
        for value in [0.0, 0.25, -0.3] {
            samples.push(History::constant(lattice, value));
        }
    } else if potential.d1(0.0) == 0.0 {
        samples.push(History::constant(lattice, 0.0));
    }
    samples
}

/// Takes a coarse observable current to the fine scale:
/// pulls the coarse surface observable back through decimation to a
/// function of fine cut data, converts its gradient into a Hamiltonian
/// vector field with the fine presymplectic matrix, and hands the
/// extension and integration constant to the weak-current construction.
pub fn transfer_coarse_oc(
    map: &RefinementMap,
    potential: &Potential,
    coarse_current: &Current,
    coarse_cut_row: usize,
    phi0_fine: &History,
) -> Result<WeakCurrent, CoarseError> {
    let coarse = map.coarse();
    let fine = map.fine();

    // Gate: the coarse current must be an observable current for the
    // corrected dynamics, checked on exactly representable samples.
    let samples = corrected_solution_samples(coarse, potential);
    if samples.is_empty() {
        return Err(CoarseError::NoSamples);
    }
    let report = check_oc_conditions(coarse, coarse_current, &samples, 1e-8);
    if !report.pass() {
        return Err(CoarseError::TransferRejected(report));
    }

    let sigma_coarse = coarse.horizontal_cut(coarse_cut_row)?;
    let fine_row = 3 * coarse_cut_row;
    let chart = CauchyChart::new(
        fine.clone(),
        potential.clone(),
        fine_row,
        crate::solver::SpatialBoundary::from_history(fine, phi0_fine),
    )?;

    // Step 1: pull the coarse observable back to a function of fine cut
    // data.
    let pulled = {
        let (map, chart, coarse_current, sigma_coarse) =
            (map.clone(), chart.clone(), coarse_current.clone(), sigma_coarse.clone());
        move |z: &DVector<f64>| -> Result<f64, CoarseError> {
            let fine_solution = chart.solve(z)?;
            let coarse_history = map.decimate(&fine_solution);
            Ok(integrate(map.coarse(), &coarse_current, &sigma_coarse, &coarse_history)?)
        }
    };

    // Step 2: Hamiltonian vector field of the pulled-back function on the
    // fine cut data, via the fine presymplectic matrix.
    let z0 = chart.coords(phi0_fine);
    let k = pulled(&z0)?;
    let eps = 1e-5;
    let mut grad = DVector::zeros(chart.dim());
    for i in 0..chart.dim() {
        let mut zp = z0.clone();
        zp[i] += eps;
        let mut zm = z0.clone();
        zm[i] -= eps;
        grad[i] = (pulled(&zp)? - pulled(&zm)?) / (2.0 * eps);
    }
    let omega = presymplectic_matrix(fine, &chart.surface(), phi0_fine);
    let data = omega
        .matrix()
        .clone()
        .lu()
        .solve(&grad)
        .ok_or(CoarseError::SingularHessian)?;

    // Steps 3 and 4: extend by the linearized equations and package with
    // the integration constant.
    let rule = VariationRule::from_cut_data(&chart, data);
    Ok(construct_weak(&chart, rule, k, phi0_fine.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::{noether, Poly2};
    use crate::solver::{march_solution, CauchyData, SpatialBoundary};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn map_3x3() -> RefinementMap {
        RefinementMap::new(RectLattice::new(3, 3, 1.35, 1.8).unwrap()).unwrap()
    }

    #[test]
    fn refinement_geometry() {
        let map = map_3x3();
        assert_eq!(map.fine().n_t(), 9);
        assert_eq!(map.fine().n_x(), 9);
        assert!((map.fine().h() - 0.45).abs() < 1e-15);
        assert!((map.fine().k() - 0.6).abs() < 1e-15);
        assert_eq!(map.anchor_atom(map.coarse().atom(0, 0)), map.fine().atom(1, 1));
        assert_eq!(
            map.anchor_face(map.coarse().time_face(1, 2)),
            map.fine().time_face(3, 7)
        );
        assert_eq!(
            map.anchor_face(map.coarse().space_face(2, 0)),
            map.fine().space_face(7, 0)
        );
    }

    #[test]
    fn decimate_constant_and_linear_fields() {
        let map = map_3x3();
        let constant = History::constant(map.fine(), 0.7);
        let coarse = map.decimate(&constant);
        for a in map.coarse().atoms() {
            assert_eq!(coarse.atom(a), 0.7);
        }
        // Linear in space: the coarse field has the same anchor values.
        let fine = map.fine().clone();
        let linear = History::from_fn(
            &fine,
            |a| fine.atom_coords(a).1 as f64 * 0.1,
            |f| fine.face_coords(f).1 as f64 * 0.1,
        );
        let coarse = map.decimate(&linear);
        for a in map.coarse().atoms() {
            let (_, x) = map.coarse().atom_coords(a);
            assert!((coarse.atom(a) - (3 * x + 1) as f64 * 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn decimate_inverts_prolong() {
        let map = map_3x3();
        let mut rng = StdRng::seed_from_u64(1);
        let atom_vals: Vec<f64> =
            (0..map.coarse().atom_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let face_vals: Vec<f64> =
            (0..map.coarse().face_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coarse = History::from_fn(map.coarse(), |a| atom_vals[a.0], |f| face_vals[f.0]);
        let fine = map.prolong(&coarse);
        assert_eq!(map.decimate(&fine), coarse);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let l = RectLattice::new(3, 3, 0.45, 0.6).unwrap();
        let pot = Potential::phi4(0.4, 0.1);
        let mut rng = StdRng::seed_from_u64(2);
        let atom_vals: Vec<f64> = (0..l.atom_count()).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let face_vals: Vec<f64> = (0..l.face_count()).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let h = History::from_fn(&l, |a| atom_vals[a.0], |f| face_vals[f.0]);
        let hess = action_hessian(&l, &h, &pot);
        let eps = 1e-6;
        let n_atoms = l.atom_count();
        let n = n_atoms + l.face_count();
        for j in 0..n {
            let mut plus = h.clone();
            let mut minus = h.clone();
            if j < n_atoms {
                plus.set_atom(AtomId(j), h.atom(AtomId(j)) + eps);
                minus.set_atom(AtomId(j), h.atom(AtomId(j)) - eps);
            } else {
                let f = FaceId(j - n_atoms);
                plus.set_face(f, h.face(f) + eps);
                minus.set_face(f, h.face(f) - eps);
            }
            let gp = natural_gradient(&l, &plus, &pot);
            let gm = natural_gradient(&l, &minus, &pot);
            for i in 0..n {
                let fd = (gp[i] - gm[i]) / (2.0 * eps);
                assert!(
                    (fd - hess[(i, j)]).abs() <= 1e-5 * (1.0 + hess[(i, j)].abs()),
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn zero_coarse_history_has_zero_corrected_action() {
        let map = map_3x3();
        let pot = Potential::phi4(0.0, 0.3); // N'(0) = 0
        let corrected = corrected_action(&map, &History::zeros(map.coarse()), &pot).unwrap();
        assert!(corrected.value.abs() < 1e-12);
        for a in map.fine().atoms() {
            assert!(corrected.extremizer.atom(a).abs() < 1e-9);
        }
    }

    #[test]
    fn free_corrected_action_matches_schur_complement() {
        let map = map_3x3();
        let pot = Potential::free();
        let fine = map.fine();
        let n = fine.atom_count() + fine.face_count();
        let hess = action_hessian(fine, &History::zeros(fine), &pot);
        let anchors: Vec<usize> = map.anchor_variables().into_iter().collect();
        let free: Vec<usize> = (0..n).filter(|i| !map.anchor_variables().contains(i)).collect();
        let a_aa = DMatrix::from_fn(anchors.len(), anchors.len(), |r, c| {
            hess[(anchors[r], anchors[c])]
        });
        let a_af = DMatrix::from_fn(anchors.len(), free.len(), |r, c| hess[(anchors[r], free[c])]);
        let a_fa = DMatrix::from_fn(free.len(), anchors.len(), |r, c| hess[(free[r], anchors[c])]);
        let a_ff = DMatrix::from_fn(free.len(), free.len(), |r, c| hess[(free[r], free[c])]);
        let schur = &a_aa - &a_af * a_ff.lu().solve(&a_fa).unwrap();

        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..3 {
            let atom_vals: Vec<f64> =
                (0..map.coarse().atom_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let face_vals: Vec<f64> =
                (0..map.coarse().face_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let coarse = History::from_fn(map.coarse(), |a| atom_vals[a.0], |f| face_vals[f.0]);
            let corrected = corrected_action(&map, &coarse, &pot).unwrap();
            // Coarse values in anchor-variable order.
            let n_fine_atoms = fine.atom_count();
            let xa = DVector::from_iterator(
                anchors.len(),
                anchors.iter().map(|&i| {
                    if i < n_fine_atoms {
                        corrected.extremizer.atom(AtomId(i))
                    } else {
                        corrected.extremizer.face(FaceId(i - n_fine_atoms))
                    }
                }),
            );
            let quad = 0.5 * (xa.transpose() * &schur * &xa)[(0, 0)];
            assert!(
                (corrected.value - quad).abs() <= 1e-10 * (1.0 + quad.abs()),
                "{} vs {quad}",
                corrected.value
            );
        }
    }

    #[test]
    fn decimated_natural_solutions_are_corrected_critical_points() {
        // Natural stationary fine histories (kernel of the free Hessian)
        // decimate to critical points of the corrected action.
        let map = map_3x3();
        let pot = Potential::free();
        let fine = map.fine();
        let hess = action_hessian(fine, &History::zeros(fine), &pot);
        let svd = hess.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let v_t = svd.v_t.as_ref().unwrap();
        let mut checked = 0;
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s <= 1e-10 * smax {
                let dir = v_t.row(i).transpose();
                let n_atoms = fine.atom_count();
                let natural = History::from_fn(
                    fine,
                    |a| 0.4 * dir[a.0],
                    |f| 0.4 * dir[n_atoms + f.0],
                );
                assert!(natural_gradient(fine, &natural, &pot).amax() < 1e-10);
                let coarse = map.decimate(&natural);
                let g = corrected_action_gradient(&map, &coarse, &pot).unwrap();
                assert!(g.amax() <= 1e-8, "gradient {:e}", g.amax());
                // Extremality: the corrected value reproduces the fine
                // action of the natural solution.
                let corrected = corrected_action(&map, &coarse, &pot).unwrap();
                let direct = action(fine, &AtomRegion::full(fine), &natural, &pot);
                assert!((corrected.value - direct).abs() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked >= 1, "free Hessian must have a kernel (constants)");
    }

    #[test]
    fn constant_natural_solution_nonlinear_consistency() {
        // N = -0.09 phi + 0.15 phi^2 has N'(0.3) = 0: the constant 0.3 is a
        // natural solution with non-zero action, and its decimation is a
        // corrected critical point with matching value.
        let map = map_3x3();
        let pot = Potential::new(vec![0.0, -0.09, 0.15]);
        let fine = map.fine();
        let natural = History::constant(fine, 0.3);
        assert!(natural_gradient(fine, &natural, &pot).amax() < 1e-14);
        let coarse = map.decimate(&natural);
        let corrected = corrected_action(&map, &coarse, &pot).unwrap();
        let direct = action(fine, &AtomRegion::full(fine), &natural, &pot);
        assert!(direct.abs() > 1e-3);
        assert!((corrected.value - direct).abs() < 1e-10 * direct.abs());
        let g = corrected_action_gradient(&map, &coarse, &pot).unwrap();
        assert!(g.amax() <= 1e-8);
    }

    #[test]
    fn transferred_noether_charge_matches_fine_evaluation() {
        let map = map_3x3();
        let pot = Potential::free();
        let fine = map.fine();
        let mut rng = StdRng::seed_from_u64(5);
        let phi0 = march_solution(
            fine,
            &pot,
            &CauchyData::new(
                fine,
                3,
                (0..fine.n_x()).map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect(),
            )
            .unwrap(),
            &SpatialBoundary::zeros(fine),
        )
        .unwrap();
        let xi = 1.0;
        let coarse_noether = noether(map.coarse(), &pot, xi).unwrap();
        let w = transfer_coarse_oc(&map, &pot, coarse_noether.current(), 1, &phi0).unwrap();

        let sigma_coarse = map.coarse().horizontal_cut(1).unwrap();
        for _ in 0..3 {
            let phi = march_solution(
                fine,
                &pot,
                &CauchyData::new(
                    fine,
                    3,
                    (0..fine.n_x())
                        .map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)))
                        .collect(),
                )
                .unwrap(),
                &SpatialBoundary::zeros(fine),
            )
            .unwrap();
            let transferred = w.evaluate(&fine.horizontal_cut(3).unwrap(), &phi).unwrap();
            let direct = integrate(
                map.coarse(),
                coarse_noether.current(),
                &sigma_coarse,
                &map.decimate(&phi),
            )
            .unwrap();
            assert!((transferred - direct).abs() <= 1e-6, "{transferred} vs {direct}");
        }
    }

    #[test]
    fn transferred_current_is_homology_invariant() {
        let map = map_3x3();
        let pot = Potential::free();
        let fine = map.fine();
        let mut rng = StdRng::seed_from_u64(6);
        let phi0 = march_solution(
            fine,
            &pot,
            &CauchyData::new(
                fine,
                3,
                (0..fine.n_x()).map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect(),
            )
            .unwrap(),
            &SpatialBoundary::zeros(fine),
        )
        .unwrap();
        let coarse_noether = noether(map.coarse(), &pot, 0.7).unwrap();
        let w = transfer_coarse_oc(&map, &pot, coarse_noether.current(), 1, &phi0).unwrap();
        let phi = march_solution(
            fine,
            &pot,
            &CauchyData::new(
                fine,
                3,
                (0..fine.n_x()).map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect(),
            )
            .unwrap(),
            &SpatialBoundary::zeros(fine),
        )
        .unwrap();
        let base = w.evaluate(&fine.horizontal_cut(3).unwrap(), &phi).unwrap();
        for row in 4..=6 {
            let other = w.evaluate(&fine.horizontal_cut(row).unwrap(), &phi).unwrap();
            assert!((other - base).abs() <= 1e-7, "row {row}: {other} vs {base}");
        }
    }

    #[test]
    fn zero_coarse_current_transfers_to_zero() {
        let map = map_3x3();
        let pot = Potential::free();
        let fine = map.fine();
        let phi0 = History::zeros(fine);
        let w = transfer_coarse_oc(&map, &pot, &Current::zero(), 1, &phi0).unwrap();
        assert_eq!(w.k(), 0.0);
        let mut rng = StdRng::seed_from_u64(7);
        let phi = march_solution(
            fine,
            &pot,
            &CauchyData::new(
                fine,
                3,
                (0..fine.n_x()).map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect(),
            )
            .unwrap(),
            &SpatialBoundary::zeros(fine),
        )
        .unwrap();
        assert!(w.evaluate(&fine.horizontal_cut(3).unwrap(), &phi).unwrap().abs() < 1e-10);
    }

    #[test]
    fn non_oc_coarse_current_is_rejected() {
        let map = map_3x3();
        let pot = Potential::free();
        let phi0 = History::zeros(map.fine());
        // phi_face^2 violates orientation antisymmetry on constants.
        let bad = Poly2::new(vec![vec![0.0, 0.0, 1.0]]).to_current();
        assert!(matches!(
            transfer_coarse_oc(&map, &pot, &bad, 1, &phi0),
            Err(CoarseError::TransferRejected(_))
        ));
    }
}
