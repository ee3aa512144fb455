//! Solutions of the discrete field equations and of their linearization.
//!
//! Two independent routes produce solutions: a damped Newton iteration on
//! the stacked residual with Dirichlet data on the boundary faces, and an
//! explicit march from Cauchy data on a horizontal cut (the internal
//! equation is linear in the forward face value, so the march is exact for
//! any polynomial potential). The same stencil linearized extends cut data
//! to first variations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{
    gluing_residual, internal_residual, jet_sample, max_residual, multisymplectic_coefficient,
    History, Potential, VerticalVector,
};
use crate::lattice::{Axis, FaceId, LatticeError, OrientedFace, OrientedSurface, RectLattice};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton did not converge after {iterations} iterations; final residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Jacobian is singular")]
    SingularJacobian,
    #[error("boundary data must assign every boundary face")]
    IncompleteBoundary,
    #[error("surface is not a future-oriented horizontal cut in rows 1..n_t")]
    NotACut,
    #[error("insufficient data to evolve {requested} steps from row {row}")]
    InsufficientData { row: usize, requested: usize },
    #[error("history does not solve the field equations (residual {0:e})")]
    NotASolution(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Dirichlet data: one value per boundary face.
#[derive(Debug, Clone)]
pub struct BoundaryValues {
    values: std::collections::BTreeMap<FaceId, f64>,
}

impl BoundaryValues {
    pub fn from_fn(lattice: &RectLattice, mut f: impl FnMut(FaceId) -> f64) -> Self {
        Self { values: lattice.boundary_faces().map(|face| (face, f(face))).collect() }
    }

    pub fn from_history(lattice: &RectLattice, history: &History) -> Self {
        Self::from_fn(lattice, |face| history.face(face))
    }

    pub fn zeros(lattice: &RectLattice) -> Self {
        Self::from_fn(lattice, |_| 0.0)
    }

    pub fn get(&self, face: FaceId) -> Option<f64> {
        self.values.get(&face).copied()
    }

    fn covers(&self, lattice: &RectLattice) -> bool {
        lattice.boundary_faces().all(|f| self.values.contains_key(&f))
    }

    fn impose(&self, history: &mut History) {
        for (&face, &value) in &self.values {
            history.set_face(face, value);
        }
    }
}

/// First-order data over a horizontal cut: per column, the face value and
/// the value at the side atom (the atom below, for the future-oriented
/// cut). Also used for variations of such data.
#[derive(Debug, Clone)]
pub struct CauchyData {
    row: usize,
    /// `(phi_face, phi_atom)` per column.
    pairs: Vec<(f64, f64)>,
}

impl CauchyData {
    pub fn new(lattice: &RectLattice, row: usize, pairs: Vec<(f64, f64)>) -> Result<Self, SolverError> {
        if row < 1 || row > lattice.n_t() - 1 || pairs.len() != lattice.n_x() {
            return Err(SolverError::NotACut);
        }
        Ok(Self { row, pairs })
    }

    /// Validates that `surface` is a future-oriented horizontal cut and
    /// reads the paired values off `values` (parallel to `surface.faces()`).
    pub fn on_surface(
        lattice: &RectLattice,
        surface: &OrientedSurface,
        values: Vec<(f64, f64)>,
    ) -> Result<Self, SolverError> {
        let row = cut_row(lattice, surface).ok_or(SolverError::NotACut)?;
        if values.len() != surface.len() {
            return Err(SolverError::NotACut);
        }
        let mut pairs = vec![(0.0, 0.0); lattice.n_x()];
        for (of, pair) in surface.faces().iter().zip(values) {
            let (_, x) = lattice.face_coords(of.face);
            pairs[x] = pair;
        }
        Self::new(lattice, row, pairs)
    }

    pub fn from_history(
        lattice: &RectLattice,
        row: usize,
        history: &History,
    ) -> Result<Self, SolverError> {
        if row < 1 || row > lattice.n_t() - 1 {
            return Err(SolverError::NotACut);
        }
        let pairs = (0..lattice.n_x())
            .map(|x| {
                (
                    history.face(lattice.time_face(row, x)),
                    history.atom(lattice.atom(row - 1, x)),
                )
            })
            .collect();
        Ok(Self { row, pairs })
    }

    pub fn from_variation(
        lattice: &RectLattice,
        row: usize,
        v: &VerticalVector,
    ) -> Result<Self, SolverError> {
        if row < 1 || row > lattice.n_t() - 1 {
            return Err(SolverError::NotACut);
        }
        let pairs = (0..lattice.n_x())
            .map(|x| {
                (
                    v.face(lattice.time_face(row, x)),
                    v.atom(lattice.atom(row - 1, x)),
                )
            })
            .collect();
        Ok(Self { row, pairs })
    }

    pub fn zeros(lattice: &RectLattice, row: usize) -> Result<Self, SolverError> {
        Self::new(lattice, row, vec![(0.0, 0.0); lattice.n_x()])
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn surface(&self, lattice: &RectLattice) -> OrientedSurface {
        lattice.horizontal_cut(self.row).expect("validated row")
    }

    /// Flat coordinates in presymplectic layout: `(atom, face)` per column.
    pub fn to_coords(&self) -> DVector<f64> {
        let mut z = DVector::zeros(2 * self.pairs.len());
        for (x, &(phi_face, phi_atom)) in self.pairs.iter().enumerate() {
            z[2 * x] = phi_atom;
            z[2 * x + 1] = phi_face;
        }
        z
    }

    pub fn from_coords(lattice: &RectLattice, row: usize, z: &DVector<f64>) -> Result<Self, SolverError> {
        if z.len() != 2 * lattice.n_x() {
            return Err(SolverError::NotACut);
        }
        let pairs = (0..lattice.n_x()).map(|x| (z[2 * x + 1], z[2 * x])).collect();
        Self::new(lattice, row, pairs)
    }

    pub fn lerp(&self, other: &CauchyData, s: f64) -> CauchyData {
        let pairs = self
            .pairs
            .iter()
            .zip(&other.pairs)
            .map(|(&(f0, a0), &(f1, a1))| (f0 + s * (f1 - f0), a0 + s * (a1 - a0)))
            .collect();
        CauchyData { row: self.row, pairs }
    }
}

/// Returns the row of a future-oriented horizontal cut, if the surface is
/// one (every column present, side below, positive sign).
pub fn cut_row(lattice: &RectLattice, surface: &OrientedSurface) -> Option<usize> {
    if surface.len() != lattice.n_x() {
        return None;
    }
    let mut row = None;
    let mut seen = vec![false; lattice.n_x()];
    for of in surface.faces() {
        if lattice.face_axis(of.face) != Axis::Time || of.sign != 1 {
            return None;
        }
        let (t, x) = lattice.face_coords(of.face);
        if t < 1 || t > lattice.n_t() - 1 || of.side != lattice.atom(t - 1, x) {
            return None;
        }
        match row {
            None => row = Some(t),
            Some(r) if r != t => return None,
            _ => {}
        }
        seen[x] = true;
    }
    seen.iter().all(|&s| s).then_some(row).flatten()
}

/// Values on the space-like faces of the two lattice side columns,
/// `left[t] = X(t, 0)` and `right[t] = X(t, n_x)`.
#[derive(Debug, Clone)]
pub struct SpatialBoundary {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl SpatialBoundary {
    pub fn zeros(lattice: &RectLattice) -> Self {
        Self { left: vec![0.0; lattice.n_t()], right: vec![0.0; lattice.n_t()] }
    }

    pub fn from_history(lattice: &RectLattice, history: &History) -> Self {
        Self {
            left: (0..lattice.n_t()).map(|t| history.face(lattice.space_face(t, 0))).collect(),
            right: (0..lattice.n_t())
                .map(|t| history.face(lattice.space_face(t, lattice.n_x())))
                .collect(),
        }
    }

    pub fn lerp(&self, other: &SpatialBoundary, s: f64) -> SpatialBoundary {
        let mix = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(&x, &y)| x + s * (y - x)).collect::<Vec<_>>()
        };
        SpatialBoundary { left: mix(&self.left, &other.left), right: mix(&self.right, &other.right) }
    }
}

/// The atoms and faces an `evolve` call filled in, together with the
/// history carrying the values (zero outside the covered region).
#[derive(Debug, Clone)]
pub struct Evolution {
    pub history: History,
    pub atoms: crate::lattice::AtomRegion,
    pub faces: Vec<FaceId>,
}

// Core march stencil, shared by the nonlinear evolution and its
// linearization. `source(atom_index, value)` is `2 N'(phi)` for the field
// itself and `2 N''(phi_base) v` for a variation. Fills atom rows
// `row-1 ..= hi-1` (and down to 0 when `down`), faces accordingly.
#[allow(clippy::too_many_arguments)]
fn march_core(
    lattice: &RectLattice,
    row: usize,
    pairs: &[(f64, f64)],
    left: &[f64],
    right: &[f64],
    source: &dyn Fn(usize, usize, f64) -> f64,
    steps_up: usize,
    down: bool,
) -> (Vec<f64>, Vec<f64>) {
    let (n_t, n_x) = (lattice.n_t(), lattice.n_x());
    let (h, k) = (lattice.h(), lattice.k());
    let mut atom = vec![0.0; lattice.atom_count()];
    let mut face = vec![0.0; lattice.face_count()];

    for (x, &(phi_face, phi_atom)) in pairs.iter().enumerate() {
        face[lattice.time_face(row, x).0] = phi_face;
        atom[lattice.atom(row - 1, x).0] = phi_atom;
    }

    let fill_space_row = |face: &mut Vec<f64>, atom: &[f64], t: usize| {
        face[lattice.space_face(t, 0).0] = left[t];
        face[lattice.space_face(t, n_x).0] = right[t];
        for x in 1..n_x {
            let l = atom[lattice.atom(t, x - 1).0];
            let r = atom[lattice.atom(t, x).0];
            face[lattice.space_face(t, x).0] = 0.5 * (l + r);
        }
    };

    // Internal equation at atom (t, x) solved for the time face `target`,
    // the other time face being `known`:
    //   (target - 2 phi + known)/h^2 = (x+ - 2 phi + x-)/k^2 + source
    let solve_internal = |face: &Vec<f64>, atom: &[f64], t: usize, x: usize, known: f64| -> f64 {
        let phi = atom[lattice.atom(t, x).0];
        let xp = face[lattice.space_face(t, x + 1).0];
        let xm = face[lattice.space_face(t, x).0];
        let rhs = (xp - 2.0 * phi + xm) / (k * k) + source(t, x, phi);
        2.0 * phi - known + h * h * rhs
    };

    if down {
        // Downward: atoms of row t and the face above them are known;
        // solve for the face below, then glue to row t-1.
        for t in (0..row).rev() {
            fill_space_row(&mut face, &atom, t);
            for x in 0..n_x {
                let above = face[lattice.time_face(t + 1, x).0];
                face[lattice.time_face(t, x).0] = solve_internal(&face, &atom, t, x, above);
            }
            if t >= 1 {
                for x in 0..n_x {
                    atom[lattice.atom(t - 1, x).0] =
                        2.0 * face[lattice.time_face(t, x).0] - atom[lattice.atom(t, x).0];
                }
            }
        }
    } else {
        // Space faces of the data row are computable from its atoms.
        fill_space_row(&mut face, &atom, row - 1);
    }

    // Upward: glue the cut to get row `row`, then march.
    let hi = row + steps_up;
    if steps_up > 0 {
        for x in 0..n_x {
            atom[lattice.atom(row, x).0] =
                2.0 * face[lattice.time_face(row, x).0] - atom[lattice.atom(row - 1, x).0];
        }
        for t in row..hi {
            fill_space_row(&mut face, &atom, t);
            for x in 0..n_x {
                let below = face[lattice.time_face(t, x).0];
                face[lattice.time_face(t + 1, x).0] = solve_internal(&face, &atom, t, x, below);
            }
            if t + 1 < n_t && t + 1 < hi {
                for x in 0..n_x {
                    atom[lattice.atom(t + 1, x).0] =
                        2.0 * face[lattice.time_face(t + 1, x).0] - atom[lattice.atom(t, x).0];
                }
            }
        }
    }
    (atom, face)
}

/// Explicit forward march: gluing fixes each face as the average of its
/// atoms, and the internal equation (linear in the forward face value)
/// yields the next time row. Fills atom rows `row-1 ..= row+steps-1`.
pub fn evolve(
    lattice: &RectLattice,
    potential: &Potential,
    cauchy: &CauchyData,
    steps: usize,
    spatial: &SpatialBoundary,
) -> Result<Evolution, SolverError> {
    let row = cauchy.row();
    if steps > lattice.n_t() - row {
        return Err(SolverError::InsufficientData { row, requested: steps });
    }
    if spatial.left.len() < row + steps || spatial.right.len() < row + steps {
        return Err(SolverError::InsufficientData { row, requested: steps });
    }
    let source = |_t: usize, _x: usize, phi: f64| 2.0 * potential.d1(phi);
    let (atom, face) =
        march_core(lattice, row, cauchy.pairs(), &spatial.left, &spatial.right, &source, steps, false);
    let mut history = History::zeros(lattice);
    let mut atoms = Vec::new();
    for t in row - 1..row + steps {
        for x in 0..lattice.n_x() {
            let a = lattice.atom(t, x);
            history.set_atom(a, atom[a.0]);
            atoms.push(a);
        }
    }
    let mut faces = Vec::new();
    for t in row..=row + steps {
        for x in 0..lattice.n_x() {
            faces.push(lattice.time_face(t, x));
        }
    }
    for t in row - 1..row + steps {
        for x in 0..=lattice.n_x() {
            faces.push(lattice.space_face(t, x));
        }
    }
    for &f in &faces {
        history.set_face(f, face[f.0]);
    }
    Ok(Evolution {
        history,
        atoms: crate::lattice::AtomRegion::from_atoms(lattice, atoms)?,
        faces,
    })
}

/// Bidirectional march: the unique solution carrying the given cut data
/// and spatial boundary values.
pub fn march_solution(
    lattice: &RectLattice,
    potential: &Potential,
    cauchy: &CauchyData,
    spatial: &SpatialBoundary,
) -> Result<History, SolverError> {
    let row = cauchy.row();
    if spatial.left.len() != lattice.n_t() || spatial.right.len() != lattice.n_t() {
        return Err(SolverError::InsufficientData { row, requested: lattice.n_t() });
    }
    let source = |_t: usize, _x: usize, phi: f64| 2.0 * potential.d1(phi);
    let (atom, face) = march_core(
        lattice,
        row,
        cauchy.pairs(),
        &spatial.left,
        &spatial.right,
        &source,
        lattice.n_t() - row,
        true,
    );
    let mut history = History::zeros(lattice);
    for a in lattice.atoms() {
        history.set_atom(a, atom[a.0]);
    }
    for f in lattice.faces() {
        history.set_face(f, face[f.0]);
    }
    Ok(history)
}

/// Extends cut-data variations to a kernel vector of the linearized field
/// equations at `history`, marching both directions. The variation of the
/// spatial boundary data is `bc` (zero for the classic first variation).
pub fn linearized_march(
    lattice: &RectLattice,
    history: &History,
    potential: &Potential,
    variation: &CauchyData,
    bc: &SpatialBoundary,
) -> Result<VerticalVector, SolverError> {
    let row = variation.row();
    if bc.left.len() != lattice.n_t() || bc.right.len() != lattice.n_t() {
        return Err(SolverError::InsufficientData { row, requested: lattice.n_t() });
    }
    let source = |t: usize, x: usize, v: f64| 2.0 * potential.d2(history.atom(lattice.atom(t, x))) * v;
    let (atom, face) = march_core(
        lattice,
        row,
        variation.pairs(),
        &bc.left,
        &bc.right,
        &source,
        lattice.n_t() - row,
        true,
    );
    let mut v = VerticalVector::zeros(lattice);
    for a in lattice.atoms() {
        v.set_atom(a, atom[a.0]);
    }
    for f in lattice.faces() {
        v.set_face(f, face[f.0]);
    }
    Ok(v)
}

/// A solution of the linearized field equations around `history` matching
/// the given cut data, with zero variation of the spatial boundary.
pub fn first_variation(
    lattice: &RectLattice,
    history: &History,
    potential: &Potential,
    variation: &CauchyData,
) -> Result<VerticalVector, SolverError> {
    let res = max_residual(lattice, history, potential);
    if res > 1e-10 {
        return Err(SolverError::NotASolution(res));
    }
    linearized_march(lattice, history, potential, variation, &SpatialBoundary::zeros(lattice))
}

fn interior_faces(lattice: &RectLattice) -> Vec<FaceId> {
    lattice.interior_faces().collect()
}

/// The Jacobian of the stacked residual (internal per atom, gluing per
/// interior face) with respect to every atom and face value.
pub struct Linearized {
    matrix: DMatrix<f64>,
    n_atoms: usize,
    rows_faces: Vec<FaceId>,
}

impl Linearized {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn residual_rows(&self) -> (usize, &[FaceId]) {
        (self.n_atoms, &self.rows_faces)
    }

    /// First-order change of all residuals along a vertical vector.
    pub fn apply(&self, lattice: &RectLattice, v: &VerticalVector) -> DVector<f64> {
        let mut x = DVector::zeros(self.matrix.ncols());
        for a in lattice.atoms() {
            x[a.0] = v.atom(a);
        }
        for f in lattice.faces() {
            x[self.n_atoms + f.0] = v.face(f);
        }
        &self.matrix * x
    }

    pub fn kernel_residual(&self, lattice: &RectLattice, v: &VerticalVector) -> f64 {
        self.apply(lattice, v).amax()
    }
}

/// Assembles the linearization of the field equations at `history`,
/// including the `2 N''(phi_nu) v_nu` term.
pub fn linearize(lattice: &RectLattice, history: &History, potential: &Potential) -> Linearized {
    let n_atoms = lattice.atom_count();
    let faces = interior_faces(lattice);
    let n_rows = n_atoms + faces.len();
    let n_cols = n_atoms + lattice.face_count();
    let (h, k) = (lattice.h(), lattice.k());
    let mut m = DMatrix::zeros(n_rows, n_cols);
    for a in lattice.atoms() {
        let row = a.0;
        m[(row, a.0)] =
            2.0 * h * k * (2.0 / (h * h) - 2.0 / (k * k) + 2.0 * potential.d2(history.atom(a)));
        for (face, dir) in lattice.faces_of_atom(a) {
            let col = n_atoms + face.0;
            m[(row, col)] += match dir.axis() {
                Axis::Time => -2.0 * k / h,
                Axis::Space => 2.0 * h / k,
            };
        }
    }
    for (i, &face) in faces.iter().enumerate() {
        let row = n_atoms + i;
        let (a, b) = lattice.incident_atoms(face);
        let c = match lattice.face_axis(face) {
            Axis::Time => 2.0 * k / h,
            Axis::Space => -2.0 * h / k,
        };
        m[(row, n_atoms + face.0)] = 2.0 * c;
        m[(row, a.unwrap().0)] = -c;
        m[(row, b.unwrap().0)] = -c;
    }
    Linearized { matrix: m, n_atoms, rows_faces: faces }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

fn residual_vector(
    lattice: &RectLattice,
    history: &History,
    potential: &Potential,
    faces: &[FaceId],
) -> DVector<f64> {
    let n_atoms = lattice.atom_count();
    let mut r = DVector::zeros(n_atoms + faces.len());
    for a in lattice.atoms() {
        r[a.0] = internal_residual(lattice, a, history, potential);
    }
    for (i, &f) in faces.iter().enumerate() {
        r[n_atoms + i] = gluing_residual(lattice, f, history).expect("interior face");
    }
    r
}

/// Newton iteration on the stacked residual with the boundary face values
/// held fixed. Damps the step by half whenever the residual increases.
pub fn solve_dirichlet(
    lattice: &RectLattice,
    potential: &Potential,
    boundary: &BoundaryValues,
    initial_guess: &History,
    opts: NewtonOptions,
) -> Result<History, SolverError> {
    if !boundary.covers(lattice) {
        return Err(SolverError::IncompleteBoundary);
    }
    let faces = interior_faces(lattice);
    let n_atoms = lattice.atom_count();
    let n_unknowns = n_atoms + faces.len();

    let mut history = initial_guess.clone();
    boundary.impose(&mut history);

    let mut residual = residual_vector(lattice, &history, potential, &faces);
    for iteration in 0..opts.max_iter {
        if residual.amax() <= opts.tol {
            return Ok(history);
        }
        let res_norm = residual.norm();
        let lin = linearize(lattice, &history, potential);
        // Restrict columns to the unknowns: atoms, then interior faces.
        let mut jac = DMatrix::zeros(n_unknowns, n_unknowns);
        for r in 0..n_unknowns {
            for (j, col) in (0..n_atoms).enumerate() {
                jac[(r, j)] = lin.matrix()[(r, col)];
            }
            for (j, &f) in faces.iter().enumerate() {
                jac[(r, n_atoms + j)] = lin.matrix()[(r, n_atoms + f.0)];
            }
        }
        let lu = jac.lu();
        let delta = lu.solve(&(-&residual)).ok_or(SolverError::SingularJacobian)?;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..24 {
            let mut trial = history.clone();
            for a in lattice.atoms() {
                trial.set_atom(a, history.atom(a) + alpha * delta[a.0]);
            }
            for (j, &f) in faces.iter().enumerate() {
                trial.set_face(f, history.face(f) + alpha * delta[n_atoms + j]);
            }
            let trial_residual = residual_vector(lattice, &trial, potential, &faces);
            if trial_residual.norm() < res_norm {
                history = trial;
                residual = trial_residual;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(SolverError::NonConvergence { iterations: iteration + 1, residual: res_norm });
        }
    }
    let res_norm = residual.amax();
    if res_norm <= opts.tol {
        Ok(history)
    } else {
        Err(SolverError::NonConvergence { iterations: opts.max_iter, residual: res_norm })
    }
}

/// The presymplectic pairing on the first-order data over a surface, as an
/// antisymmetric matrix on the per-face coordinates `(phi_side, phi_face)`,
/// with its numerical null space.
pub struct PresymplecticMatrix {
    surface: OrientedSurface,
    matrix: DMatrix<f64>,
    null_basis: Vec<DVector<f64>>,
    tol: f64,
}

impl PresymplecticMatrix {
    pub fn surface(&self) -> &OrientedSurface {
        &self.surface
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn null_basis(&self) -> &[DVector<f64>] {
        &self.null_basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Reads the surface coordinates of a vertical vector.
    pub fn restrict(&self, v: &VerticalVector) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.surface.len());
        for (m, of) in self.surface.faces().iter().enumerate() {
            out[2 * m] = v.atom(of.side);
            out[2 * m + 1] = v.face(of.face);
        }
        out
    }

    pub fn pairing(&self, v: &VerticalVector, w: &VerticalVector) -> f64 {
        let xv = self.restrict(v);
        let xw = self.restrict(w);
        (xv.transpose() * &self.matrix * xw)[(0, 0)]
    }
}

/// Assembles `omega_{L,Sigma}` over the surface coordinates. The
/// coefficients of the multisymplectic form are field independent in this
/// model, so the history only fixes the solution the data lives on.
pub fn presymplectic_matrix(
    lattice: &RectLattice,
    surface: &OrientedSurface,
    history: &History,
) -> PresymplecticMatrix {
    debug_assert!(history.matches(lattice));
    let n = 2 * surface.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, of) in surface.faces().iter().enumerate() {
        let c = of.signf() * multisymplectic_coefficient(lattice, of);
        m[(2 * i, 2 * i + 1)] = c;
        m[(2 * i + 1, 2 * i)] = -c;
    }
    let tol_rel = 1e-10;
    let svd = m.clone().svd(false, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = tol_rel * sigma_max;
    let mut null_basis = Vec::new();
    if let Some(v_t) = &svd.v_t {
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s <= tol {
                null_basis.push(v_t.row(i).transpose());
            }
        }
    }
    PresymplecticMatrix { surface: surface.clone(), matrix: m, null_basis, tol }
}

/// Direct per-face summation of `omega_{L,Sigma}(v, w)`.
pub fn omega_surface(
    lattice: &RectLattice,
    surface: &OrientedSurface,
    v: &VerticalVector,
    w: &VerticalVector,
) -> f64 {
    surface
        .faces()
        .iter()
        .map(|of| {
            let c = multisymplectic_coefficient(lattice, of);
            of.signf()
                * c
                * (v.atom(of.side) * w.face(of.face) - v.face(of.face) * w.atom(of.side))
        })
        .sum()
}

/// Sum of the absolute per-face terms of the same pairing, the natural
/// scale for relative comparisons.
pub fn omega_surface_scale(
    lattice: &RectLattice,
    surface: &OrientedSurface,
    v: &VerticalVector,
    w: &VerticalVector,
) -> f64 {
    surface
        .faces()
        .iter()
        .map(|of| {
            let c = multisymplectic_coefficient(lattice, of);
            (c * (v.atom(of.side) * w.face(of.face) - v.face(of.face) * w.atom(of.side))).abs()
        })
        .sum()
}

/// Convenience: a jet sample of `history` over each face of `surface`.
pub fn surface_jets<'a>(
    lattice: &'a RectLattice,
    surface: &'a OrientedSurface,
    history: &'a History,
) -> impl Iterator<Item = (OrientedFace, crate::dynamics::JetSample)> + 'a {
    surface.faces().iter().map(move |&of| (of, jet_sample(lattice, history, of)))
}
