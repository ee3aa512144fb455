//! Discrete dynamics of the 2D nonlinear scalar field: corner Lagrangians,
//! the action, both families of field-equation residuals, and the Cartan
//! and multisymplectic coefficients attached to oriented faces.
//!
//! All local forms live on the two coordinates of a jet sample,
//! `(phi_atom, phi_face)`, so no general exterior-algebra machinery is
//! needed; every coefficient below is closed-form.

use thiserror::Error;

use crate::lattice::{AtomId, AtomRegion, FaceDir, FaceId, LatticeError, OrientedFace, RectLattice};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("gluing residual is defined on interior faces only, got {0:?}")]
    BoundaryFace(FaceId),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Polynomial nonlinearity `N(phi) = sum_m coeffs[m] * phi^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    coeffs: Vec<f64>,
}

impl Potential {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// The free massless field, `N = 0`.
    pub fn free() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `N(phi) = (mass_sq/2) phi^2 + lambda phi^4`.
    pub fn phi4(mass_sq: f64, lambda: f64) -> Self {
        Self { coeffs: vec![0.0, 0.0, mass_sq / 2.0, 0.0, lambda] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * phi + c)
    }

    pub fn d1(&self, phi: f64) -> f64 {
        let mut acc = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * phi + c * m as f64;
        }
        acc
    }

    pub fn d2(&self, phi: f64) -> f64 {
        let mut acc = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * phi + c * (m * (m - 1)) as f64;
        }
        acc
    }

    /// True when the potential is invariant under constant shifts of the
    /// field, i.e. `N' = 0`.
    pub fn is_shift_symmetric(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&c| c == 0.0)
    }
}

/// Field values on every atom and every face of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    atom: Vec<f64>,
    face: Vec<f64>,
}

impl History {
    pub fn zeros(lattice: &RectLattice) -> Self {
        Self { atom: vec![0.0; lattice.atom_count()], face: vec![0.0; lattice.face_count()] }
    }

    pub fn constant(lattice: &RectLattice, value: f64) -> Self {
        Self {
            atom: vec![value; lattice.atom_count()],
            face: vec![value; lattice.face_count()],
        }
    }

    pub fn from_fn(
        lattice: &RectLattice,
        mut atom: impl FnMut(AtomId) -> f64,
        mut face: impl FnMut(FaceId) -> f64,
    ) -> Self {
        Self {
            atom: lattice.atoms().map(&mut atom).collect(),
            face: lattice.faces().map(&mut face).collect(),
        }
    }

    pub fn atom(&self, atom: AtomId) -> f64 {
        self.atom[atom.0]
    }

    pub fn face(&self, face: FaceId) -> f64 {
        self.face[face.0]
    }

    pub fn set_atom(&mut self, atom: AtomId, value: f64) {
        self.atom[atom.0] = value;
    }

    pub fn set_face(&mut self, face: FaceId, value: f64) {
        self.face[face.0] = value;
    }

    pub fn matches(&self, lattice: &RectLattice) -> bool {
        self.atom.len() == lattice.atom_count() && self.face.len() == lattice.face_count()
    }
}

/// A vertical variation: one tangent value per atom and per face.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalVector {
    atom: Vec<f64>,
    face: Vec<f64>,
}

impl VerticalVector {
    pub fn zeros(lattice: &RectLattice) -> Self {
        Self { atom: vec![0.0; lattice.atom_count()], face: vec![0.0; lattice.face_count()] }
    }

    pub fn constant(lattice: &RectLattice, value: f64) -> Self {
        Self {
            atom: vec![value; lattice.atom_count()],
            face: vec![value; lattice.face_count()],
        }
    }

    pub fn atom(&self, atom: AtomId) -> f64 {
        self.atom[atom.0]
    }

    pub fn face(&self, face: FaceId) -> f64 {
        self.face[face.0]
    }

    pub fn set_atom(&mut self, atom: AtomId, value: f64) {
        self.atom[atom.0] = value;
    }

    pub fn set_face(&mut self, face: FaceId, value: f64) {
        self.face[face.0] = value;
    }

    pub fn matches(&self, lattice: &RectLattice) -> bool {
        self.atom.len() == lattice.atom_count() && self.face.len() == lattice.face_count()
    }

    pub fn norm(&self) -> f64 {
        self.atom
            .iter()
            .chain(self.face.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &VerticalVector) {
        for (a, b) in self.atom.iter_mut().zip(&other.atom) {
            *a += alpha * b;
        }
        for (a, b) in self.face.iter_mut().zip(&other.face) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.atom.iter_mut().for_each(|v| *v *= alpha);
        self.face.iter_mut().for_each(|v| *v *= alpha);
    }
}

/// First-order data over an oriented face: the face value and the value at
/// the side atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetSample {
    pub oriented_face: OrientedFace,
    pub phi_face: f64,
    pub phi_atom: f64,
}

/// Builds the jet sample of a history over an oriented face.
pub fn jet_sample(lattice: &RectLattice, history: &History, of: OrientedFace) -> JetSample {
    debug_assert!(history.matches(lattice));
    JetSample {
        oriented_face: of,
        phi_face: history.face(of.face),
        phi_atom: history.atom(of.side),
    }
}

/// One of the four corners of an atom, named by the signs of the time and
/// space directions it opens towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl Corner {
    pub const ALL: [Corner; 4] = [
        Corner::PlusPlus,
        Corner::PlusMinus,
        Corner::MinusPlus,
        Corner::MinusMinus,
    ];

    fn directions(self) -> (FaceDir, FaceDir) {
        match self {
            Corner::PlusPlus => (FaceDir::TimePlus, FaceDir::SpacePlus),
            Corner::PlusMinus => (FaceDir::TimePlus, FaceDir::SpaceMinus),
            Corner::MinusPlus => (FaceDir::TimeMinus, FaceDir::SpacePlus),
            Corner::MinusMinus => (FaceDir::TimeMinus, FaceDir::SpaceMinus),
        }
    }
}

fn face_in_direction(lattice: &RectLattice, atom: AtomId, dir: FaceDir) -> FaceId {
    lattice
        .faces_of_atom(atom)
        .into_iter()
        .find(|(_, d)| *d == dir)
        .map(|(f, _)| f)
        .expect("every atom has all four face directions")
}

/// The corner Lagrangian
/// `L^c = { 1/2 [((phi_t - phi_nu)/h)^2 - ((phi_s - phi_nu)/k)^2] + N(phi_nu) } h k`,
/// where `phi_t`, `phi_s` are the field values on the corner's time-like
/// and space-like faces.
pub fn corner_lagrangian(
    lattice: &RectLattice,
    atom: AtomId,
    corner: Corner,
    history: &History,
    potential: &Potential,
) -> f64 {
    let (tdir, sdir) = corner.directions();
    let phi_nu = history.atom(atom);
    let phi_t = history.face(face_in_direction(lattice, atom, tdir));
    let phi_s = history.face(face_in_direction(lattice, atom, sdir));
    let (h, k) = (lattice.h(), lattice.k());
    let dt = (phi_t - phi_nu) / h;
    let dx = (phi_s - phi_nu) / k;
    (0.5 * (dt * dt - dx * dx) + potential.eval(phi_nu)) * h * k
}

/// `S_U = sum over atoms of the four corner Lagrangians`.
pub fn action(
    lattice: &RectLattice,
    region: &AtomRegion,
    history: &History,
    potential: &Potential,
) -> f64 {
    region
        .iter()
        .map(|atom| {
            Corner::ALL
                .iter()
                .map(|&c| corner_lagrangian(lattice, atom, c, history, potential))
                .sum::<f64>()
        })
        .sum()
}

/// Coefficient of `d phi_nu` in the internal field equation:
/// `2hk ( -(phi_{0+} - 2 phi_nu + phi_{0-})/h^2
///        + (phi_{1+} - 2 phi_nu + phi_{1-})/k^2 + 2 N'(phi_nu) )`.
pub fn internal_residual(
    lattice: &RectLattice,
    atom: AtomId,
    history: &History,
    potential: &Potential,
) -> f64 {
    let (h, k) = (lattice.h(), lattice.k());
    let phi = history.atom(atom);
    let f = |dir| history.face(face_in_direction(lattice, atom, dir));
    let tt = (f(FaceDir::TimePlus) - 2.0 * phi + f(FaceDir::TimeMinus)) / (h * h);
    let xx = (f(FaceDir::SpacePlus) - 2.0 * phi + f(FaceDir::SpaceMinus)) / (k * k);
    2.0 * h * k * (-tt + xx + 2.0 * potential.d1(phi))
}

/// Coefficient of `d phi_tau` in the Cartan form seen from the side atom.
/// Independent of the potential.
pub fn cartan_coefficient(lattice: &RectLattice, jet: &JetSample) -> f64 {
    let (h, k) = (lattice.h(), lattice.k());
    let dir = lattice
        .face_direction(jet.oriented_face.face, jet.oriented_face.side)
        .expect("oriented face is incident to its side");
    let (phi_tau, phi_nu) = (jet.phi_face, jet.phi_atom);
    match dir {
        FaceDir::TimePlus => 2.0 * k * (phi_tau - phi_nu) / h,
        FaceDir::TimeMinus => -2.0 * k * (phi_nu - phi_tau) / h,
        FaceDir::SpacePlus => -2.0 * h * (phi_tau - phi_nu) / k,
        FaceDir::SpaceMinus => 2.0 * h * (phi_nu - phi_tau) / k,
    }
}

/// The momentum-matching residual on an interior face: the sum of the
/// Cartan coefficients seen from the two sides. Vanishes exactly when the
/// face value is the average of its two atom values.
pub fn gluing_residual(
    lattice: &RectLattice,
    face: FaceId,
    history: &History,
) -> Result<f64, DynamicsError> {
    let (a, b) = lattice.incident_atoms(face);
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(DynamicsError::BoundaryFace(face)),
    };
    let side_a = OrientedFace::new(lattice, face, a)?;
    let side_b = OrientedFace::new(lattice, face, b)?;
    Ok(cartan_coefficient(lattice, &jet_sample(lattice, history, side_a))
        + cartan_coefficient(lattice, &jet_sample(lattice, history, side_b)))
}

/// The constant `c` in `Omega_L = c d phi_nu ^ d phi_tau` on an oriented
/// face: `+2k/h` on time-like faces, `-2h/k` on space-like faces,
/// independent of the side and of the potential.
pub fn multisymplectic_coefficient(lattice: &RectLattice, of: &OrientedFace) -> f64 {
    match lattice.face_axis(of.face) {
        crate::lattice::Axis::Time => 2.0 * lattice.k() / lattice.h(),
        crate::lattice::Axis::Space => -2.0 * lattice.h() / lattice.k(),
    }
}

/// Residuals of both field-equation families over the whole lattice:
/// internal per atom, gluing per interior face. A history is a solution
/// exactly when both vanish.
pub fn j_residuals(
    lattice: &RectLattice,
    history: &History,
    potential: &Potential,
) -> (Vec<(AtomId, f64)>, Vec<(FaceId, f64)>) {
    let j0 = lattice
        .atoms()
        .map(|a| (a, internal_residual(lattice, a, history, potential)))
        .collect();
    let j1 = lattice
        .interior_faces()
        .map(|f| {
            let r = gluing_residual(lattice, f, history).expect("interior face");
            (f, r)
        })
        .collect();
    (j0, j1)
}

pub fn max_residual(lattice: &RectLattice, history: &History, potential: &Potential) -> f64 {
    let (j0, j1) = j_residuals(lattice, history, potential);
    j0.iter()
        .map(|(_, r)| r.abs())
        .chain(j1.iter().map(|(_, r)| r.abs()))
        .fold(0.0, f64::max)
}

/// The full gradient of the action over a region: internal residual at each
/// atom, gluing residual at each interior face of the region, and the
/// single-sided Cartan coefficient at each frontier face.
///
/// Pairing this gradient with a vertical vector reproduces the directional
/// derivative of the action.
pub fn action_gradient(
    lattice: &RectLattice,
    region: &AtomRegion,
    history: &History,
    potential: &Potential,
) -> (Vec<(AtomId, f64)>, Vec<(FaceId, f64)>) {
    let atoms: Vec<_> = region
        .iter()
        .map(|a| (a, internal_residual(lattice, a, history, potential)))
        .collect();
    let mut faces: Vec<(FaceId, f64)> = Vec::new();
    let mut seen = std::collections::BTreeMap::new();
    for atom in region.iter() {
        for (face, _) in lattice.faces_of_atom(atom) {
            let of = OrientedFace::new(lattice, face, atom).expect("incident");
            let theta = cartan_coefficient(lattice, &jet_sample(lattice, history, of));
            *seen.entry(face).or_insert(0.0) += theta;
        }
    }
    for (face, theta) in seen {
        faces.push((face, theta));
    }
    (atoms, faces)
}
