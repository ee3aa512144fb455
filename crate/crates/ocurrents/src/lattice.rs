//! The discrete spacetime: a rectangular cell complex in two dimensions.
//!
//! Atoms are the 2-cells (coordinate rectangles), faces are the 1-cells
//! separating them. Codimension-one surfaces are signed chains of oriented
//! faces; an orientation on an interior face selects the atom on the side
//! opposite the chosen normal, which is the atom used when sampling jet
//! data over that face.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("lattice must have n_t >= 2, n_x >= 2 and positive spacings")]
    BadDimensions,
    #[error("atom id {0:?} is not part of the lattice")]
    UnknownAtom(AtomId),
    #[error("face id {0:?} is not part of the lattice")]
    UnknownFace(FaceId),
    #[error("atom {atom:?} is not incident to face {face:?}")]
    NotIncident { face: FaceId, atom: AtomId },
    #[error("chain has coefficient {coefficient} on face {face:?}; only -1, 0, +1 are supported")]
    UnsupportedChain { face: FaceId, coefficient: i64 },
    #[error("surface repeats geometric face {0:?}")]
    RepeatedFace(FaceId),
}

/// Index of a 2-cell. Packed as `t * n_x + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub usize);

/// Index of a 1-cell. Time-like faces (normal along the time axis) come
/// first, then space-like faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceId(pub usize);

/// Direction of the normal of a geometric face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Face separating two atoms along the time direction.
    Time,
    /// Face separating two atoms along the space direction.
    Space,
}

/// Which face of the side atom an oriented face is, in the atom's frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceDir {
    /// The `0+` face: shared with the neighbor in the positive time direction.
    TimePlus,
    /// The `0-` face.
    TimeMinus,
    /// The `1+` face: shared with the neighbor in the positive space direction.
    SpacePlus,
    /// The `1-` face.
    SpaceMinus,
}

impl FaceDir {
    pub fn axis(self) -> Axis {
        match self {
            FaceDir::TimePlus | FaceDir::TimeMinus => Axis::Time,
            FaceDir::SpacePlus | FaceDir::SpaceMinus => Axis::Space,
        }
    }
}

/// A 2D rectangular complex with `n_t * n_x` atoms and uniform half-spacings
/// `h` (time) and `k` (space). `h` is the distance from an atom center to the
/// center of its `0+`/`0-` faces, `k` the same for `1+`/`1-`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectLattice {
    n_t: usize,
    n_x: usize,
    h: f64,
    k: f64,
}

impl RectLattice {
    pub fn new(n_t: usize, n_x: usize, h: f64, k: f64) -> Result<Self, LatticeError> {
        if n_t < 2 || n_x < 2 || !(h > 0.0) || !(k > 0.0) {
            return Err(LatticeError::BadDimensions);
        }
        Ok(Self { n_t, n_x, h, k })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn atom_count(&self) -> usize {
        self.n_t * self.n_x
    }

    fn time_face_count(&self) -> usize {
        (self.n_t + 1) * self.n_x
    }

    pub fn face_count(&self) -> usize {
        self.time_face_count() + self.n_t * (self.n_x + 1)
    }

    pub fn atom(&self, t: usize, x: usize) -> AtomId {
        debug_assert!(t < self.n_t && x < self.n_x);
        AtomId(t * self.n_x + x)
    }

    pub fn atom_coords(&self, atom: AtomId) -> (usize, usize) {
        (atom.0 / self.n_x, atom.0 % self.n_x)
    }

    pub fn contains_atom(&self, atom: AtomId) -> bool {
        atom.0 < self.atom_count()
    }

    /// The time-like face between atom rows `t-1` and `t`, at column `x`.
    /// `t` ranges over `0..=n_t`.
    pub fn time_face(&self, t: usize, x: usize) -> FaceId {
        debug_assert!(t <= self.n_t && x < self.n_x);
        FaceId(t * self.n_x + x)
    }

    /// The space-like face between atom columns `x-1` and `x`, at row `t`.
    /// `x` ranges over `0..=n_x`.
    pub fn space_face(&self, t: usize, x: usize) -> FaceId {
        debug_assert!(t < self.n_t && x <= self.n_x);
        FaceId(self.time_face_count() + t * (self.n_x + 1) + x)
    }

    pub fn face_axis(&self, face: FaceId) -> Axis {
        if face.0 < self.time_face_count() {
            Axis::Time
        } else {
            Axis::Space
        }
    }

    /// Grid coordinates of a face within its own family (see `time_face`,
    /// `space_face`).
    pub fn face_coords(&self, face: FaceId) -> (usize, usize) {
        match self.face_axis(face) {
            Axis::Time => (face.0 / self.n_x, face.0 % self.n_x),
            Axis::Space => {
                let r = face.0 - self.time_face_count();
                (r / (self.n_x + 1), r % (self.n_x + 1))
            }
        }
    }

    /// Incident atoms in (lesser, greater) order along the face normal:
    /// (below, above) for time-like faces, (left, right) for space-like ones.
    pub fn incident_atoms(&self, face: FaceId) -> (Option<AtomId>, Option<AtomId>) {
        let (t, x) = self.face_coords(face);
        match self.face_axis(face) {
            Axis::Time => {
                let below = (t >= 1).then(|| self.atom(t - 1, x));
                let above = (t < self.n_t).then(|| self.atom(t, x));
                (below, above)
            }
            Axis::Space => {
                let left = (x >= 1).then(|| self.atom(t, x - 1));
                let right = (x < self.n_x).then(|| self.atom(t, x));
                (left, right)
            }
        }
    }

    pub fn is_interior_face(&self, face: FaceId) -> bool {
        let (a, b) = self.incident_atoms(face);
        a.is_some() && b.is_some()
    }

    /// The atom on the other side of an interior face.
    pub fn opposite_atom(&self, face: FaceId, atom: AtomId) -> Option<AtomId> {
        let (a, b) = self.incident_atoms(face);
        if a == Some(atom) {
            b
        } else if b == Some(atom) {
            a
        } else {
            None
        }
    }

    /// Reference side used when storing chain coefficients: the lesser
    /// incident atom for interior faces, the unique incident atom otherwise.
    fn canonical_side(&self, face: FaceId) -> AtomId {
        let (a, b) = self.incident_atoms(face);
        a.or(b).expect("face has at least one incident atom")
    }

    /// The four faces of an atom together with their direction in the
    /// atom's frame.
    pub fn faces_of_atom(&self, atom: AtomId) -> [(FaceId, FaceDir); 4] {
        let (t, x) = self.atom_coords(atom);
        [
            (self.time_face(t + 1, x), FaceDir::TimePlus),
            (self.time_face(t, x), FaceDir::TimeMinus),
            (self.space_face(t, x + 1), FaceDir::SpacePlus),
            (self.space_face(t, x), FaceDir::SpaceMinus),
        ]
    }

    /// How the side atom sees the face: e.g. the face above an atom is that
    /// atom's `0+` face.
    pub fn face_direction(&self, face: FaceId, side: AtomId) -> Result<FaceDir, LatticeError> {
        let (lesser, greater) = self.incident_atoms(face);
        let dir = match self.face_axis(face) {
            Axis::Time if lesser == Some(side) => FaceDir::TimePlus,
            Axis::Time if greater == Some(side) => FaceDir::TimeMinus,
            Axis::Space if lesser == Some(side) => FaceDir::SpacePlus,
            Axis::Space if greater == Some(side) => FaceDir::SpaceMinus,
            _ => return Err(LatticeError::NotIncident { face, atom: side }),
        };
        Ok(dir)
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> {
        (0..self.atom_count()).map(AtomId)
    }

    pub fn faces(&self) -> impl Iterator<Item = FaceId> {
        (0..self.face_count()).map(FaceId)
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.faces().filter(|f| self.is_interior_face(*f))
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.faces().filter(|f| !self.is_interior_face(*f))
    }
}

/// An oriented codimension-one cell: the geometric face, the atom whose jet
/// data is used to evaluate cochains on it, and a bookkeeping sign.
///
/// For interior faces the orientation is carried by the side: the side atom
/// sits opposite the face normal, and reversing the orientation swaps it to
/// the other incident atom. Boundary faces have only one incident atom, so
/// reversal there flips the sign instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientedFace {
    pub face: FaceId,
    pub side: AtomId,
    pub sign: i8,
}

impl OrientedFace {
    pub fn new(lattice: &RectLattice, face: FaceId, side: AtomId) -> Result<Self, LatticeError> {
        lattice.face_direction(face, side)?;
        Ok(Self { face, side, sign: 1 })
    }

    pub fn reverse(&self, lattice: &RectLattice) -> Self {
        match lattice.opposite_atom(self.face, self.side) {
            Some(other) => Self { face: self.face, side: other, sign: self.sign },
            None => Self { face: self.face, side: self.side, sign: -self.sign },
        }
    }

    pub fn signf(&self) -> f64 {
        f64::from(self.sign)
    }

    /// Coefficient of this oriented face in the chain group, relative to the
    /// canonical orientation of its geometric face.
    fn chain_coefficient(&self, lattice: &RectLattice) -> i64 {
        let canonical = lattice.canonical_side(self.face);
        let orient = if self.side == canonical { 1 } else { -1 };
        i64::from(self.sign) * orient
    }

    fn from_chain_coefficient(
        lattice: &RectLattice,
        face: FaceId,
        coefficient: i64,
    ) -> Result<Self, LatticeError> {
        let canonical = lattice.canonical_side(face);
        match coefficient {
            1 => Ok(Self { face, side: canonical, sign: 1 }),
            -1 => match lattice.opposite_atom(face, canonical) {
                Some(other) => Ok(Self { face, side: other, sign: 1 }),
                None => Ok(Self { face, side: canonical, sign: -1 }),
            },
            c => Err(LatticeError::UnsupportedChain { face, coefficient: c }),
        }
    }
}

/// A signed 1-chain with coefficients in {-1, +1} and no repeated
/// geometric face.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedSurface {
    faces: Vec<OrientedFace>,
}

impl OrientedSurface {
    pub fn from_faces(faces: Vec<OrientedFace>) -> Result<Self, LatticeError> {
        let mut seen = BTreeSet::new();
        for of in &faces {
            if !seen.insert(of.face) {
                return Err(LatticeError::RepeatedFace(of.face));
            }
        }
        Ok(Self { faces })
    }

    pub fn faces(&self) -> &[OrientedFace] {
        &self.faces
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn reverse(&self, lattice: &RectLattice) -> Self {
        Self { faces: self.faces.iter().map(|of| of.reverse(lattice)).collect() }
    }

    /// The chain presentation: geometric face -> coefficient.
    pub fn chain(&self, lattice: &RectLattice) -> BTreeMap<FaceId, i64> {
        self.faces
            .iter()
            .map(|of| (of.face, of.chain_coefficient(lattice)))
            .collect()
    }

    fn from_chain(
        lattice: &RectLattice,
        chain: &BTreeMap<FaceId, i64>,
    ) -> Result<Self, LatticeError> {
        let mut faces = Vec::new();
        for (&face, &coefficient) in chain {
            if coefficient == 0 {
                continue;
            }
            faces.push(OrientedFace::from_chain_coefficient(lattice, face, coefficient)?);
        }
        Ok(Self { faces })
    }

    /// True when the two surfaces are the same chain.
    pub fn same_chain(&self, other: &OrientedSurface, lattice: &RectLattice) -> bool {
        self.chain(lattice) == other.chain(lattice)
    }

    /// Net number of future-oriented time crossings: +1 per time-like face
    /// oriented with future-pointing normal, -1 per past-pointing one.
    /// Horizontal cuts score `n_x`, region boundaries score 0, so this
    /// separates the cut class from null-homologous chains (on the finite
    /// rectangle every chain is a boundary relative to the lattice edge).
    pub fn crossing_number(&self, lattice: &RectLattice) -> i64 {
        self.faces
            .iter()
            .filter(|of| lattice.face_axis(of.face) == Axis::Time)
            .map(|of| {
                let (lesser, _) = lattice.incident_atoms(of.face);
                let from_below = lesser == Some(of.side);
                i64::from(of.sign) * if from_below { 1 } else { -1 }
            })
            .sum()
    }
}

/// A subset of the lattice's atoms (the `U'` of subregion arguments).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtomRegion {
    atoms: BTreeSet<AtomId>,
}

impl AtomRegion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(
        lattice: &RectLattice,
        atoms: impl IntoIterator<Item = AtomId>,
    ) -> Result<Self, LatticeError> {
        let mut set = BTreeSet::new();
        for a in atoms {
            if !lattice.contains_atom(a) {
                return Err(LatticeError::UnknownAtom(a));
            }
            set.insert(a);
        }
        Ok(Self { atoms: set })
    }

    /// All atoms with `t0 <= t < t1` and `x0 <= x < x1`.
    pub fn rectangle(
        lattice: &RectLattice,
        t0: usize,
        t1: usize,
        x0: usize,
        x1: usize,
    ) -> Result<Self, LatticeError> {
        if t1 > lattice.n_t() || x1 > lattice.n_x() || t0 >= t1 || x0 >= x1 {
            return Err(LatticeError::BadDimensions);
        }
        let atoms = (t0..t1)
            .flat_map(|t| (x0..x1).map(move |x| lattice.atom(t, x)))
            .collect();
        Ok(Self { atoms })
    }

    pub fn full(lattice: &RectLattice) -> Self {
        Self { atoms: lattice.atoms().collect() }
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        self.atoms.contains(&atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.atoms.iter().copied()
    }

    pub fn symmetric_difference(&self, other: &AtomRegion) -> AtomRegion {
        AtomRegion {
            atoms: self.atoms.symmetric_difference(&other.atoms).copied().collect(),
        }
    }
}

impl RectLattice {
    /// The boundary of an atom region, oriented by the outer-normal
    /// convention: every frontier face appears once with side equal to the
    /// atom interior to the region.
    pub fn boundary(&self, region: &AtomRegion) -> Result<OrientedSurface, LatticeError> {
        for atom in region.iter() {
            if !self.contains_atom(atom) {
                return Err(LatticeError::UnknownAtom(atom));
            }
        }
        let mut faces = Vec::new();
        for atom in region.iter() {
            for (face, _) in self.faces_of_atom(atom) {
                let other_in = self
                    .opposite_atom(face, atom)
                    .map(|o| region.contains(o))
                    .unwrap_or(false);
                if !other_in {
                    faces.push(OrientedFace { face, side: atom, sign: 1 });
                }
            }
        }
        OrientedSurface::from_faces(faces)
    }

    /// The formal chain sum `sigma + boundary(region)`. Faces whose net
    /// coefficient vanishes are removed; a net coefficient outside
    /// {-1, 0, +1} is rejected (multiplicity is not modeled).
    pub fn add_boundary(
        &self,
        sigma: &OrientedSurface,
        region: &AtomRegion,
    ) -> Result<OrientedSurface, LatticeError> {
        let mut chain = sigma.chain(self);
        if !region.is_empty() {
            let boundary = self.boundary(region)?;
            for of in boundary.faces() {
                *chain.entry(of.face).or_insert(0) += of.chain_coefficient(self);
            }
        }
        for (&face, &coefficient) in &chain {
            if coefficient.abs() > 1 {
                return Err(LatticeError::UnsupportedChain { face, coefficient });
            }
        }
        OrientedSurface::from_chain(self, &chain)
    }

    /// Decides whether two surfaces are homologous relative to the lattice
    /// boundary: returns the region `U'` with
    /// `sigma2 = sigma1 + boundary(U')` up to faces lying on the lattice
    /// boundary, when such a region exists.
    ///
    /// The 2-chain equation over the signed incidence is solved by
    /// propagation across shared interior faces; the unknown region has
    /// integer coefficients which must come out in {0, 1}.
    pub fn homologous(
        &self,
        sigma1: &OrientedSurface,
        sigma2: &OrientedSurface,
    ) -> Option<AtomRegion> {
        let c1 = sigma1.chain(self);
        let c2 = sigma2.chain(self);
        let mut target: BTreeMap<FaceId, i64> = BTreeMap::new();
        for (face, coeff) in c2 {
            *target.entry(face).or_insert(0) += coeff;
        }
        for (face, coeff) in c1 {
            *target.entry(face).or_insert(0) -= coeff;
        }
        let diff = |face: FaceId| target.get(&face).copied().unwrap_or(0);

        // or(face, atom): coefficient of face in boundary({atom}).
        let orient = |face: FaceId, atom: AtomId| -> i64 {
            if atom == self.canonical_side(face) {
                1
            } else {
                -1
            }
        };

        // Interior-face equations: or(f,a)*u_a + or(f,a')*u_{a'} = diff(f).
        // Anchor at atom (0,0) with u = 0, propagate over the dual graph,
        // then retry with u = 1 (the relative 2-cycle is the full lattice).
        'anchor: for anchor_value in [0i64, 1] {
            let mut u = vec![None::<i64>; self.atom_count()];
            u[0] = Some(anchor_value);
            let mut stack = vec![AtomId(0)];
            while let Some(atom) = stack.pop() {
                let ua = u[atom.0].expect("visited atoms carry values");
                for (face, _) in self.faces_of_atom(atom) {
                    let Some(other) = self.opposite_atom(face, atom) else {
                        continue;
                    };
                    let wanted = diff(face) - orient(face, atom) * ua;
                    let uo = wanted * orient(face, other);
                    match u[other.0] {
                        Some(existing) if existing != uo => continue 'anchor,
                        Some(_) => {}
                        None => {
                            u[other.0] = Some(uo);
                            stack.push(other);
                        }
                    }
                }
            }
            let mut atoms = BTreeSet::new();
            for (idx, value) in u.iter().enumerate() {
                match value {
                    Some(0) => {}
                    Some(1) => {
                        atoms.insert(AtomId(idx));
                    }
                    _ => continue 'anchor,
                }
            }
            // Verify every interior-face equation (propagation covers the
            // dual spanning tree; the rest must close up).
            for face in self.interior_faces() {
                let (a, b) = self.incident_atoms(face);
                let (a, b) = (a.unwrap(), b.unwrap());
                let lhs = orient(face, a) * u[a.0].unwrap() + orient(face, b) * u[b.0].unwrap();
                if lhs != diff(face) {
                    continue 'anchor;
                }
            }
            return Some(AtomRegion { atoms });
        }
        None
    }

    /// The row of time-like faces at face-row `row` (0..=n_t), oriented with
    /// future-pointing normal: the side is the atom below.
    pub fn horizontal_cut(&self, row: usize) -> Result<OrientedSurface, LatticeError> {
        if row > self.n_t {
            return Err(LatticeError::BadDimensions);
        }
        let faces = (0..self.n_x)
            .map(|x| {
                let face = self.time_face(row, x);
                if row >= 1 {
                    OrientedFace { face, side: self.atom(row - 1, x), sign: 1 }
                } else {
                    OrientedFace { face, side: self.atom(0, x), sign: -1 }
                }
            })
            .collect();
        OrientedSurface::from_faces(faces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(n_t: usize, n_x: usize) -> RectLattice {
        RectLattice::new(n_t, n_x, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(RectLattice::new(1, 4, 1.0, 1.0).is_err());
        assert!(RectLattice::new(4, 4, 0.0, 1.0).is_err());
        assert!(RectLattice::new(4, 4, 1.0, -1.0).is_err());
    }

    #[test]
    fn interior_faces_have_two_atoms_boundary_one() {
        let l = lat(3, 4);
        for face in l.faces() {
            let (a, b) = l.incident_atoms(face);
            let n = a.is_some() as usize + b.is_some() as usize;
            if l.is_interior_face(face) {
                assert_eq!(n, 2);
            } else {
                assert_eq!(n, 1);
            }
        }
    }

    #[test]
    fn face_identification_between_neighbors() {
        // (nu, 0+) and (nu + t_hat, 0-) are the same geometric face.
        let l = lat(3, 4);
        let a = l.atom(1, 2);
        let b = l.atom(2, 2);
        let up_of_a = l.faces_of_atom(a).iter().find(|(_, d)| *d == FaceDir::TimePlus).unwrap().0;
        let down_of_b =
            l.faces_of_atom(b).iter().find(|(_, d)| *d == FaceDir::TimeMinus).unwrap().0;
        assert_eq!(up_of_a, down_of_b);
        let c = l.atom(1, 3);
        let right_of_a =
            l.faces_of_atom(a).iter().find(|(_, d)| *d == FaceDir::SpacePlus).unwrap().0;
        let left_of_c =
            l.faces_of_atom(c).iter().find(|(_, d)| *d == FaceDir::SpaceMinus).unwrap().0;
        assert_eq!(right_of_a, left_of_c);
    }

    #[test]
    fn single_atom_boundary_has_four_faces_with_that_side() {
        let l = lat(3, 4);
        let atom = l.atom(1, 1);
        let region = AtomRegion::from_atoms(&l, [atom]).unwrap();
        let sigma = l.boundary(&region).unwrap();
        assert_eq!(sigma.len(), 4);
        assert!(sigma.faces().iter().all(|of| of.side == atom && of.sign == 1));
    }

    #[test]
    fn two_by_one_block_boundary_has_six_faces() {
        // Shared face cancels: enumerate the frontier by brute force.
        let l = lat(3, 4);
        let a = l.atom(1, 1);
        let b = l.atom(1, 2);
        let region = AtomRegion::from_atoms(&l, [a, b]).unwrap();
        let sigma = l.boundary(&region).unwrap();
        assert_eq!(sigma.len(), 6);

        let mut expected = BTreeSet::new();
        for atom in [a, b] {
            for (face, _) in l.faces_of_atom(atom) {
                let other_in = l
                    .opposite_atom(face, atom)
                    .map(|o| o == a || o == b)
                    .unwrap_or(false);
                if !other_in {
                    expected.insert(face);
                }
            }
        }
        let got: BTreeSet<_> = sigma.faces().iter().map(|of| of.face).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn full_lattice_boundary_count() {
        let l = lat(3, 5);
        let sigma = l.boundary(&AtomRegion::full(&l)).unwrap();
        assert_eq!(sigma.len(), 2 * 3 + 2 * 5);
    }

    #[test]
    fn boundary_of_unknown_atom_is_an_error() {
        let l = lat(2, 2);
        let region = AtomRegion { atoms: [AtomId(99)].into_iter().collect() };
        assert!(matches!(l.boundary(&region), Err(LatticeError::UnknownAtom(_))));
    }

    #[test]
    fn reverse_is_an_involution() {
        let l = lat(3, 4);
        let region = AtomRegion::rectangle(&l, 0, 2, 1, 3).unwrap();
        let sigma = l.boundary(&region).unwrap();
        assert_eq!(sigma.reverse(&l).reverse(&l), sigma);
        let cut = l.horizontal_cut(0).unwrap();
        assert_eq!(cut.reverse(&l).reverse(&l), cut);
    }

    #[test]
    fn add_empty_region_is_identity() {
        let l = lat(3, 4);
        let sigma = l.horizontal_cut(1).unwrap();
        let out = l.add_boundary(&sigma, &AtomRegion::new()).unwrap();
        assert!(out.same_chain(&sigma, &l));
    }

    #[test]
    fn adding_reversed_own_boundary_cancels() {
        let l = lat(3, 4);
        let region = AtomRegion::from_atoms(&l, [l.atom(1, 1)]).unwrap();
        let sigma = l.boundary(&region).unwrap().reverse(&l);
        let out = l.add_boundary(&sigma, &region).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn adding_own_boundary_twice_is_unsupported() {
        let l = lat(3, 4);
        let region = AtomRegion::from_atoms(&l, [l.atom(1, 1)]).unwrap();
        let sigma = l.boundary(&region).unwrap();
        assert!(matches!(
            l.add_boundary(&sigma, &region),
            Err(LatticeError::UnsupportedChain { .. })
        ));
    }

    #[test]
    fn cut_deforms_upward_across_a_band() {
        // Adding the boundary of the row-1 band to the row-1 cut gives the
        // row-2 cut plus the band's side faces on the lattice boundary.
        let l = lat(4, 3);
        let cut1 = l.horizontal_cut(1).unwrap();
        let band = AtomRegion::rectangle(&l, 1, 2, 0, 3).unwrap();
        let out = l.add_boundary(&cut1, &band).unwrap();
        let cut2 = l.horizontal_cut(2).unwrap();
        let out_chain = out.chain(&l);
        let cut2_chain = cut2.chain(&l);
        for (face, coeff) in &cut2_chain {
            assert_eq!(out_chain.get(face), Some(coeff));
        }
        // The extra faces are exactly the band's two boundary side faces.
        let extra: Vec<_> =
            out_chain.keys().filter(|f| !cut2_chain.contains_key(f)).copied().collect();
        assert_eq!(extra, vec![l.space_face(1, 0), l.space_face(1, 3)]);
    }

    #[test]
    fn homologous_same_surface_gives_empty_region() {
        let l = lat(3, 4);
        let sigma = l.horizontal_cut(2).unwrap();
        let region = l.homologous(&sigma, &sigma).unwrap();
        assert!(region.is_empty());
    }

    #[test]
    fn homologous_adjacent_cuts_gives_the_band() {
        let l = lat(4, 3);
        let cut1 = l.horizontal_cut(1).unwrap();
        let cut2 = l.horizontal_cut(2).unwrap();
        let region = l.homologous(&cut1, &cut2).unwrap();
        let band = AtomRegion::rectangle(&l, 1, 2, 0, 3).unwrap();
        assert_eq!(region, band);
    }

    #[test]
    fn homologous_solves_the_chain_equation() {
        // Chain-arithmetic oracle: sigma1 + boundary(region) must reproduce
        // sigma2 away from the lattice boundary.
        let l = lat(4, 4);
        let cut1 = l.horizontal_cut(1).unwrap();
        let cut3 = l.horizontal_cut(3).unwrap();
        let region = l.homologous(&cut1, &cut3).unwrap();
        let sum = l.add_boundary(&cut1, &region).unwrap();
        let sum_chain = sum.chain(&l);
        let expected = cut3.chain(&l);
        for face in l.interior_faces() {
            assert_eq!(
                sum_chain.get(&face).copied().unwrap_or(0),
                expected.get(&face).copied().unwrap_or(0),
                "face {face:?}"
            );
        }
    }

    #[test]
    fn reversed_cut_is_not_homologous() {
        let l = lat(3, 4);
        let cut = l.horizontal_cut(1).unwrap();
        assert!(l.homologous(&cut, &cut.reverse(&l)).is_none());
    }

    #[test]
    fn boundary_plus_interior_covers_incident_faces() {
        let l = lat(4, 4);
        let region = AtomRegion::rectangle(&l, 1, 3, 1, 3).unwrap();
        let sigma = l.boundary(&region).unwrap();
        let frontier: BTreeSet<_> = sigma.faces().iter().map(|of| of.face).collect();
        let mut interior = BTreeSet::new();
        let mut incident = BTreeSet::new();
        for atom in region.iter() {
            for (face, _) in l.faces_of_atom(atom) {
                incident.insert(face);
                let other_in =
                    l.opposite_atom(face, atom).map(|o| region.contains(o)).unwrap_or(false);
                if other_in {
                    interior.insert(face);
                }
            }
        }
        let union: BTreeSet<_> = frontier.union(&interior).copied().collect();
        assert_eq!(union, incident);
        assert!(frontier.is_disjoint(&interior));
    }

    proptest! {
        #[test]
        fn boundary_symmetric_difference_identity(
            ta in 0usize..3, wa in 1usize..3, xa in 0usize..3, ya in 1usize..3,
            tb in 0usize..3, wb in 1usize..3, xb in 0usize..3, yb in 1usize..3,
        ) {
            // add_boundary(boundary(A), B) = boundary(A xor B) for disjoint
            // or nested rectangles on a 4x4 lattice.
            let l = lat(4, 4);
            let a = AtomRegion::rectangle(&l, ta, (ta + wa).min(4), xa, (xa + ya).min(4)).unwrap();
            let b = AtomRegion::rectangle(&l, tb, (tb + wb).min(4), xb, (xb + yb).min(4)).unwrap();
            let disjoint = a.iter().all(|atom| !b.contains(atom));
            let nested = a.iter().all(|atom| b.contains(atom))
                || b.iter().all(|atom| a.contains(atom));
            prop_assume!(disjoint || nested);
            let lhs = l.add_boundary(&l.boundary(&a).unwrap(), &b);
            prop_assume!(lhs.is_ok());
            let rhs = l.boundary(&a.symmetric_difference(&b)).unwrap();
            prop_assert!(lhs.unwrap().same_chain(&rhs, &l));
        }

        #[test]
        fn chain_roundtrip(row in 0usize..5) {
            let l = lat(4, 4);
            let cut = l.horizontal_cut(row).unwrap();
            let rebuilt = OrientedSurface::from_chain(&l, &cut.chain(&l)).unwrap();
            prop_assert!(rebuilt.same_chain(&cut, &l));
            let rev = cut.reverse(&l);
            let chain = cut.chain(&l);
            let rev_chain = rev.chain(&l);
            for (face, coeff) in chain {
                prop_assert_eq!(rev_chain[&face], -coeff);
            }
        }
    }
}
