//! Noether current of the shift symmetry: conserved boundary sums on free
//! solutions, the charge balance between cuts with the side flux, and the
//! breakdown once a mass term enters.

use ocurrents::currents::{integrate, noether};
use ocurrents::dynamics::{jet_sample, History, Potential};
use ocurrents::lattice::{AtomRegion, OrientedFace, RectLattice};
use ocurrents::solver::{solve_dirichlet, BoundaryValues, NewtonOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(8, 8, 0.45, 0.6)?;
    let free = Potential::free();
    let mut rng = StdRng::seed_from_u64(3);
    let boundary = BoundaryValues::from_fn(&lattice, |_| rng.gen_range(-0.4..0.4));
    let solution = solve_dirichlet(
        &lattice,
        &free,
        &boundary,
        &History::zeros(&lattice),
        NewtonOptions::default(),
    )?;
    let current = noether(&lattice, &free, 1.0)?;

    let mut worst = 0.0f64;
    for t0 in 0..lattice.n_t() {
        for t1 in t0 + 1..=lattice.n_t() {
            for x0 in 0..lattice.n_x() {
                for x1 in x0 + 1..=lattice.n_x() {
                    let region = AtomRegion::rectangle(&lattice, t0, t1, x0, x1)?;
                    let sigma = lattice.boundary(&region)?;
                    worst = worst.max(integrate(&lattice, current.current(), &sigma, &solution)?.abs());
                }
            }
        }
    }
    println!("free field: max |sum of N over region boundaries| = {worst:.3e}");

    for row in [2usize, 4, 6] {
        let q = integrate(&lattice, current.current(), &lattice.horizontal_cut(row)?, &solution)?;
        println!("charge on cut row {row}: {q:+.6}");
    }
    // The charge difference between adjacent cuts is the side flux.
    let q2 = integrate(&lattice, current.current(), &lattice.horizontal_cut(2)?, &solution)?;
    let q3 = integrate(&lattice, current.current(), &lattice.horizontal_cut(3)?, &solution)?;
    let mut side = 0.0;
    for face in [lattice.space_face(2, 0), lattice.space_face(2, lattice.n_x())] {
        let atom = lattice.incident_atoms(face).0.or(lattice.incident_atoms(face).1).unwrap();
        let of = OrientedFace::new(&lattice, face, atom)?;
        side += current.eval(&jet_sample(&lattice, &solution, of));
    }
    println!("balance: (Q3 - Q2) + side flux = {:.3e}", (q3 - q2) + side);

    // Negative control: a mass term breaks the shift symmetry.
    let massive = Potential::phi4(0.5, 0.0);
    let control = solve_dirichlet(
        &lattice,
        &massive,
        &boundary,
        &History::zeros(&lattice),
        NewtonOptions::default(),
    )?;
    let band = AtomRegion::rectangle(&lattice, 2, 5, 0, lattice.n_x())?;
    let broken = integrate(&lattice, current.current(), &lattice.boundary(&band)?, &control)?;
    println!("massive field, same boundary: band sum = {broken:.3e} (conservation broken)");
    Ok(())
}
