//! Solve the discrete field equations of the quartic scalar field with
//! Dirichlet data on the boundary faces and inspect the residuals.

use ocurrents::dynamics::{action, j_residuals, max_residual, History, Potential};
use ocurrents::lattice::{AtomRegion, RectLattice};
use ocurrents::solver::{solve_dirichlet, BoundaryValues, NewtonOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(8, 8, 0.45, 0.6)?;
    let potential = Potential::phi4(0.5, 0.05);
    let mut rng = StdRng::seed_from_u64(1);
    let boundary = BoundaryValues::from_fn(&lattice, |_| rng.gen_range(-0.2..0.2));

    let solution = solve_dirichlet(
        &lattice,
        &potential,
        &boundary,
        &History::zeros(&lattice),
        NewtonOptions::default(),
    )?;

    let (internal, gluing) = j_residuals(&lattice, &solution, &potential);
    let worst_internal = internal.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max);
    let worst_gluing = gluing.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max);
    println!("lattice: {}x{} atoms, {} faces", lattice.n_t(), lattice.n_x(), lattice.face_count());
    println!("max |internal residual| = {worst_internal:.3e}");
    println!("max |gluing residual|   = {worst_gluing:.3e}");
    println!("max residual            = {:.3e}", max_residual(&lattice, &solution, &potential));
    println!(
        "action on the full region = {:.6}",
        action(&lattice, &AtomRegion::full(&lattice), &solution, &potential)
    );

    // Gluing means every interior face value is the average of its atoms.
    let face = lattice.space_face(3, 4);
    let (a, b) = lattice.incident_atoms(face);
    println!(
        "sample interior face {:.6} vs atom average {:.6}",
        solution.face(face),
        0.5 * (solution.atom(a.unwrap()) + solution.atom(b.unwrap()))
    );
    Ok(())
}
