//! Check the observable-current conditions (orientation antisymmetry,
//! closedness over subregion boundaries, null-direction independence) for
//! several candidate currents.

use ocurrents::currents::{check_oc_conditions, flux_cochain, noether, symplectic_product, Poly2};
use ocurrents::dynamics::{History, Potential};
use ocurrents::lattice::RectLattice;
use ocurrents::solver::{first_variation, march_solution, CauchyData, SpatialBoundary};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(6, 5, 0.45, 0.6)?;
    let potential = Potential::free();
    let mut rng = StdRng::seed_from_u64(5);
    let spatial = SpatialBoundary::zeros(&lattice);
    let cut = |rng: &mut StdRng, row: usize| {
        CauchyData::new(
            &lattice,
            row,
            (0..lattice.n_x()).map(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect(),
        )
        .unwrap()
    };
    let solutions: Vec<History> = (0..5)
        .map(|_| march_solution(&lattice, &potential, &cut(&mut rng, 2), &spatial).unwrap())
        .collect();

    let tol = 1e-8;
    let describe = |name: &str, report: &ocurrents::currents::OcReport| {
        println!(
            "{name:>20}: antisymmetry {} ({:.2e}), closedness {} ({:.2e}), null dirs {} (dim {})",
            report.antisymmetry,
            report.max_antisymmetry_violation,
            report.closedness,
            report.max_closedness_violation,
            report.null_directions,
            report.null_space_dimension,
        );
    };

    let n = noether(&lattice, &potential, 1.0)?;
    describe("noether", &check_oc_conditions(&lattice, n.current(), &solutions, tol));

    let sol = &solutions[0];
    let v = first_variation(&lattice, sol, &potential, &cut(&mut rng, 3))?;
    let w = first_variation(&lattice, sol, &potential, &cut(&mut rng, 3))?;
    let sp = symplectic_product(&lattice, &potential, &v, &w, sol)?;
    describe(
        "symplectic product",
        &check_oc_conditions(&lattice, &sp, std::slice::from_ref(sol), tol),
    );

    describe("flux cochain", &check_oc_conditions(&lattice, &flux_cochain(&lattice, 1.0), &solutions, tol));

    // A generic cochain is not closed.
    let generic = Poly2::new(vec![vec![0.0, 0.0, 1.0]]).to_current();
    describe("phi_face^2", &check_oc_conditions(&lattice, &generic, &solutions, tol));
    Ok(())
}
