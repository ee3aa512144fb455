//! Verify the multisymplectic conservation law: the presymplectic pairing
//! of two first variations vanishes over every rectangular subregion
//! boundary, and evaluating a surface from its two sides gives opposite
//! values.

use ocurrents::dynamics::{History, Potential};
use ocurrents::lattice::{AtomRegion, RectLattice};
use ocurrents::solver::{
    first_variation, omega_surface, omega_surface_scale, solve_dirichlet, BoundaryValues,
    CauchyData, NewtonOptions,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(8, 8, 0.1, 1.2)?;
    let potential = Potential::phi4(0.5, 0.1);
    let mut rng = StdRng::seed_from_u64(7);
    let boundary = BoundaryValues::from_fn(&lattice, |_| rng.gen_range(-0.2..0.2));
    let solution = solve_dirichlet(
        &lattice,
        &potential,
        &boundary,
        &History::zeros(&lattice),
        NewtonOptions::default(),
    )?;

    let cut_data = |rng: &mut StdRng| {
        CauchyData::new(
            &lattice,
            2,
            (0..lattice.n_x()).map(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect(),
        )
        .unwrap()
    };
    let v = first_variation(&lattice, &solution, &potential, &cut_data(&mut rng))?;
    let w = first_variation(&lattice, &solution, &potential, &cut_data(&mut rng))?;

    let mut worst = 0.0f64;
    let mut regions = 0usize;
    for t0 in 0..lattice.n_t() {
        for t1 in t0 + 1..=lattice.n_t() {
            for x0 in 0..lattice.n_x() {
                for x1 in x0 + 1..=lattice.n_x() {
                    let region = AtomRegion::rectangle(&lattice, t0, t1, x0, x1)?;
                    let sigma = lattice.boundary(&region)?;
                    let value = omega_surface(&lattice, &sigma, &v, &w).abs();
                    let scale = omega_surface_scale(&lattice, &sigma, &v, &w).max(1e-300);
                    worst = worst.max(value / scale);
                    regions += 1;
                }
            }
        }
    }
    println!("checked {regions} rectangular subregions");
    println!("max |omega(dU')| / sum|terms| = {worst:.3e}");

    let cut = lattice.horizontal_cut(3)?;
    let a = omega_surface(&lattice, &cut, &v, &w);
    let b = omega_surface(&lattice, &cut.reverse(&lattice), &v, &w);
    println!("thin formula on a cut: {a:.6e} + {b:.6e} = {:.3e}", a + b);
    Ok(())
}
