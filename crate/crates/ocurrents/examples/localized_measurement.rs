//! Model a spacetime-localized measurement: a seed cochain supported on
//! part of a cut becomes a weak observable current whose value can be read
//! off any later homologous cut, and whose bracket with a spacelike
//! separated measurement vanishes.

use nalgebra::DVector;
use ocurrents::currents::{integrate, symplectic_product, Poly2};
use ocurrents::dynamics::Potential;
use ocurrents::lattice::RectLattice;
use ocurrents::solver::SpatialBoundary;
use ocurrents::weakoc::{localized_measurement, CauchyChart, SeedCochain};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(7, 7, 0.45, 0.6)?;
    let potential = Potential::free();
    let chart =
        CauchyChart::new(lattice.clone(), potential.clone(), 1, SpatialBoundary::zeros(&lattice))?;
    let mut rng = StdRng::seed_from_u64(17);
    let solve = |rng: &mut StdRng| {
        let z = DVector::from_fn(chart.dim(), |_, _| rng.gen_range(-0.2..0.2));
        chart.solve(&z)
    };
    let phi0 = solve(&mut rng)?;

    // Two measurements with disjoint domains of sensitivity on the cut.
    let seed_left =
        SeedCochain::new([lattice.time_face(1, 1)], Poly2::new(vec![vec![0.0, 1.0]]).to_current());
    let seed_right = SeedCochain::new(
        [lattice.time_face(1, 5)],
        Poly2::new(vec![vec![0.0, 0.5, 0.3]]).to_current(),
    );
    let left = localized_measurement(&chart, &seed_left, &phi0)?;
    let right = localized_measurement(&chart, &seed_right, &phi0)?;
    println!("integration constants: left k = {:.6}, right k = {:.6}", left.k(), right.k());

    let phi = solve(&mut rng)?;
    let sigma = chart.surface();
    let measured = left.evaluate(&sigma, &phi)?;
    println!("left measurement on its own cut: {measured:.9}");
    for row in 2..lattice.n_t() {
        let later = lattice.horizontal_cut(row)?;
        let recovered = left.evaluate(&later, &phi)?;
        println!("  recovered from cut row {row}: {recovered:.9} (gap {:.2e})", (recovered - measured).abs());
    }

    // Spacelike commutativity: the bracket of the two measurements is the
    // symplectic product of their propagated impacts, which vanishes on
    // the shared cut for disjoint supports.
    let va = left.vf_rule().apply(&phi)?;
    let vb = right.vf_rule().apply(&phi)?;
    let bracket = symplectic_product(&lattice, &potential, &vb, &va, &phi)?;
    let value = integrate(&lattice, &bracket, &sigma, &phi)?;
    println!("spacelike bracket on the cut: {value:.3e}");

    // The direct impact of the left measurement stays inside its causal
    // cone.
    let v = left.vf_rule().apply(&phi0)?;
    println!("support of the propagated impact (atoms with |v| > 1e-12):");
    for t in 0..lattice.n_t() {
        let row: String = (0..lattice.n_x())
            .map(|x| if v.atom(lattice.atom(t, x)).abs() > 1e-12 { '#' } else { '.' })
            .collect();
        println!("  t={t}: {row}");
    }
    Ok(())
}
