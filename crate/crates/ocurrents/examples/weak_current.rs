//! Construct a weak observable current from a locally Hamiltonian rule:
//! its value is path independent, depends on the surface only through the
//! cut class, and the commutator case can be improved to a local current.

use nalgebra::DVector;
use ocurrents::dynamics::Potential;
use ocurrents::lattice::RectLattice;
use ocurrents::solver::SpatialBoundary;
use ocurrents::weakoc::{
    construct_weak, improve_to_local, locally_hamiltonian_check, CauchyChart, VariationRule,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn cubic_gradient(c: [f64; 6]) -> impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static {
    move |z: &DVector<f64>| {
        let mut g = DVector::zeros(z.len());
        for m in 0..z.len() / 2 {
            let s = 1.0 + m as f64 / 10.0;
            let (za, zf) = (z[2 * m], z[2 * m + 1]);
            g[2 * m] =
                s * (3.0 * c[0] * za * za + 2.0 * c[2] * za * zf + c[3] * zf * zf + 2.0 * c[4] * za);
            g[2 * m + 1] =
                s * (3.0 * c[1] * zf * zf + c[2] * za * za + 2.0 * c[3] * za * zf + 2.0 * c[5] * zf);
        }
        g
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(6, 5, 0.45, 0.6)?;
    let potential = Potential::phi4(0.5, 0.05);
    let chart = CauchyChart::new(lattice.clone(), potential, 1, SpatialBoundary::zeros(&lattice))?;
    let mut rng = StdRng::seed_from_u64(21);
    let solve = |rng: &mut StdRng| {
        let z = DVector::from_fn(chart.dim(), |_, _| rng.gen_range(-0.15..0.15));
        chart.solve(&z)
    };
    let phi0 = solve(&mut rng)?;
    let phi = solve(&mut rng)?;
    let mid = solve(&mut rng)?;

    let rule = VariationRule::from_chart_hamiltonian(
        &chart,
        cubic_gradient([0.2, -0.1, 0.3, 0.15, 0.1, -0.05]),
    );
    println!(
        "rule locally Hamiltonian: {}",
        locally_hamiltonian_check(&chart, &rule, &phi0, 1e-8)?
    );
    let weak = construct_weak(&chart, rule, 0.3, phi0.clone())?;
    let sigma = chart.surface();
    let direct = weak.evaluate(&sigma, &phi)?;
    let via = weak.evaluate_via(&sigma, &phi, Some(&mid))?;
    println!("value at the reference solution: {}", weak.evaluate(&sigma, &phi0)?);
    println!("value on another solution: {direct:.12}");
    println!("same value through a waypoint: {via:.12} (gap {:.2e})", (direct - via).abs());
    for row in 2..lattice.n_t() {
        let cut = lattice.horizontal_cut(row)?;
        let moved = weak.evaluate(&cut, &phi)?;
        println!("  cut row {row}: {moved:.12} (gap {:.2e})", (moved - direct).abs());
    }
    let reversed = weak.evaluate(&sigma.reverse(&lattice), &phi)?;
    println!("reversed surface: {reversed:.12}");

    // A commutator of two locally Hamiltonian rules improves to a local
    // current.
    let x_rule =
        VariationRule::from_chart_hamiltonian(&chart, cubic_gradient([0.5, 0.0, 0.2, -0.3, 0.15, 0.0]));
    let y_rule =
        VariationRule::from_chart_hamiltonian(&chart, cubic_gradient([0.0, 0.4, -0.25, 0.2, 0.0, 0.1]));
    let comm = VariationRule::commutator(&chart, &x_rule, &y_rule, 1e-4);
    let weak_comm = construct_weak(&chart, comm, 0.1, phi0.clone())?;
    let improved = improve_to_local(&chart, &x_rule, &y_rule, 0.1, &phi0)?;
    let a = weak_comm.evaluate(&sigma, &phi)?;
    let b = improved.integrate(&sigma, &phi)?;
    println!("commutator weak current {a:.12} vs improved local current {b:.12} (gap {:.2e})", (a - b).abs());
    println!("flux calibration kappa = {:.6}", improved.kappa());
    Ok(())
}
