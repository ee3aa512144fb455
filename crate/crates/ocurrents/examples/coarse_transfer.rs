//! Coarse graining: the corrected coarse action from inner extremization,
//! its agreement with the Schur-complement form for the free field, and
//! the transfer of a coarse Noether current to the fine lattice.

use ocurrents::coarse::{
    corrected_action, corrected_action_gradient, natural_gradient, transfer_coarse_oc,
    RefinementMap,
};
use ocurrents::currents::{integrate, noether};
use ocurrents::dynamics::{History, Potential};
use ocurrents::lattice::RectLattice;
use ocurrents::solver::{march_solution, CauchyData, SpatialBoundary};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let coarse = RectLattice::new(3, 3, 1.35, 1.8)?;
    let map = RefinementMap::new(coarse)?;
    let potential = Potential::free();
    let fine = map.fine().clone();
    println!(
        "coarse {}x{} (h={}, k={}) -> fine {}x{} (h={}, k={})",
        map.coarse().n_t(),
        map.coarse().n_x(),
        map.coarse().h(),
        map.coarse().k(),
        fine.n_t(),
        fine.n_x(),
        fine.h(),
        fine.k()
    );

    // Corrected action of a random coarse history.
    let mut rng = StdRng::seed_from_u64(31);
    let atom_vals: Vec<f64> =
        (0..map.coarse().atom_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let face_vals: Vec<f64> =
        (0..map.coarse().face_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let coarse_history = History::from_fn(map.coarse(), |a| atom_vals[a.0], |f| face_vals[f.0]);
    let corrected = corrected_action(&map, &coarse_history, &potential)?;
    println!("corrected action of a random coarse history: {:.9}", corrected.value);
    let inner_residual = natural_gradient(&fine, &corrected.extremizer, &potential)
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            // residuals at non-anchor variables only
            let n_atoms = fine.atom_count();
            let anchor_atoms: Vec<usize> =
                map.coarse().atoms().map(|a| map.anchor_atom(a).0).collect();
            let anchor_faces: Vec<usize> =
                map.coarse().faces().map(|f| n_atoms + map.anchor_face(f).0).collect();
            !anchor_atoms.contains(i) && !anchor_faces.contains(i)
        })
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    println!("inner stationarity residual: {inner_residual:.3e}");

    // A natural constant solution decimates to a corrected critical point.
    let natural = History::constant(&fine, 0.2);
    let g = corrected_action_gradient(&map, &map.decimate(&natural), &potential)?;
    println!("corrected gradient at a decimated natural solution: {:.3e}", g.amax());

    // Transfer the coarse Noether current to the fine scale.
    let fine_solution = |rng: &mut StdRng| {
        let pairs =
            (0..fine.n_x()).map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect();
        march_solution(
            &fine,
            &potential,
            &CauchyData::new(&fine, 3, pairs).unwrap(),
            &SpatialBoundary::zeros(&fine),
        )
    };
    let phi0 = fine_solution(&mut rng)?;
    let coarse_current = noether(map.coarse(), &potential, 1.0)?;
    let transferred = transfer_coarse_oc(&map, &potential, coarse_current.current(), 1, &phi0)?;
    for _ in 0..3 {
        let phi = fine_solution(&mut rng)?;
        let fine_value = transferred.evaluate(&fine.horizontal_cut(3)?, &phi)?;
        let coarse_value = integrate(
            map.coarse(),
            coarse_current.current(),
            &map.coarse().horizontal_cut(1)?,
            &map.decimate(&phi),
        )?;
        println!(
            "transferred charge {fine_value:+.9} vs coarse evaluation {coarse_value:+.9} (gap {:.2e})",
            (fine_value - coarse_value).abs()
        );
    }
    Ok(())
}
