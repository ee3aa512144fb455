//! The Poisson algebra of per-face Hamiltonian currents: bracket values,
//! the Jacobi and Leibniz identities, and the commutator property of the
//! bracket's vector field.

use ocurrents::currents::{poisson_bracket, product, HamiltonianCurrent, Poly2};
use ocurrents::dynamics::JetSample;
use ocurrents::lattice::{OrientedFace, RectLattice};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = RectLattice::new(4, 4, 1.0, 1.0)?;
    let mut rng = StdRng::seed_from_u64(9);

    // The canonical pair on a time-like face with c = 2k/h = 2.
    let f = Poly2::new(vec![vec![0.0], vec![1.0]]).to_hamiltonian(); // phi_atom
    let g = Poly2::new(vec![vec![0.0, 1.0]]).to_hamiltonian(); // phi_face
    let face = lattice.time_face(2, 1);
    let jet = JetSample {
        oriented_face: OrientedFace::new(&lattice, face, lattice.atom(1, 1))?,
        phi_face: 0.4,
        phi_atom: -0.2,
    };
    let b = poisson_bracket(&lattice, &f, &g);
    println!("{{phi_atom, phi_face}} at c = 2: {}", b.eval(&jet));

    let random_poly = |rng: &mut StdRng| {
        Poly2::new((0..4).map(|_| (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect())
            .to_hamiltonian()
    };
    let mut worst_jacobi = 0.0f64;
    let mut worst_leibniz = 0.0f64;
    let mut worst_comm = 0.0f64;
    for _ in 0..200 {
        let f = random_poly(&mut rng);
        let g = random_poly(&mut rng);
        let h = random_poly(&mut rng);
        let jet = JetSample {
            oriented_face: OrientedFace::new(&lattice, face, lattice.atom(1, 1))?,
            phi_face: rng.gen_range(-1.0..1.0),
            phi_atom: rng.gen_range(-1.0..1.0),
        };
        let jacobi = poisson_bracket(&lattice, &poisson_bracket(&lattice, &f, &g), &h).eval(&jet)
            + poisson_bracket(&lattice, &poisson_bracket(&lattice, &h, &f), &g).eval(&jet)
            + poisson_bracket(&lattice, &poisson_bracket(&lattice, &g, &h), &f).eval(&jet);
        worst_jacobi = worst_jacobi.max(jacobi.abs());

        let gh = HamiltonianCurrent::from_current(product(g.current(), h.current()));
        let leibniz = poisson_bracket(&lattice, &f, &gh).eval(&jet)
            - poisson_bracket(&lattice, &f, &g).eval(&jet) * h.eval(&jet)
            - g.eval(&jet) * poisson_bracket(&lattice, &f, &h).eval(&jet);
        worst_leibniz = worst_leibniz.max(leibniz.abs());

        // The bracket's vector field against the finite-difference
        // commutator of the two rules.
        let b = poisson_bracket(&lattice, &f, &g);
        let (ba, bf) = b.vf(&lattice, &jet);
        let eps = 1e-5;
        let v = f.vf(&lattice, &jet);
        let w = g.vf(&lattice, &jet);
        let flow = |h: &HamiltonianCurrent, along: &(f64, f64), e: f64| {
            let moved = JetSample {
                phi_atom: jet.phi_atom + e * along.0,
                phi_face: jet.phi_face + e * along.1,
                ..jet
            };
            h.vf(&lattice, &moved)
        };
        let dv_w = {
            let (p, m) = (flow(&f, &w, eps), flow(&f, &w, -eps));
            ((p.0 - m.0) / (2.0 * eps), (p.1 - m.1) / (2.0 * eps))
        };
        let dw_v = {
            let (p, m) = (flow(&g, &v, eps), flow(&g, &v, -eps));
            ((p.0 - m.0) / (2.0 * eps), (p.1 - m.1) / (2.0 * eps))
        };
        worst_comm = worst_comm
            .max((ba - (dv_w.0 - dw_v.0)).abs())
            .max((bf - (dv_w.1 - dw_v.1)).abs());
    }
    println!("200 random cubic triples:");
    println!("  max |Jacobi residual|  = {worst_jacobi:.3e}");
    println!("  max |Leibniz residual| = {worst_leibniz:.3e}");
    println!("  max |vf(bracket) - commutator| = {worst_comm:.3e}");
    Ok(())
}
