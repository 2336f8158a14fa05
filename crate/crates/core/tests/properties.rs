use fracmg::assembly::{make_example2, ProblemSpec};
use fracmg::multigrid::{prolongate, restrict, transfer_adjointness_gap, MgConfig};
use fracmg::timestep::run_simulation_observed;
use fracmg::toeplitz::SymToeplitz;
use proptest::prelude::*;

fn symbol_and_vec() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=512).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matvec_matches_dense((col, x) in symbol_and_vec()) {
        let t = SymToeplitz::new(col).unwrap();
        let fast = t.matvec(&x).unwrap();
        let slow = t.matvec_direct(&x).unwrap();
        let dense = t.to_dense() * nalgebra::DVector::from_column_slice(&x);
        let scale = slow.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let e1 = fast.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / scale;
        let e2 = slow.iter().zip(dense.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / scale;
        prop_assert!(e1 <= 1e-12, "fft vs direct {e1}");
        prop_assert!(e2 <= 1e-12, "direct vs dense {e2}");
    }

    #[test]
    fn transfers_are_adjoint(k in 1u32..9, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nc = (1usize << k) - 1;
        let v: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..2 * nc + 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1.0 / (2 * nc + 2) as f64;
        prop_assert!(transfer_adjointness_gap(&w, &v, h).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn transfers_are_linear(k in 1u32..8, a in -3.0f64..3.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nc = (1usize << k) - 1;
        let v: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let comb: Vec<f64> = v.iter().zip(&u).map(|(v, u)| a * v + u).collect();
        let lhs = prolongate(&comb);
        let (pv, pu) = (prolongate(&v), prolongate(&u));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * pv[i] + pu[i])).abs() < 1e-14);
        }
        let r = restrict(&lhs).unwrap();
        prop_assert_eq!(r.len(), nc);
    }
}

fn mass_norm_history(problem: &ProblemSpec, cells: usize, steps: usize) -> Vec<f64> {
    let mesh = problem.mesh(cells).unwrap();
    let mass = SymToeplitz::new(fracmg::assembly::mass_symbol(&mesh)).unwrap();
    let u0 = fracmg::assembly::interpolate(&mesh, |x| (problem.u0)(x));
    let mut norms = vec![mass.quadratic_form(&u0).unwrap()];
    run_simulation_observed(problem, cells, steps, &MgConfig::default(), |_, u| {
        norms.push(mass.quadratic_form(u).unwrap());
    })
    .unwrap();
    norms
}

#[test]
fn crank_nicolson_is_stable_without_forcing() {
    for alpha in [1.1, 1.5, 1.9] {
        for lambda in [0.0, 0.5] {
            for (cells, steps) in [(32, 8), (64, 64), (128, 16)] {
                let p = make_example2(alpha, lambda).unwrap();
                let norms = mass_norm_history(&p, cells, steps);
                for w in norms.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-10), "α={alpha} λ={lambda} M={cells}: {} > {}", w[1], w[0]);
                }
            }
        }
    }
}

#[test]
fn crank_nicolson_is_stable_for_long_steps() {
    for alpha in [1.1, 1.9] {
        let cells = 64;
        let steps = 8;
        let h = 1.0 / cells as f64;
        let p = ProblemSpec { t_final: 10.0 * h * steps as f64, ..make_example2(alpha, 0.5).unwrap() };
        let norms = mass_norm_history(&p, cells, steps);
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        assert!(norms[steps] < norms[0]);
    }
}
