use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tdesign::design::{build_design, build_design_improved, build_mub_design, DesignEnsemble};
use tdesign::distinction::{distinguish, haar_baseline, random_density, random_orthogonal_pair};
use tdesign::reduce::with_threads;
use tdesign::states::{DensityMatrix, PureState};
use tdesign::verifier::{check_conditions, frame_operator, verify, Route, VerifyOptions};

fn opts(route: Route) -> VerifyOptions {
    VerifyOptions {
        route,
        ..VerifyOptions::default()
    }
}

#[test]
fn streamed_and_factored_routes_agree() {
    for (n, t) in [(4u64, 1u32), (4, 2), (8, 2), (4, 3)] {
        let e = build_design(n, t).unwrap();
        let a = verify(&e, &opts(Route::Streamed)).unwrap();
        let b = verify(&e, &opts(Route::Factored)).unwrap();
        assert!((a.measured_epsilon - b.measured_epsilon).abs() < 1e-12, "N={n} t={t}");
        assert!((a.max_relative_balanced_deviation - b.max_relative_balanced_deviation).abs() < 1e-10);
        assert!(a.max_unbalanced_residual < 1e-12 && b.max_unbalanced_residual < 1e-12);
        let fa = frame_operator(&e, t, &opts(Route::Streamed)).unwrap();
        let fb = frame_operator(&e, t, &opts(Route::Factored)).unwrap();
        assert!((&fa.matrix - &fb.matrix).iter().all(|z| z.norm() < 1e-12));
    }
}

#[test]
fn frame_operator_matches_explicit_tensor_power() {
    // Oracle: sum_i p_i (phi_i^{(x)2})(phi_i^{(x)2})^* restricted to the
    // symmetric basis e_{ab} = (e_a e_b + e_b e_a) / norm.
    let e = build_design(4, 2).unwrap();
    let op = frame_operator(&e, 2, &VerifyOptions::default()).unwrap();
    let basis = &op.basis;
    let mut dense = vec![Complex64::new(0.0, 0.0); basis.len() * basis.len()];
    e.visit(0..e.size(), |w, amps| {
        let coords: Vec<Complex64> = basis
            .iter()
            .map(|s| {
                let prod = amps[s[0]] * amps[s[1]];
                if s[0] == s[1] { prod } else { prod * 2f64.sqrt() }
            })
            .collect();
        for (i, x) in coords.iter().enumerate() {
            for (j, y) in coords.iter().enumerate() {
                dense[i * basis.len() + j] += w * x * y.conj();
            }
        }
    })
    .unwrap();
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            assert!((op.matrix[(i, j)] - dense[i * basis.len() + j]).norm() < 1e-12);
        }
    }
}

#[test]
fn completeness_of_every_small_ensemble() {
    let ensembles = [
        build_design(2, 1).unwrap(),
        build_design(4, 2).unwrap(),
        build_mub_design(3).unwrap(),
        build_mub_design(7).unwrap(),
    ];
    for e in &ensembles {
        let r = check_conditions(e, 1, None, &VerifyOptions::default()).unwrap();
        assert!(r.measured_epsilon < 1e-10, "{:?}", e.variant());
        assert!((r.weight_sum - 1.0).abs() < 1e-10);
    }
}

#[test]
fn reports_do_not_depend_on_threads() {
    let e = build_design(8, 2).unwrap();
    let run = |threads| {
        with_threads(Some(threads), || {
            let r = verify(&e, &opts(Route::Streamed)).unwrap();
            serde_json::to_string(&r).unwrap()
        })
    };
    assert_eq!(run(1), run(4));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = random_orthogonal_pair(8, &mut rng).unwrap();
    let d = |threads| {
        with_threads(Some(threads), || {
            let r = distinguish(&e, &a.density(), &b.density()).unwrap();
            let base = haar_baseline(&a.density(), &b.density(), 50, 9).unwrap();
            (r.l1.to_bits(), r.mean_s4.to_bits(), base.mean.to_bits())
        })
    };
    assert_eq!(d(1), d(3));
}

#[test]
fn improved_ensemble_is_reproducible_from_its_spec() {
    let e = build_design_improved(16, 2, 0.2).unwrap();
    let spec = e.spec();
    let again = DesignEnsemble::from_spec(&spec).unwrap();
    assert_eq!(again.size(), e.size());
    for idx in [0u64, 12_345, e.size() - 1] {
        let (w1, s1) = e.element(idx).unwrap();
        let (w2, s2) = again.element(idx).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(s1, s2);
    }
}

#[test]
fn haar_baseline_for_orthogonal_states_is_one() {
    let e = build_design(4, 2).unwrap();
    let a = PureState::basis(4, 0).density();
    let b = PureState::basis(4, 1).density();
    let r = distinguish(&e, &a, &b).unwrap();
    let base = haar_baseline(&a, &b, 2000, 4).unwrap();
    // For orthogonal pure states (|<u|a>|^2, |<u|b>|^2) is Dirichlet(1, 1, N-2)
    // under a Haar vector u, so E|X - Y| = 1/N and the expected l1 is 1.
    assert!((base.mean - 1.0).abs() < 4.0 * base.std_error, "{base:?}");
    // Rounding the t = 2 rule to quarters leaves the two nodes +-x with equal
    // magnitude, so every element has flat magnitudes and basis populations
    // are invisible to this POVM.
    assert_eq!(e.rule().unwrap().units().unwrap().0, &[2, 2]);
    assert!(r.l1.abs() < 1e-12, "{}", r.l1);
}

fn ensemble_strategy() -> impl Strategy<Value = usize> {
    0usize..5
}

fn pick(i: usize) -> DesignEnsemble {
    match i {
        0 => build_design(2, 1).unwrap(),
        1 => build_design(4, 1).unwrap(),
        2 => build_design(4, 2).unwrap(),
        3 => build_mub_design(3).unwrap(),
        _ => build_mub_design(5).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fourth_moment_bound_holds(which in ensemble_strategy(), seed in any::<u64>(), mixed in any::<bool>()) {
        let e = pick(which);
        let n = e.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b): (DensityMatrix, DensityMatrix) = if mixed {
            (random_density(n, &mut rng).unwrap(), random_density(n, &mut rng).unwrap())
        } else {
            let (x, y) = random_orthogonal_pair(n, &mut rng).unwrap();
            (x.density(), y.density())
        };
        let r = distinguish(&e, &a, &b).unwrap();
        prop_assert!(r.l1 / n as f64 >= r.berger_bound - 1e-12);
        prop_assert!(r.berger_holds);
        // Exact 2-designs reproduce E[S^2] = f^2 / (N (N+1)).
        if which >= 3 {
            prop_assert!((r.mean_s2 - r.design_s2).abs() < 1e-12);
        }
    }

    #[test]
    fn outcome_distribution_is_a_probability_vector(which in ensemble_strategy(), seed in any::<u64>()) {
        let e = pick(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(e.dim(), &mut rng).unwrap();
        let p = tdesign::distinction::povm_distribution(&e, &rho).unwrap();
        prop_assert!(p.iter().all(|&x| x >= -1e-15));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
