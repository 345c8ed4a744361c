use tdesign::design::build_design;
use tdesign::distinction::povm_distribution;
use tdesign::povm::{chi_square, expected_sampling_tv, sample_povm, total_variation, TwoStagePovm};
use tdesign::reduce::with_threads;
use tdesign::states::PureState;

use num_complex::Complex64;

fn test_states(n: usize) -> Vec<PureState> {
    let mut out = vec![PureState::basis(n, 0), PureState::uniform(n)];
    let skew: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 + j as f64, 0.5 * (j as f64).sin()))
        .collect();
    out.push(PureState::normalized(skew).unwrap());
    out
}

#[test]
fn composed_matches_direct_probabilities() {
    for (n, t) in [(2u64, 1u32), (2, 2), (4, 1), (4, 2)] {
        let povm = TwoStagePovm::new(n, t).unwrap();
        let ensemble = build_design(n, t).unwrap();
        for state in test_states(n as usize) {
            let composed = povm.composed_distribution(&state).unwrap();
            let direct = povm_distribution(&ensemble, &state.density()).unwrap();
            assert_eq!(composed.len(), direct.len());
            let worst = composed
                .iter()
                .zip(&direct)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-10, "N={n} t={t}: {worst}");
            assert!((composed.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn two_point_uniform_input_enumerates_eight_outcomes() {
    let povm = TwoStagePovm::new(2, 1).unwrap();
    let state = PureState::uniform(2);
    let composed = povm.composed_distribution(&state).unwrap();
    assert_eq!(composed.len(), 8);
    // Independent oracle: weight w_f = S_f / (|F| |G| E[S]) and
    // |<psi_fg|psi>|^2 = |sum_j b_j omega^{-g(j)}|^2 / 2.
    let rule = povm.rule();
    let a: Vec<f64> = rule.nodes().iter().map(|x| x.abs() / 2f64.sqrt()).collect();
    assert_eq!(a.len(), 2);
    for f in 0..2usize {
        // f(j) = c_0, one level per value.
        let mag = a[f];
        for g in 0..4usize {
            let (d0, d1) = (g % 2, g / 2);
            let s0 = if d0 == 0 { 1.0 } else { -1.0 };
            let s1 = if (d0 ^ d1) == 0 { 1.0 } else { -1.0 };
            let overlap = mag * (s0 + s1) / 2f64.sqrt();
            let expect = 2.0 * overlap * overlap / (2.0 * 4.0 * rule.moment(2));
            assert!((composed[f * 4 + g] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn sampled_histogram_converges() {
    let povm = TwoStagePovm::new(4, 2).unwrap();
    let state = PureState::basis(4, 0);
    let exact = povm.composed_distribution(&state).unwrap();
    let shots = 200_000;
    let hist = povm.sample(&state, shots, 11).unwrap();
    let chi = chi_square(&hist.counts, &exact).unwrap();
    assert!(chi.p_value > 0.001, "{chi:?}");
    let tv = total_variation(&hist.frequencies(), &exact);
    let typical = expected_sampling_tv(&exact, shots);
    assert!(tv < 1.2 * typical, "{tv} vs {typical}");
}

#[test]
fn histogram_does_not_depend_on_threads() {
    let state = PureState::uniform(4);
    let one = with_threads(Some(1), || sample_povm(&state, 4, 1, 300_000, 3).unwrap());
    let three = with_threads(Some(3), || sample_povm(&state, 4, 1, 300_000, 3).unwrap());
    assert_eq!(one, three);
}
