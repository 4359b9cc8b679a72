use proptest::prelude::*;

use nngp_core::distributions::RandomStream;
use nngp_core::experiments::{fit_rate, StudyConfig};
use nngp_core::{
    forward, kernel_cross_sequence, Activation, InputSpec, NetworkConfig, QuadratureRule, WeightLaw,
};

fn network() -> impl Strategy<Value = NetworkConfig> {
    (
        1usize..=3,
        prop::collection::vec(1usize..=6, 5),
        0.2f64..3.0,
        0.0f64..1.0,
        prop::sample::select(Activation::ALL.to_vec()),
        prop::sample::select(vec![WeightLaw::Gaussian, WeightLaw::Laplace, WeightLaw::Rademacher, WeightLaw::Uniform]),
        prop::option::of(-1i64..=2),
    )
        .prop_map(|(depth, ws, c_w, c_b, activation, hidden_law, k)| {
            let mut widths: Vec<usize> = ws[..depth + 2].to_vec();
            widths[0] = 4;
            NetworkConfig {
                depth,
                widths,
                c_w,
                c_b,
                activation,
                hidden_law,
                switch_index: k.map(|k| k.min(depth as i64 - 1)),
                input: InputSpec::Ones,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_json_round_trips(c in network()) {
        let back = NetworkConfig::from_json_str(&c.canonical_json()).unwrap();
        prop_assert_eq!(back.digest(), c.digest());
        prop_assert_eq!(back, c);
    }

    #[test]
    fn forward_is_a_pure_function_of_the_stream(c in network(), seed in any::<u64>(), id in any::<u64>()) {
        let x = c.input_vector();
        let a = forward(&c, &x, RandomStream::new(seed, id)).unwrap();
        let b = forward(&c, &x, RandomStream::new(seed, id)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cross_kernel_obeys_cauchy_schwarz(
        x in prop::collection::vec(-2.0f64..2.0, 4),
        y in prop::collection::vec(-2.0f64..2.0, 4),
        act in prop::sample::select(vec![Activation::Sigmoid, Activation::Tanh, Activation::Arctan, Activation::Erf]),
        c_b in 0.01f64..1.0,
    ) {
        let mut c = NetworkConfig::equal_width(3, 8, act, WeightLaw::Gaussian);
        c.c_b = c_b;
        let seq = kernel_cross_sequence(&c, &x, &y, &QuadratureRule::gauss_hermite(32).unwrap()).unwrap();
        let (cross, yy) = (seq.cross.unwrap(), seq.cross_diag_y.unwrap());
        for l in 0..seq.diag.len() {
            prop_assert!(cross[l].abs() <= (seq.diag[l] * yy[l]).sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fit_recovers_power_laws(slope in -1.5f64..0.0, scale in 0.01f64..10.0) {
        let pts: Vec<(usize, f64)> = [16usize, 32, 64, 128, 256].iter().map(|&n| (n, scale * (n as f64).powf(slope))).collect();
        let fit = fit_rate(&pts, 16).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
    }

    #[test]
    fn study_cell_seeds_are_distinct(w1 in 1usize..5000, w2 in 1usize..5000, r1 in 0usize..8, r2 in 0usize..8) {
        let s = StudyConfig::appendix_a_desk();
        prop_assume!((w1, r1) != (w2, r2));
        prop_assert_ne!(s.cell_seed(w1, r1), s.cell_seed(w2, r2));
    }
}
