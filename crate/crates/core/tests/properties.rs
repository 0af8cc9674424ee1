//! End-to-end properties of the simulated macros against the integer oracle.

use fefet_imc::encoding::{encode_input, encode_weight_4b, encode_weight_8b, WeightBits};
use fefet_imc::experiments::matvec_error_bound;
use fefet_imc::macro_engine::{program_macro, MacroConfig};
use fefet_imc::nn::{
    bundled_datasets, bundled_model, reference_forward, run_inference, ReferencePolicy, SimulatedNetwork, SweepPoint,
};
use fefet_imc::oracle::{bitwise_dot, exact_dot, exact_matvec};
use fefet_imc::{MacroKind, BANKS, ROWS};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = MacroKind> {
    prop_oneof![Just(MacroKind::CurFe), Just(MacroKind::ChgFe)]
}

fn operands(m: u32) -> impl Strategy<Value = (Vec<i32>, Vec<u32>)> {
    (
        prop::collection::vec(-128..=127i32, ROWS * BANKS),
        prop::collection::vec(0..(1u32 << m), ROWS),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lossless_noiseless_matvec_is_exact(k in kind(), m in 1..=8u32, seed in any::<u64>(), ops in operands(8)) {
        let (w, x) = ops;
        let x: Vec<u32> = x.iter().map(|v| v & ((1 << m) - 1)).collect();
        let cfg = MacroConfig { adc_bits: 9, seed, ..MacroConfig::default().with_kind(k).noiseless() };
        let mac = program_macro(&w, &cfg).unwrap();
        let got: Vec<i64> = mac.matvec(&x, m).unwrap().outputs.iter().map(|&v| i64::from(v)).collect();
        prop_assert_eq!(got, exact_matvec(&x, &w, BANKS).unwrap());
    }

    #[test]
    fn lossy_matvec_stays_within_bound(k in kind(), bits in 3..=8u32, ops in operands(4)) {
        let (w, x) = ops;
        let cfg = MacroConfig { adc_bits: bits, ..MacroConfig::default().with_kind(k).noiseless() };
        let bound = matvec_error_bound(&cfg, 4).unwrap();
        let got = program_macro(&w, &cfg).unwrap().matvec(&x, 4).unwrap();
        let exact = exact_matvec(&x, &w, BANKS).unwrap();
        for (g, e) in got.outputs.iter().zip(exact) {
            prop_assert!((i64::from(*g) - e).abs() as f64 <= bound, "{} vs {} (bound {})", g, e, bound);
        }
    }

    #[test]
    fn four_bit_mode_is_exact(k in kind(), w in prop::collection::vec(-8..=7i32, ROWS * BANKS), x in prop::collection::vec(0..16u32, ROWS)) {
        let cfg = MacroConfig { adc_bits: 9, weight_bits: WeightBits::Four, ..MacroConfig::default().with_kind(k).noiseless() };
        let got: Vec<i64> = program_macro(&w, &cfg).unwrap().matvec(&x, 4).unwrap().outputs.iter().map(|&v| i64::from(v)).collect();
        prop_assert_eq!(got, exact_matvec(&x, &w, BANKS).unwrap());
    }

    #[test]
    fn encodings_round_trip(w8 in -128..=127i32, w4 in -8..=7i32, x in 0..256u32) {
        let p = encode_weight_8b(w8).unwrap();
        prop_assert_eq!(16 * p.high.value() + p.low.value(), w8);
        prop_assert_eq!(encode_weight_4b(w4).unwrap().value(), w4);
        prop_assert_eq!(encode_input(x, 8).unwrap().decode(), x);
    }

    #[test]
    fn bit_serial_matches_direct(m in 1..=8u32, x in prop::collection::vec(0..256u32, 1..=128), seed in any::<u64>()) {
        let x: Vec<u32> = x.iter().map(|v| v & ((1 << m) - 1)).collect();
        let w: Vec<i32> = x.iter().enumerate().map(|(i, _)| ((seed >> (i % 56)) as i32 & 0xFF) - 128).collect();
        prop_assert_eq!(bitwise_dot(&x, &w, m).unwrap(), exact_dot(&x, &w).unwrap());
    }
}

#[test]
fn tiled_lossless_inference_is_bit_identical_for_every_sample() {
    let model = bundled_model().unwrap();
    let (_, test) = bundled_datasets().unwrap();
    for k in MacroKind::ALL {
        let cfg = MacroConfig {
            adc_bits: 9,
            ..MacroConfig::default().with_kind(k).noiseless()
        };
        let net = SimulatedNetwork::build(&model, &cfg, None).unwrap();
        for i in 0..test.len() {
            let x = test.sample(i);
            assert_eq!(
                net.forward(x).unwrap().0,
                reference_forward(&model, x),
                "{k} sample {i}"
            );
        }
    }
}

#[test]
fn accuracy_grid_is_reproducible_under_a_seed() {
    let model = bundled_model().unwrap();
    let (train, test) = bundled_datasets().unwrap();
    let sweep: Vec<SweepPoint> = MacroKind::ALL
        .into_iter()
        .map(|k| SweepPoint {
            macro_kind: k,
            adc_bits: 5,
            sigma: 0.04,
            seed: 99,
            reference: ReferencePolicy::Calibrated,
        })
        .collect();
    let a = run_inference(&model, &test, &MacroConfig::default(), &sweep, Some(&train)).unwrap();
    let b = run_inference(&model, &test, &MacroConfig::default(), &sweep, Some(&train)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for p in &a.points {
        assert!((0.0..=1.0).contains(&p.accuracy));
        assert!(p.energy_per_inference > 0.0 && p.latency_per_inference > 0.0);
    }
}
