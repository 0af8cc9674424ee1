//! Values recomputed by the independent numpy model in
//! `tests/oracles/digits_oracle.py` and frozen here.

use fefet_imc::macro_engine::MacroConfig;
use fefet_imc::nn::{
    bundled_datasets, bundled_model, calibrate_adc_windows, reference_accuracy, run_inference, ReferencePolicy,
    SweepPoint,
};
use fefet_imc::MacroKind;

const TEST_SAMPLES: usize = 540;
const REFERENCE_CORRECT: usize = 527;
/// (high, low) full scales per layer.
const WINDOWS: [(f64, f64); 2] = [(416.0 / 7.0, 196.0), (47.0, 221.0)];
/// Correct test predictions at σ = 0 with calibrated windows, 3..=9 bits.
const SWEEP_CORRECT: [usize; 7] = [462, 519, 521, 521, 525, 527, 527];

#[test]
fn integer_reference_accuracy() {
    let model = bundled_model().unwrap();
    let (_, test) = bundled_datasets().unwrap();
    assert_eq!(test.len(), TEST_SAMPLES);
    let acc = reference_accuracy(&model, &test).unwrap();
    assert_eq!((acc * TEST_SAMPLES as f64).round() as usize, REFERENCE_CORRECT);
}

#[test]
fn calibrated_windows() {
    let model = bundled_model().unwrap();
    let (train, _) = bundled_datasets().unwrap();
    let w = calibrate_adc_windows(&model, &train).unwrap();
    assert_eq!(w.len(), WINDOWS.len());
    for (got, (hi, lo)) in w.iter().zip(WINDOWS) {
        assert!((got.high_full_scale - hi).abs() < 1e-12, "{got:?}");
        assert_eq!(got.low_full_scale, lo);
    }
}

#[test]
fn noiseless_sweep_matches_numpy_model() {
    let model = bundled_model().unwrap();
    let (train, test) = bundled_datasets().unwrap();
    let sweep: Vec<SweepPoint> = MacroKind::ALL
        .into_iter()
        .flat_map(|kind| {
            (3..=9).map(move |bits| SweepPoint {
                macro_kind: kind,
                adc_bits: bits,
                sigma: 0.0,
                seed: 0,
                reference: ReferencePolicy::Calibrated,
            })
        })
        .collect();
    let report = run_inference(&model, &test, &MacroConfig::default(), &sweep, Some(&train)).unwrap();
    for p in &report.points {
        assert_eq!(
            p.correct,
            SWEEP_CORRECT[(p.adc_bits - 3) as usize],
            "{} at {} bits",
            p.macro_kind,
            p.adc_bits
        );
        if p.adc_bits == 9 {
            assert_eq!(p.clipped, 0, "{} clipped at full span", p.macro_kind);
        }
    }
}
