//! Quantized MLP inference on simulated macros.
//!
//! A layer is a signed 8-bit (or 4-bit) weight matrix with `inputs` rows and
//! `outputs` columns, an integer bias, an activation and an optional
//! requantization to the next layer's unsigned input precision. Layers are
//! split into 128×16 macro tiles; partial tiles are zero-padded and partial
//! results are summed digitally.
//!
//! A small 64→32→10 digit classifier with its calibration and evaluation
//! splits is bundled under `data/` (see `data/train_digits_mlp.py`).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::derive_seed;
use crate::encoding::{NibbleMode, WeightBits};
use crate::error::{Error, Result};
use crate::io::{parse_dataset, parse_matrix, Dataset, IntMatrix};
use crate::macro_engine::{program_macro, MacroConfig, ProgrammedMacro};
use crate::perf::{layer_breakdown, total_of, LayerSchedule};
use crate::readout::default_full_scale;
use crate::{MacroKind, BANKS, ROWS, ROWS_PER_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Rounding of an accumulator onto the next layer's input grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Requant {
    pub scale: f64,
    pub output_bits: u32,
}

impl Requant {
    pub fn apply(&self, acc: i64) -> u32 {
        let max = f64::from((1u32 << self.output_bits) - 1);
        (acc as f64 * self.scale).round().clamp(0.0, max) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantLayer {
    /// `inputs × outputs`.
    pub weights: IntMatrix,
    pub weight_bits: WeightBits,
    pub input_bits: u32,
    pub bias: Vec<i32>,
    pub activation: Activation,
    pub requant: Option<Requant>,
}

impl QuantLayer {
    pub fn inputs(&self) -> usize {
        self.weights.rows
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols
    }

    fn validate(&self) -> Result<()> {
        crate::encoding::check_input_precision(self.input_bits)?;
        if self.weights.precision != self.weight_bits.bits() {
            return Err(Error::Config(format!(
                "weight file precision {} does not match {:?}",
                self.weights.precision, self.weight_bits
            )));
        }
        if self.inputs() == 0 || self.outputs() == 0 {
            return Err(Error::Config("layer dimensions must be at least 1".into()));
        }
        if self.bias.len() != self.outputs() {
            return Err(Error::Config(format!(
                "bias has {} entries for {} outputs",
                self.bias.len(),
                self.outputs()
            )));
        }
        if let Some(r) = self.requant {
            crate::encoding::check_input_precision(r.output_bits)?;
            if !(r.scale > 0.0 && r.scale.is_finite()) {
                return Err(Error::Config("requant scale must be positive".into()));
            }
        }
        Ok(())
    }

    /// Accumulator → next-layer input (or logits for the last layer).
    fn finish(&self, acc: &[i64]) -> Vec<i64> {
        acc.iter()
            .zip(&self.bias)
            .map(|(&a, &b)| {
                let mut v = a + i64::from(b);
                if self.activation == Activation::Relu {
                    v = v.max(0);
                }
                match self.requant {
                    Some(r) => i64::from(r.apply(v)),
                    None => v,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    pub layers: Vec<QuantLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: String,
    input_bits: u32,
    bias: Vec<i32>,
    activation: Activation,
    requant_scale: Option<f64>,
    output_bits: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    layer: Vec<LayerFile>,
}

impl QuantModel {
    /// Parse a model description; `load` resolves each weight file name.
    pub fn from_toml_str(text: &str, load: impl Fn(&str) -> Result<IntMatrix>) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::Config(format!("model file: {e}")))?;
        let mut layers = Vec::with_capacity(file.layer.len());
        for l in file.layer {
            let weights = load(&l.weights)?;
            let weight_bits = WeightBits::try_from(weights.precision).map_err(Error::Config)?;
            let requant = match (l.requant_scale, l.output_bits) {
                (Some(scale), Some(output_bits)) => Some(Requant { scale, output_bits }),
                (None, None) => None,
                _ => return Err(Error::Config("requant_scale and output_bits go together".into())),
            };
            layers.push(QuantLayer {
                weights,
                weight_bits,
                input_bits: l.input_bits,
                bias: l.bias,
                activation: l.activation,
                requant,
            });
        }
        let m = Self { layers };
        m.validate()?;
        Ok(m)
    }

    /// Load a model file; weight paths are relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, |name| crate::io::read_matrix(&dir.join(name)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Config(format!(
                    "layer {k} has {} outputs but layer {} takes {} inputs",
                    pair[0].outputs(),
                    k + 1,
                    pair[1].inputs()
                )));
            }
            match pair[0].requant {
                Some(r) if r.output_bits == pair[1].input_bits => {}
                _ => {
                    return Err(Error::Config(format!(
                        "layer {k} must requantize to the {}-bit input of layer {}",
                        pair[1].input_bits,
                        k + 1
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        let first = &self.layers[0];
        if data.features != first.inputs() || data.precision > first.input_bits {
            return Err(Error::Dataset(format!(
                "dataset has {} features of {} bits; the model takes {} inputs of {} bits",
                data.features,
                data.precision,
                first.inputs(),
                first.input_bits
            )));
        }
        Ok(())
    }

    /// Macro invocations per inference, per layer.
    pub fn schedule(&self) -> Vec<LayerSchedule> {
        self.layers
            .iter()
            .enumerate()
            .map(|(k, l)| LayerSchedule {
                name: format!("layer{k}"),
                tiles: tile_count(l.inputs(), l.outputs()) as u64,
                input_bits: l.input_bits,
                weight_bits: l.weight_bits,
            })
            .collect()
    }
}

const BUNDLED_MODEL: &str = include_str!("../data/digits_mlp.toml");
const BUNDLED_L0: &str = include_str!("../data/digits_l0.csv");
const BUNDLED_L1: &str = include_str!("../data/digits_l1.csv");
const BUNDLED_TRAIN: &str = include_str!("../data/digits_train.csv");
const BUNDLED_TEST: &str = include_str!("../data/digits_test.csv");

/// The shipped 64→32→10 digits classifier.
pub fn bundled_model() -> Result<QuantModel> {
    QuantModel::from_toml_str(BUNDLED_MODEL, |name| {
        let text = match name {
            "digits_l0.csv" => BUNDLED_L0,
            "digits_l1.csv" => BUNDLED_L1,
            other => return Err(Error::Config(format!("no bundled weight file {other}"))),
        };
        parse_matrix(Path::new(name), text.as_bytes())
    })
}

/// Calibration (train) and evaluation (test) splits of the bundled digits.
pub fn bundled_datasets() -> Result<(Dataset, Dataset)> {
    Ok((
        parse_dataset(Path::new("digits_train.csv"), BUNDLED_TRAIN.as_bytes())?,
        parse_dataset(Path::new("digits_test.csv"), BUNDLED_TEST.as_bytes())?,
    ))
}

pub fn tile_count(rows: usize, cols: usize) -> usize {
    rows.div_ceil(ROWS) * cols.div_ceil(BANKS)
}

/// One 128×16 slice of a layer's weight matrix, zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub row_block: usize,
    pub col_block: usize,
    /// `ROWS × BANKS`, row-major.
    pub weights: Vec<i32>,
}

pub fn tile_layer(layer: &QuantLayer) -> Vec<Tile> {
    let (rows, cols) = (layer.inputs(), layer.outputs());
    let mut tiles = Vec::with_capacity(tile_count(rows, cols));
    for rb in 0..rows.div_ceil(ROWS) {
        for cb in 0..cols.div_ceil(BANKS) {
            let mut w = vec![0; ROWS * BANKS];
            for r in 0..ROWS.min(rows - rb * ROWS) {
                for c in 0..BANKS.min(cols - cb * BANKS) {
                    w[r * BANKS + c] = layer.weights.get(rb * ROWS + r, cb * BANKS + c);
                }
            }
            tiles.push(Tile {
                row_block: rb,
                col_block: cb,
                weights: w,
            });
        }
    }
    tiles
}

fn argmax(v: &[i64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Plain integer forward pass; returns the final layer's outputs.
pub fn reference_forward(model: &QuantModel, x: &[u32]) -> Vec<i64> {
    let mut act: Vec<i64> = x.iter().map(|&v| i64::from(v)).collect();
    for l in &model.layers {
        let mut acc = vec![0i64; l.outputs()];
        for (r, &a) in act.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (c, o) in acc.iter_mut().enumerate() {
                *o += a * i64::from(l.weights.get(r, c));
            }
        }
        act = l.finish(&acc);
    }
    act
}

pub fn reference_predict(model: &QuantModel, x: &[u32]) -> usize {
    argmax(&reference_forward(model, x))
}

pub fn reference_accuracy(model: &QuantModel, data: &Dataset) -> Result<f64> {
    model.check_dataset(data)?;
    let correct = (0..data.len())
        .into_par_iter()
        .filter(|&i| reference_predict(model, data.sample(i)) == usize::from(data.labels[i]))
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// ADC full scales for one layer (value units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcWindow {
    pub high_full_scale: f64,
    pub low_full_scale: f64,
}

/// Per-layer windows that cover every per-cycle nibble partial sum seen on
/// the calibration set (exact arithmetic), clamped to the full span.
pub fn calibrate_adc_windows(model: &QuantModel, calibration: &Dataset) -> Result<Vec<AdcWindow>> {
    model.check_dataset(calibration)?;
    let full_hi = default_full_scale(NibbleMode::TwosComplement, ROWS_PER_GROUP as u32);
    let full_lo = default_full_scale(NibbleMode::Unsigned, ROWS_PER_GROUP as u32);
    // (min high, max high, max low) per layer
    let extremes = (0..calibration.len())
        .into_par_iter()
        .map(|i| {
            let mut act: Vec<i64> = calibration.sample(i).iter().map(|&v| i64::from(v)).collect();
            let mut ext = Vec::with_capacity(model.layers.len());
            for l in &model.layers {
                ext.push(layer_partial_extremes(l, &act));
                let mut acc = vec![0i64; l.outputs()];
                for (r, &a) in act.iter().enumerate() {
                    for (c, o) in acc.iter_mut().enumerate() {
                        *o += a * i64::from(l.weights.get(r, c));
                    }
                }
                act = l.finish(&acc);
            }
            ext
        })
        .reduce(
            || vec![(0, 0, 0); model.layers.len()],
            |a, b| {
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| (x.0.min(y.0), x.1.max(y.1), x.2.max(y.2)))
                    .collect()
            },
        );
    Ok(extremes
        .into_iter()
        .map(|(min_hi, max_hi, max_lo)| AdcWindow {
            high_full_scale: ((-min_hi) as f64).max(max_hi as f64 * 8.0 / 7.0).max(1.0).min(full_hi),
            low_full_scale: (max_lo as f64).max(1.0).min(full_lo),
        })
        .collect())
}

/// Extremes of the per-(input bit, 32-row group, column) nibble sums.
fn layer_partial_extremes(l: &QuantLayer, act: &[i64]) -> (i64, i64, i64) {
    let (mut min_hi, mut max_hi, mut max_lo) = (0i64, 0i64, 0i64);
    let mut hi = vec![0i64; l.outputs()];
    let mut lo = vec![0i64; l.outputs()];
    for bit in 0..l.input_bits {
        for g0 in (0..l.inputs()).step_by(ROWS_PER_GROUP) {
            hi.iter_mut().for_each(|v| *v = 0);
            lo.iter_mut().for_each(|v| *v = 0);
            for r in g0..(g0 + ROWS_PER_GROUP).min(l.inputs()) {
                if (act[r] >> bit) & 1 == 0 {
                    continue;
                }
                for c in 0..l.outputs() {
                    let w = l.weights.get(r, c);
                    match l.weight_bits {
                        WeightBits::Eight => {
                            hi[c] += i64::from(w >> 4);
                            lo[c] += i64::from(w & 0xF);
                        }
                        WeightBits::Four => hi[c] += i64::from(w),
                    }
                }
            }
            for c in 0..l.outputs() {
                min_hi = min_hi.min(hi[c]);
                max_hi = max_hi.max(hi[c]);
                max_lo = max_lo.max(lo[c]);
            }
        }
    }
    (min_hi, max_hi, max_lo)
}

/// How the ADC reference span is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePolicy {
    /// Cover every legal partial sum.
    FullSpan,
    /// Use per-layer calibrated windows wherever the full span would lose
    /// resolution.
    Calibrated,
}

/// A network mapped onto programmed macros.
pub struct SimulatedNetwork {
    model: QuantModel,
    /// Per layer: tiles with their programmed macros.
    layers: Vec<Vec<(Tile, ProgrammedMacro)>>,
}

impl SimulatedNetwork {
    /// Program every tile; tile `t` of layer `k` draws its devices from a
    /// seed derived from `cfg.seed`, `k` and `t`.
    pub fn build(model: &QuantModel, cfg: &MacroConfig, windows: Option<&[AdcWindow]>) -> Result<Self> {
        model.validate()?;
        let mut layers = Vec::with_capacity(model.layers.len());
        for (k, l) in model.layers.iter().enumerate() {
            let layer_cfg = MacroConfig {
                weight_bits: l.weight_bits,
                ..*cfg
            };
            let full_span_lossless = layer_cfg.adc(NibbleMode::TwosComplement)?.is_lossless()
                && layer_cfg.adc(NibbleMode::Unsigned)?.is_lossless();
            let tiles = tile_layer(l)
                .into_iter()
                .enumerate()
                .map(|(t, tile)| {
                    let tile_cfg = MacroConfig {
                        seed: derive_seed(cfg.seed, ((k as u64) << 32) | t as u64),
                        ..layer_cfg
                    };
                    let mut mac = program_macro(&tile.weights, &tile_cfg)?;
                    if let (Some(w), false) = (windows, full_span_lossless) {
                        let w = w
                            .get(k)
                            .ok_or_else(|| Error::Config(format!("no ADC window for layer {k}")))?;
                        mac.set_adc_windows(w.high_full_scale, w.low_full_scale)?;
                    }
                    Ok((tile, mac))
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(tiles);
        }
        Ok(Self {
            model: model.clone(),
            layers,
        })
    }

    /// Forward pass through the macros; returns final outputs and the number
    /// of clipped conversions and saturated evaluations.
    pub fn forward(&self, x: &[u32]) -> Result<(Vec<i64>, usize, usize)> {
        let mut act: Vec<u32> = x.to_vec();
        let (mut clipped, mut saturated) = (0, 0);
        let mut out = Vec::new();
        for (l, tiles) in self.model.layers.iter().zip(&self.layers) {
            let mut acc = vec![0i64; l.outputs()];
            for (tile, mac) in tiles {
                let mut xin = vec![0u32; ROWS];
                let base = tile.row_block * ROWS;
                let n = ROWS.min(l.inputs() - base);
                xin[..n].copy_from_slice(&act[base..base + n]);
                let r = mac.matvec(&xin, l.input_bits)?;
                clipped += r.clipped;
                saturated += r.saturated;
                let cbase = tile.col_block * BANKS;
                for c in 0..BANKS.min(l.outputs() - cbase) {
                    acc[cbase + c] += i64::from(r.outputs[c]);
                }
            }
            out = l.finish(&acc);
            act = out.iter().map(|&v| v.clamp(0, i64::from(u32::MAX)) as u32).collect();
        }
        Ok((out, clipped, saturated))
    }

    pub fn predict(&self, x: &[u32]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.0))
    }
}

/// One accuracy measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub macro_kind: MacroKind,
    pub adc_bits: u32,
    pub sigma: f64,
    pub seed: u64,
    pub reference: ReferencePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResult {
    pub macro_kind: MacroKind,
    pub adc_bits: u32,
    pub sigma: f64,
    pub seed: u64,
    pub reference: ReferencePolicy,
    pub input_bits: u32,
    pub weight_bits: u32,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub clipped: usize,
    pub saturated: usize,
    pub energy_per_inference: f64,
    pub latency_per_inference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub reference_accuracy: f64,
    pub samples: usize,
    pub windows: Vec<AdcWindow>,
    pub points: Vec<PointResult>,
}

/// Run the evaluation set through the simulated macros at every sweep point.
/// `calibration` is required when any point uses calibrated references.
pub fn run_inference(
    model: &QuantModel,
    data: &Dataset,
    base: &MacroConfig,
    sweep: &[SweepPoint],
    calibration: Option<&Dataset>,
) -> Result<InferenceReport> {
    model.check_dataset(data)?;
    let windows = match calibration {
        Some(c) if sweep.iter().any(|p| p.reference == ReferencePolicy::Calibrated) => calibrate_adc_windows(model, c)?,
        None if sweep.iter().any(|p| p.reference == ReferencePolicy::Calibrated) => {
            return Err(Error::Config("calibrated references need a calibration set".into()))
        }
        _ => Vec::new(),
    };
    let schedule = model.schedule();
    let mut points = Vec::with_capacity(sweep.len());
    for p in sweep {
        let mut cfg = MacroConfig {
            kind: p.macro_kind,
            adc_bits: p.adc_bits,
            seed: p.seed,
            ..*base
        };
        cfg.device.vth_sigma = p.sigma;
        let net = SimulatedNetwork::build(
            model,
            &cfg,
            (p.reference == ReferencePolicy::Calibrated).then_some(&windows[..]),
        )?;
        let per_sample = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let (out, clipped, saturated) = net.forward(data.sample(i))?;
                Ok((
                    usize::from(argmax(&out) == usize::from(data.labels[i])),
                    clipped,
                    saturated,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (correct, clipped, saturated) = per_sample
            .iter()
            .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        let (energy, latency) = total_of(&layer_breakdown(&schedule, &cfg.perf, p.macro_kind, p.adc_bits)?);
        points.push(PointResult {
            macro_kind: p.macro_kind,
            adc_bits: p.adc_bits,
            sigma: p.sigma,
            seed: p.seed,
            reference: p.reference,
            input_bits: model.layers[0].input_bits,
            weight_bits: model.layers[0].weight_bits.bits(),
            correct,
            total: data.len(),
            accuracy: correct as f64 / data.len() as f64,
            clipped,
            saturated,
            energy_per_inference: energy.total,
            latency_per_inference: latency,
        });
    }
    Ok(InferenceReport {
        reference_accuracy: reference_accuracy(model, data)?,
        samples: data.len(),
        windows,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_matvec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layer(rows: usize, cols: usize, seed: u64) -> QuantLayer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-128..=127)).collect();
        QuantLayer {
            weights: IntMatrix::new(rows, cols, 8, data).unwrap(),
            weight_bits: WeightBits::Eight,
            input_bits: 4,
            bias: vec![0; cols],
            activation: Activation::Identity,
            requant: None,
        }
    }

    #[test]
    fn tile_counts() {
        assert_eq!(tile_count(128, 16), 1);
        assert_eq!(tile_count(129, 16), 2);
        assert_eq!(tile_count(300, 40), 9);
        assert_eq!(tile_layer(&random_layer(129, 16, 0)).len(), 2);
    }

    #[test]
    fn tiled_layer_matches_untiled_oracle() {
        let layer = random_layer(300, 40, 1);
        let model = QuantModel {
            layers: vec![layer.clone()],
        };
        let cfg = MacroConfig {
            adc_bits: 9,
            ..MacroConfig::default().noiseless()
        };
        let net = SimulatedNetwork::build(&model, &cfg, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let x: Vec<u32> = (0..300).map(|_| rng.random_range(0..16)).collect();
            let expect = exact_matvec(&x, &layer.weights.data, 40).unwrap();
            assert_eq!(net.forward(&x).unwrap().0, expect);
            assert_eq!(reference_forward(&model, &x), expect);
        }
    }

    #[test]
    fn bundled_model_loads() {
        let m = bundled_model().unwrap();
        assert_eq!(m.layers.len(), 2);
        assert_eq!((m.layers[0].inputs(), m.layers[0].outputs()), (64, 32));
        assert_eq!((m.layers[1].inputs(), m.layers[1].outputs()), (32, 10));
        let (train, test) = bundled_datasets().unwrap();
        assert_eq!((train.len(), test.len()), (1257, 540));
        m.check_dataset(&test).unwrap();
        let acc = reference_accuracy(&m, &test).unwrap();
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn empty_dataset_rejected() {
        let m = bundled_model().unwrap();
        let empty = Dataset::new(64, 4, vec![], vec![]).unwrap();
        assert!(matches!(
            run_inference(&m, &empty, &MacroConfig::default(), &[], None),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn windows_stay_inside_full_span() {
        let m = bundled_model().unwrap();
        let (train, _) = bundled_datasets().unwrap();
        for w in calibrate_adc_windows(&m, &train).unwrap() {
            assert!(w.high_full_scale >= 1.0 && w.high_full_scale <= 256.0);
            assert!(w.low_full_scale >= 1.0 && w.low_full_scale <= 480.0);
        }
    }

    #[test]
    fn requant_clamps() {
        let r = Requant {
            scale: 0.5,
            output_bits: 4,
        };
        assert_eq!(r.apply(-10), 0);
        assert_eq!(r.apply(5), 3);
        assert_eq!(r.apply(1000), 15);
    }

    #[test]
    fn model_validation() {
        let mut m = bundled_model().unwrap();
        m.layers[0].requant = None;
        assert!(m.validate().is_err());
        let bad =
            "[[layer]]\nweights = \"a.csv\"\ninput_bits = 4\nbias = [0]\nactivation = \"relu\"\nrequant_scale = 1.0\n";
        let load = |_: &str| IntMatrix::new(1, 1, 8, vec![1]);
        assert!(QuantModel::from_toml_str(bad, load).is_err());
    }
}
