//! Device-variation Monte Carlo.
//!
//! Two studies are provided: per-bit ON-current populations of single cells,
//! and the block transfer curve (analog output versus the ideal nibble MAC)
//! over many device instances. Every trial draws fresh thresholds from a seed
//! derived from the run seed and the trial index, so results do not depend on
//! how trials are scheduled across threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::chgfe::ChgfeBlock;
use crate::curfe::CurfeBlock;
use crate::device::{derive_seed, sample_vth, CellState, DeviceProfile, Polarity, NIBBLE_WIDTH};
use crate::encoding::NibbleValue;
use crate::error::{Error, Result};
use crate::macro_engine::MacroConfig;
use crate::{BlockKind, MacroKind, ROWS_PER_GROUP};

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - (my + slope * (p.0 - mx))).powi(2)).sum();
    1.0 - ss_res / syy
}

/// ON currents of one cell type over many device instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentPopulation {
    pub macro_kind: MacroKind,
    pub bit: u8,
    /// Amperes.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationStats {
    pub macro_kind: MacroKind,
    pub bit: u8,
    pub mean: f64,
    pub std: f64,
    pub rel_std: f64,
}

impl CurrentPopulation {
    pub fn stats(&self) -> PopulationStats {
        let (mean, std) = mean_std(&self.samples);
        PopulationStats {
            macro_kind: self.macro_kind,
            bit: self.bit,
            mean,
            std,
            rel_std: std / mean.abs(),
        }
    }

    /// Equal-width histogram: `(lower edge, upper edge, count)` per bin.
    pub fn histogram(&self, bins: usize) -> Vec<(f64, f64, usize)> {
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if bins == 0 || !lo.is_finite() {
            return Vec::new();
        }
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &s in &self.samples {
            let k = (((s - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
            .collect()
    }
}

/// ON-current populations of the four magnitude bit cells of both macros
/// (eight populations), `draws` device instances each.
pub fn device_current_populations(profile: &DeviceProfile, draws: usize, seed: u64) -> Result<Vec<CurrentPopulation>> {
    if draws == 0 {
        return Err(Error::Config("population needs at least one draw".into()));
    }
    let curfe = profile.curfe();
    let mlc = profile.mlc(Polarity::NType);
    let mut out = Vec::with_capacity(2 * NIBBLE_WIDTH);
    for (k, kind) in MacroKind::ALL.into_iter().enumerate() {
        for bit in 0..NIBBLE_WIDTH as u8 {
            let col = (k * NIBBLE_WIDTH) as u32 + u32::from(bit);
            let samples = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let dev = sample_vth(seed, (d as u32, col), profile.vth_sigma)?.deviation;
                    Ok(match kind {
                        MacroKind::CurFe => curfe.on_current(bit, false, dev)?,
                        MacroKind::ChgFe => mlc.saturation_current(bit, dev)?.0,
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            out.push(CurrentPopulation {
                macro_kind: kind,
                bit,
                samples,
            });
        }
    }
    Ok(out)
}

/// Which points of the transfer curve to simulate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferSweep {
    /// `(block, nibble value)` pairs; all 32 rows of the block store the value.
    pub weights: Vec<(BlockKind, i32)>,
    /// Numbers of rows driven with input 1 (the first `k` rows).
    pub active_rows: Vec<usize>,
}

impl TransferSweep {
    /// Every nibble value of both blocks × 0..=32 active rows.
    pub fn full() -> Self {
        let mut weights = Vec::new();
        for kind in BlockKind::ALL {
            let (lo, hi) = kind.mode().range();
            weights.extend((lo..=hi).map(|w| (kind, w)));
        }
        Self {
            weights,
            active_rows: (0..=ROWS_PER_GROUP).collect(),
        }
    }
}

/// Statistics of one transfer-curve point across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferPoint {
    pub macro_kind: MacroKind,
    pub block: BlockKind,
    pub weight: i32,
    pub active_rows: usize,
    /// Ideal nibble MAC `k · w`.
    pub target: i32,
    pub mean_volts: f64,
    pub std_volts: f64,
    /// Mean and spread mapped back through the nominal transfer.
    pub mean_value: f64,
    pub std_value: f64,
}

fn trial_voltages(cfg: &MacroConfig, sweep: &TransferSweep, trial_seed: u64) -> Result<Vec<f64>> {
    let sigma = cfg.device.vth_sigma;
    let mut out = Vec::with_capacity(sweep.weights.len() * sweep.active_rows.len());
    for &(kind, w) in &sweep.weights {
        let bits = NibbleValue::new(kind.mode(), w)?.bits();
        let mut cells = Vec::with_capacity(ROWS_PER_GROUP);
        for r in 0..ROWS_PER_GROUP {
            let mut row = [CellState::default(); NIBBLE_WIDTH];
            for (bit, cell) in row.iter_mut().enumerate() {
                let col = (kind.column_offset() + bit) as u32;
                *cell = CellState {
                    stored_bit: bits[bit],
                    vth_deviation: sample_vth(trial_seed, (r as u32, col), sigma)?.deviation,
                };
            }
            cells.push(row);
        }
        let mut inputs = vec![false; ROWS_PER_GROUP];
        match cfg.kind {
            MacroKind::CurFe => {
                let p = CurfeBlock {
                    kind,
                    cells,
                    device: cfg.device.curfe(),
                }
                .prepare()?;
                for &k in &sweep.active_rows {
                    inputs.iter_mut().enumerate().for_each(|(r, x)| *x = r < k);
                    out.push(p.evaluate(&inputs, &cfg.tia)?.voltage);
                }
            }
            MacroKind::ChgFe => {
                let p = ChgfeBlock {
                    kind,
                    cells,
                    device: cfg.device.mlc(Polarity::NType),
                    params: cfg.chgfe,
                }
                .prepare()?;
                for &k in &sweep.active_rows {
                    inputs.iter_mut().enumerate().for_each(|(r, x)| *x = r < k);
                    out.push(p.evaluate(&inputs)?.voltage);
                }
            }
        }
    }
    Ok(out)
}

/// Block transfer statistics over `trials` device instances.
pub fn monte_carlo_transfer(cfg: &MacroConfig, sweep: &TransferSweep, trials: usize) -> Result<Vec<TransferPoint>> {
    if trials == 0 {
        return Err(Error::Config("monte carlo needs at least one trial".into()));
    }
    if let Some(&k) = sweep.active_rows.iter().find(|&&k| k > ROWS_PER_GROUP) {
        return Err(Error::Config(format!(
            "{k} active rows exceed the {ROWS_PER_GROUP}-row group"
        )));
    }
    cfg.validate()?;
    let runs = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial_voltages(cfg, sweep, derive_seed(cfg.seed, t)))
        .collect::<Result<Vec<_>>>()?;

    let transfer = cfg.transfer();
    let mut points = Vec::with_capacity(runs[0].len());
    let mut idx = 0;
    for &(kind, w) in &sweep.weights {
        for &k in &sweep.active_rows {
            let column: Vec<f64> = runs.iter().map(|r| r[idx]).collect();
            let (mean_volts, std_volts) = mean_std(&column);
            points.push(TransferPoint {
                macro_kind: cfg.kind,
                block: kind,
                weight: w,
                active_rows: k,
                target: k as i32 * w,
                mean_volts,
                std_volts,
                mean_value: transfer.value(mean_volts),
                std_value: std_volts / transfer.volts_per_unit.abs(),
            });
            idx += 1;
        }
    }
    Ok(points)
}

/// R² of mean output voltage against target over a transfer table.
pub fn transfer_r_squared(points: &[TransferPoint]) -> f64 {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (f64::from(p.target), p.mean_volts)).collect();
    r_squared(&xy)
}
