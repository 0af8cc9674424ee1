//! Experiment runner: each experiment regenerates one figure's data as CSV or
//! JSON, writes a `manifest.json` that is enough to replay it, and reports
//! any invariant it found violated.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulate::quantization_error_bound;
use crate::chgfe::{chgfe_transfer, evaluate_chgfe_block, trace_chgfe_block, ChgfeBlock};
use crate::config::SimConfig;
use crate::curfe::{evaluate_curfe_block, CurfeBlock};
use crate::device::{derive_seed, NFeFET1RModel, Polarity};
use crate::encoding::{NibbleMode, WeightBits};
use crate::error::{Error, Result};
use crate::io::{write_csv, write_json};
use crate::macro_engine::{program_macro, MacroConfig};
use crate::montecarlo::{device_current_populations, monte_carlo_transfer, transfer_r_squared, TransferSweep};
use crate::nn::{bundled_datasets, bundled_model, run_inference, ReferencePolicy, SweepPoint};
use crate::oracle::exact_matvec;
use crate::perf::{energy_of_matvec, latency_of_matvec, layer_breakdown, total_of, CalibrationAnchors, EnergyParams};
use crate::{BlockKind, MacroKind, BANKS, GROUPS, ROWS, ROWS_PER_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Fig3Example,
    Fig5Example,
    Fig6Hist,
    Fig8Transfer,
    Fig7Efficiency,
    Fig9Accuracy,
    Fig10Breakdown,
    OracleEquiv,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Fig3Example,
        ExperimentId::Fig5Example,
        ExperimentId::Fig6Hist,
        ExperimentId::Fig8Transfer,
        ExperimentId::Fig7Efficiency,
        ExperimentId::Fig9Accuracy,
        ExperimentId::Fig10Breakdown,
        ExperimentId::OracleEquiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig3Example => "fig3_example",
            ExperimentId::Fig5Example => "fig5_example",
            ExperimentId::Fig6Hist => "fig6_hist",
            ExperimentId::Fig8Transfer => "fig8_transfer",
            ExperimentId::Fig7Efficiency => "fig7_efficiency",
            ExperimentId::Fig9Accuracy => "fig9_accuracy",
            ExperimentId::Fig10Breakdown => "fig10_breakdown",
            ExperimentId::OracleEquiv => "oracle_equiv",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            Error::Config(format!("unknown experiment `{s}` (known: {})", known.join(", ")))
        })
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub version: String,
    pub config: SimConfig,
    pub artifacts: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: ExperimentId,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
    pub violations: Vec<String>,
}

struct Run<'a> {
    cfg: &'a SimConfig,
    out: &'a Path,
    artifacts: Vec<String>,
    summary: Vec<String>,
    violations: Vec<String>,
}

impl Run<'_> {
    fn seed(&self) -> u64 {
        self.cfg.macro_.seed
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        write_csv(&self.out.join(name), rows)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.out.join(name), value)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(what());
        }
    }
}

/// Run one experiment into `out` (created if missing).
pub fn run_experiment(id: ExperimentId, cfg: &SimConfig, out: &Path) -> Result<Outcome> {
    if let Err((key, msg)) = cfg.check() {
        return Err(Error::Config(format!("{key}: {msg}")));
    }
    std::fs::create_dir_all(out)?;
    let mut run = Run {
        cfg,
        out,
        artifacts: Vec::new(),
        summary: Vec::new(),
        violations: Vec::new(),
    };
    match id {
        ExperimentId::Fig3Example => fig3_example(&mut run)?,
        ExperimentId::Fig5Example => fig5_example(&mut run)?,
        ExperimentId::Fig6Hist => fig6_hist(&mut run)?,
        ExperimentId::Fig8Transfer => fig8_transfer(&mut run)?,
        ExperimentId::Fig7Efficiency => fig7_efficiency(&mut run)?,
        ExperimentId::Fig9Accuracy => fig9_accuracy(&mut run)?,
        ExperimentId::Fig10Breakdown => fig10_breakdown(&mut run)?,
        ExperimentId::OracleEquiv => oracle_equiv(&mut run)?,
    }
    let manifest = Manifest {
        experiment: id,
        seed: cfg.macro_.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        artifacts: run.artifacts.clone(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(Outcome {
        experiment: id,
        artifacts: run.artifacts,
        summary: run.summary,
        violations: run.violations,
    })
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Re-run the experiment a manifest describes.
pub fn replay(manifest: &Path, out: &Path) -> Result<Outcome> {
    let m = read_manifest(manifest)?;
    let mut cfg = m.config;
    cfg.macro_.seed = m.seed;
    run_experiment(m.experiment, &cfg, out)
}

pub fn artifact_paths(out: &Path, outcome: &Outcome) -> Vec<PathBuf> {
    outcome.artifacts.iter().map(|a| out.join(a)).collect()
}

/// Row 0 stores `value` and is the only row driven.
fn single_row(value: i32) -> (Vec<i32>, Vec<bool>) {
    let mut values = vec![0; ROWS_PER_GROUP];
    values[0] = value;
    let mut x = vec![false; ROWS_PER_GROUP];
    x[0] = true;
    (values, x)
}

/// Weight 0b1111_1111 is -1: high nibble -1 (1111), low nibble 15.
const EXAMPLE_NIBBLES: [(BlockKind, i32); 2] = [(BlockKind::H4B, -1), (BlockKind::L4B, 15)];

#[derive(Serialize)]
struct CellCurrentRow {
    variant: &'static str,
    block: BlockKind,
    row: usize,
    bit: u8,
    current_a: f64,
}

#[derive(Serialize)]
struct Fig3Row {
    variant: &'static str,
    block: BlockKind,
    net_current_a: f64,
    expected_a: f64,
    abs_error_a: f64,
    rel_error: f64,
    tia_volts: f64,
    saturated: bool,
}

fn fig3_example(run: &mut Run) -> Result<()> {
    let base = run.cfg.device.curfe();
    let variants: [(&str, NFeFET1RModel, Option<f64>); 3] = [
        (
            "ideal_channel",
            NFeFET1RModel {
                channel_on_resistance: 0.0,
                leakage: false,
                vth_sigma: 0.0,
                ..base
            },
            Some(1e-12),
        ),
        (
            "default_channel",
            NFeFET1RModel {
                leakage: false,
                vth_sigma: 0.0,
                ..base
            },
            None,
        ),
        ("default_channel_leaky", NFeFET1RModel { vth_sigma: 0.0, ..base }, None),
    ];
    let unit = base.bias_voltage / base.ladder_base_resistance;
    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for (variant, device, abs_tol) in variants {
        for (block, value) in EXAMPLE_NIBBLES {
            let (values, x) = single_row(value);
            let b = CurfeBlock::from_values(block, &values, device)?;
            for t in b.trace(&x)?.into_iter().filter(|t| t.row == 0) {
                cells.push(CellCurrentRow {
                    variant,
                    block,
                    row: t.row,
                    bit: t.bit,
                    current_a: t.current,
                });
            }
            let out = evaluate_curfe_block(&b, &x, &run.cfg.tia)?;
            // Ideal currents: -1 and +15 LSB units of Vcm / R_base.
            let expected = f64::from(value) * unit;
            let err = out.net_current - expected;
            let rel = err.abs() / expected.abs();
            match (variant, abs_tol) {
                (_, Some(tol)) => run.check(err.abs() <= tol, || {
                    format!(
                        "fig3 {variant} {}: net current {:e} A, expected {expected:e} A",
                        block.name(),
                        out.net_current
                    )
                }),
                ("default_channel", None) => run.check(rel <= 0.02, || {
                    format!(
                        "fig3 {variant} {}: {:.3}% off the ideal current",
                        block.name(),
                        rel * 100.0
                    )
                }),
                _ => {}
            }
            run.summary.push(format!(
                "{variant} {}: {:.4e} A (expected {:.4e} A, {:+.3}%)",
                block.name(),
                out.net_current,
                expected,
                err / expected.abs() * 100.0
            ));
            rows.push(Fig3Row {
                variant,
                block,
                net_current_a: out.net_current,
                expected_a: expected,
                abs_error_a: err.abs(),
                rel_error: rel,
                tia_volts: out.voltage,
                saturated: out.saturated,
            });
        }
    }
    run.csv("fig3_cells.csv", &cells)?;
    run.csv("fig3_summary.csv", &rows)
}

#[derive(Serialize)]
struct BlTraceRow {
    block: BlockKind,
    phase: &'static str,
    bl0_v: f64,
    bl1_v: f64,
    bl2_v: f64,
    bl3_v: f64,
}

#[derive(Serialize)]
struct Fig5Row {
    block: BlockKind,
    nibble: i32,
    shared_v: f64,
    expected_v: f64,
    abs_error_v: f64,
}

fn fig5_example(run: &mut Run) -> Result<()> {
    let mut device = run.cfg.device.mlc(Polarity::NType);
    device.leakage = false;
    device.vth_sigma = 0.0;
    let transfer = chgfe_transfer(&device, &run.cfg.chgfe);
    let mut traces = Vec::new();
    let mut rows = Vec::new();
    for (block, value) in EXAMPLE_NIBBLES {
        let (values, x) = single_row(value);
        let b = ChgfeBlock::from_values(block, &values, device, run.cfg.chgfe)?;
        for t in trace_chgfe_block(&b, &x)? {
            traces.push(BlTraceRow {
                block,
                phase: t.phase,
                bl0_v: t.voltages[0],
                bl1_v: t.voltages[1],
                bl2_v: t.voltages[2],
                bl3_v: t.voltages[3],
            });
        }
        let out = evaluate_chgfe_block(&b, &x)?;
        let expected = transfer.volts(f64::from(value));
        let err = (out.voltage - expected).abs();
        run.check(err <= 1e-9, || {
            format!(
                "fig5 {}: shared {:.9} V, expected {expected:.9} V",
                block.name(),
                out.voltage
            )
        });
        run.summary.push(format!(
            "{}: shared BL {:.6} V (expected {:.6} V)",
            block.name(),
            out.voltage,
            expected
        ));
        rows.push(Fig5Row {
            block,
            nibble: value,
            shared_v: out.voltage,
            expected_v: expected,
            abs_error_v: err,
        });
    }
    run.csv("fig5_bl_trace.csv", &traces)?;
    run.csv("fig5_summary.csv", &rows)
}

#[derive(Serialize)]
struct HistRow {
    macro_kind: MacroKind,
    bit: u8,
    bin_lo_a: f64,
    bin_hi_a: f64,
    count: usize,
}

fn fig6_hist(run: &mut Run) -> Result<()> {
    let mut profile = run.cfg.device;
    profile.vth_sigma = run.cfg.experiment.sigma;
    let pops = device_current_populations(&profile, run.cfg.experiment.draws, run.seed())?;
    let stats: Vec<_> = pops.iter().map(|p| p.stats()).collect();
    let mut hist = Vec::new();
    for p in &pops {
        for (lo, hi, count) in p.histogram(run.cfg.experiment.bins) {
            hist.push(HistRow {
                macro_kind: p.macro_kind,
                bit: p.bit,
                bin_lo_a: lo,
                bin_hi_a: hi,
                count,
            });
        }
    }
    let rel = |kind: MacroKind, bit: u8| {
        stats
            .iter()
            .find(|s| s.macro_kind == kind && s.bit == bit)
            .map(|s| s.rel_std)
            .expect("population present")
    };
    if profile.vth_sigma > 0.0 {
        for bit in 0..4u8 {
            let (c, q) = (rel(MacroKind::CurFe, bit), rel(MacroKind::ChgFe, bit));
            run.check(c < q, || {
                format!("fig6 bit {bit}: curfe rel std {c:.4} not below chgfe {q:.4}")
            });
            if bit > 0 {
                let prev = rel(MacroKind::ChgFe, bit - 1);
                run.check(q < prev, || {
                    format!(
                        "fig6 chgfe rel std does not fall from bit {} ({prev:.4}) to bit {bit} ({q:.4})",
                        bit - 1
                    )
                });
            }
        }
    }
    for s in &stats {
        run.summary.push(format!(
            "{} bit {}: mean {:.4e} A, rel std {:.3}%",
            s.macro_kind,
            s.bit,
            s.mean,
            s.rel_std * 100.0
        ));
    }
    run.csv("fig6_stats.csv", &stats)?;
    run.csv("fig6_histogram.csv", &hist)
}

#[derive(Serialize)]
struct TransferRow {
    sigma: f64,
    macro_kind: MacroKind,
    block: BlockKind,
    weight: i32,
    active_rows: usize,
    target: i32,
    mean_v: f64,
    std_v: f64,
    mean_value: f64,
    std_value: f64,
}

#[derive(Serialize)]
struct FitRow {
    macro_kind: MacroKind,
    sigma: f64,
    trials: usize,
    r_squared: f64,
}

fn fig8_transfer(run: &mut Run) -> Result<()> {
    let sweep = TransferSweep::full();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let sigma = run.cfg.experiment.sigma;
    let mut per_sigma_points = Vec::new();
    for (s, trials) in [(0.0, 1), (sigma, run.cfg.experiment.trials)] {
        let mut by_kind = Vec::new();
        for kind in MacroKind::ALL {
            let mut cfg = run.cfg.macro_config()?.with_kind(kind);
            cfg.device.vth_sigma = s;
            let points = monte_carlo_transfer(&cfg, &sweep, trials)?;
            let r2 = transfer_r_squared(&points);
            if s == 0.0 {
                run.check(r2 >= 0.9999, || format!("fig8 {kind} σ=0: R² {r2:.6} below 0.9999"));
            } else if kind == MacroKind::CurFe {
                run.check(r2 >= 0.999, || format!("fig8 curfe σ={s}: R² {r2:.6} below 0.999"));
            }
            run.summary
                .push(format!("{kind} σ={s} V, {trials} trials: R² = {r2:.7}"));
            fits.push(FitRow {
                macro_kind: kind,
                sigma: s,
                trials,
                r_squared: r2,
            });
            rows.extend(points.iter().map(|p| TransferRow {
                sigma: s,
                macro_kind: kind,
                block: p.block,
                weight: p.weight,
                active_rows: p.active_rows,
                target: p.target,
                mean_v: p.mean_volts,
                std_v: p.std_volts,
                mean_value: p.mean_value,
                std_value: p.std_value,
            }));
            by_kind.push(points);
        }
        if s > 0.0 {
            per_sigma_points.push(by_kind);
        }
    }
    for pts in per_sigma_points {
        let bad = pts[0]
            .iter()
            .zip(&pts[1])
            .filter(|(c, q)| c.std_value > 0.0 || q.std_value > 0.0)
            .filter(|(c, q)| c.std_value >= q.std_value)
            .count();
        run.check(bad == 0, || {
            format!("fig8: {bad} points where curfe spread is not below chgfe")
        });
    }
    run.csv("fig8_transfer.csv", &rows)?;
    run.csv("fig8_fit.csv", &fits)
}

#[derive(Serialize)]
struct EfficiencyRow {
    macro_kind: MacroKind,
    input_bits: u32,
    weight_bits: u32,
    adc_bits: u32,
    energy_j: f64,
    tops_per_watt: f64,
    latency_s: f64,
}

fn fig7_efficiency(run: &mut Run) -> Result<()> {
    let energy = run.cfg.energy;
    let latency = run.cfg.latency;
    let adc = run.cfg.adc.bits;
    let input_grid = [1u32, 2, 4, 8];
    let weight_grid = [WeightBits::Four, WeightBits::Eight];
    let mut rows = Vec::new();
    for kind in MacroKind::ALL {
        for wb in weight_grid {
            for m in input_grid {
                let e = energy_of_matvec(&energy, kind, m, wb, adc)?;
                rows.push(EfficiencyRow {
                    macro_kind: kind,
                    input_bits: m,
                    weight_bits: wb.bits(),
                    adc_bits: adc,
                    energy_j: e.total,
                    tops_per_watt: e.tops_per_watt()?,
                    latency_s: latency_of_matvec(&latency, kind, m, adc)?,
                });
            }
        }
    }
    let find = |kind: MacroKind, m: u32, w: u32| {
        rows.iter()
            .find(|r| r.macro_kind == kind && r.input_bits == m && r.weight_bits == w)
            .expect("grid point")
    };
    let anchors = CalibrationAnchors::default();
    if energy == EnergyParams::default() && adc == anchors.adc_bits {
        for (kind, target) in [
            (MacroKind::CurFe, anchors.curfe_tops_per_watt),
            (MacroKind::ChgFe, anchors.chgfe_tops_per_watt),
        ] {
            let got = find(kind, 8, 8).tops_per_watt;
            run.check((got - target).abs() / target <= 0.01, || {
                format!("fig7 {kind} 8b/8b: {got:.3} TOPS/W, anchor {target}")
            });
        }
    }
    let mut violations = Vec::new();
    for kind in MacroKind::ALL {
        for w in [4, 8] {
            for pair in input_grid.windows(2) {
                let (a, b) = (find(kind, pair[0], w), find(kind, pair[1], w));
                if b.tops_per_watt > a.tops_per_watt {
                    violations.push(format!(
                        "fig7 {kind} w{w}: efficiency rises from {}b to {}b inputs",
                        pair[0], pair[1]
                    ));
                }
            }
        }
        for m in input_grid {
            if find(kind, m, 8).tops_per_watt > find(kind, m, 4).tops_per_watt {
                violations.push(format!("fig7 {kind} m{m}: efficiency rises from 4b to 8b weights"));
            }
        }
    }
    for m in input_grid {
        for w in [4, 8] {
            let (c, q) = (find(MacroKind::CurFe, m, w), find(MacroKind::ChgFe, m, w));
            if q.tops_per_watt <= c.tops_per_watt {
                violations.push(format!("fig7 {m}b/{w}b: chgfe not more efficient than curfe"));
            }
            if q.latency_s <= c.latency_s {
                violations.push(format!("fig7 {m}b/{w}b: chgfe latency not above curfe"));
            }
        }
    }
    run.violations.extend(violations);
    for kind in MacroKind::ALL {
        let r = find(kind, 8, 8);
        run.summary.push(format!(
            "{kind} 8b/8b at {adc}-bit ADC: {:.3} TOPS/W, {:.1} ns per matvec",
            r.tops_per_watt,
            r.latency_s * 1e9
        ));
    }
    run.csv("fig7_efficiency.csv", &rows)
}

#[derive(Serialize)]
struct AccuracySummaryRow {
    macro_kind: MacroKind,
    sigma: f64,
    adc_bits: u32,
    seeds: u64,
    mean_accuracy: f64,
    min_accuracy: f64,
    max_accuracy: f64,
}

/// Seeds used by multi-seed sweeps.
pub fn sweep_seeds(seed: u64, count: u64) -> Vec<u64> {
    (0..count).map(|k| derive_seed(seed, k)).collect()
}

fn fig9_accuracy(run: &mut Run) -> Result<()> {
    let model = bundled_model()?;
    let (calibration, test) = bundled_datasets()?;
    let exp = &run.cfg.experiment;
    let reference = if exp.calibrated_windows {
        ReferencePolicy::Calibrated
    } else {
        ReferencePolicy::FullSpan
    };
    let seeds = sweep_seeds(run.seed(), exp.seeds);
    let mut sweep = Vec::new();
    for kind in MacroKind::ALL {
        for &bits in &exp.adc_bits_sweep {
            for &seed in &seeds {
                sweep.push(SweepPoint {
                    macro_kind: kind,
                    adc_bits: bits,
                    sigma: 0.0,
                    seed,
                    reference,
                });
            }
        }
        if exp.sigma > 0.0 {
            for &seed in &seeds {
                sweep.push(SweepPoint {
                    macro_kind: kind,
                    adc_bits: run.cfg.adc.bits,
                    sigma: exp.sigma,
                    seed,
                    reference,
                });
            }
        }
    }
    let base = run.cfg.macro_config()?;
    let report = run_inference(&model, &test, &base, &sweep, Some(&calibration))?;

    let mut summary = Vec::new();
    for kind in MacroKind::ALL {
        let mut keys: Vec<(f64, u32)> = Vec::new();
        for p in report.points.iter().filter(|p| p.macro_kind == kind) {
            if !keys.contains(&(p.sigma, p.adc_bits)) {
                keys.push((p.sigma, p.adc_bits));
            }
        }
        for (sigma, bits) in keys {
            let accs: Vec<f64> = report
                .points
                .iter()
                .filter(|p| p.macro_kind == kind && p.sigma == sigma && p.adc_bits == bits)
                .map(|p| p.accuracy)
                .collect();
            summary.push(AccuracySummaryRow {
                macro_kind: kind,
                sigma,
                adc_bits: bits,
                seeds: accs.len() as u64,
                mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                min_accuracy: accs.iter().cloned().fold(f64::INFINITY, f64::min),
                max_accuracy: accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let mean = |kind: MacroKind, sigma: f64, bits: u32| {
        summary
            .iter()
            .find(|r| r.macro_kind == kind && r.sigma == sigma && r.adc_bits == bits)
            .map(|r| r.mean_accuracy)
    };

    let ref_acc = report.reference_accuracy;
    run.summary.push(format!("integer reference accuracy: {:.4}", ref_acc));
    for p in report.points.iter().filter(|p| p.sigma == 0.0 && p.adc_bits == 9) {
        run.check(p.accuracy == ref_acc, || {
            format!(
                "fig9 {} seed {}: 9-bit accuracy {:.4} differs from reference {ref_acc:.4}",
                p.macro_kind, p.seed, p.accuracy
            )
        });
    }
    let mut sorted_bits = exp.adc_bits_sweep.clone();
    sorted_bits.sort_unstable();
    sorted_bits.dedup();
    for kind in MacroKind::ALL {
        let means: Vec<f64> = sorted_bits.iter().filter_map(|&b| mean(kind, 0.0, b)).collect();
        let inversions: Vec<f64> = means.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
        run.check(inversions.len() <= 1 && inversions.iter().all(|&d| d <= 0.005), || {
            format!("fig9 {kind}: accuracy falls with more ADC bits ({inversions:?})")
        });
        if let (Some(a5), Some(a9)) = (mean(kind, 0.0, 5), mean(kind, 0.0, 9)) {
            run.check(a9 - a5 <= 0.02, || {
                format!("fig9 {kind}: 5-bit {a5:.4} more than 2pp below 9-bit {a9:.4}")
            });
        }
        let line: Vec<String> = sorted_bits
            .iter()
            .filter_map(|&b| mean(kind, 0.0, b).map(|a| format!("{b}b {a:.4}")))
            .collect();
        run.summary.push(format!("{kind} σ=0: {}", line.join(", ")));
    }
    if exp.sigma > 0.0 {
        let bits = run.cfg.adc.bits;
        if let (Some(c), Some(q)) = (
            mean(MacroKind::CurFe, exp.sigma, bits),
            mean(MacroKind::ChgFe, exp.sigma, bits),
        ) {
            run.check(c >= q - 0.01, || {
                format!("fig9 σ={}: curfe {c:.4} more than 1pp below chgfe {q:.4}", exp.sigma)
            });
            run.summary
                .push(format!("σ={} V, {bits}-bit ADC: curfe {c:.4}, chgfe {q:.4}", exp.sigma));
        }
    }
    run.csv("fig9_accuracy.csv", &report.points)?;
    run.csv("fig9_summary.csv", &summary)?;
    run.json("fig9_report.json", &report)
}

#[derive(Serialize)]
struct BreakdownRow {
    macro_kind: MacroKind,
    layer: String,
    tiles: u64,
    analog_j: f64,
    adc_j: f64,
    digital_j: f64,
    driver_j: f64,
    total_j: f64,
    latency_s: f64,
}

fn fig10_breakdown(run: &mut Run) -> Result<()> {
    let model = bundled_model()?;
    let schedule = model.schedule();
    let perf = run.cfg.macro_config()?.perf;
    let mut rows = Vec::new();
    for kind in MacroKind::ALL {
        let layers = layer_breakdown(&schedule, &perf, kind, run.cfg.adc.bits)?;
        let (total, latency) = total_of(&layers);
        for l in &layers {
            let e = &l.energy;
            let parts = e.analog + e.adc + e.digital + e.driver;
            run.check((parts - e.total).abs() <= 1e-12 * e.total.abs().max(1e-30), || {
                format!("fig10 {kind} {}: components do not sum to the total", l.name)
            });
            run.check([e.analog, e.adc, e.digital, e.driver].iter().all(|&v| v >= 0.0), || {
                format!("fig10 {kind} {}: negative energy component", l.name)
            });
            rows.push(BreakdownRow {
                macro_kind: kind,
                layer: l.name.clone(),
                tiles: l.tiles,
                analog_j: e.analog,
                adc_j: e.adc,
                digital_j: e.digital,
                driver_j: e.driver,
                total_j: e.total,
                latency_s: l.latency,
            });
        }
        run.summary.push(format!(
            "{kind}: {:.3} pJ and {:.1} ns per inference (adc {:.1}%)",
            total.total * 1e12,
            latency * 1e9,
            total.adc / total.total * 100.0
        ));
        rows.push(BreakdownRow {
            macro_kind: kind,
            layer: "total".into(),
            tiles: layers.iter().map(|l| l.tiles).sum(),
            analog_j: total.analog,
            adc_j: total.adc,
            digital_j: total.digital,
            driver_j: total.driver,
            total_j: total.total,
            latency_s: latency,
        });
    }
    run.csv("fig10_breakdown.csv", &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub macro_kind: MacroKind,
    /// `fills`: 1-bit inputs over random 32-row fills; `matvec`: full
    /// 8-bit × 8-bit matvecs.
    pub part: &'static str,
    pub matvecs: usize,
    /// Compared (bank, row group) block configurations or output columns.
    pub configurations: usize,
    pub mismatches: usize,
    pub max_abs_error: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MismatchRow {
    pub macro_kind: MacroKind,
    pub part: &'static str,
    pub case: usize,
    pub column: usize,
    pub expected: i64,
    pub got: i64,
}

/// Noiseless 9-bit macro configuration used for oracle comparisons.
pub fn lossless_config(cfg: &SimConfig, kind: MacroKind, weight_bits: WeightBits) -> Result<MacroConfig> {
    Ok(MacroConfig {
        adc_bits: 9,
        weight_bits,
        ..cfg.macro_config()?.with_kind(kind).noiseless()
    })
}

/// Compare the simulated macro with the exact integer matvec.
///
/// With `m = 1` each output column sums four independent 32-row fills, so
/// every (bank, group) block configuration is checked on its own as well.
pub fn oracle_compare(
    cfg: &SimConfig,
    kind: MacroKind,
    part: &'static str,
    cases: usize,
    seed: u64,
) -> Result<(OracleRow, Vec<MismatchRow>, [[bool; 16]; 2])> {
    let results = (0..cases)
        .into_par_iter()
        .map(|case| -> Result<_> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, case as u64));
            let (wb, m) = match part {
                "fills" if (16..32).contains(&case) || (case >= 32 && case % 4 == 3) => (WeightBits::Four, 1),
                "fills" => (WeightBits::Eight, 1),
                _ => (WeightBits::Eight, 8),
            };
            let (lo, hi) = wb.range();
            let (weights, x): (Vec<i32>, Vec<u32>) = if part == "fills" && case < 32 {
                // Constant blocks, all rows driven: every nibble value at the
                // extremes of the block range, 8-bit then 4-bit weights.
                let k = (case % 16) as i32;
                let w = match wb {
                    WeightBits::Eight => 16 * (k - 8) + (15 - k),
                    WeightBits::Four => k - 8,
                };
                (vec![w; ROWS * BANKS], vec![1; ROWS])
            } else {
                (
                    (0..ROWS * BANKS).map(|_| rng.random_range(lo..=hi)).collect(),
                    (0..ROWS).map(|_| rng.random_range(0..1u32 << m)).collect(),
                )
            };
            let mac = program_macro(&weights, &lossless_config(cfg, kind, wb)?)?;
            let got = mac.matvec(&x, m)?.outputs;
            let mut seen = [[false; 16]; 2];
            let mut mismatches = Vec::new();
            let mut group_errors = 0usize;
            for g in 0..GROUPS {
                let rows = g * ROWS_PER_GROUP..(g + 1) * ROWS_PER_GROUP;
                for r in rows.clone().filter(|&r| x[r] == 1) {
                    for &w in &weights[r * BANKS..(r + 1) * BANKS] {
                        match wb {
                            WeightBits::Eight => {
                                seen[0][((w >> 4) + 8) as usize] = true;
                                seen[1][(w & 0xF) as usize] = true;
                            }
                            WeightBits::Four => seen[0][(w + 8) as usize] = true,
                        }
                    }
                }
                if m == 1 {
                    // Each (bank, group) block on its own: drive one group only.
                    let mut xg = vec![0u32; ROWS];
                    for r in rows {
                        xg[r] = x[r];
                    }
                    let expect = exact_matvec(&xg, &weights, BANKS)?;
                    let got_g = mac.matvec(&xg, 1)?.outputs;
                    group_errors += expect.iter().zip(&got_g).filter(|(e, g)| **e != i64::from(**g)).count();
                }
            }
            let expect = exact_matvec(&x, &weights, BANKS)?;
            let mut max_err = 0i64;
            for (col, (&e, &g)) in expect.iter().zip(&got).enumerate() {
                let d = (e - i64::from(g)).abs();
                max_err = max_err.max(d);
                if d != 0 {
                    mismatches.push(MismatchRow {
                        macro_kind: kind,
                        part,
                        case,
                        column: col,
                        expected: e,
                        got: i64::from(g),
                    });
                }
            }
            Ok((mismatches, group_errors, max_err, seen))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all = Vec::new();
    let mut group_errors = 0;
    let mut max_abs_error = 0;
    let mut coverage = [[false; 16]; 2];
    for (mm, ge, me, seen) in results {
        all.extend(mm);
        group_errors += ge;
        max_abs_error = max_abs_error.max(me);
        for (c, s) in coverage.iter_mut().zip(seen) {
            for (a, b) in c.iter_mut().zip(s) {
                *a |= b;
            }
        }
    }
    let configurations = if part == "fills" {
        cases * BANKS * GROUPS
    } else {
        cases * BANKS
    };
    Ok((
        OracleRow {
            macro_kind: kind,
            part,
            matvecs: cases,
            configurations,
            mismatches: all.len() + group_errors,
            max_abs_error,
        },
        all,
        coverage,
    ))
}

fn oracle_equiv(run: &mut Run) -> Result<()> {
    let exp = &run.cfg.experiment;
    let fill_cases = exp.fills.div_ceil(BANKS * GROUPS);
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for kind in MacroKind::ALL {
        for (part, cases, tag) in [("fills", fill_cases, 1u64), ("matvec", exp.cases, 2u64)] {
            let (row, mm, coverage) = oracle_compare(run.cfg, kind, part, cases, derive_seed(run.seed(), tag))?;
            if part == "fills" {
                let covered = coverage.iter().all(|c| c.iter().all(|&b| b));
                run.check(covered, || {
                    format!("oracle_equiv {kind}: not every nibble value was exercised")
                });
            }
            run.check(row.mismatches == 0, || {
                format!("oracle_equiv {kind} {part}: {} mismatches", row.mismatches)
            });
            rows.push(row);
            mismatches.extend(mm);
        }
    }
    let total: usize = rows.iter().map(|r| r.mismatches).sum();
    run.summary.push(format!("{total} mismatches"));
    write_mismatches(&run.out.join("oracle_mismatches.csv"), &mismatches)?;
    run.artifacts.push("oracle_mismatches.csv".into());
    run.csv("oracle_equiv.csv", &rows)
}

fn write_mismatches(path: &Path, rows: &[MismatchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["macro_kind", "part", "case", "column", "expected", "got"])?;
    for r in rows {
        w.write_record([
            r.macro_kind.name().to_string(),
            r.part.to_string(),
            r.case.to_string(),
            r.column.to_string(),
            r.expected.to_string(),
            r.got.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Worst-case quantization error of one matvec column for a configuration.
pub fn matvec_error_bound(cfg: &MacroConfig, m: u32) -> Result<f64> {
    let high = cfg.adc(NibbleMode::TwosComplement)?;
    let low = match cfg.weight_bits {
        WeightBits::Eight => Some(cfg.adc(NibbleMode::Unsigned)?),
        WeightBits::Four => None,
    };
    Ok(quantization_error_bound(&high, low.as_ref(), m, GROUPS))
}
