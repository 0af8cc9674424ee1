//! TOML run configuration with `section.key=value` overrides.
//!
//! Every section is optional and every missing key takes its default, so an
//! empty file is a valid configuration. Problems are reported against the
//! line of the offending key where it can be found.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chgfe::ChgfeParams;
use crate::curfe::TiaConfig;
use crate::device::DeviceProfile;
use crate::encoding::WeightBits;
use crate::error::{Error, Result};
use crate::macro_engine::MacroConfig;
use crate::perf::{EnergyParams, LatencyParams, PerfParams};
use crate::MacroKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroSection {
    pub rows: usize,
    pub cols: usize,
    pub banks: usize,
    pub rows_per_group: usize,
    pub kind: MacroKind,
    pub weight_bits: u32,
    pub seed: u64,
}

impl Default for MacroSection {
    fn default() -> Self {
        let m = MacroConfig::default();
        Self {
            rows: m.rows,
            cols: m.cols,
            banks: m.banks,
            rows_per_group: m.rows_per_group,
            kind: m.kind,
            weight_bits: m.weight_bits.bits(),
            seed: m.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdcSection {
    pub bits: u32,
}

impl Default for AdcSection {
    fn default() -> Self {
        Self { bits: 5 }
    }
}

/// Sizes and sweep ranges used by the experiment runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Monte Carlo trials per transfer-curve point.
    pub trials: usize,
    /// Device draws per current population.
    pub draws: usize,
    pub bins: usize,
    /// Seeds averaged in the accuracy sweep.
    pub seeds: u64,
    /// Random full-matrix cases in the oracle comparison.
    pub cases: usize,
    /// Random 32-row fills in the oracle comparison.
    pub fills: usize,
    /// Threshold-voltage spread used by variation experiments (V).
    pub sigma: f64,
    pub adc_bits_sweep: Vec<u32>,
    /// Narrow the ADC span to calibrated per-layer windows in the accuracy
    /// sweep.
    pub calibrated_windows: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: 60,
            draws: 10_000,
            bins: 40,
            seeds: 5,
            cases: 200,
            fills: 10_240,
            sigma: 0.04,
            adc_bits_sweep: (3..=9).collect(),
            calibrated_windows: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "macro")]
    pub macro_: MacroSection,
    pub adc: AdcSection,
    pub device: DeviceProfile,
    pub tia: TiaConfig,
    pub chgfe: ChgfeParams,
    pub energy: EnergyParams,
    pub latency: LatencyParams,
    pub experiment: ExperimentSection,
}

impl SimConfig {
    pub fn macro_config(&self) -> Result<MacroConfig> {
        Ok(MacroConfig {
            rows: self.macro_.rows,
            cols: self.macro_.cols,
            banks: self.macro_.banks,
            rows_per_group: self.macro_.rows_per_group,
            kind: self.macro_.kind,
            adc_bits: self.adc.bits,
            weight_bits: WeightBits::try_from(self.macro_.weight_bits).map_err(Error::Config)?,
            seed: self.macro_.seed,
            device: self.device,
            tia: self.tia,
            chgfe: self.chgfe,
            perf: PerfParams {
                energy: self.energy,
                latency: self.latency,
            },
        })
    }

    /// Range and geometry checks; each failure names its `section.key`.
    pub fn check(&self) -> std::result::Result<(), (String, String)> {
        let fail = |key: &str, msg: String| Err((key.to_string(), msg));
        let m = MacroConfig::default();
        for (key, got, want) in [
            ("macro.rows", self.macro_.rows, m.rows),
            ("macro.cols", self.macro_.cols, m.cols),
            ("macro.banks", self.macro_.banks, m.banks),
            ("macro.rows_per_group", self.macro_.rows_per_group, m.rows_per_group),
        ] {
            if got != want {
                return fail(key, format!("geometry: must be {want}, got {got}"));
            }
        }
        if let Err(e) = WeightBits::try_from(self.macro_.weight_bits) {
            return fail("macro.weight_bits", e);
        }
        let max = crate::readout::MAX_ADC_BITS;
        if !(1..=max).contains(&self.adc.bits) {
            return fail(
                "adc.bits",
                format!("out of range: must be in 1..={max}, got {}", self.adc.bits),
            );
        }
        let e = &self.experiment;
        for (key, v) in [
            ("experiment.trials", e.trials),
            ("experiment.draws", e.draws),
            ("experiment.bins", e.bins),
            ("experiment.seeds", e.seeds as usize),
            ("experiment.cases", e.cases),
            ("experiment.fills", e.fills),
        ] {
            if v == 0 {
                return fail(key, "out of range: must be at least 1".into());
            }
        }
        if !(e.sigma >= 0.0 && e.sigma.is_finite()) {
            return fail(
                "experiment.sigma",
                format!("out of range: must be non-negative, got {}", e.sigma),
            );
        }
        if e.adc_bits_sweep.is_empty() {
            return fail("experiment.adc_bits_sweep", "must list at least one resolution".into());
        }
        if let Some(b) = e.adc_bits_sweep.iter().find(|b| !(1..=max).contains(*b)) {
            return fail(
                "experiment.adc_bits_sweep",
                format!("out of range: {b} outside 1..={max}"),
            );
        }
        let section = |name: &str, r: Result<()>| r.map_err(|e| (name.to_string(), e.to_string()));
        section("device", self.device.validate())?;
        section("tia", self.tia.validate())?;
        section("chgfe", self.chgfe.validate())?;
        section("energy", self.energy.validate())?;
        section("latency", self.latency.validate())?;
        let mc = self.macro_config().map_err(|e| ("macro".to_string(), e.to_string()))?;
        if let Err(err) = mc.validate() {
            return fail("tia.bias_voltage", err.to_string());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse `text` (read from `path`), apply overrides in order and validate.
pub fn resolve(path: &str, text: &str, overrides: &[String]) -> Result<SimConfig> {
    // First pass on the file alone so parse errors carry the file's spans.
    toml::from_str::<SimConfig>(text).map_err(|e| Error::Parse {
        path: path.to_string(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().trim().to_string(),
    })?;
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_string(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().trim().to_string(),
    })?;
    for (k, ov) in overrides.iter().enumerate() {
        let bad = |message: String| Error::Parse {
            path: "--override".into(),
            line: k + 1,
            message,
        };
        apply_override(&mut table, ov).map_err(bad)?;
    }
    let cfg: SimConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse {
            path: "--override".into(),
            line: 1,
            message: e.message().trim().to_string(),
        })?;
    if let Err((key, message)) = cfg.check() {
        if let Some(k) = overrides
            .iter()
            .rposition(|o| o.split('=').next().map(str::trim) == Some(&key))
        {
            return Err(Error::Parse {
                path: "--override".into(),
                line: k + 1,
                message: format!("{key}: {message}"),
            });
        }
        return Err(Error::Parse {
            path: path.to_string(),
            line: locate_key(text, &key).unwrap_or(1),
            message: format!("{key}: {message}"),
        });
    }
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[String]) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    resolve(&path.display().to_string(), &text, overrides)
}

/// Apply `section.key=value`; the value is read as a TOML literal and falls
/// back to a bare string.
pub fn apply_override(table: &mut toml::Table, ov: &str) -> std::result::Result<(), String> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| format!("override `{ov}` is not key=value"))?;
    let (key, raw) = (key.trim(), raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override key `{key}` must be section.key"));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let section = table
        .entry(parts[0])
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match section {
        toml::Value::Table(t) => {
            t.insert(parts[1].to_string(), value);
            Ok(())
        }
        _ => Err(format!("`{}` is not a section", parts[0])),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `section.key` in `text`, or of the section header when only a
/// section is named.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s, Some(f)),
        None => (key, None),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            if field.is_none() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if let (Some(f), true) = (field, current == section) {
            if l.split('=').next().map(str::trim) == Some(f) {
                return Some(i + 1);
            }
        }
    }
    None
}
