//! Behavioral cell models.
//!
//! Two cell families are modeled:
//!
//! - the resistor-limited 1nFeFET1R cell of the current-mode macro, where a
//!   binary-weighted drain resistor ladder sets the ON current, and
//! - the square-law 1nFeFET (MLC) / 1pFeFET (SLC) cells of the charge-mode
//!   macro, where the programmed threshold sets a binary-weighted saturation
//!   current.
//!
//! Threshold-voltage variation is drawn from a counter-based generator keyed
//! by `(seed, row, col)` so any cell can be resampled in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cells per nibble (bit positions 0..=3).
pub const NIBBLE_WIDTH: usize = 4;

/// Bit position of the sign cell inside a high-nibble block.
pub const SIGN_POSITION: u8 = 3;

fn check_bit(bit_position: u8) -> Result<()> {
    if bit_position as usize >= NIBBLE_WIDTH {
        return Err(Error::Config(format!(
            "bit position {bit_position} outside 0..{NIBBLE_WIDTH}"
        )));
    }
    Ok(())
}

/// Channel type of a FeFET.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    NType,
    PType,
}

/// One programmed cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellState {
    pub stored_bit: bool,
    /// Sampled threshold deviation (V).
    pub vth_deviation: f64,
}

/// 1nFeFET1R cell: FeFET channel in series with a binary-weighted drain
/// resistor. The ON current is dominated by the resistor, which is what
/// suppresses threshold variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NFeFET1RModel {
    /// Sign-cell source-line supply `VDD_i` (V).
    pub supply_voltage: f64,
    /// TIA virtual-ground bias `Vcm` (V).
    pub bias_voltage: f64,
    /// Drain resistance of the bit-0 cell (Ω). Bit j uses base / 2^j.
    pub ladder_base_resistance: f64,
    /// ON channel resistance of the bit-0 FeFET at nominal threshold (Ω).
    pub channel_on_resistance: f64,
    /// Relative channel-resistance change per volt of threshold shift (1/V).
    pub channel_resistance_sensitivity: f64,
    /// Threshold standard deviation (V).
    pub vth_sigma: f64,
    pub on_off_ratio: f64,
    /// Whether OFF cells contribute `nominal / on_off_ratio` leakage.
    pub leakage: bool,
}

impl Default for NFeFET1RModel {
    fn default() -> Self {
        Self {
            supply_voltage: 1.0,
            bias_voltage: 0.5,
            ladder_base_resistance: 5.0e6,
            channel_on_resistance: 1.0e5,
            channel_resistance_sensitivity: 2.0,
            vth_sigma: 0.040,
            on_off_ratio: 1.0e5,
            leakage: true,
        }
    }
}

impl NFeFET1RModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.supply_voltage > self.bias_voltage && self.bias_voltage > 0.0) {
            return Err(Error::Config("curfe requires supply_voltage > bias_voltage > 0".into()));
        }
        if !(self.ladder_base_resistance > 0.0) || !(self.channel_on_resistance >= 0.0) {
            return Err(Error::Config(
                "curfe resistances must be positive (channel may be 0)".into(),
            ));
        }
        if !(self.vth_sigma >= 0.0) || !(self.on_off_ratio > 1.0) {
            return Err(Error::Config(
                "curfe requires vth_sigma >= 0 and on_off_ratio > 1".into(),
            ));
        }
        Ok(())
    }

    /// Drain-ladder resistance for a nibble bit position.
    pub fn ladder_resistance(&self, bit_position: u8) -> Result<f64> {
        check_bit(bit_position)?;
        Ok(self.ladder_base_resistance / f64::from(1u32 << bit_position))
    }

    /// LSB current `Vcm / (R_base + r_ch)`; bit j nominally conducts 2^j of it.
    pub fn unit_current(&self) -> f64 {
        self.bias_voltage / (self.ladder_base_resistance + self.channel_on_resistance)
    }

    /// Voltage across the cell: BL sits at `Vcm`; ordinary cells have SL
    /// grounded, the sign cell has SL at `VDD_i`.
    fn drive(&self, is_sign_position: bool) -> f64 {
        if is_sign_position {
            self.supply_voltage - self.bias_voltage
        } else {
            self.bias_voltage
        }
    }

    /// Signed ON current for a conducting cell.
    ///
    /// The bit-j FeFET is sized 2^j wider than bit 0, so its channel
    /// resistance scales with the ladder and the ratios stay exact.
    pub fn on_current(&self, bit_position: u8, is_sign_position: bool, vth_deviation: f64) -> Result<f64> {
        let ladder = self.ladder_resistance(bit_position)?;
        let r_ch = (self.channel_on_resistance * (1.0 + self.channel_resistance_sensitivity * vth_deviation)).max(0.0)
            / f64::from(1u32 << bit_position);
        let magnitude = self.drive(is_sign_position) / (ladder + r_ch);
        Ok(if is_sign_position { -magnitude } else { magnitude })
    }

    fn off_current(&self, bit_position: u8, is_sign_position: bool) -> Result<f64> {
        if !self.leakage {
            return Ok(0.0);
        }
        Ok(self.on_current(bit_position, is_sign_position, 0.0)? / self.on_off_ratio)
    }
}

/// Signed cell current (A) of a current-mode cell for one input bit.
pub fn cell_current_curfe(
    model: &NFeFET1RModel,
    bit_position: u8,
    is_sign_position: bool,
    stored_bit: bool,
    input_bit: bool,
    vth_deviation: f64,
) -> Result<f64> {
    if stored_bit && input_bit {
        model.on_current(bit_position, is_sign_position, vth_deviation)
    } else {
        model.off_current(bit_position, is_sign_position)
    }
}

/// Saturation-region FeFET used by the charge-mode macro.
///
/// Bit j is programmed to overdrive `base_overdrive · 2^(j/2)` so that
/// `K · Vov²` doubles per bit. The p-type sign cell reuses the bit-3
/// overdrive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlcFeFETModel {
    /// `K` in `I = K · Vov²` (A/V²).
    pub transconductance: f64,
    /// Overdrive of the bit-0 state (V).
    pub base_overdrive: f64,
    pub vth_sigma: f64,
    pub on_off_ratio: f64,
    pub polarity: Polarity,
    pub leakage: bool,
}

impl Default for MlcFeFETModel {
    fn default() -> Self {
        // 100 nA at 0.4 V overdrive: same LSB current as the current-mode cell
        Self::with_unit_current(100e-9, 0.4)
    }
}

impl MlcFeFETModel {
    /// n-type model whose bit-0 nominal current is `unit_current`.
    pub fn with_unit_current(unit_current: f64, base_overdrive: f64) -> Self {
        Self {
            transconductance: unit_current / (base_overdrive * base_overdrive),
            base_overdrive,
            vth_sigma: 0.040,
            on_off_ratio: 1.0e5,
            polarity: Polarity::NType,
            leakage: true,
        }
    }

    pub fn with_polarity(self, polarity: Polarity) -> Self {
        Self { polarity, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transconductance > 0.0) || !(self.base_overdrive > 0.0) {
            return Err(Error::Config(
                "chgfe transconductance and base_overdrive must be positive".into(),
            ));
        }
        if !(self.vth_sigma >= 0.0) || !(self.on_off_ratio > 1.0) {
            return Err(Error::Config(
                "chgfe requires vth_sigma >= 0 and on_off_ratio > 1".into(),
            ));
        }
        Ok(())
    }

    pub fn overdrive(&self, bit_position: u8) -> Result<f64> {
        check_bit(bit_position)?;
        Ok(self.base_overdrive * 2f64.powf(f64::from(bit_position) / 2.0))
    }

    pub fn unit_current(&self) -> f64 {
        self.transconductance * self.base_overdrive * self.base_overdrive
    }

    /// Saturation current magnitude and whether the device was pushed out of
    /// conduction by its threshold shift.
    pub fn saturation_current(&self, bit_position: u8, vth_deviation: f64) -> Result<(f64, bool)> {
        let sign = match self.polarity {
            Polarity::NType => -1.0,
            Polarity::PType => 1.0,
        };
        let vov = self.overdrive(bit_position)? + sign * vth_deviation;
        if vov <= 0.0 {
            return Ok((0.0, true));
        }
        Ok((self.transconductance * vov * vov, false))
    }
}

/// BL voltage change of one charge-mode cell during evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChgfeCellResponse {
    /// Signed ΔV (V); positive for the sign cell, negative otherwise.
    pub delta_v: f64,
    /// Threshold shift drove the overdrive to zero or below; current clamped.
    pub degenerate: bool,
}

/// Constant-current BL swing `s · I · t_eval / C_BL` of a charge-mode cell.
#[allow(clippy::too_many_arguments)]
pub fn cell_delta_v_chgfe(
    model: &MlcFeFETModel,
    bit_position: u8,
    is_sign_position: bool,
    stored_bit: bool,
    input_bit: bool,
    vth_deviation: f64,
    eval_time: f64,
    bl_capacitance: f64,
) -> Result<ChgfeCellResponse> {
    if !(eval_time > 0.0) || !(bl_capacitance > 0.0) {
        return Err(Error::Config("eval_time and bl_capacitance must be positive".into()));
    }
    let direction = if is_sign_position { 1.0 } else { -1.0 };
    let (current, degenerate) = if stored_bit && input_bit {
        model.saturation_current(bit_position, vth_deviation)?
    } else if model.leakage {
        let (nominal, _) = model.saturation_current(bit_position, 0.0)?;
        (nominal / model.on_off_ratio, false)
    } else {
        (0.0, false)
    };
    Ok(ChgfeCellResponse {
        delta_v: direction * current * eval_time / bl_capacitance,
        degenerate,
    })
}

/// A threshold deviation together with the key that reproduces it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VthSample {
    pub deviation: f64,
    pub seed: u64,
    pub row: u32,
    pub col: u32,
}

/// Gaussian threshold deviation keyed by `(seed, row, col)`.
///
/// Each cell owns one ChaCha stream, so draws do not depend on evaluation
/// order or thread count.
pub fn sample_vth(seed: u64, coords: (u32, u32), sigma: f64) -> Result<VthSample> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("vth sigma must be >= 0, got {sigma}")));
    }
    let (row, col) = coords;
    let deviation = if sigma == 0.0 {
        0.0
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((u64::from(row) << 32) | u64::from(col));
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    };
    Ok(VthSample {
        deviation,
        seed,
        row,
        col,
    })
}

/// Derive an independent seed for a sub-experiment (e.g. a Monte Carlo trial).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `[device]` config section: everything needed to build both cell models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceProfile {
    pub supply_voltage: f64,
    pub bias_voltage: f64,
    pub ladder_base_resistance: f64,
    pub channel_on_resistance: f64,
    pub channel_resistance_sensitivity: f64,
    pub vth_sigma: f64,
    pub on_off_ratio: f64,
    /// Charge-mode bit-0 nominal ON current (A).
    pub mlc_unit_current: f64,
    pub base_overdrive: f64,
    pub leakage: bool,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        let curfe = NFeFET1RModel::default();
        Self {
            supply_voltage: curfe.supply_voltage,
            bias_voltage: curfe.bias_voltage,
            ladder_base_resistance: curfe.ladder_base_resistance,
            channel_on_resistance: curfe.channel_on_resistance,
            channel_resistance_sensitivity: curfe.channel_resistance_sensitivity,
            vth_sigma: curfe.vth_sigma,
            on_off_ratio: curfe.on_off_ratio,
            mlc_unit_current: 100e-9,
            base_overdrive: 0.4,
            leakage: true,
        }
    }
}

impl DeviceProfile {
    pub fn curfe(&self) -> NFeFET1RModel {
        NFeFET1RModel {
            supply_voltage: self.supply_voltage,
            bias_voltage: self.bias_voltage,
            ladder_base_resistance: self.ladder_base_resistance,
            channel_on_resistance: self.channel_on_resistance,
            channel_resistance_sensitivity: self.channel_resistance_sensitivity,
            vth_sigma: self.vth_sigma,
            on_off_ratio: self.on_off_ratio,
            leakage: self.leakage,
        }
    }

    pub fn mlc(&self, polarity: Polarity) -> MlcFeFETModel {
        MlcFeFETModel {
            vth_sigma: self.vth_sigma,
            on_off_ratio: self.on_off_ratio,
            polarity,
            leakage: self.leakage,
            ..MlcFeFETModel::with_unit_current(self.mlc_unit_current, self.base_overdrive)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.curfe().validate()?;
        if !(self.mlc_unit_current > 0.0) {
            return Err(Error::Config("mlc_unit_current must be positive".into()));
        }
        self.mlc(Polarity::NType).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_curfe() -> NFeFET1RModel {
        NFeFET1RModel {
            channel_on_resistance: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn curfe_lsb_current() {
        let m = NFeFET1RModel::default();
        let i = cell_current_curfe(&m, 0, false, true, true, 0.0).unwrap();
        assert!((i - 0.5 / 5.1e6).abs() < 1e-15);
        assert!((i - 98.0e-9).abs() < 0.1e-9);
        let i = cell_current_curfe(&ideal_curfe(), 0, false, true, true, 0.0).unwrap();
        assert!((i - 100e-9).abs() < 1e-18);
    }

    #[test]
    fn curfe_sign_cell_is_negative_eightfold() {
        let i = cell_current_curfe(&ideal_curfe(), 3, true, true, true, 0.0).unwrap();
        assert!((i + 800e-9).abs() < 1e-18);
    }

    #[test]
    fn curfe_ratios_are_binary() {
        let m = NFeFET1RModel::default();
        let i0 = m.on_current(0, false, 0.0).unwrap();
        for j in 0..4u8 {
            let ij = m.on_current(j, false, 0.0).unwrap();
            assert!((ij / i0 - f64::from(1u32 << j)).abs() < 1e-12);
        }
    }

    #[test]
    fn curfe_off_state_leaks() {
        let m = NFeFET1RModel::default();
        for j in 0..4u8 {
            let nominal = m.on_current(j, false, 0.0).unwrap();
            let w0 = cell_current_curfe(&m, j, false, false, true, 0.0).unwrap();
            let x0 = cell_current_curfe(&m, j, false, true, false, 0.0).unwrap();
            assert_eq!(w0, nominal / 1e5);
            assert_eq!(x0, nominal / 1e5);
        }
        let quiet = NFeFET1RModel {
            leakage: false,
            ..Default::default()
        };
        assert_eq!(cell_current_curfe(&quiet, 2, false, false, true, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_bit_position_rejected() {
        let m = NFeFET1RModel::default();
        assert!(matches!(
            cell_current_curfe(&m, 4, false, true, true, 0.0),
            Err(Error::Config(_))
        ));
        let mlc = MlcFeFETModel::default();
        assert!(cell_delta_v_chgfe(&mlc, 7, false, true, true, 0.0, 0.5e-9, 50e-15).is_err());
    }

    #[test]
    fn chgfe_unit_swing() {
        let m = MlcFeFETModel::default();
        let r = cell_delta_v_chgfe(&m, 0, false, true, true, 0.0, 0.5e-9, 50e-15).unwrap();
        assert!((r.delta_v + 1.0e-3).abs() < 1e-15);
        assert!(!r.degenerate);
    }

    #[test]
    fn chgfe_sign_cell_charges() {
        let p = MlcFeFETModel::default().with_polarity(Polarity::PType);
        let r = cell_delta_v_chgfe(&p, 3, true, true, true, 0.0, 0.5e-9, 50e-15).unwrap();
        assert!((r.delta_v - 8.0e-3).abs() < 1e-15);
    }

    #[test]
    fn chgfe_ratios_and_leakage() {
        let m = MlcFeFETModel::default();
        for j in 0..4u8 {
            let on = cell_delta_v_chgfe(&m, j, false, true, true, 0.0, 0.5e-9, 50e-15).unwrap();
            assert!((on.delta_v / -1e-3 - f64::from(1u32 << j)).abs() < 1e-12);
            let off = cell_delta_v_chgfe(&m, j, false, false, true, 0.0, 0.5e-9, 50e-15).unwrap();
            assert!((off.delta_v - on.delta_v / 1e5).abs() < 1e-20);
        }
    }

    #[test]
    fn chgfe_rejects_bad_timing() {
        let m = MlcFeFETModel::default();
        assert!(cell_delta_v_chgfe(&m, 0, false, true, true, 0.0, 0.0, 50e-15).is_err());
        assert!(cell_delta_v_chgfe(&m, 0, false, true, true, 0.0, 0.5e-9, -1.0).is_err());
    }

    #[test]
    fn chgfe_degenerate_device_clamps() {
        let m = MlcFeFETModel::default();
        let r = cell_delta_v_chgfe(&m, 0, false, true, true, 0.5, 0.5e-9, 50e-15).unwrap();
        assert_eq!(r.delta_v, 0.0);
        assert!(r.degenerate);
        // p-type: a negative shift reduces overdrive
        let p = m.with_polarity(Polarity::PType);
        let r = cell_delta_v_chgfe(&p, 3, true, true, true, -2.0, 0.5e-9, 50e-15).unwrap();
        assert!(r.degenerate);
    }

    #[test]
    fn sample_vth_zero_sigma_and_replay() {
        assert_eq!(sample_vth(7, (0, 0), 0.0).unwrap().deviation, 0.0);
        let a = sample_vth(7, (0, 0), 0.040).unwrap();
        let b = sample_vth(7, (0, 0), 0.040).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.deviation, sample_vth(7, (0, 1), 0.040).unwrap().deviation);
        assert_ne!(a.deviation, sample_vth(8, (0, 0), 0.040).unwrap().deviation);
        assert!(sample_vth(7, (0, 0), -1.0).is_err());
    }

    #[test]
    fn sample_vth_std_within_bound() {
        // sd(s) ≈ σ/√(2n) = 0.0894 mV at n = 1e5; ±0.8 mV is ~9 sd
        let n = 100_000u32;
        let draws: Vec<f64> = (0..n)
            .map(|k| sample_vth(11, (k / 1000, k % 1000), 0.040).unwrap().deviation)
            .collect();
        let mean = draws.iter().sum::<f64>() / f64::from(n);
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / f64::from(n - 1);
        let sd = var.sqrt();
        assert!((0.0392..=0.0408).contains(&sd), "sd = {sd}");
        assert!(mean.abs() < 0.001);
    }

    #[test]
    fn profile_builds_default_models() {
        let p = DeviceProfile::default();
        assert_eq!(p.curfe(), NFeFET1RModel::default());
        assert_eq!(p.mlc(Polarity::NType), MlcFeFETModel::default());
        p.validate().unwrap();
    }
}
