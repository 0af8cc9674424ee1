//! Behavioral 2CM / N2CM SAR ADCs.
//!
//! Conversion works on the value axis: the analog voltage is mapped back to
//! a nibble dot-product estimate through the block's affine transfer, rounded
//! to an integer, then uniformly quantized (mid-tread, value 0 → code 0).
//!
//! The reference bank sets a full-scale value per ADC:
//!
//! - N2CM covers `[0, fs]` with `2^b − 1` steps; default `fs = 15 · rows`.
//! - 2CM covers `[−fs, 7/8 · fs]` with LSB `fs / 2^(b−1)`; default
//!   `fs = 8 · rows`, so the most negative sum lands on code `−2^(b−1)`.
//!
//! A smaller full scale (a calibrated window) trades range for resolution.

use serde::{Deserialize, Serialize};

use crate::encoding::NibbleMode;
use crate::error::{Error, Result};
use crate::{AnalogTransfer, MacroKind};

/// Whether a larger value gives a larger voltage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdcPolarity {
    Direct,
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub mode: NibbleMode,
    pub bits: u32,
    /// Lower reference voltage (V).
    pub v_ref_low: f64,
    /// Upper reference voltage (V).
    pub v_ref_high: f64,
    pub polarity: AdcPolarity,
    pub rows_active: u32,
    /// Full-scale magnitude on the value axis.
    pub full_scale: f64,
}

/// One conversion result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcCode {
    pub code: i32,
    /// The input lay outside the reference span.
    pub clipped: bool,
}

pub const MAX_ADC_BITS: u32 = 12;

/// Full-span full scale for a mode and active-row count.
pub fn default_full_scale(mode: NibbleMode, rows_active: u32) -> f64 {
    match mode {
        NibbleMode::TwosComplement => 8.0 * f64::from(rows_active),
        NibbleMode::Unsigned => 15.0 * f64::from(rows_active),
    }
}

/// Build the ADC configuration the reference bank would generate for a
/// macro's affine transfer, covering the full legal value span.
pub fn make_reference(
    mode: NibbleMode,
    bits: u32,
    rows_active: u32,
    kind: MacroKind,
    transfer: AnalogTransfer,
) -> Result<AdcConfig> {
    make_windowed_reference(
        mode,
        bits,
        rows_active,
        kind,
        transfer,
        default_full_scale(mode, rows_active),
    )
}

/// Like [`make_reference`] but with an explicit (typically calibrated,
/// narrower) full scale.
pub fn make_windowed_reference(
    mode: NibbleMode,
    bits: u32,
    rows_active: u32,
    kind: MacroKind,
    transfer: AnalogTransfer,
    full_scale: f64,
) -> Result<AdcConfig> {
    if !(1..=MAX_ADC_BITS).contains(&bits) {
        return Err(Error::Config(format!("adc bits {bits} outside 1..={MAX_ADC_BITS}")));
    }
    if rows_active == 0 {
        return Err(Error::Config("rows_active must be at least 1".into()));
    }
    if !(full_scale > 0.0) || !full_scale.is_finite() {
        return Err(Error::Config(format!(
            "adc full scale must be positive, got {full_scale}"
        )));
    }
    if !(transfer.volts_per_unit != 0.0) || !transfer.volts_per_unit.is_finite() {
        return Err(Error::Config("analog transfer has zero gain".into()));
    }
    let polarity = match kind {
        MacroKind::CurFe => AdcPolarity::Direct,
        MacroKind::ChgFe => AdcPolarity::Inverted,
    };
    if (polarity == AdcPolarity::Direct) != (transfer.volts_per_unit > 0.0) {
        return Err(Error::Config(format!(
            "{kind} transfer gain {} has the wrong sign",
            transfer.volts_per_unit
        )));
    }
    let mut cfg = AdcConfig {
        mode,
        bits,
        v_ref_low: 0.0,
        v_ref_high: 0.0,
        polarity,
        rows_active,
        full_scale,
    };
    let a = transfer.volts(cfg.value_min());
    let b = transfer.volts(cfg.value_max());
    cfg.v_ref_low = a.min(b);
    cfg.v_ref_high = a.max(b);
    Ok(cfg)
}

impl AdcConfig {
    pub fn value_min(&self) -> f64 {
        match self.mode {
            NibbleMode::TwosComplement => -self.full_scale,
            NibbleMode::Unsigned => 0.0,
        }
    }

    pub fn value_max(&self) -> f64 {
        match self.mode {
            NibbleMode::TwosComplement => self.full_scale * 7.0 / 8.0,
            NibbleMode::Unsigned => self.full_scale,
        }
    }

    pub fn code_range(&self) -> (i32, i32) {
        match self.mode {
            NibbleMode::TwosComplement => (-(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1),
            NibbleMode::Unsigned => (0, (1 << self.bits) - 1),
        }
    }

    /// Code steps spanning `full_scale`.
    fn levels(&self) -> f64 {
        match self.mode {
            NibbleMode::TwosComplement => f64::from(1u32 << (self.bits - 1)),
            NibbleMode::Unsigned => f64::from((1u32 << self.bits) - 1),
        }
    }

    /// Quantization step on the value axis.
    pub fn lsb(&self) -> f64 {
        self.full_scale / self.levels()
    }

    /// Worst-case `|dequantize(convert(v)) − value|` for in-span inputs.
    pub fn error_bound(&self) -> f64 {
        self.lsb() / 2.0 + 0.5
    }

    /// Integer values survive a round trip unchanged.
    pub fn is_lossless(&self) -> bool {
        self.lsb() <= 1.0
    }

    /// Value estimate of an analog voltage (before rounding).
    pub fn value_of(&self, volts: f64) -> f64 {
        let frac = (volts - self.v_ref_low) / (self.v_ref_high - self.v_ref_low);
        let span = self.value_max() - self.value_min();
        match self.polarity {
            AdcPolarity::Direct => self.value_min() + frac * span,
            AdcPolarity::Inverted => self.value_max() - frac * span,
        }
    }

    /// Quantize an integer value estimate (the digital half of [`convert`]).
    pub fn quantize_value(&self, value: f64) -> AdcCode {
        let tol = 1e-9 * self.full_scale.max(1.0);
        let clipped = value < self.value_min() - tol || value > self.value_max() + tol;
        let (lo, hi) = self.code_range();
        let code = (value * self.levels() / self.full_scale)
            .round()
            .clamp(f64::from(lo), f64::from(hi));
        AdcCode {
            code: code as i32,
            clipped,
        }
    }
}

/// Convert an analog block output into an ADC code.
pub fn convert(volts: f64, cfg: &AdcConfig) -> Result<AdcCode> {
    if !volts.is_finite() {
        return Err(Error::Conversion(format!("non-finite input voltage {volts}")));
    }
    Ok(cfg.quantize_value(cfg.value_of(volts).round()))
}

/// Integer value estimate represented by a code.
pub fn dequantize(code: AdcCode, cfg: &AdcConfig) -> i32 {
    (f64::from(code.code) * cfg.full_scale / cfg.levels()).round() as i32
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: f64 = 0.4 / 480.0;

    fn curfe() -> AnalogTransfer {
        AnalogTransfer {
            offset: 0.5,
            volts_per_unit: U,
        }
    }

    fn chgfe() -> AnalogTransfer {
        AnalogTransfer {
            offset: 1.5,
            volts_per_unit: -1e-3 / 4.0,
        }
    }

    #[test]
    fn curfe_n2cm_span() {
        let c = make_reference(NibbleMode::Unsigned, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        assert!((c.v_ref_low - 0.5).abs() < 1e-12);
        assert!((c.v_ref_high - (0.5 + 480.0 * U)).abs() < 1e-12);
        assert_eq!(c.polarity, AdcPolarity::Direct);
    }

    #[test]
    fn curfe_2cm_span() {
        let c = make_reference(NibbleMode::TwosComplement, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        assert!((c.v_ref_low - (0.5 - 256.0 * U)).abs() < 1e-12);
        assert!((c.v_ref_high - (0.5 + 224.0 * U)).abs() < 1e-12);
    }

    #[test]
    fn chgfe_n2cm_span_is_inverted() {
        let c = make_reference(NibbleMode::Unsigned, 5, 32, MacroKind::ChgFe, chgfe()).unwrap();
        assert!((c.v_ref_low - (1.5 - 480.0 * 1e-3 / 4.0)).abs() < 1e-12);
        assert!((c.v_ref_high - 1.5).abs() < 1e-12);
        assert_eq!(c.polarity, AdcPolarity::Inverted);
    }

    #[test]
    fn wrong_gain_sign_rejected() {
        assert!(make_reference(NibbleMode::Unsigned, 5, 32, MacroKind::ChgFe, curfe()).is_err());
        assert!(make_reference(NibbleMode::Unsigned, 0, 32, MacroKind::CurFe, curfe()).is_err());
    }

    #[test]
    fn midpoint_code() {
        for bits in 1..=12 {
            for (kind, t) in [(MacroKind::CurFe, curfe()), (MacroKind::ChgFe, chgfe())] {
                let c = make_reference(NibbleMode::Unsigned, bits, 32, kind, t).unwrap();
                let mid = (c.v_ref_low + c.v_ref_high) / 2.0;
                let expect = (f64::from((1u32 << bits) - 1) / 2.0).round() as i32;
                assert_eq!(convert(mid, &c).unwrap().code, expect, "bits {bits}");
            }
        }
    }

    #[test]
    fn endpoints() {
        let c = make_reference(NibbleMode::Unsigned, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        let top = convert(curfe().volts(480.0), &c).unwrap();
        assert_eq!(
            top,
            AdcCode {
                code: 31,
                clipped: false
            }
        );
        assert_eq!(dequantize(top, &c), 480);
        assert_eq!(
            dequantize(
                AdcCode {
                    code: 0,
                    clipped: false
                },
                &c
            ),
            0
        );

        let s = make_reference(NibbleMode::TwosComplement, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        let bottom = convert(curfe().volts(-256.0), &s).unwrap();
        assert_eq!(
            bottom,
            AdcCode {
                code: -16,
                clipped: false
            }
        );
        assert_eq!(dequantize(bottom, &s), -256);
        let top = convert(curfe().volts(224.0), &s).unwrap();
        assert!(!top.clipped);
        assert_eq!(dequantize(top, &s), 224);
    }

    #[test]
    fn clipping_outside_span() {
        let c = make_reference(NibbleMode::Unsigned, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        let r = convert(curfe().volts(500.0), &c).unwrap();
        assert_eq!(
            r,
            AdcCode {
                code: 31,
                clipped: true
            }
        );
        let r = convert(curfe().volts(-20.0), &c).unwrap();
        assert_eq!(r, AdcCode { code: 0, clipped: true });
    }

    #[test]
    fn non_finite_rejected() {
        let c = make_reference(NibbleMode::Unsigned, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        assert!(matches!(convert(f64::NAN, &c), Err(Error::Conversion(_))));
        assert!(convert(f64::INFINITY, &c).is_err());
    }

    #[test]
    fn nine_bits_lossless_for_32_rows() {
        for mode in [NibbleMode::Unsigned, NibbleMode::TwosComplement] {
            for (kind, t) in [(MacroKind::CurFe, curfe()), (MacroKind::ChgFe, chgfe())] {
                let c = make_reference(mode, 9, 32, kind, t).unwrap();
                assert!(c.is_lossless());
                let (lo, hi) = match mode {
                    NibbleMode::Unsigned => (0, 480),
                    NibbleMode::TwosComplement => (-256, 224),
                };
                for v in lo..=hi {
                    let code = convert(t.volts(f64::from(v)), &c).unwrap();
                    assert!(!code.clipped);
                    assert_eq!(dequantize(code, &c), v);
                }
            }
        }
    }

    #[test]
    fn mid_tread_zero() {
        for bits in 1..=12 {
            let c = make_reference(NibbleMode::TwosComplement, bits, 32, MacroKind::ChgFe, chgfe()).unwrap();
            assert_eq!(convert(1.5, &c).unwrap().code, 0);
        }
    }

    #[test]
    fn windowed_reference_narrows_lsb() {
        let full = make_reference(NibbleMode::TwosComplement, 5, 32, MacroKind::CurFe, curfe()).unwrap();
        let win = make_windowed_reference(NibbleMode::TwosComplement, 5, 32, MacroKind::CurFe, curfe(), 64.0).unwrap();
        assert!(win.lsb() < full.lsb());
        assert!((win.v_ref_low - curfe().volts(-64.0)).abs() < 1e-12);
        let code = convert(curfe().volts(-100.0), &win).unwrap();
        assert!(code.clipped);
        assert_eq!(code.code, -16);
    }
}
