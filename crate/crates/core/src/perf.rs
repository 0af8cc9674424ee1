//! Energy and latency bookkeeping.
//!
//! This is a component-count model: a matvec is tallied as a number of
//! analog block evaluations, ADC conversions, row drives and digital
//! accumulations, each with a fixed per-event cost. The default per-event
//! constants are solved so that the 8b/8b efficiency of each macro matches a
//! chosen anchor; every other operating point is a prediction of the model.

use serde::{Deserialize, Serialize};

use crate::encoding::WeightBits;
use crate::error::{Error, Result};
use crate::{MacroKind, BANKS, GROUPS, ROWS, ROWS_PER_GROUP};

/// Two ops (multiply + add) per MAC.
pub const OPS_PER_MAC: u64 = 2;

/// Operations in one full 128-row × 16-output matvec.
pub const OPS_PER_MATVEC: u64 = OPS_PER_MAC * (ROWS * BANKS) as u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Current-mode analog evaluation of one block (TIA active) (J).
    pub e_tia_per_eval: f64,
    /// BL capacitance used for the precharge term (F).
    pub bl_capacitance: f64,
    /// Precharge voltage (V).
    pub v_pre: f64,
    /// Typical BL voltage left after a cycle (V).
    pub v_residual: f64,
    /// Per-bit SAR conversion energy (J).
    pub e_adc_per_bit: f64,
    /// One bank's shift-add accumulation per cycle (J).
    pub e_digital_per_accum: f64,
    /// Driving one wordline for one cycle (J).
    pub e_driver_per_row: f64,
    /// Global multiplier applied to the total.
    pub calibration_scale: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        calibrate(&CalibrationAnchors::default()).expect("default anchors are consistent")
    }
}

impl EnergyParams {
    /// Energy to recharge one BL (J).
    pub fn e_precharge_per_bl(&self) -> f64 {
        self.bl_capacitance * (self.v_pre - self.v_residual) * self.v_pre
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.e_tia_per_eval,
            self.bl_capacitance,
            self.v_pre,
            self.v_residual,
            self.e_adc_per_bit,
            self.e_digital_per_accum,
            self.e_driver_per_row,
            self.calibration_scale,
        ];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "energy parameters must be finite and non-negative".into(),
            ));
        }
        if self.v_residual > self.v_pre {
            return Err(Error::Config("energy v_residual must not exceed v_pre".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyParams {
    pub t_pre: f64,
    pub t_eval: f64,
    pub t_share: f64,
    /// One SAR bit cycle (s).
    pub t_sar_bit: f64,
    /// Digital shift-add; overlaps the next conversion (s).
    pub t_digital: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        Self {
            t_pre: 1e-9,
            t_eval: 0.5e-9,
            t_share: 0.5e-9,
            t_sar_bit: 1e-9,
            t_digital: 0.5e-9,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.t_pre, self.t_eval, self.t_share, self.t_sar_bit, self.t_digital];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "latency parameters must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn t_adc(&self, adc_bits: u32) -> f64 {
        f64::from(adc_bits) * self.t_sar_bit
    }

    /// Time for one (input bit, row group) cycle.
    pub fn cycle_time(&self, kind: MacroKind, adc_bits: u32) -> f64 {
        let back_end = self.t_adc(adc_bits).max(self.t_digital);
        match kind {
            MacroKind::CurFe => self.t_eval + back_end,
            MacroKind::ChgFe => self.t_pre + self.t_eval + self.t_share + back_end,
        }
    }
}

/// Efficiency targets the default energy constants are solved against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchors {
    /// TOPS/W at 8b input, 8b weight.
    pub curfe_tops_per_watt: f64,
    pub chgfe_tops_per_watt: f64,
    pub adc_bits: u32,
    /// Share of the current-mode anchor energy spent in digital logic.
    pub digital_fraction: f64,
    /// Share of the current-mode anchor energy spent in row drivers.
    pub driver_fraction: f64,
    pub bl_capacitance: f64,
    pub v_pre: f64,
    pub v_residual: f64,
}

impl Default for CalibrationAnchors {
    fn default() -> Self {
        Self {
            curfe_tops_per_watt: 12.18,
            chgfe_tops_per_watt: 14.47,
            adc_bits: 5,
            digital_fraction: 0.05,
            driver_fraction: 0.05,
            bl_capacitance: 50e-15,
            v_pre: 1.5,
            v_residual: 1.4,
        }
    }
}

/// Event counts for one matvec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    /// (input bit, row group) cycles per bank.
    pub cycles: u64,
    pub block_evals: u64,
    pub adc_conversions: u64,
    pub row_drives: u64,
    pub digital_accums: u64,
}

pub fn event_counts(m_input_bits: u32, weight_bits: WeightBits) -> EventCounts {
    let cycles = u64::from(m_input_bits) * GROUPS as u64;
    let blocks_per_cycle = match weight_bits {
        WeightBits::Eight => 2,
        WeightBits::Four => 1,
    };
    let block_evals = BANKS as u64 * cycles * blocks_per_cycle;
    EventCounts {
        cycles,
        block_evals,
        adc_conversions: block_evals,
        row_drives: cycles * ROWS_PER_GROUP as u64,
        digital_accums: BANKS as u64 * cycles,
    }
}

/// Component split of one matvec's energy (J).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// TIA (current mode) or precharge (charge mode).
    pub analog: f64,
    pub adc: f64,
    pub digital: f64,
    pub driver: f64,
    pub total: f64,
    pub ops: u64,
}

impl EnergyBreakdown {
    pub fn tops_per_watt(&self) -> Result<f64> {
        if !(self.total > 0.0) || !self.total.is_finite() {
            return Err(Error::Perf(format!(
                "total energy {} gives no finite efficiency",
                self.total
            )));
        }
        Ok(self.ops as f64 / self.total / 1e12)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            analog: self.analog * k,
            adc: self.adc * k,
            digital: self.digital * k,
            driver: self.driver * k,
            total: self.total * k,
            ops: (self.ops as f64 * k).round() as u64,
        }
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            analog: self.analog + other.analog,
            adc: self.adc + other.adc,
            digital: self.digital + other.digital,
            driver: self.driver + other.driver,
            total: self.total + other.total,
            ops: self.ops + other.ops,
        }
    }

    fn zero() -> Self {
        Self {
            analog: 0.0,
            adc: 0.0,
            digital: 0.0,
            driver: 0.0,
            total: 0.0,
            ops: 0,
        }
    }
}

fn check_precision(m_input_bits: u32, adc_bits: u32) -> Result<()> {
    crate::encoding::check_input_precision(m_input_bits)?;
    if !(1..=crate::readout::MAX_ADC_BITS).contains(&adc_bits) {
        return Err(Error::Config(format!("adc bits {adc_bits} out of range")));
    }
    Ok(())
}

/// Energy of one matvec. Fails when the total is zero, since no efficiency
/// figure exists for it.
pub fn energy_of_matvec(
    params: &EnergyParams,
    kind: MacroKind,
    m_input_bits: u32,
    weight_bits: WeightBits,
    adc_bits: u32,
) -> Result<EnergyBreakdown> {
    check_precision(m_input_bits, adc_bits)?;
    params.validate()?;
    let n = event_counts(m_input_bits, weight_bits);
    let per_eval = match kind {
        MacroKind::CurFe => params.e_tia_per_eval,
        MacroKind::ChgFe => crate::device::NIBBLE_WIDTH as f64 * params.e_precharge_per_bl(),
    };
    let s = params.calibration_scale;
    let analog = s * n.block_evals as f64 * per_eval;
    let adc = s * n.adc_conversions as f64 * f64::from(adc_bits) * params.e_adc_per_bit;
    let digital = s * n.digital_accums as f64 * params.e_digital_per_accum;
    let driver = s * n.row_drives as f64 * params.e_driver_per_row;
    let b = EnergyBreakdown {
        analog,
        adc,
        digital,
        driver,
        total: analog + adc + digital + driver,
        ops: OPS_PER_MATVEC,
    };
    b.tops_per_watt()?;
    Ok(b)
}

/// Wall time of one matvec: banks run in parallel, cycles are sequential.
pub fn latency_of_matvec(params: &LatencyParams, kind: MacroKind, m_input_bits: u32, adc_bits: u32) -> Result<f64> {
    check_precision(m_input_bits, adc_bits)?;
    params.validate()?;
    Ok(f64::from(m_input_bits) * GROUPS as f64 * params.cycle_time(kind, adc_bits))
}

/// Solve the per-event energies for the two efficiency anchors.
///
/// Digital and driver energy are fixed shares of the current-mode anchor and
/// shared by both macros. The charge-mode anchor then fixes the ADC energy
/// (its analog term is the known precharge energy), after which the
/// current-mode anchor fixes the TIA energy.
pub fn calibrate(a: &CalibrationAnchors) -> Result<EnergyParams> {
    if !(a.curfe_tops_per_watt > 0.0 && a.chgfe_tops_per_watt > 0.0) {
        return Err(Error::Perf("calibration anchors must be positive".into()));
    }
    let n = event_counts(8, WeightBits::Eight);
    let e_cur = OPS_PER_MATVEC as f64 / (a.curfe_tops_per_watt * 1e12);
    let e_chg = OPS_PER_MATVEC as f64 / (a.chgfe_tops_per_watt * 1e12);
    let e_digital_per_accum = a.digital_fraction * e_cur / n.digital_accums as f64;
    let e_driver_per_row = a.driver_fraction * e_cur / n.row_drives as f64;
    let shared = (a.digital_fraction + a.driver_fraction) * e_cur;

    let mut p = EnergyParams {
        e_tia_per_eval: 0.0,
        bl_capacitance: a.bl_capacitance,
        v_pre: a.v_pre,
        v_residual: a.v_residual,
        e_adc_per_bit: 0.0,
        e_digital_per_accum,
        e_driver_per_row,
        calibration_scale: 1.0,
    };
    let evals = n.block_evals as f64;
    let precharge = crate::device::NIBBLE_WIDTH as f64 * p.e_precharge_per_bl();
    let adc_per_eval = (e_chg - shared) / evals - precharge;
    p.e_adc_per_bit = adc_per_eval / f64::from(a.adc_bits);
    p.e_tia_per_eval = (e_cur - shared) / evals - adc_per_eval;
    if !(p.e_adc_per_bit > 0.0 && p.e_tia_per_eval > 0.0) {
        return Err(Error::Perf(format!(
            "anchors give non-physical constants: adc {} J/bit, tia {} J",
            p.e_adc_per_bit, p.e_tia_per_eval
        )));
    }
    Ok(p)
}

/// Energy and latency knobs of a macro.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerfParams {
    pub energy: EnergyParams,
    pub latency: LatencyParams,
}

/// One network layer as executed on the macro.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSchedule {
    pub name: String,
    /// Macro matvec invocations per inference.
    pub tiles: u64,
    pub input_bits: u32,
    pub weight_bits: WeightBits,
}

/// Per-layer totals for one inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerPerf {
    pub name: String,
    pub tiles: u64,
    pub energy: EnergyBreakdown,
    /// Tiles run back to back on one macro (s).
    pub latency: f64,
}

pub fn layer_breakdown(
    schedule: &[LayerSchedule],
    params: &PerfParams,
    kind: MacroKind,
    adc_bits: u32,
) -> Result<Vec<LayerPerf>> {
    schedule
        .iter()
        .map(|l| {
            let e = energy_of_matvec(&params.energy, kind, l.input_bits, l.weight_bits, adc_bits)?;
            let t = latency_of_matvec(&params.latency, kind, l.input_bits, adc_bits)?;
            Ok(LayerPerf {
                name: l.name.clone(),
                tiles: l.tiles,
                energy: e.scaled(l.tiles as f64),
                latency: t * l.tiles as f64,
            })
        })
        .collect()
}

/// Totals over a breakdown.
pub fn total_of(layers: &[LayerPerf]) -> (EnergyBreakdown, f64) {
    layers.iter().fold((EnergyBreakdown::zero(), 0.0), |(e, t), l| {
        (e.add(&l.energy), t + l.latency)
    })
}

/// Efficiency reported at another technology node, assuming energy scales
/// with the square of the feature size.
pub fn scale_efficiency_to_node(tops_per_watt: f64, from_nm: f64, to_nm: f64) -> f64 {
    tops_per_watt * (from_nm / to_nm).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eff(kind: MacroKind, m: u32, w: WeightBits) -> f64 {
        energy_of_matvec(&EnergyParams::default(), kind, m, w, 5)
            .unwrap()
            .tops_per_watt()
            .unwrap()
    }

    #[test]
    fn anchors_reproduced() {
        assert!((eff(MacroKind::CurFe, 8, WeightBits::Eight) - 12.18).abs() < 1e-9);
        assert!((eff(MacroKind::ChgFe, 8, WeightBits::Eight) - 14.47).abs() < 1e-9);
    }

    #[test]
    fn calibrated_constants_are_plausible() {
        let p = EnergyParams::default();
        assert!((p.e_adc_per_bit - 42.7e-15).abs() < 0.1e-15, "{}", p.e_adc_per_bit);
        assert!((p.e_tia_per_eval - 81.9e-15).abs() < 0.1e-15, "{}", p.e_tia_per_eval);
        assert!((p.e_precharge_per_bl() - 7.5e-15).abs() < 1e-20);
    }

    #[test]
    fn efficiency_trends() {
        for kind in MacroKind::ALL {
            for w in [WeightBits::Four, WeightBits::Eight] {
                let mut last = f64::INFINITY;
                for m in [1, 2, 4, 8] {
                    let e = eff(kind, m, w);
                    assert!(e <= last);
                    last = e;
                }
            }
            for m in [1, 2, 4, 8] {
                assert!(eff(kind, m, WeightBits::Eight) <= eff(kind, m, WeightBits::Four));
            }
        }
        for m in [1, 2, 4, 8] {
            for w in [WeightBits::Four, WeightBits::Eight] {
                assert!(eff(MacroKind::ChgFe, m, w) > eff(MacroKind::CurFe, m, w));
            }
        }
    }

    #[test]
    fn zero_cost_rejected() {
        let p = EnergyParams {
            e_tia_per_eval: 0.0,
            e_adc_per_bit: 0.0,
            e_digital_per_accum: 0.0,
            e_driver_per_row: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            energy_of_matvec(&p, MacroKind::CurFe, 8, WeightBits::Eight, 5),
            Err(Error::Perf(_))
        ));
    }

    #[test]
    fn cycle_latencies() {
        let l = LatencyParams::default();
        assert!((l.cycle_time(MacroKind::CurFe, 5) - 5.5e-9).abs() < 1e-18);
        assert!((l.cycle_time(MacroKind::ChgFe, 5) - 7.0e-9).abs() < 1e-18);
        let one = l.cycle_time(MacroKind::CurFe, 5);
        let full = latency_of_matvec(&l, MacroKind::CurFe, 8, 5).unwrap();
        assert!((full - 32.0 * one).abs() < 1e-18);
        for m in [1, 2, 4, 8] {
            assert!(
                latency_of_matvec(&l, MacroKind::ChgFe, m, 5).unwrap()
                    > latency_of_matvec(&l, MacroKind::CurFe, m, 5).unwrap()
            );
        }
    }

    #[test]
    fn layer_breakdown_is_additive() {
        let params = PerfParams::default();
        assert!(layer_breakdown(&[], &params, MacroKind::CurFe, 5).unwrap().is_empty());
        let layer = LayerSchedule {
            name: "fc".into(),
            tiles: 3,
            input_bits: 4,
            weight_bits: WeightBits::Eight,
        };
        let single = energy_of_matvec(&params.energy, MacroKind::CurFe, 4, WeightBits::Eight, 5).unwrap();
        let one = layer_breakdown(std::slice::from_ref(&layer), &params, MacroKind::CurFe, 5).unwrap();
        assert!((one[0].energy.total - 3.0 * single.total).abs() < 1e-24);
        let two = layer_breakdown(&[layer.clone(), layer], &params, MacroKind::CurFe, 5).unwrap();
        let (e, t) = total_of(&two);
        assert!((e.total - 2.0 * one[0].energy.total).abs() < 1e-24);
        assert!((t - 2.0 * one[0].latency).abs() < 1e-21);
    }

    #[test]
    fn node_scaling() {
        assert!((scale_efficiency_to_node(10.0, 22.0, 40.0) - 10.0 * (22.0f64 / 40.0).powi(2)).abs() < 1e-12);
        assert_eq!(scale_efficiency_to_node(10.0, 40.0, 40.0), 10.0);
    }
}
