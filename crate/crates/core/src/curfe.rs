//! Current-mode block evaluation.
//!
//! One 32×4 block drives a single TIA. Every conducting cell sources a
//! binary-weighted current into the virtual-ground node; the sign cell of a
//! high-nibble block sinks current instead, so the TIA output is directly
//! proportional to the signed nibble dot product.

use serde::{Deserialize, Serialize};

use crate::device::{cell_current_curfe, CellState, NFeFET1RModel, NIBBLE_WIDTH};
use crate::error::{Error, Result};
use crate::{AnalogTransfer, BlockKind, ROWS_PER_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiaConfig {
    /// Feedback resistance `Rout` (Ω). The default maps the largest block
    /// value, 32 rows × 15 = 480 LSB units of 100 nA, to 0.4 V.
    pub feedback_resistance: f64,
    /// Virtual-ground bias `Vcm` (V).
    pub bias_voltage: f64,
}

impl Default for TiaConfig {
    fn default() -> Self {
        Self {
            feedback_resistance: 0.4 / (480.0 * 100e-9),
            bias_voltage: 0.5,
        }
    }
}

impl TiaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feedback_resistance > 0.0) || !(self.bias_voltage > 0.0) {
            return Err(Error::Config(
                "tia feedback_resistance and bias_voltage must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A 32-row H4B or L4B block of 1nFeFET1R cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CurfeBlock {
    pub kind: BlockKind,
    /// `cells[row][bit]`.
    pub cells: Vec<[CellState; NIBBLE_WIDTH]>,
    pub device: NFeFET1RModel,
}

/// TIA output for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurfeOutput {
    /// Clamped to `[0, supply_voltage]`.
    pub voltage: f64,
    /// Net current into the TIA (A).
    pub net_current: f64,
    pub saturated: bool,
}

/// One cell current in a per-cycle trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentTraceRow {
    pub row: usize,
    pub bit: u8,
    /// Amperes.
    pub current: f64,
}

impl CurfeBlock {
    /// Nominal block storing `nibble_values[row]` with no variation.
    pub fn from_values(kind: BlockKind, nibble_values: &[i32], device: NFeFET1RModel) -> Result<Self> {
        let cells = crate::nominal_cells(kind, nibble_values)?;
        Ok(Self { kind, cells, device })
    }

    fn check(&self, input_bits: &[bool]) -> Result<()> {
        if self.cells.len() != ROWS_PER_GROUP || input_bits.len() != ROWS_PER_GROUP {
            return Err(Error::Mapping(format!(
                "curfe block needs {ROWS_PER_GROUP} rows and inputs, got {} and {}",
                self.cells.len(),
                input_bits.len()
            )));
        }
        Ok(())
    }

    /// Sum of the four cell currents on one row.
    fn row_current(&self, row: usize, input_bit: bool) -> Result<f64> {
        let mut sum = 0.0;
        for (bit, cell) in self.cells[row].iter().enumerate() {
            let bit = bit as u8;
            sum += cell_current_curfe(
                &self.device,
                bit,
                self.kind.is_sign(bit),
                cell.stored_bit,
                input_bit,
                cell.vth_deviation,
            )?;
        }
        Ok(sum)
    }

    /// Every cell current for one input vector.
    pub fn trace(&self, input_bits: &[bool]) -> Result<Vec<CurrentTraceRow>> {
        self.check(input_bits)?;
        let mut rows = Vec::with_capacity(ROWS_PER_GROUP * NIBBLE_WIDTH);
        for (row, (cells, &x)) in self.cells.iter().zip(input_bits).enumerate() {
            for (bit, cell) in cells.iter().enumerate() {
                let bit = bit as u8;
                let current = cell_current_curfe(
                    &self.device,
                    bit,
                    self.kind.is_sign(bit),
                    cell.stored_bit,
                    x,
                    cell.vth_deviation,
                )?;
                rows.push(CurrentTraceRow { row, bit, current });
            }
        }
        Ok(rows)
    }

    /// Per-row current sums for both input values, for repeated evaluation.
    pub fn prepare(&self) -> Result<PreparedCurfeBlock> {
        let mut on = Vec::with_capacity(self.cells.len());
        let mut off = Vec::with_capacity(self.cells.len());
        for row in 0..self.cells.len() {
            on.push(self.row_current(row, true)?);
            off.push(self.row_current(row, false)?);
        }
        Ok(PreparedCurfeBlock {
            on,
            off,
            supply_voltage: self.device.supply_voltage,
        })
    }
}

fn tia_output(net_current: f64, tia: &TiaConfig, supply: f64) -> CurfeOutput {
    let raw = tia.bias_voltage + net_current * tia.feedback_resistance;
    let voltage = raw.clamp(0.0, supply);
    CurfeOutput {
        voltage,
        net_current,
        saturated: voltage != raw,
    }
}

/// Sum the block current for one input-bit vector and convert it on the TIA.
pub fn evaluate_curfe_block(block: &CurfeBlock, input_bits: &[bool], tia: &TiaConfig) -> Result<CurfeOutput> {
    block.check(input_bits)?;
    let mut net = 0.0;
    for (row, &x) in input_bits.iter().enumerate() {
        net += block.row_current(row, x)?;
    }
    Ok(tia_output(net, tia, block.device.supply_voltage))
}

/// A block with its row currents precomputed. Evaluation is bit-identical to
/// [`evaluate_curfe_block`] on the block it was prepared from.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCurfeBlock {
    on: Vec<f64>,
    off: Vec<f64>,
    supply_voltage: f64,
}

impl PreparedCurfeBlock {
    pub fn evaluate(&self, input_bits: &[bool], tia: &TiaConfig) -> Result<CurfeOutput> {
        if input_bits.len() != self.on.len() {
            return Err(Error::Mapping(format!(
                "expected {} input bits, got {}",
                self.on.len(),
                input_bits.len()
            )));
        }
        let mut net = 0.0;
        for (row, &x) in input_bits.iter().enumerate() {
            net += if x { self.on[row] } else { self.off[row] };
        }
        Ok(tia_output(net, tia, self.supply_voltage))
    }
}

/// Nominal value-to-volts map of a current-mode block.
pub fn curfe_transfer(device: &NFeFET1RModel, tia: &TiaConfig) -> AnalogTransfer {
    AnalogTransfer {
        offset: tia.bias_voltage,
        volts_per_unit: device.unit_current() * tia.feedback_resistance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ideal() -> NFeFET1RModel {
        NFeFET1RModel {
            channel_on_resistance: 0.0,
            leakage: false,
            ..Default::default()
        }
    }

    fn one_row(kind: BlockKind, value: i32, device: NFeFET1RModel) -> (CurfeBlock, Vec<bool>) {
        let mut values = vec![0; ROWS_PER_GROUP];
        values[0] = value;
        let mut x = vec![false; ROWS_PER_GROUP];
        x[0] = true;
        (CurfeBlock::from_values(kind, &values, device).unwrap(), x)
    }

    #[test]
    fn worked_example_currents() {
        let tia = TiaConfig::default();
        let (h, x) = one_row(BlockKind::H4B, -1, ideal());
        let out = evaluate_curfe_block(&h, &x, &tia).unwrap();
        assert!((out.net_current + 100e-9).abs() < 1e-12);
        assert!((out.voltage - (0.5 - 100e-9 * tia.feedback_resistance)).abs() < 1e-12);
        let (l, x) = one_row(BlockKind::L4B, 15, ideal());
        let out = evaluate_curfe_block(&l, &x, &tia).unwrap();
        assert!((out.net_current - 1.5e-6).abs() < 1e-12);
    }

    #[test]
    fn zero_inputs_sit_at_bias() {
        let values: Vec<i32> = (0..32).map(|r| r % 16).collect();
        let b = CurfeBlock::from_values(BlockKind::L4B, &values, NFeFET1RModel::default()).unwrap();
        let out = evaluate_curfe_block(&b, &[false; 32], &TiaConfig::default()).unwrap();
        assert!((out.voltage - 0.5).abs() < 1e-4);
        assert!(out.net_current.abs() < 1e-9);
    }

    #[test]
    fn wrong_row_count_rejected() {
        let b = CurfeBlock::from_values(BlockKind::L4B, &[0; 32], ideal()).unwrap();
        assert!(matches!(
            evaluate_curfe_block(&b, &[true; 31], &TiaConfig::default()),
            Err(Error::Mapping(_))
        ));
    }

    #[test]
    fn extreme_operands_stay_off_the_rails() {
        let tia = TiaConfig::default();
        for (kind, v) in [(BlockKind::L4B, 15), (BlockKind::H4B, -8), (BlockKind::H4B, 7)] {
            let b = CurfeBlock::from_values(kind, &[v; 32], ideal()).unwrap();
            let out = evaluate_curfe_block(&b, &[true; 32], &tia).unwrap();
            assert!(!out.saturated);
            assert!(
                (out.voltage - 0.5).abs() <= 0.4 + 1e-12,
                "{kind:?} {v}: {}",
                out.voltage
            );
        }
        let b = CurfeBlock::from_values(BlockKind::L4B, &[15; 32], ideal()).unwrap();
        let out = evaluate_curfe_block(&b, &[true; 32], &tia).unwrap();
        assert!((out.voltage - 0.9).abs() < 1e-12);
    }

    #[test]
    fn affine_exactness_superposition_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let tia = TiaConfig::default();
        for device in [
            ideal(),
            NFeFET1RModel {
                leakage: false,
                ..Default::default()
            },
        ] {
            let t = curfe_transfer(&device, &tia);
            for _ in 0..500 {
                for kind in BlockKind::ALL {
                    let (lo, hi) = kind.mode().range();
                    let values: Vec<i32> = (0..32).map(|_| rng.random_range(lo..=hi)).collect();
                    let x: Vec<bool> = (0..32).map(|_| rng.random_bool(0.5)).collect();
                    let b = CurfeBlock::from_values(kind, &values, device).unwrap();
                    let out = evaluate_curfe_block(&b, &x, &tia).unwrap();
                    let dot: i32 = values.iter().zip(&x).map(|(v, &xi)| v * i32::from(xi)).sum();
                    let est = t.value(out.voltage);
                    assert!((est - f64::from(dot)).abs() <= 1e-9 * f64::from(dot.abs().max(1)));
                    assert!((out.voltage - 0.5).abs() <= 0.4 + 1e-12);
                    assert!(!out.saturated);

                    let mut sum = 0.0;
                    for r in 0..32 {
                        let mut single = vec![false; 32];
                        single[r] = x[r];
                        sum += evaluate_curfe_block(&b, &single, &tia).unwrap().net_current;
                    }
                    assert!((sum - out.net_current).abs() < 1e-15);

                    let p = b.prepare().unwrap();
                    assert_eq!(p.evaluate(&x, &tia).unwrap(), out);
                }
            }
        }
    }

    #[test]
    fn l4b_monotone_in_row_value() {
        let tia = TiaConfig::default();
        let mut values = vec![3; 32];
        let mut last = f64::NEG_INFINITY;
        for v in 0..16 {
            values[5] = v;
            let b = CurfeBlock::from_values(BlockKind::L4B, &values, NFeFET1RModel::default()).unwrap();
            let out = evaluate_curfe_block(&b, &[true; 32], &tia).unwrap();
            assert!(out.voltage > last);
            last = out.voltage;
        }
    }

    #[test]
    fn saturation_clamps_and_flags() {
        let tia = TiaConfig {
            feedback_resistance: 1e6,
            ..Default::default()
        };
        let b = CurfeBlock::from_values(BlockKind::L4B, &[15; 32], ideal()).unwrap();
        let out = evaluate_curfe_block(&b, &[true; 32], &tia).unwrap();
        assert!(out.saturated);
        assert_eq!(out.voltage, 1.0);
    }

    #[test]
    fn trace_lists_every_cell() {
        let (h, x) = one_row(BlockKind::H4B, -1, ideal());
        let t = h.trace(&x).unwrap();
        assert_eq!(t.len(), 128);
        let row0: f64 = t.iter().filter(|r| r.row == 0).map(|r| r.current).sum();
        assert!((row0 + 100e-9).abs() < 1e-12);
        assert!(t[3].current < 0.0);
    }
}
