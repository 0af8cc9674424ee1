//! Charge-mode block evaluation.
//!
//! Each bit position of a block owns one BL capacitor. A cycle precharges all
//! four BLs, lets the activated cells discharge them (the p-type sign cell
//! charges its BL instead) for a fixed window, then shorts the four equal
//! capacitors together. Because cell currents are binary weighted, the shared
//! voltage is an affine function of the nibble dot product.

use serde::{Deserialize, Serialize};

use crate::device::{cell_delta_v_chgfe, CellState, MlcFeFETModel, Polarity, NIBBLE_WIDTH};
use crate::error::{Error, Result};
use crate::{AnalogTransfer, BlockKind, ROWS_PER_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChgfeParams {
    /// Capacitance of each BL (F).
    pub bl_capacitance: f64,
    /// Precharge voltage (V).
    pub v_pre: f64,
    /// Precharge time (s).
    pub t_pre: f64,
    /// Evaluation window (s).
    pub t_eval: f64,
    /// BL rail used for clamping (V).
    pub vdd_q: f64,
}

impl Default for ChgfeParams {
    fn default() -> Self {
        Self {
            bl_capacitance: 50e-15,
            v_pre: 1.5,
            t_pre: 1e-9,
            t_eval: 0.5e-9,
            vdd_q: 1.8,
        }
    }
}

impl ChgfeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bl_capacitance > 0.0) || !(self.t_pre > 0.0) || !(self.t_eval > 0.0) {
            return Err(Error::Config(
                "chgfe bl_capacitance, t_pre and t_eval must be positive".into(),
            ));
        }
        if !(self.v_pre > 0.0 && self.v_pre < self.vdd_q) {
            return Err(Error::Config("chgfe requires 0 < v_pre < vdd_q".into()));
        }
        Ok(())
    }
}

/// A 32-row H4B or L4B block of MLC FeFET cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ChgfeBlock {
    pub kind: BlockKind,
    /// `cells[row][bit]`.
    pub cells: Vec<[CellState; NIBBLE_WIDTH]>,
    /// n-type model; the H4B sign cell uses its p-type twin.
    pub device: MlcFeFETModel,
    pub params: ChgfeParams,
}

/// The four BL voltages of a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlState {
    pub voltages: [f64; NIBBLE_WIDTH],
    /// A BL would have left `[0, vdd_q]` and was clamped.
    pub clamped: bool,
    /// Cells whose overdrive collapsed during this evaluation.
    pub degenerate: usize,
}

/// BL voltages sampled at the end of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlTrace {
    pub phase: &'static str,
    pub voltages: [f64; NIBBLE_WIDTH],
}

/// Shared output of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChgfeOutput {
    pub voltage: f64,
    pub clamped: bool,
    pub degenerate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct RowSwing {
    delta_v: [f64; NIBBLE_WIDTH],
    degenerate: usize,
}

impl ChgfeBlock {
    /// Nominal block storing `nibble_values[row]` with no variation.
    pub fn from_values(
        kind: BlockKind,
        nibble_values: &[i32],
        device: MlcFeFETModel,
        params: ChgfeParams,
    ) -> Result<Self> {
        let cells = crate::nominal_cells(kind, nibble_values)?;
        Ok(Self {
            kind,
            cells,
            device,
            params,
        })
    }

    fn check(&self, input_bits: &[bool]) -> Result<()> {
        if self.cells.len() != ROWS_PER_GROUP || input_bits.len() != ROWS_PER_GROUP {
            return Err(Error::Mapping(format!(
                "chgfe block needs {ROWS_PER_GROUP} rows and inputs, got {} and {}",
                self.cells.len(),
                input_bits.len()
            )));
        }
        Ok(())
    }

    fn row_swing(&self, row: usize, input_bit: bool) -> Result<RowSwing> {
        let p_type = self.device.with_polarity(Polarity::PType);
        let mut swing = RowSwing::default();
        for (bit, cell) in self.cells[row].iter().enumerate() {
            let bit_pos = bit as u8;
            let is_sign = self.kind.is_sign(bit_pos);
            let model = if is_sign { &p_type } else { &self.device };
            let r = cell_delta_v_chgfe(
                model,
                bit_pos,
                is_sign,
                cell.stored_bit,
                input_bit,
                cell.vth_deviation,
                self.params.t_eval,
                self.params.bl_capacitance,
            )?;
            swing.delta_v[bit] = r.delta_v;
            swing.degenerate += usize::from(r.degenerate);
        }
        Ok(swing)
    }

    /// Per-row BL swings for both input values, for repeated evaluation.
    pub fn prepare(&self) -> Result<PreparedChgfeBlock> {
        let mut on = Vec::with_capacity(self.cells.len());
        let mut off = Vec::with_capacity(self.cells.len());
        for row in 0..self.cells.len() {
            on.push(self.row_swing(row, true)?);
            off.push(self.row_swing(row, false)?);
        }
        Ok(PreparedChgfeBlock {
            on,
            off,
            params: self.params,
        })
    }
}

/// Precharge all four BLs to `v_pre`.
pub fn precharge(block: &ChgfeBlock) -> BlState {
    BlState {
        voltages: [block.params.v_pre; NIBBLE_WIDTH],
        clamped: false,
        degenerate: 0,
    }
}

fn settle(state: &BlState, swings: [f64; NIBBLE_WIDTH], degenerate: usize, vdd_q: f64) -> BlState {
    let mut next = BlState {
        voltages: state.voltages,
        clamped: state.clamped,
        degenerate: state.degenerate + degenerate,
    };
    for (v, dv) in next.voltages.iter_mut().zip(swings) {
        let raw = *v + dv;
        *v = raw.clamp(0.0, vdd_q);
        next.clamped |= *v != raw;
    }
    next
}

/// Apply every row's constant-current swing to a precharged state.
pub fn evaluate_bls(block: &ChgfeBlock, input_bits: &[bool], state: &BlState) -> Result<BlState> {
    block.check(input_bits)?;
    let mut sums = [0.0; NIBBLE_WIDTH];
    let mut degenerate = 0;
    for (row, &x) in input_bits.iter().enumerate() {
        let s = block.row_swing(row, x)?;
        for (acc, dv) in sums.iter_mut().zip(s.delta_v) {
            *acc += dv;
        }
        degenerate += s.degenerate;
    }
    Ok(settle(state, sums, degenerate, block.params.vdd_q))
}

/// Short the four equal capacitors: the result is the mean BL voltage.
pub fn charge_share(state: &BlState) -> f64 {
    state.voltages.iter().sum::<f64>() / NIBBLE_WIDTH as f64
}

/// Full precharge → evaluate → share cycle.
pub fn evaluate_chgfe_block(block: &ChgfeBlock, input_bits: &[bool]) -> Result<ChgfeOutput> {
    let bl = evaluate_bls(block, input_bits, &precharge(block))?;
    Ok(ChgfeOutput {
        voltage: charge_share(&bl),
        clamped: bl.clamped,
        degenerate: bl.degenerate,
    })
}

/// BL voltages after each phase of one cycle.
pub fn trace_chgfe_block(block: &ChgfeBlock, input_bits: &[bool]) -> Result<Vec<BlTrace>> {
    let pre = precharge(block);
    let eval = evaluate_bls(block, input_bits, &pre)?;
    let shared = charge_share(&eval);
    Ok(vec![
        BlTrace {
            phase: "precharge",
            voltages: pre.voltages,
        },
        BlTrace {
            phase: "evaluate",
            voltages: eval.voltages,
        },
        BlTrace {
            phase: "share",
            voltages: [shared; NIBBLE_WIDTH],
        },
    ])
}

/// A block with its row swings precomputed. Evaluation is bit-identical to
/// [`evaluate_chgfe_block`] on the block it was prepared from.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedChgfeBlock {
    on: Vec<RowSwing>,
    off: Vec<RowSwing>,
    params: ChgfeParams,
}

impl PreparedChgfeBlock {
    pub fn evaluate(&self, input_bits: &[bool]) -> Result<ChgfeOutput> {
        if input_bits.len() != self.on.len() {
            return Err(Error::Mapping(format!(
                "expected {} input bits, got {}",
                self.on.len(),
                input_bits.len()
            )));
        }
        let mut sums = [0.0; NIBBLE_WIDTH];
        let mut degenerate = 0;
        for (row, &x) in input_bits.iter().enumerate() {
            let s = if x { &self.on[row] } else { &self.off[row] };
            for (acc, dv) in sums.iter_mut().zip(s.delta_v) {
                *acc += dv;
            }
            degenerate += s.degenerate;
        }
        let pre = BlState {
            voltages: [self.params.v_pre; NIBBLE_WIDTH],
            clamped: false,
            degenerate: 0,
        };
        let bl = settle(&pre, sums, degenerate, self.params.vdd_q);
        Ok(ChgfeOutput {
            voltage: charge_share(&bl),
            clamped: bl.clamped,
            degenerate: bl.degenerate,
        })
    }
}

/// Nominal value-to-volts map of a charge-mode block (negative gain).
pub fn chgfe_transfer(device: &MlcFeFETModel, params: &ChgfeParams) -> AnalogTransfer {
    let unit_swing = device.unit_current() * params.t_eval / params.bl_capacitance;
    AnalogTransfer {
        offset: params.v_pre,
        volts_per_unit: -unit_swing / NIBBLE_WIDTH as f64,
    }
}
