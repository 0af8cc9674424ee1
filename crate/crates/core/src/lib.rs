//! Behavioral simulator for dual FeFET analog in-memory-computing macros.
//!
//! Both macros store each signed 8-bit weight as a 2's-complement high
//! nibble and an unsigned low nibble, and fold the weight-bit shift-add into
//! the array itself:
//!
//! - **CurFe** (current mode): 1nFeFET1R cells with a binary-weighted drain
//!   ladder; a TIA sums the currents of one 32-row block.
//! - **ChgFe** (charge mode): MLC nFeFET / SLC pFeFET cells discharge (or
//!   charge) per-bit BL capacitors, then four equal capacitors share charge.
//!
//! The surrounding pipeline (2CM/N2CM ADCs, digital accumulation over input
//! bits and row groups), device-variation Monte Carlo, an energy/latency
//! bookkeeping model and a small quantized-MLP harness are built on top, and
//! every layer is checked against the exact integer results in [`oracle`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

pub mod accumulate;
pub mod chgfe;
pub mod config;
pub mod curfe;
pub mod device;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod io;
pub mod macro_engine;
pub mod montecarlo;
pub mod nn;
pub mod oracle;
pub mod perf;
pub mod readout;

pub use error::{Error, Result};

/// Rows in one macro.
pub const ROWS: usize = 128;
/// Columns in one macro.
pub const COLS: usize = 128;
/// Banks per macro; each produces one 8-bit-weight output column.
pub const BANKS: usize = 16;
/// Rows activated together in one cycle.
pub const ROWS_PER_GROUP: usize = 32;
/// Sequential row groups per bank.
pub const GROUPS: usize = ROWS / ROWS_PER_GROUP;
/// Physical columns per bank (four L4B + four H4B).
pub const COLS_PER_BANK: usize = COLS / BANKS;

/// Which of the two macro designs is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroKind {
    CurFe,
    ChgFe,
}

impl MacroKind {
    pub const ALL: [MacroKind; 2] = [MacroKind::CurFe, MacroKind::ChgFe];

    pub fn name(self) -> &'static str {
        match self {
            MacroKind::CurFe => "curfe",
            MacroKind::ChgFe => "chgfe",
        }
    }
}

impl std::fmt::Display for MacroKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// High-nibble (signed) or low-nibble (unsigned) 32×4 block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    H4B,
    L4B,
}

impl BlockKind {
    pub const ALL: [BlockKind; 2] = [BlockKind::H4B, BlockKind::L4B];

    pub fn mode(self) -> encoding::NibbleMode {
        match self {
            BlockKind::H4B => encoding::NibbleMode::TwosComplement,
            BlockKind::L4B => encoding::NibbleMode::Unsigned,
        }
    }

    /// Whether the cell at `bit_position` is the WLS-driven sign cell.
    pub fn is_sign(self, bit_position: u8) -> bool {
        self == BlockKind::H4B && bit_position == device::SIGN_POSITION
    }

    /// Column offset of this block's bit 0 within its bank.
    pub fn column_offset(self) -> usize {
        match self {
            BlockKind::L4B => 0,
            BlockKind::H4B => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::H4B => "h4b",
            BlockKind::L4B => "l4b",
        }
    }
}

/// Affine map between a block's integer nibble dot product and its analog
/// output: `volts = offset + value · volts_per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalogTransfer {
    pub offset: f64,
    /// Negative for the charge-mode macro (larger values discharge the BLs).
    pub volts_per_unit: f64,
}

impl AnalogTransfer {
    pub fn volts(&self, value: f64) -> f64 {
        self.offset + value * self.volts_per_unit
    }

    pub fn value(&self, volts: f64) -> f64 {
        (volts - self.offset) / self.volts_per_unit
    }
}

/// Variation-free cells storing one nibble value per row.
pub fn nominal_cells(kind: BlockKind, nibble_values: &[i32]) -> Result<Vec<[device::CellState; device::NIBBLE_WIDTH]>> {
    nibble_values
        .iter()
        .map(|&v| {
            let bits = encoding::NibbleValue::new(kind.mode(), v)?.bits();
            Ok(bits.map(|stored_bit| device::CellState {
                stored_bit,
                vth_deviation: 0.0,
            }))
        })
        .collect()
}
