//! Digital accumulation after the ADCs.
//!
//! Per bank and cycle the 2CM and N2CM results are merged with a ×16 shift
//! for the high nibble; row groups add with unit weight; input bit `i` adds
//! with weight `2^i`.

use crate::readout::AdcConfig;

/// Running total of one output column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AccumulatorState {
    pub running_total: i32,
    pub input_bit_index: u32,
    pub group_index: u32,
}

/// `16 · high + low` for an 8-bit weight split into nibbles.
pub fn combine_nibbles(high_value: i32, low_value: i32) -> i32 {
    16 * high_value + low_value
}

impl AccumulatorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> i32 {
        self.running_total
    }

    /// Add a partial MAC produced by input bit `bit_index`.
    pub fn accumulate_input_bit(self, partial: i32, bit_index: u32) -> Self {
        debug_assert!(bit_index < 8, "input bit {bit_index} out of range");
        Self {
            running_total: self.running_total + (partial << bit_index),
            input_bit_index: bit_index,
            ..self
        }
    }

    /// Add the partial MAC of one more 32-row group.
    pub fn accumulate_row_group(self, group_partial: i32) -> Self {
        Self {
            running_total: self.running_total + group_partial,
            group_index: self.group_index + 1,
            ..self
        }
    }
}

/// Worst-case `|quantized − exact|` for an m-bit-input, multi-group MAC when
/// every conversion is in span. `low` is `None` for 4-bit weights.
pub fn quantization_error_bound(high: &AdcConfig, low: Option<&AdcConfig>, m: u32, groups: usize) -> f64 {
    let per_cycle = match low {
        Some(low) => 16.0 * high.error_bound() + low.error_bound(),
        None => high.error_bound(),
    };
    // a lossless conversion is exact, not merely within half an LSB
    let per_cycle = if high.is_lossless() && low.is_none_or(|l| l.is_lossless()) {
        0.0
    } else {
        per_cycle
    };
    per_cycle * groups as f64 * f64::from((1u32 << m) - 1)
}
