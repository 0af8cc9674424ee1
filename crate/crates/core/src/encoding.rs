//! Weight and input encodings.
//!
//! A signed 8-bit weight is split into a signed high nibble (2's-complement
//! mode, sign cell weighted −8) and an unsigned low nibble (non-2's-complement
//! mode), so `w = 16·high + low`. Inputs are unsigned and applied LSB-first,
//! one bit per cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Readout convention for a 4-bit block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NibbleMode {
    /// Signed, MSB weighted −8. Range [−8, 7].
    #[serde(rename = "2cm")]
    TwosComplement,
    /// Unsigned. Range [0, 15].
    #[serde(rename = "n2cm")]
    Unsigned,
}

impl NibbleMode {
    pub fn range(self) -> (i32, i32) {
        match self {
            NibbleMode::TwosComplement => (-8, 7),
            NibbleMode::Unsigned => (0, 15),
        }
    }

    /// Value contributed by `bits` (index = bit position).
    pub fn decode(self, bits: [bool; 4]) -> i32 {
        let magnitude: i32 = (0..3).map(|j| i32::from(bits[j]) << j).sum();
        match self {
            NibbleMode::TwosComplement => magnitude - 8 * i32::from(bits[3]),
            NibbleMode::Unsigned => magnitude + 8 * i32::from(bits[3]),
        }
    }
}

/// A nibble value tagged with its mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NibbleValue {
    mode: NibbleMode,
    value: i32,
}

impl NibbleValue {
    pub fn new(mode: NibbleMode, value: i32) -> Result<Self> {
        let (lo, hi) = mode.range();
        if !(lo..=hi).contains(&value) {
            return Err(Error::Encoding(format!(
                "{value} outside {mode:?} nibble range [{lo}, {hi}]"
            )));
        }
        Ok(Self { mode, value })
    }

    pub fn mode(&self) -> NibbleMode {
        self.mode
    }

    pub fn value(&self) -> i32 {
        self.value
    }

    /// Cell contents, index = bit position (bit 3 is the sign cell in 2CM).
    pub fn bits(&self) -> [bool; 4] {
        let raw = self.value & 0xF;
        std::array::from_fn(|j| (raw >> j) & 1 == 1)
    }
}

/// 8-bit weight stored as a 2CM high nibble and an N2CM low nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightNibblePair {
    pub high: NibbleValue,
    pub low: NibbleValue,
    pub source_value: i32,
}

impl WeightNibblePair {
    pub fn high_bits(&self) -> [bool; 4] {
        self.high.bits()
    }

    pub fn low_bits(&self) -> [bool; 4] {
        self.low.bits()
    }

    pub fn decode(&self) -> i32 {
        16 * NibbleMode::TwosComplement.decode(self.high_bits()) + NibbleMode::Unsigned.decode(self.low_bits())
    }
}

/// Weight precision supported by the macros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum WeightBits {
    Four,
    Eight,
}

impl WeightBits {
    pub fn bits(self) -> u32 {
        match self {
            WeightBits::Four => 4,
            WeightBits::Eight => 8,
        }
    }

    pub fn range(self) -> (i32, i32) {
        match self {
            WeightBits::Four => (-8, 7),
            WeightBits::Eight => (-128, 127),
        }
    }
}

impl TryFrom<u32> for WeightBits {
    type Error = String;

    fn try_from(bits: u32) -> std::result::Result<Self, String> {
        match bits {
            4 => Ok(WeightBits::Four),
            8 => Ok(WeightBits::Eight),
            other => Err(format!("weight precision must be 4 or 8, got {other}")),
        }
    }
}

impl From<WeightBits> for u32 {
    fn from(w: WeightBits) -> u32 {
        w.bits()
    }
}

pub fn encode_weight_8b(w: i32) -> Result<WeightNibblePair> {
    if !(-128..=127).contains(&w) {
        return Err(Error::Encoding(format!("8-bit weight {w} outside [-128, 127]")));
    }
    // arithmetic shift keeps the sign in the high nibble
    let high = NibbleValue::new(NibbleMode::TwosComplement, w >> 4)?;
    let low = NibbleValue::new(NibbleMode::Unsigned, w & 0xF)?;
    Ok(WeightNibblePair {
        high,
        low,
        source_value: w,
    })
}

pub fn encode_weight_4b(w: i32) -> Result<NibbleValue> {
    NibbleValue::new(NibbleMode::TwosComplement, w)
        .map_err(|_| Error::Encoding(format!("4-bit weight {w} outside [-8, 7]")))
}

/// Unsigned input split into LSB-first bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputBitStream {
    bits: Vec<bool>,
    source_value: u32,
}

impl InputBitStream {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn precision(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn source_value(&self) -> u32 {
        self.source_value
    }

    pub fn decode(&self) -> u32 {
        self.bits.iter().enumerate().map(|(i, &b)| u32::from(b) << i).sum()
    }
}

pub fn check_input_precision(m: u32) -> Result<()> {
    if !(1..=8).contains(&m) {
        return Err(Error::Encoding(format!("input precision {m} outside 1..=8")));
    }
    Ok(())
}

pub fn encode_input(x: u32, m: u32) -> Result<InputBitStream> {
    check_input_precision(m)?;
    if x >= 1 << m {
        return Err(Error::Encoding(format!("input {x} does not fit in {m} bits")));
    }
    Ok(InputBitStream {
        bits: (0..m).map(|i| (x >> i) & 1 == 1).collect(),
        source_value: x,
    })
}
