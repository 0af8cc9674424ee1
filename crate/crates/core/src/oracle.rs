//! Exact integer reference results.
//!
//! Nothing here touches the analog models; the quantizer replay is written
//! out independently of [`crate::readout`] so the two can check each other.

use crate::encoding::WeightBits;
use crate::error::{Error, Result};

/// Exact and quantization-only results for one dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleResult {
    pub exact_mac: i64,
    pub quantized_mac: i64,
}

fn check_lengths(x: &[u32], w: &[i32]) -> Result<()> {
    if x.len() != w.len() {
        return Err(Error::Mapping(format!(
            "input length {} != weight length {}",
            x.len(),
            w.len()
        )));
    }
    Ok(())
}

/// `Σ x_r · w_r` in plain integer arithmetic.
pub fn exact_dot(x: &[u32], w: &[i32]) -> Result<i64> {
    check_lengths(x, w)?;
    Ok(x.iter().zip(w).map(|(&xi, &wi)| i64::from(xi) * i64::from(wi)).sum())
}

/// The same product expanded bit by bit: the sign bit of the 8-bit weight
/// contributes `−x_i·2^(i+7)`, every other weight bit `+x_i·y_j·2^(i+j)`.
pub fn bitwise_dot(x: &[u32], w: &[i32], m: u32) -> Result<i64> {
    check_lengths(x, w)?;
    let mut total = 0i64;
    for (&xr, &wr) in x.iter().zip(w) {
        if !(-128..=127).contains(&wr) || (m < 32 && xr >= 1 << m) {
            return Err(Error::Encoding(format!("operand out of range: x={xr} w={wr}")));
        }
        let byte = wr as i8 as u8;
        for i in 0..m {
            let xi = i64::from((xr >> i) & 1);
            let y7 = i64::from((byte >> 7) & 1);
            total -= y7 * xi * (1i64 << (i + 7));
            for j in 0..7 {
                let yj = i64::from((byte >> j) & 1);
                total += xi * yj * (1i64 << (i + j));
            }
        }
    }
    Ok(total)
}

fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Full-span 2CM conversion of an exact block value, then back to a value.
fn quantize_signed(value: i64, bits: u32, rows: usize) -> i64 {
    let half = f64::from(1u32 << (bits - 1));
    let full_scale = 8.0 * rows as f64;
    let code = round_half_away(value as f64 * half / full_scale).clamp(-half, half - 1.0);
    round_half_away(code * full_scale / half) as i64
}

/// Full-span N2CM conversion of an exact block value, then back to a value.
fn quantize_unsigned(value: i64, bits: u32, rows: usize) -> i64 {
    let levels = f64::from((1u32 << bits) - 1);
    let full_scale = 15.0 * rows as f64;
    let code = round_half_away(value as f64 * levels / full_scale).clamp(0.0, levels);
    round_half_away(code * full_scale / levels) as i64
}

/// Replays the bit-serial / row-group / nibble pipeline using exact nibble
/// sums, applying only the ADC quantization.
pub fn quantized_dot(
    x: &[u32],
    w: &[i32],
    adc_bits: u32,
    rows_per_group: usize,
    m: u32,
    weight_bits: WeightBits,
) -> Result<OracleResult> {
    check_lengths(x, w)?;
    if adc_bits == 0 || adc_bits > 16 || rows_per_group == 0 {
        return Err(Error::Config("adc bits must be 1..=16 and rows_per_group > 0".into()));
    }
    let (wmin, wmax) = weight_bits.range();
    if let Some(bad) = w.iter().find(|&&v| v < wmin || v > wmax) {
        return Err(Error::Encoding(format!("weight {bad} outside {weight_bits:?} range")));
    }
    let exact_mac = exact_dot(x, w)?;
    let mut quantized_mac = 0i64;
    for i in 0..m {
        for (xg, wg) in x.chunks(rows_per_group).zip(w.chunks(rows_per_group)) {
            let mut high = 0i64;
            let mut low = 0i64;
            for (&xr, &wr) in xg.iter().zip(wg) {
                if (xr >> i) & 1 == 0 {
                    continue;
                }
                match weight_bits {
                    WeightBits::Four => high += i64::from(wr),
                    WeightBits::Eight => {
                        high += i64::from(wr.div_euclid(16));
                        low += i64::from(wr.rem_euclid(16));
                    }
                }
            }
            let mut partial = quantize_signed(high, adc_bits, rows_per_group);
            if weight_bits == WeightBits::Eight {
                partial = 16 * partial + quantize_unsigned(low, adc_bits, rows_per_group);
            }
            quantized_mac += partial << i;
        }
    }
    Ok(OracleResult {
        exact_mac,
        quantized_mac,
    })
}

/// Integer matrix–vector product `y_c = Σ_r x_r · W[r][c]` over a row-major
/// matrix with `cols` columns.
pub fn exact_matvec(x: &[u32], weights: &[i32], cols: usize) -> Result<Vec<i64>> {
    if cols == 0 || weights.len() != x.len() * cols {
        return Err(Error::Mapping(format!(
            "weight matrix of {} entries does not match {} rows x {cols} cols",
            weights.len(),
            x.len()
        )));
    }
    let mut out = vec![0i64; cols];
    for (r, &xr) in x.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += i64::from(xr) * i64::from(weights[r * cols + c]);
        }
    }
    Ok(out)
}
