//! Full 128×128 macro: weight mapping, cycle sequencing and matvec.
//!
//! Bank `b` holds output column `b`. Its eight physical columns are the four
//! L4B bit columns followed by the four H4B bit columns; the 128 rows form
//! four 32-row groups that are activated one at a time. A matvec loops over
//! input bits (LSB first) and row groups, evaluates the active H4B and L4B of
//! every bank, converts both, and accumulates digitally.

use serde::{Deserialize, Serialize};

use crate::accumulate::{combine_nibbles, AccumulatorState};
use crate::chgfe::{chgfe_transfer, ChgfeBlock, ChgfeParams, PreparedChgfeBlock};
use crate::curfe::{curfe_transfer, CurfeBlock, PreparedCurfeBlock, TiaConfig};
use crate::device::{sample_vth, CellState, DeviceProfile, Polarity, NIBBLE_WIDTH};
use crate::encoding::{encode_input, encode_weight_4b, encode_weight_8b, NibbleMode, WeightBits};
use crate::error::{Error, Result};
use crate::perf::{energy_of_matvec, latency_of_matvec, PerfParams};
use crate::readout::{convert, default_full_scale, dequantize, make_windowed_reference, AdcConfig};
use crate::{AnalogTransfer, BlockKind, MacroKind, BANKS, COLS, COLS_PER_BANK, GROUPS, ROWS, ROWS_PER_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroConfig {
    pub rows: usize,
    pub cols: usize,
    pub banks: usize,
    pub rows_per_group: usize,
    pub kind: MacroKind,
    pub adc_bits: u32,
    pub weight_bits: WeightBits,
    pub seed: u64,
    pub device: DeviceProfile,
    pub tia: TiaConfig,
    pub chgfe: ChgfeParams,
    pub perf: PerfParams,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            rows: ROWS,
            cols: COLS,
            banks: BANKS,
            rows_per_group: ROWS_PER_GROUP,
            kind: MacroKind::CurFe,
            adc_bits: 5,
            weight_bits: WeightBits::Eight,
            seed: 0,
            device: DeviceProfile::default(),
            tia: TiaConfig::default(),
            chgfe: ChgfeParams::default(),
            perf: PerfParams::default(),
        }
    }
}

impl MacroConfig {
    pub fn with_kind(self, kind: MacroKind) -> Self {
        Self { kind, ..self }
    }

    /// Zero threshold variation and no OFF-state leakage.
    pub fn noiseless(mut self) -> Self {
        self.device.vth_sigma = 0.0;
        self.device.leakage = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, got, want) in [
            ("rows", self.rows, ROWS),
            ("cols", self.cols, COLS),
            ("banks", self.banks, BANKS),
            ("rows_per_group", self.rows_per_group, ROWS_PER_GROUP),
        ] {
            if got != want {
                return Err(Error::Config(format!("geometry: {name} must be {want}, got {got}")));
            }
        }
        if !(1..=crate::readout::MAX_ADC_BITS).contains(&self.adc_bits) {
            return Err(Error::Config(format!(
                "adc bits {} outside 1..={}",
                self.adc_bits,
                crate::readout::MAX_ADC_BITS
            )));
        }
        self.device.validate()?;
        self.tia.validate()?;
        self.chgfe.validate()?;
        self.perf.energy.validate()?;
        self.perf.latency.validate()?;
        if self.tia.bias_voltage != self.device.bias_voltage {
            return Err(Error::Config(format!(
                "tia bias {} V differs from device bias {} V",
                self.tia.bias_voltage, self.device.bias_voltage
            )));
        }
        Ok(())
    }

    /// Nominal value-to-volts map of one block.
    pub fn transfer(&self) -> AnalogTransfer {
        match self.kind {
            MacroKind::CurFe => curfe_transfer(&self.device.curfe(), &self.tia),
            MacroKind::ChgFe => chgfe_transfer(&self.device.mlc(Polarity::NType), &self.chgfe),
        }
    }

    /// Full-span ADC configuration for one nibble mode.
    pub fn adc(&self, mode: NibbleMode) -> Result<AdcConfig> {
        self.windowed_adc(mode, default_full_scale(mode, ROWS_PER_GROUP as u32))
    }

    pub fn windowed_adc(&self, mode: NibbleMode, full_scale: f64) -> Result<AdcConfig> {
        make_windowed_reference(
            mode,
            self.adc_bits,
            ROWS_PER_GROUP as u32,
            self.kind,
            self.transfer(),
            full_scale,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PreparedBlock {
    Cur(PreparedCurfeBlock),
    Chg(PreparedChgfeBlock),
}

struct BlockOutput {
    voltage: f64,
    saturated: bool,
    degenerate: usize,
}

impl PreparedBlock {
    fn evaluate(&self, input_bits: &[bool], tia: &TiaConfig) -> Result<BlockOutput> {
        Ok(match self {
            PreparedBlock::Cur(b) => {
                let o = b.evaluate(input_bits, tia)?;
                BlockOutput {
                    voltage: o.voltage,
                    saturated: o.saturated,
                    degenerate: 0,
                }
            }
            PreparedBlock::Chg(b) => {
                let o = b.evaluate(input_bits)?;
                BlockOutput {
                    voltage: o.voltage,
                    saturated: o.clamped,
                    degenerate: o.degenerate,
                }
            }
        })
    }
}

/// Where a physical column sits in the bank layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColumnRole {
    pub bank: usize,
    pub block: BlockKind,
    pub bit: u8,
}

/// Physical column → (bank, block, bit position).
pub fn column_role(col: usize) -> Result<ColumnRole> {
    if col >= COLS {
        return Err(Error::Mapping(format!("column {col} outside 0..{COLS}")));
    }
    let bank = col / COLS_PER_BANK;
    let within = col % COLS_PER_BANK;
    let block = if within >= BlockKind::H4B.column_offset() {
        BlockKind::H4B
    } else {
        BlockKind::L4B
    };
    Ok(ColumnRole {
        bank,
        block,
        bit: (within - block.column_offset()) as u8,
    })
}

/// Physical column of a (bank, block, bit) slot.
pub fn physical_column(bank: usize, block: BlockKind, bit: u8) -> usize {
    bank * COLS_PER_BANK + block.column_offset() + bit as usize
}

/// A macro with every cell programmed and its blocks ready to evaluate.
#[derive(Debug, Clone)]
pub struct ProgrammedMacro {
    cfg: MacroConfig,
    weights: Vec<i32>,
    cells: Vec<CellState>,
    blocks: Vec<PreparedBlock>,
    adc_high: AdcConfig,
    adc_low: AdcConfig,
}

/// One conversion in a traced matvec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleTrace {
    pub bank: usize,
    pub input_bit: u32,
    pub group: usize,
    pub block: BlockKind,
    pub volts: f64,
    pub code: i32,
    pub value: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacResult {
    /// One accumulated MAC per bank.
    pub outputs: Vec<i32>,
    /// Block evaluations whose analog output hit a rail.
    pub saturated: usize,
    /// Conversions whose input lay outside the ADC span.
    pub clipped: usize,
    /// Cell evaluations with a collapsed overdrive.
    pub degenerate: usize,
    pub energy_joules: f64,
    pub latency_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<CycleTrace>>,
}

fn block_index(bank: usize, group: usize, kind: BlockKind) -> usize {
    let k = match kind {
        BlockKind::H4B => 0,
        BlockKind::L4B => 1,
    };
    (bank * GROUPS + group) * 2 + k
}

/// Map a 128×16 row-major weight matrix onto the array.
pub fn program_macro(weights: &[i32], cfg: &MacroConfig) -> Result<ProgrammedMacro> {
    cfg.validate()?;
    if weights.len() != ROWS * BANKS {
        return Err(Error::Mapping(format!(
            "weight matrix has {} entries, the macro holds {ROWS} x {BANKS}",
            weights.len()
        )));
    }
    let mut cells = vec![CellState::default(); ROWS * COLS];
    for r in 0..ROWS {
        for bank in 0..BANKS {
            let w = weights[r * BANKS + bank];
            let (high, low) = match cfg.weight_bits {
                WeightBits::Eight => {
                    let p = encode_weight_8b(w)?;
                    (p.high_bits(), p.low_bits())
                }
                WeightBits::Four => (encode_weight_4b(w)?.bits(), [false; NIBBLE_WIDTH]),
            };
            for bit in 0..NIBBLE_WIDTH as u8 {
                cells[r * COLS + physical_column(bank, BlockKind::H4B, bit)].stored_bit = high[bit as usize];
                cells[r * COLS + physical_column(bank, BlockKind::L4B, bit)].stored_bit = low[bit as usize];
            }
        }
    }
    let sigma = cfg.device.vth_sigma;
    if sigma > 0.0 {
        for r in 0..ROWS {
            for c in 0..COLS {
                cells[r * COLS + c].vth_deviation = sample_vth(cfg.seed, (r as u32, c as u32), sigma)?.deviation;
            }
        }
    }

    let mut blocks = Vec::with_capacity(BANKS * GROUPS * 2);
    for bank in 0..BANKS {
        for g in 0..GROUPS {
            for kind in BlockKind::ALL {
                let rows: Vec<[CellState; NIBBLE_WIDTH]> = (g * ROWS_PER_GROUP..(g + 1) * ROWS_PER_GROUP)
                    .map(|r| std::array::from_fn(|bit| cells[r * COLS + physical_column(bank, kind, bit as u8)]))
                    .collect();
                debug_assert_eq!(blocks.len(), block_index(bank, g, kind));
                blocks.push(match cfg.kind {
                    MacroKind::CurFe => PreparedBlock::Cur(
                        CurfeBlock {
                            kind,
                            cells: rows,
                            device: cfg.device.curfe(),
                        }
                        .prepare()?,
                    ),
                    MacroKind::ChgFe => PreparedBlock::Chg(
                        ChgfeBlock {
                            kind,
                            cells: rows,
                            device: cfg.device.mlc(Polarity::NType),
                            params: cfg.chgfe,
                        }
                        .prepare()?,
                    ),
                });
            }
        }
    }

    Ok(ProgrammedMacro {
        cfg: *cfg,
        weights: weights.to_vec(),
        cells,
        blocks,
        adc_high: cfg.adc(NibbleMode::TwosComplement)?,
        adc_low: cfg.adc(NibbleMode::Unsigned)?,
    })
}

impl ProgrammedMacro {
    pub fn config(&self) -> &MacroConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &[i32] {
        &self.weights
    }

    pub fn cell(&self, row: usize, col: usize) -> CellState {
        self.cells[row * COLS + col]
    }

    pub fn adc_high(&self) -> &AdcConfig {
        &self.adc_high
    }

    pub fn adc_low(&self) -> &AdcConfig {
        &self.adc_low
    }

    /// Narrow the ADC references to calibrated full scales (value units).
    pub fn set_adc_windows(&mut self, high_full_scale: f64, low_full_scale: f64) -> Result<()> {
        self.adc_high = self.cfg.windowed_adc(NibbleMode::TwosComplement, high_full_scale)?;
        self.adc_low = self.cfg.windowed_adc(NibbleMode::Unsigned, low_full_scale)?;
        Ok(())
    }

    /// Decode the stored bits back into the weight matrix.
    pub fn read_back(&self) -> Vec<i32> {
        let mut out = vec![0; ROWS * BANKS];
        for r in 0..ROWS {
            for bank in 0..BANKS {
                let bits = |kind| -> [bool; NIBBLE_WIDTH] {
                    std::array::from_fn(|b| self.cell(r, physical_column(bank, kind, b as u8)).stored_bit)
                };
                let high = NibbleMode::TwosComplement.decode(bits(BlockKind::H4B));
                out[r * BANKS + bank] = match self.cfg.weight_bits {
                    WeightBits::Eight => combine_nibbles(high, NibbleMode::Unsigned.decode(bits(BlockKind::L4B))),
                    WeightBits::Four => high,
                };
            }
        }
        out
    }

    pub fn matvec(&self, x: &[u32], m: u32) -> Result<MacResult> {
        self.run(x, m, false)
    }

    /// Like [`matvec`](Self::matvec) but records every conversion.
    pub fn matvec_traced(&self, x: &[u32], m: u32) -> Result<MacResult> {
        self.run(x, m, true)
    }

    fn run(&self, x: &[u32], m: u32, trace: bool) -> Result<MacResult> {
        if x.len() != ROWS {
            return Err(Error::Mapping(format!(
                "input vector has {} entries, expected {ROWS}",
                x.len()
            )));
        }
        let streams = x.iter().map(|&v| encode_input(v, m)).collect::<Result<Vec<_>>>()?;
        let kinds: &[BlockKind] = match self.cfg.weight_bits {
            WeightBits::Eight => &[BlockKind::H4B, BlockKind::L4B],
            WeightBits::Four => &[BlockKind::H4B],
        };

        let mut result = MacResult {
            outputs: vec![0; BANKS],
            saturated: 0,
            clipped: 0,
            degenerate: 0,
            energy_joules: energy_of_matvec(
                &self.cfg.perf.energy,
                self.cfg.kind,
                m,
                self.cfg.weight_bits,
                self.cfg.adc_bits,
            )?
            .total,
            latency_seconds: latency_of_matvec(&self.cfg.perf.latency, self.cfg.kind, m, self.cfg.adc_bits)?,
            traces: trace.then(Vec::new),
        };
        let mut acc = vec![AccumulatorState::new(); BANKS];
        for i in 0..m {
            let mut per_bit = [AccumulatorState::new(); BANKS];
            for g in 0..GROUPS {
                let bits: Vec<bool> = streams[g * ROWS_PER_GROUP..(g + 1) * ROWS_PER_GROUP]
                    .iter()
                    .map(|s| s.bits()[i as usize])
                    .collect();
                for bank in 0..BANKS {
                    let mut values = [0i32; 2];
                    for (slot, &kind) in kinds.iter().enumerate() {
                        let out = self.blocks[block_index(bank, g, kind)].evaluate(&bits, &self.cfg.tia)?;
                        let adc = match kind {
                            BlockKind::H4B => &self.adc_high,
                            BlockKind::L4B => &self.adc_low,
                        };
                        let code = convert(out.voltage, adc)?;
                        let value = dequantize(code, adc);
                        values[slot] = value;
                        result.saturated += usize::from(out.saturated);
                        result.clipped += usize::from(code.clipped);
                        result.degenerate += out.degenerate;
                        if let Some(t) = result.traces.as_mut() {
                            t.push(CycleTrace {
                                bank,
                                input_bit: i,
                                group: g,
                                block: kind,
                                volts: out.voltage,
                                code: code.code,
                                value,
                            });
                        }
                    }
                    let partial = match self.cfg.weight_bits {
                        WeightBits::Eight => combine_nibbles(values[0], values[1]),
                        WeightBits::Four => values[0],
                    };
                    per_bit[bank] = per_bit[bank].accumulate_row_group(partial);
                }
            }
            for bank in 0..BANKS {
                acc[bank] = acc[bank].accumulate_input_bit(per_bit[bank].total(), i);
            }
        }
        for (o, a) in result.outputs.iter_mut().zip(&acc) {
            *o = a.total();
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_matvec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lossless(kind: MacroKind) -> MacroConfig {
        MacroConfig {
            adc_bits: 9,
            ..MacroConfig::default().with_kind(kind).noiseless()
        }
    }

    #[test]
    fn geometry_is_fixed() {
        let bad = MacroConfig {
            rows: 100,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(m)) if m.contains("rows")));
        MacroConfig::default().validate().unwrap();
    }

    #[test]
    fn column_roles_round_trip() {
        for c in 0..COLS {
            let r = column_role(c).unwrap();
            assert_eq!(physical_column(r.bank, r.block, r.bit), c);
        }
        assert!(column_role(COLS).is_err());
    }

    #[test]
    fn zero_matrix_stores_nothing() {
        let p = program_macro(&[0; ROWS * BANKS], &MacroConfig::default()).unwrap();
        assert!(p.cells.iter().all(|c| !c.stored_bit));
    }

    #[test]
    fn single_weight_programs_eight_bits() {
        let mut w = vec![0; ROWS * BANKS];
        w[5 * BANKS + 3] = -1;
        let p = program_macro(&w, &MacroConfig::default()).unwrap();
        assert_eq!(p.cells.iter().filter(|c| c.stored_bit).count(), 8);
        for c in 0..COLS {
            assert_eq!(p.cell(5, c).stored_bit, column_role(c).unwrap().bank == 3);
        }
    }

    #[test]
    fn read_back_decodes_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Vec<i32> = (0..ROWS * BANKS).map(|_| rng.random_range(-128..=127)).collect();
        let p = program_macro(&w, &MacroConfig::default()).unwrap();
        assert_eq!(p.read_back(), w);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            program_macro(&[0; 10], &MacroConfig::default()),
            Err(Error::Mapping(_))
        ));
        let p = program_macro(&[0; ROWS * BANKS], &MacroConfig::default()).unwrap();
        assert!(matches!(p.matvec(&[0; 3], 1), Err(Error::Mapping(_))));
        assert!(p.matvec(&[2; ROWS], 1).is_err());
    }

    #[test]
    fn worked_example_end_to_end() {
        for kind in MacroKind::ALL {
            let mut w = vec![0; ROWS * BANKS];
            w[7 * BANKS] = -1;
            let mut x = vec![0; ROWS];
            x[7] = 1;
            let p = program_macro(&w, &lossless(kind)).unwrap();
            let r = p.matvec(&x, 1).unwrap();
            assert_eq!(r.outputs[0], -1);
            assert!(r.outputs[1..].iter().all(|&o| o == 0));
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w: Vec<i32> = (0..ROWS * BANKS).map(|_| rng.random_range(-128..=127)).collect();
        for kind in MacroKind::ALL {
            let p = program_macro(&w, &MacroConfig::default().with_kind(kind)).unwrap();
            assert_eq!(p.matvec(&[0; ROWS], 8).unwrap().outputs, vec![0; BANKS]);
        }
    }

    #[test]
    fn lossless_matches_oracle_and_macros_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w: Vec<i32> = (0..ROWS * BANKS).map(|_| rng.random_range(-128..=127)).collect();
            let x: Vec<u32> = (0..ROWS).map(|_| rng.random_range(0..256)).collect();
            let expect: Vec<i32> = exact_matvec(&x, &w, BANKS)
                .unwrap()
                .into_iter()
                .map(|v| v as i32)
                .collect();
            let mut outs = Vec::new();
            for kind in MacroKind::ALL {
                let p = program_macro(&w, &lossless(kind)).unwrap();
                let r = p.matvec(&x, 8).unwrap();
                assert_eq!(r.outputs, expect);
                assert_eq!(r.clipped + r.saturated, 0);
                outs.push(r.outputs);
            }
            assert_eq!(outs[0], outs[1]);
        }
    }

    #[test]
    fn four_bit_weights_use_only_high_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w: Vec<i32> = (0..ROWS * BANKS).map(|_| rng.random_range(-8..=7)).collect();
        let x: Vec<u32> = (0..ROWS).map(|_| rng.random_range(0..16)).collect();
        let cfg = MacroConfig {
            weight_bits: WeightBits::Four,
            ..lossless(MacroKind::ChgFe)
        };
        let p = program_macro(&w, &cfg).unwrap();
        assert_eq!(p.read_back(), w);
        let expect: Vec<i32> = exact_matvec(&x, &w, BANKS)
            .unwrap()
            .into_iter()
            .map(|v| v as i32)
            .collect();
        let r = p.matvec_traced(&x, 4).unwrap();
        assert_eq!(r.outputs, expect);
        assert!(r.traces.unwrap().iter().all(|t| t.block == BlockKind::H4B));
        assert!(program_macro(&[8; ROWS * BANKS], &cfg).is_err());
    }

    #[test]
    fn deterministic_under_variation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<i32> = (0..ROWS * BANKS).map(|_| rng.random_range(-128..=127)).collect();
        let x: Vec<u32> = (0..ROWS).map(|_| rng.random_range(0..256)).collect();
        for kind in MacroKind::ALL {
            let cfg = MacroConfig {
                seed: 99,
                ..MacroConfig::default().with_kind(kind)
            };
            let a = program_macro(&w, &cfg).unwrap().matvec_traced(&x, 8).unwrap();
            let b = program_macro(&w, &cfg).unwrap().matvec_traced(&x, 8).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn traces_cover_every_conversion() {
        let p = program_macro(&[1; ROWS * BANKS], &MacroConfig::default()).unwrap();
        let r = p.matvec_traced(&[3; ROWS], 2).unwrap();
        assert_eq!(r.traces.unwrap().len(), BANKS * GROUPS * 2 * 2);
        assert!(r.energy_joules > 0.0 && r.latency_seconds > 0.0);
    }
}
