//! Weight-matrix and dataset files.
//!
//! Both come in two flavours that are detected from the first bytes:
//!
//! - CSV with a one-line header. Matrices: `rows,cols,precision` then one
//!   line per row. Datasets: `samples,features,precision` then
//!   `label,f0,f1,...` per sample.
//! - Little-endian binary. Matrices: `b"FIMX"`, `u32` rows, cols, precision,
//!   then `rows·cols` `i32` values row-major. Datasets: `b"FIDS"`, `u32`
//!   samples, features, precision, then per sample one `u8` label followed by
//!   `features` `u8` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"FIMX";
pub const DATASET_MAGIC: &[u8; 4] = b"FIDS";

/// Signed integer matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Bits per signed entry.
    pub precision: u32,
    pub data: Vec<i32>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, precision: u32, data: Vec<i32>) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            precision,
            data,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.data[r * self.cols + c]
    }

    fn validate(&self) -> Result<()> {
        if !(1..=31).contains(&self.precision) {
            return Err(Error::Mapping(format!(
                "matrix precision {} unsupported",
                self.precision
            )));
        }
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Mapping(format!(
                "matrix has {} entries, header says {} x {}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let lim = 1i64 << (self.precision - 1);
        if let Some(v) = self.data.iter().find(|&&v| i64::from(v) < -lim || i64::from(v) >= lim) {
            return Err(Error::Encoding(format!(
                "matrix entry {v} outside {}-bit signed range",
                self.precision
            )));
        }
        Ok(())
    }
}

/// Labelled samples with unsigned quantized features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub features: usize,
    pub precision: u32,
    pub labels: Vec<u8>,
    /// `labels.len() × features`, row-major.
    pub data: Vec<u32>,
}

impl Dataset {
    pub fn new(features: usize, precision: u32, labels: Vec<u8>, data: Vec<u32>) -> Result<Self> {
        let d = Self {
            features,
            precision,
            labels,
            data,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[u32] {
        &self.data[i * self.features..(i + 1) * self.features]
    }

    fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.precision) {
            return Err(Error::Dataset(format!(
                "feature precision {} outside 1..=8",
                self.precision
            )));
        }
        if self.data.len() != self.labels.len() * self.features {
            return Err(Error::Dataset(format!(
                "{} feature values for {} samples of {} features",
                self.data.len(),
                self.labels.len(),
                self.features
            )));
        }
        if let Some(v) = self.data.iter().find(|&&v| v >= 1 << self.precision) {
            return Err(Error::Dataset(format!(
                "feature {v} does not fit in {} bits",
                self.precision
            )));
        }
        Ok(())
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parse comma-separated integers from every non-empty line; returns
/// `(line number, fields)` with 1-based line numbers.
fn csv_lines<T: std::str::FromStr>(path: &Path, text: &str) -> Result<Vec<(usize, Vec<T>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields = rec
            .iter()
            .map(|f| {
                f.parse::<T>()
                    .map_err(|_| parse_err(path, line, format!("'{f}' is not an integer")))
            })
            .collect::<Result<Vec<T>>>()?;
        out.push((line, fields));
    }
    Ok(out)
}

fn header3(path: &Path, lines: &[(usize, Vec<i64>)]) -> Result<(usize, usize, u32)> {
    let (line, h) = lines.first().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    if h.len() != 3 || h.iter().any(|&v| v < 0) {
        return Err(parse_err(path, *line, "header must be three non-negative integers"));
    }
    Ok((h[0] as usize, h[1] as usize, h[2] as u32))
}

fn parse_matrix_csv(path: &Path, text: &str) -> Result<IntMatrix> {
    let lines = csv_lines::<i64>(path, text)?;
    let (rows, cols, precision) = header3(path, &lines)?;
    let body = &lines[1..];
    if body.len() != rows {
        return Err(parse_err(
            path,
            body.last().map_or(lines[0].0, |l| l.0),
            format!("expected {rows} rows, found {}", body.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (line, fields) in body {
        if fields.len() != cols {
            return Err(parse_err(
                path,
                *line,
                format!("expected {cols} values, found {}", fields.len()),
            ));
        }
        for &v in fields {
            data.push(i32::try_from(v).map_err(|_| parse_err(path, *line, format!("{v} overflows i32")))?);
        }
    }
    IntMatrix::new(rows, cols, precision, data).map_err(|e| parse_err(path, 0, e.to_string()))
}

fn parse_dataset_csv(path: &Path, text: &str) -> Result<Dataset> {
    let lines = csv_lines::<i64>(path, text)?;
    let (samples, features, precision) = header3(path, &lines)?;
    let body = &lines[1..];
    if body.len() != samples {
        return Err(parse_err(
            path,
            body.last().map_or(lines[0].0, |l| l.0),
            format!("expected {samples} samples, found {}", body.len()),
        ));
    }
    let mut labels = Vec::with_capacity(samples);
    let mut data = Vec::with_capacity(samples * features);
    for (line, fields) in body {
        if fields.len() != features + 1 {
            return Err(parse_err(
                path,
                *line,
                format!("expected label + {features} features, found {} values", fields.len()),
            ));
        }
        labels.push(u8::try_from(fields[0]).map_err(|_| parse_err(path, *line, "label outside 0..=255"))?);
        for &v in &fields[1..] {
            data.push(u32::try_from(v).map_err(|_| parse_err(path, *line, format!("negative feature {v}")))?);
        }
    }
    Dataset::new(features, precision, labels, data).map_err(|e| parse_err(path, 0, e.to_string()))
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl ByteReader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(parse_err(self.path, 0, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(parse_err(
                self.path,
                0,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn parse_matrix_bin(path: &Path, bytes: &[u8]) -> Result<IntMatrix> {
    let mut r = ByteReader { bytes, pos: 4, path };
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let precision = r.u32()?;
    let data = (0..rows * cols).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    IntMatrix::new(rows, cols, precision, data)
}

fn parse_dataset_bin(path: &Path, bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader { bytes, pos: 4, path };
    let samples = r.u32()? as usize;
    let features = r.u32()? as usize;
    let precision = r.u32()?;
    let mut labels = Vec::with_capacity(samples);
    let mut data = Vec::with_capacity(samples * features);
    for _ in 0..samples {
        labels.push(r.take(1)?[0]);
        data.extend(r.take(features)?.iter().map(|&b| u32::from(b)));
    }
    r.finish()?;
    Dataset::new(features, precision, labels, data)
}

pub fn parse_matrix(path: &Path, bytes: &[u8]) -> Result<IntMatrix> {
    if bytes.starts_with(MATRIX_MAGIC) {
        return parse_matrix_bin(path, bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| parse_err(path, 0, "neither CSV text nor FIMX binary"))?;
    parse_matrix_csv(path, text)
}

pub fn parse_dataset(path: &Path, bytes: &[u8]) -> Result<Dataset> {
    if bytes.starts_with(DATASET_MAGIC) {
        return parse_dataset_bin(path, bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| parse_err(path, 0, "neither CSV text nor FIDS binary"))?;
    parse_dataset_csv(path, text)
}

pub fn read_matrix(path: &Path) -> Result<IntMatrix> {
    parse_matrix(path, &fs::read(path)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(path, &fs::read(path)?)
}

pub fn matrix_to_csv(m: &IntMatrix) -> String {
    let mut s = format!("{},{},{}\n", m.rows, m.cols, m.precision);
    for row in m.data.chunks(m.cols.max(1)) {
        let line: Vec<String> = row.iter().map(i32::to_string).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_to_bin(m: &IntMatrix) -> Vec<u8> {
    let mut b = Vec::with_capacity(16 + 4 * m.data.len());
    b.extend_from_slice(MATRIX_MAGIC);
    for h in [m.rows as u32, m.cols as u32, m.precision] {
        b.extend_from_slice(&h.to_le_bytes());
    }
    for v in &m.data {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut s = format!("{},{},{}\n", d.len(), d.features, d.precision);
    for i in 0..d.len() {
        let mut line = vec![d.labels[i].to_string()];
        line.extend(d.sample(i).iter().map(u32::to_string));
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn dataset_to_bin(d: &Dataset) -> Result<Vec<u8>> {
    let mut b = Vec::with_capacity(16 + d.data.len() + d.len());
    b.extend_from_slice(DATASET_MAGIC);
    for h in [d.len() as u32, d.features as u32, d.precision] {
        b.extend_from_slice(&h.to_le_bytes());
    }
    for i in 0..d.len() {
        b.push(d.labels[i]);
        for &v in d.sample(i) {
            b.push(u8::try_from(v).map_err(|_| Error::Dataset(format!("feature {v} does not fit a byte")))?);
        }
    }
    Ok(b)
}

/// Write serializable records as a headered CSV file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn csv_matrix_parses() {
        let m = parse_matrix(p(), b"2,3,8\n1,-2,3\n-128,127,0\n").unwrap();
        assert_eq!(m.rows, 2);
        assert_eq!(m.get(1, 0), -128);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match parse_matrix(p(), b"2,2,8\n1,2\n3,x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_matrix(p(), b"2,2,8\n1,2\n3\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("expected 2"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_matrix(p(), b"1,1,4\n8\n").is_err());
        assert!(parse_matrix(p(), b"").is_err());
    }

    #[test]
    fn dataset_csv_parses() {
        let d = parse_dataset(p(), b"2,3,4\n1,0,15,3\n9,1,2,3\n").unwrap();
        assert_eq!(d.labels, vec![1, 9]);
        assert_eq!(d.sample(1), &[1, 2, 3]);
        assert!(parse_dataset(p(), b"1,1,4\n0,16\n").is_err());
    }

    #[test]
    fn truncated_binary_rejected() {
        let m = IntMatrix::new(2, 2, 8, vec![1, 2, 3, 4]).unwrap();
        let b = matrix_to_bin(&m);
        assert!(parse_matrix(p(), &b[..b.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn matrix_round_trips(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data = (0..rows * cols).map(|_| rng.random_range(-128..=127)).collect();
            let m = IntMatrix::new(rows, cols, 8, data).unwrap();
            prop_assert_eq!(&parse_matrix(p(), matrix_to_csv(&m).as_bytes()).unwrap(), &m);
            prop_assert_eq!(&parse_matrix(p(), &matrix_to_bin(&m)).unwrap(), &m);
        }

        #[test]
        fn dataset_round_trips(n in 1usize..20, f in 1usize..20, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let labels = (0..n).map(|_| rng.random_range(0..10)).collect();
            let data = (0..n * f).map(|_| rng.random_range(0..16)).collect();
            let d = Dataset::new(f, 4, labels, data).unwrap();
            prop_assert_eq!(&parse_dataset(p(), dataset_to_csv(&d).as_bytes()).unwrap(), &d);
            prop_assert_eq!(&parse_dataset(p(), &dataset_to_bin(&d).unwrap()).unwrap(), &d);
        }
    }
}
