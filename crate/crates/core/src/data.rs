//! LIBSVM-format sparse classification data, row normalization and
//! mini-batch sampling.

use std::fmt::Write as _;
use std::ops::Deref;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse row: strictly increasing 0-based indices with nonzero values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    /// Builds a row from (index, value) pairs. Zeros are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut row = SparseVec::default();
        for (idx, val) in pairs {
            if let Some(&last) = row.indices.last() {
                if idx <= last as usize {
                    return Err(Error::invalid(format!(
                        "sparse indices must be strictly increasing ({idx} after {last})"
                    )));
                }
            }
            if val != 0.0 {
                row.indices.push(u32::try_from(idx).map_err(|_| {
                    Error::invalid(format!("feature index {idx} exceeds u32 range"))
                })?);
                row.values.push(val);
            }
        }
        Ok(row)
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let mut row = SparseVec::default();
        for (j, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                row.indices.push(j as u32);
                row.values.push(v);
            }
        }
        row
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().map(|&i| i as usize)
    }

    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * dense[i as usize])
            .sum()
    }

    /// `out += alpha * self`, touching only stored entries.
    #[inline]
    pub fn scatter_add(&self, alpha: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] += alpha * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.scatter_add(1.0, &mut out);
        out
    }
}

/// Labeled sparse dataset with labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    d: usize,
    rows: Vec<SparseVec>,
    labels: Vec<f64>,
}

impl SparseDataset {
    pub fn new(d: usize, rows: Vec<SparseVec>, labels: Vec<f64>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::invalid(format!("label {bad} is not +1 or -1")));
        }
        if let Some(max) = rows.iter().filter_map(SparseVec::max_index).max() {
            if max >= d {
                return Err(Error::invalid(format!(
                    "feature index {} out of range for dimension {d}",
                    max + 1
                )));
            }
        }
        Ok(SparseDataset { d, rows, labels })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseVec {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseVec::nnz).sum()
    }

    /// Serializes back to LIBSVM text (1-based indices, shortest
    /// round-trip float formatting).
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            out.push_str(if label > 0.0 { "+1" } else { "-1" });
            for (i, v) in row.iter() {
                let _ = write!(out, " {}:{}", i + 1, v);
            }
            out.push('\n');
        }
        out
    }
}

/// How raw label tokens map onto {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMapping {
    /// Accepts 0/1 and -1/+1: `0 -> -1`, `1 -> +1`, `-1 -> -1`.
    #[default]
    Standard,
    /// The given label is the positive class; every other label is -1.
    PositiveClass(f64),
}

impl LabelMapping {
    fn map(&self, raw: f64) -> Option<f64> {
        match *self {
            LabelMapping::Standard => {
                if raw == 1.0 {
                    Some(1.0)
                } else if raw == -1.0 || raw == 0.0 {
                    Some(-1.0)
                } else {
                    None
                }
            }
            LabelMapping::PositiveClass(p) => Some(if raw == p { 1.0 } else { -1.0 }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub labels: LabelMapping,
    /// Feature dimension override; must be at least the largest index seen.
    pub dim: Option<usize>,
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based
/// indices, `#` comments, LF or CRLF line endings.
pub fn parse_libsvm(text: &str, opts: &ParseOptions) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let raw_label: f64 = parse_number(label_tok, line_no)?;
        let label = opts.labels.map(raw_label).ok_or_else(|| Error::Format {
            line: line_no,
            reason: format!(
                "label {label_tok:?} is not one of 0, 1, -1, +1 (use a positive-class label mapping)"
            ),
        })?;

        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut prev: Option<usize> = None;
        for tok in tokens {
            let (idx_tok, val_tok) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                token: tok.to_string(),
                reason: "expected <index>:<value>".into(),
            })?;
            let idx: i64 = idx_tok.parse().map_err(|e| Error::Parse {
                line: line_no,
                token: idx_tok.to_string(),
                reason: format!("{e}"),
            })?;
            if idx < 1 {
                return Err(Error::Format {
                    line: line_no,
                    reason: format!("feature index {idx} is below 1"),
                });
            }
            let idx = idx as usize;
            if let Some(p) = prev {
                if idx <= p {
                    return Err(Error::Format {
                        line: line_no,
                        reason: format!("feature index {idx} does not increase (after {p})"),
                    });
                }
            }
            prev = Some(idx);
            let val: f64 = parse_number(val_tok, line_no)?;
            max_index = max_index.max(idx);
            if val != 0.0 {
                indices.push(
                    u32::try_from(idx - 1).map_err(|_| Error::Format {
                        line: line_no,
                        reason: format!("feature index {idx} too large"),
                    })?,
                );
                values.push(val);
            }
        }
        rows.push(SparseVec { indices, values });
        labels.push(label);
    }

    let d = match opts.dim {
        Some(d) if d < max_index => {
            return Err(Error::invalid(format!(
                "dimension override {d} is below the largest feature index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    Ok(SparseDataset { d, rows, labels })
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|e| Error::Parse {
        line,
        token: tok.to_string(),
        reason: format!("{e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            token: tok.to_string(),
            reason: "value is not finite".into(),
        });
    }
    Ok(v)
}

pub fn read_libsvm(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<SparseDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(&text, opts)
}

/// Divides every nonzero row by its l2 norm. Zero rows are left as is.
pub fn normalize_rows_l2(mut ds: SparseDataset) -> SparseDataset {
    for row in &mut ds.rows {
        let norm = row.norm_sq().sqrt();
        if norm > 0.0 && norm != 1.0 {
            for v in &mut row.values {
                *v /= norm;
            }
        }
    }
    ds
}

/// A set of distinct example indices, stored in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchIndex {
    indices: Vec<usize>,
}

impl BatchIndex {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("batch indices must be distinct"));
        }
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(Error::invalid(format!("batch index out of range for n = {n}")));
        }
        Ok(BatchIndex { indices })
    }

    pub fn full(n: usize) -> Self {
        BatchIndex {
            indices: (0..n).collect(),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }
}

impl Deref for BatchIndex {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.indices
    }
}

/// Draws size-`b` subsets uniformly without replacement by a partial
/// Fisher-Yates shuffle over a persistent index pool.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pool: Vec<usize>,
    b: usize,
}

impl BatchSampler {
    pub fn new(n: usize, b: usize) -> Result<Self> {
        if b == 0 || b > n {
            return Err(Error::invalid(format!(
                "batch size {b} must lie in [1, n = {n}]"
            )));
        }
        Ok(BatchSampler {
            pool: (0..n).collect(),
            b,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.b
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> BatchIndex {
        let n = self.pool.len();
        if self.b == n {
            return BatchIndex::full(n);
        }
        for i in 0..self.b {
            // u64 range keeps the draw sequence independent of pointer width
            let j = rng.random_range(i as u64..n as u64) as usize;
            self.pool.swap(i, j);
        }
        let mut indices = self.pool[..self.b].to_vec();
        indices.sort_unstable();
        BatchIndex { indices }
    }
}

/// One-shot uniform draw of `b` distinct indices from `0..n`.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, b: usize) -> Result<BatchIndex> {
    Ok(BatchSampler::new(n, b)?.draw(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<SparseDataset> {
        parse_libsvm(text, &ParseOptions::default())
    }

    #[test]
    fn parses_basic_file() {
        let ds = parse("+1 1:0.5 3:-0.25\n-1 2:1.0").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.row(0).iter().collect::<Vec<_>>(), vec![(0, 0.5), (2, -0.25)]);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn empty_feature_row() {
        let ds = parse("-1\n").unwrap();
        assert_eq!(ds.n(), 1);
        assert!(ds.row(0).is_empty());
        assert_eq!(ds.d(), 0);
    }

    #[test]
    fn rejects_non_increasing_index() {
        let err = parse("+1 3:1 2:1").unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_zero_index_and_garbage() {
        assert!(matches!(parse("+1 0:1").unwrap_err(), Error::Format { line: 1, .. }));
        assert!(matches!(
            parse("+1 1:1\n-1 x:2").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            parse("+1 1:abc").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(parse("spam 1:1").unwrap_err(), Error::Parse { .. }));
    }

    #[test]
    fn comments_crlf_and_zero_values() {
        let ds = parse("# header\r\n1 1:0 2:3 # trailing\r\n\r\n0 4:1\r\n").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.row(0).nnz(), 1);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn label_mappings() {
        assert!(matches!(parse("2 1:1").unwrap_err(), Error::Format { .. }));
        let opts = ParseOptions {
            labels: LabelMapping::PositiveClass(2.0),
            dim: None,
        };
        let ds = parse_libsvm("2 1:1\n4 1:1", &opts).unwrap();
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn dimension_override() {
        let opts = ParseOptions {
            dim: Some(10),
            ..Default::default()
        };
        assert_eq!(parse_libsvm("1 3:1", &opts).unwrap().d(), 10);
        let opts = ParseOptions {
            dim: Some(2),
            ..Default::default()
        };
        assert!(parse_libsvm("1 3:1", &opts).is_err());
    }

    #[test]
    fn normalization_cases() {
        let ds = SparseDataset::new(
            2,
            vec![
                SparseVec::from_dense(&[3.0, 4.0]),
                SparseVec::default(),
                SparseVec::from_dense(&[0.0, 1.0]),
            ],
            vec![1.0, -1.0, 1.0],
        )
        .unwrap();
        let out = normalize_rows_l2(ds.clone());
        assert_eq!(out.row(0).to_dense(2), vec![0.6, 0.8]);
        assert!(out.row(1).is_empty());
        assert_eq!(out.row(2), ds.row(2));
        assert_eq!(out.labels(), ds.labels());
    }

    #[test]
    fn full_batch_and_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_batch(&mut rng, 7, 7).unwrap().as_slice(), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(sample_batch(&mut rng, 1, 1).unwrap().as_slice(), &[0]);
        assert!(sample_batch(&mut rng, 3, 4).is_err());
        assert!(sample_batch(&mut rng, 3, 0).is_err());
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = BatchSampler::new(100, 10).unwrap();
            (0..20).map(|_| s.draw(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn batch_index_validation() {
        assert!(BatchIndex::new(vec![1, 1], 3).is_err());
        assert!(BatchIndex::new(vec![3], 3).is_err());
        assert_eq!(BatchIndex::new(vec![2, 0], 3).unwrap().as_slice(), &[0, 2]);
    }
}
