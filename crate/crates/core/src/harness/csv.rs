use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub algo: String,
    pub dataset: String,
    pub loss: String,
    pub seed: u64,
    pub epoch: usize,
    pub effective_passes: f64,
    pub objective: f64,
    pub subopt: f64,
    pub gmap_sq: f64,
    pub ls_calls: usize,
    pub fallback_count: usize,
    pub wall_ms: f64,
}

pub const HEADER: [&str; 13] = [
    "run_id",
    "algo",
    "dataset",
    "loss",
    "seed",
    "epoch",
    "effective_passes",
    "objective",
    "subopt",
    "gmap_sq",
    "ls_calls",
    "fallback_count",
    "wall_ms",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_rows<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.algo.clone(),
            r.dataset.clone(),
            r.loss.clone(),
            r.seed.to_string(),
            r.epoch.to_string(),
            float(r.effective_passes),
            float(r.objective),
            float(r.subopt),
            float(r.gmap_sq),
            r.ls_calls.to_string(),
            r.fallback_count.to_string(),
            float(r.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes through a sibling temporary file and renames it into place.
pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    write_rows(rows, std::io::BufWriter::new(file))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(x: f64) -> MetricRow {
        MetricRow {
            run_id: "v1-s1".into(),
            algo: "v1, \"quoted\"".into(),
            dataset: "synthetic".into(),
            loss: "logistic_difference".into(),
            seed: 1,
            epoch: 2,
            effective_passes: 1.0 / 3.0,
            objective: x,
            subopt: 0.1 + 0.2,
            gmap_sq: 1e-300,
            ls_calls: 7,
            fallback_count: 0,
            wall_ms: 12.5,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let mut buf = Vec::new();
        write_rows(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), HEADER.join(","));
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(std::f64::consts::PI), row(-2.5e-17), row(f64::NAN)];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let back = read_rows(buf.as_slice()).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.objective.to_bits(), b.objective.to_bits());
            assert_eq!(a.effective_passes.to_bits(), b.effective_passes.to_bits());
            assert_eq!(a.subopt.to_bits(), b.subopt.to_bits());
            assert_eq!(a.gmap_sq.to_bits(), b.gmap_sq.to_bits());
            assert_eq!(a.algo, b.algo);
        }
    }
}
