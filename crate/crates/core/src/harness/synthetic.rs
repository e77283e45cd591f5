//! Seeded synthetic binary classification data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_rows_l2, SparseDataset, SparseVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Probability that a feature is nonzero.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Probability that a label is flipped.
    #[serde(default = "default_flip")]
    pub flip: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_density() -> f64 {
    0.3
}

fn default_flip() -> f64 {
    0.05
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            density: default_density(),
            flip: default_flip(),
            seed,
        }
    }
}

/// Gaussian sparse features, labels `sign(a·w_true)` with random flips,
/// rows scaled to unit l2 norm. Every row has at least one nonzero.
pub fn generate(spec: &SyntheticSpec) -> Result<SparseDataset> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::invalid("synthetic data needs n >= 1 and d >= 1"));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) || !(0.0..=1.0).contains(&spec.flip) {
        return Err(Error::invalid("density must lie in (0, 1] and flip in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w_true: Vec<f64> = (0..spec.d).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for j in 0..spec.d {
            if rng.random::<f64>() < spec.density {
                pairs.push((j, rng.sample(StandardNormal)));
            }
        }
        if pairs.is_empty() {
            let j = rng.random_range(0..spec.d as u64) as usize;
            pairs.push((j, rng.sample(StandardNormal)));
        }
        let margin: f64 = pairs.iter().map(|&(j, x)| x * w_true[j]).sum();
        let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < spec.flip {
            y = -y;
        }
        rows.push(SparseVec::from_pairs(pairs)?);
        labels.push(y);
    }
    Ok(normalize_rows_l2(SparseDataset::new(spec.d, rows, labels)?))
}
