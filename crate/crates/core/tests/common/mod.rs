#![allow(dead_code)]

use proxcg_core::data::{SparseDataset, SparseVec};
use proxcg_core::FiniteSum;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Dense-ish random dataset with ±1 labels; roughly `density` of the
/// entries are nonzero, every row has at least one.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, density: f64) -> SparseDataset {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for j in 0..d {
            if rng.random::<f64>() < density {
                pairs.push((j, rng.sample(StandardNormal)));
            }
        }
        if pairs.is_empty() {
            pairs.push((rng.random_range(0..d), 1.0));
        }
        rows.push(SparseVec::from_pairs(pairs).unwrap());
        labels.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
    }
    SparseDataset::new(d, rows, labels).unwrap()
}

/// `f_i(w) = ½(a_i·w - y_i)²` on dense rows.
pub struct LeastSquares {
    pub a: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl LeastSquares {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Self {
        LeastSquares {
            a: (0..n).map(|_| gaussian_vec(rng, d, 1.0)).collect(),
            y: gaussian_vec(rng, n, 1.0),
        }
    }

    /// `(H, c)` with `∇f(w) = Hw - c`.
    pub fn normal_equations(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (n, d) = (self.a.len(), self.a[0].len());
        let mut h = vec![vec![0.0; d]; d];
        let mut c = vec![0.0; d];
        for (row, yi) in self.a.iter().zip(&self.y) {
            for j in 0..d {
                c[j] += row[j] * yi / n as f64;
                for k in 0..d {
                    h[j][k] += row[j] * row[k] / n as f64;
                }
            }
        }
        (h, c)
    }
}

impl FiniteSum for LeastSquares {
    fn num_examples(&self) -> usize {
        self.a.len()
    }

    fn dim(&self) -> usize {
        self.a[0].len()
    }

    fn batch_value_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut f = 0.0;
        for &i in batch {
            let r: f64 = self.a[i].iter().zip(w).map(|(x, y)| x * y).sum::<f64>() - self.y[i];
            f += 0.5 * r * r;
            for (g, x) in grad.iter_mut().zip(&self.a[i]) {
                *g += scale * r * x;
            }
        }
        f * scale
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.batch_value_grad(w, batch, &mut g)
    }
}

pub fn full_grad<O: FiniteSum>(obj: &O, w: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; obj.dim()];
    obj.full_value_grad(w, &mut g);
    g
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
