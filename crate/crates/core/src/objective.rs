//! The finite-sum interface the optimizers run against.

/// Smooth finite sum `f(w) = (1/n) Σ f_i(w)`.
///
/// Implementations must accumulate in batch order so that evaluation is
/// bit-reproducible. Batches are nonempty slices of distinct indices in
/// `0..num_examples()`.
pub trait FiniteSum: Sync {
    fn num_examples(&self) -> usize;

    fn dim(&self) -> usize;

    /// Mean value over `batch`; writes the mean gradient into `grad`.
    fn batch_value_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64;

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64;

    fn full_value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let all: Vec<usize> = (0..self.num_examples()).collect();
        self.batch_value_grad(w, &all, grad)
    }

    fn full_value(&self, w: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.num_examples()).collect();
        self.batch_value(w, &all)
    }

    /// Lipschitz constant of the per-example gradients, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}
