//! Accelerated proximal stochastic conjugate-gradient methods for
//! l1-regularized nonconvex finite sums, with baselines, rate-constant
//! calculators and an experiment harness.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod directions;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linesearch;
pub mod losses;
pub mod objective;
pub mod optimizers;
pub mod prox;
pub mod theory;

pub use data::{BatchIndex, BatchSampler, LabelMapping, ParseOptions, SparseDataset, SparseVec};
pub use directions::{BetaFormula, EstimatorState};
pub use error::{Error, Result};
pub use linesearch::{SearchOutcome, WolfeParams};
pub use losses::{LossKind, LossModel, LossObjective};
pub use objective::FiniteSum;
pub use optimizers::{
    AccConfig, Algorithm, BaselineConfig, BaselineKind, EpochRecord, OutputMode, RunTrace, Variant,
};
pub use prox::Regularizer;
pub use theory::TheoryInputs;
