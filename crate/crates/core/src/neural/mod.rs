//! One-hidden-layer perceptron and the batch Levenberg-Marquardt trainer.

mod io;
mod lm;
mod mlp;

pub use lm::{lm_train, FnProblem, LeastSquares, LmConfig, LmOutcome, LmStep};
pub use mlp::{param_count, Mlp, MlpEval};
