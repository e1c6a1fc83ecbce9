//! Multitask Gaussian process regression from TDOA vectors to impact
//! coordinates.

mod io;
mod kernel;
mod model;
mod tasks;

pub use io::{train_data_path, training_digest, ModelFile, MODEL_FORMAT};
pub use kernel::{input_kernel_matrix, kernel_eval, KernelKind, KernelSpec};
pub use model::{
    build_joint_kernel, cholesky_with_jitter, lml_with_gradient, log_marginal_likelihood,
    FitOptions, GprModel, LmlGradient, Prediction, TrainingTrace, JITTER_MAX, JITTER_START,
    VARIANCE_TOLERANCE,
};
pub use tasks::TaskCovariance;
