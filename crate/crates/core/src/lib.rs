//! Impact localisation on plate structures from time-difference-of-arrival
//! (TDOA) vectors.
//!
//! The crate covers the whole chain: a wave-propagation oracle that
//! generates TDOAs and sensor waveforms ([`wavesim`]), an envelope-threshold
//! arrival picker ([`extract`]), input/output standardisation
//! ([`preprocess`]), multitask Gaussian process regression with RBF, cosine
//! and composite kernels ([`gpr`]), Bayesian model averaging across kernels
//! ([`fusion`]) and the experiment harness ([`eval`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below name the double-precision instantiations used by the CLI.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod extract;
pub mod fusion;
pub mod gpr;
pub mod num;
pub mod preprocess;
pub mod types;
pub mod wavesim;

pub use error::{Error, Result};
pub use num::Scalar;
pub use types::{Dataset, ImpactLocation, ImpactRecord, PlateGeometry, SensorArray, TdoaVector};

pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type TdoaVectorF64 = TdoaVector<f64>;
pub type SensorArrayF64 = SensorArray<f64>;
pub type ImpactLocationF64 = ImpactLocation<f64>;
pub type ImpactLocationF32 = ImpactLocation<f32>;
pub type GprModelF64 = gpr::GprModel<f64>;
pub type GprModelF32 = gpr::GprModel<f32>;
pub type PredictionF64 = gpr::Prediction<f64>;
pub type FusedPredictionF64 = fusion::FusedPrediction<f64>;
pub type StandardizerF64 = preprocess::Standardizer<f64>;
pub type ExperimentReportF64 = eval::ExperimentReport<f64>;
pub type LocalisationResultF64 = eval::LocalisationResult<f64>;
