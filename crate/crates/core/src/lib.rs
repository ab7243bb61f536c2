//! LASSO-form inverse imaging toolkit: orthonormal wavelet transforms,
//! linear degradation operators, classical proximal-gradient solvers
//! (ISTA, FISTA with backtracking), scaled gradient projection with a
//! direction relaxation scheme, and a trainable stepsize predictor with
//! its greedy multi-iteration training pipeline.

pub mod error;
pub mod forward;
pub mod images;
pub mod objective;
pub mod solvers;
pub mod stepnet;
pub mod training;
pub mod wavelet;

mod fft;

pub use error::Error;
pub use forward::{ForwardModel, Measurement, MeasurementData, ModelKind, SamplingPattern};
pub use objective::{DiagScaling, LassoProblem};
pub use solvers::{
    Prediction, RelaxState, SearchDirection, SolveStatus, SolverConfig, SolverTrace,
    StepPredictor, TraceRecord,
};
pub use stepnet::{AdamConfig, AdamState, HeadKind, PredictorArch, PredictorParams};
pub use training::{TrainCorpus, TrainingConfig};
pub use wavelet::{CoeffLayout, CoeffVector, Orientation, Subband, WaveletFamily, WaveletSpec};

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
