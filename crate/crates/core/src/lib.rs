//! Strategic-manipulation workbench for preferential voting methods.
//!
//! The crate computes exact best responses of a single voter against nine
//! voting methods, turns limited polling information into feature vectors,
//! and trains small multilayer perceptrons to pick a ballot from that
//! information alone. Real-valued code is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix the common `f64` instantiations.

pub mod elections;
pub mod error;
pub mod evaluation;
pub mod information;
pub mod neural;
pub mod oracle;
#[cfg(any(test, feature = "reference"))]
pub mod reference;
pub mod samplers;
pub mod scalar;
pub mod voting;

pub use elections::{CandidateSet, MarginMatrix, Profile, Ranking, UtilityProfile, WinnerSet};
pub use error::{Error, Result};
pub use evaluation::{EvalConfig, EvalResult, Policy};
pub use information::{FeatureOptions, InfoType};
pub use neural::{LossKind, NetConfig, TrainConfig};
pub use oracle::{LabelMask, Labeling, LabeledInstance, Responses};
pub use samplers::{ProbModel, RandomStream};
pub use scalar::Scalar;
pub use voting::MethodId;

/// Utility profile over `f64`.
pub type Utilities = UtilityProfile<f64>;

/// Network over `f64`, used for checkpoints and gradient checks.
pub type Net = neural::Mlp<f64>;

/// Network over `f32`.
pub type Net32 = neural::Mlp<f32>;
