//! Certified unlearning for strongly convex empirical risk minimization.
//!
//! Training runs gradient descent (or its robust trimmed-mean variant),
//! unlearning keeps optimizing on the retain set and then adds Gaussian noise
//! so the released model is Rényi-indistinguishable from a retrained one.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod capacity;
pub mod error;
pub mod losses;
pub mod numkit;
pub mod optimize;
pub mod scenarios;
pub mod unlearn;

pub use aggregate::{mean, trimmed_mean};
pub use error::{Error, Result};
pub use losses::{Curvature, DataPoint, Dataset, ForgetSpec, LossConstants, LossKind, LossModel};
pub use numkit::{ParamVector, RngHandle};
pub use optimize::{StopReason, TrainOptions, TrainReport};
pub use unlearn::{Algorithm, CertBudget, Certificate, NoiseSpec, PipelineOptions, UnlearnReport};
