//! Per-sample losses with certified curvature constants, batch risk and
//! gradient evaluation, closed-form minimizers and the interpolation error.

mod data;
mod model;

pub use data::{robust_regime_limit, DataPoint, Dataset, ForgetSpec, PointKind};
pub use model::{Curvature, LossConstants, LossKind, LossModel};

/// Default ℓ2 regularization for the ridge and logistic losses.
pub const DEFAULT_LAMBDA: f64 = 1e-2;
