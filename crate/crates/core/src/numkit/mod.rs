//! Dense numerical substrate shared by the rest of the crate.
//!
//! Reductions over stored vectors run left to right in storage order, so two
//! runs with the same inputs produce bit-identical results. The one exception
//! is [`ExactSum`], which is correctly rounded and therefore independent of
//! the order its inputs arrive in.

mod linalg;
mod rng;
mod sum;
mod vector;

pub use linalg::{solve_spd, symmetric_extreme_eigenvalues, top_eigenvalue, DenseMatrix};
pub use rng::{gaussian_sample, RngHandle};
pub use sum::ExactSum;
pub use vector::ParamVector;

pub(crate) use vector::dot as vector_dot;
