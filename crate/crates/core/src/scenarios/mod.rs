//! Data generators, corruptions and adversarial constructions for the
//! experiments, the lazy differential-privacy baseline, and the micro-batch
//! corrupted-label study.

mod baseline;
mod housing;
mod study;

pub use baseline::{lazy_dp_baseline, LazyDpOutput};
pub use housing::{load_housing_csv, parse_housing_csv, write_housing_csv, HOUSING_COLUMNS};
pub use study::{microbatch_trimgrad_study, ArmSummary, StudyConfig, StudyMethod, StudyRecord, StudyRow};

use crate::error::{invalid, Result};
use crate::losses::{DataPoint, Dataset, ForgetSpec, LossModel, PointKind};
use crate::numkit::{gaussian_sample, ParamVector, RngHandle};

/// `x ~ N(0, I_d)`, `θ_true ~ N(0, I_d)`, `y = x·θ_true + η`,
/// `η ~ N(0, response_noise_std²)`.
pub fn synthetic_regression(
    n: usize,
    d: usize,
    rng: &mut RngHandle,
    response_noise_std: f64,
) -> Result<(Dataset, ParamVector)> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let theta = gaussian_sample(rng, d, 1.0)?;
    let ds = regression_with_theta(n, &theta, rng, response_noise_std)?;
    Ok((ds, theta))
}

/// [`synthetic_regression`] with a caller-chosen true model.
pub fn regression_with_theta(
    n: usize,
    theta: &ParamVector,
    rng: &mut RngHandle,
    response_noise_std: f64,
) -> Result<Dataset> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    if !(response_noise_std >= 0.0 && response_noise_std.is_finite()) {
        return invalid(format!("response noise must be nonnegative, got {response_noise_std}"));
    }
    let d = theta.dim();
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = gaussian_sample(rng, d, 1.0)?;
        let mut y = x.dot(theta);
        if response_noise_std > 0.0 {
            y += response_noise_std * rng.standard_normal();
        }
        points.push(DataPoint::Regression { x, y });
    }
    Dataset::new(points)
}

/// Adds `offset` to the labels of `f` uniformly chosen points.
pub fn label_offset_ood(
    dataset: &Dataset,
    f: usize,
    offset: f64,
    rng: &mut RngHandle,
) -> Result<(Dataset, ForgetSpec)> {
    if dataset.kind() != PointKind::Regression {
        return invalid("label offsets need a regression dataset");
    }
    let n = dataset.len();
    if f >= n {
        return invalid(format!("cannot corrupt {f} of {n} points"));
    }
    if !offset.is_finite() {
        return invalid("offset must be finite");
    }
    let forget = ForgetSpec::new(rng.sample_indices(n, f), n)?;
    let points = dataset
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            DataPoint::Regression { x, y } if forget.contains(i) => DataPoint::Regression {
                x: x.clone(),
                y: y + offset,
            },
            other => other.clone(),
        })
        .collect();
    Ok((Dataset::new(points)?, forget))
}

/// Flips the labels of `⌊fraction·n⌋` uniformly chosen points of a binary
/// classification dataset.
pub fn corrupt_labels(dataset: &Dataset, fraction: f64, rng: &mut RngHandle) -> Result<(Dataset, ForgetSpec)> {
    if dataset.kind() != PointKind::Classification || dataset.classes() != 2 {
        return invalid("label flips need a binary classification dataset");
    }
    if !(fraction > 0.0 && fraction < 0.5) {
        return invalid(format!("corruption fraction must lie in (0, 0.5), got {fraction}"));
    }
    let n = dataset.len();
    let count = (fraction * n as f64).floor() as usize;
    let forget = ForgetSpec::new(rng.sample_indices(n, count), n)?;
    let points = dataset
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            DataPoint::Classification { x, y } if forget.contains(i) => {
                DataPoint::Classification { x: x.clone(), y: 1 - y }
            }
            other => other.clone(),
        })
        .collect();
    Ok((Dataset::new(points)?, forget))
}

/// Two unit-variance Gaussian blobs centred at `±(separation/2)·e₁` with
/// balanced random labels.
pub fn blobs(n: usize, d: usize, separation: f64, rng: &mut RngHandle) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return invalid("n and d must be positive");
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return invalid(format!("separation must be nonnegative, got {separation}"));
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.below(2);
        let mut x = gaussian_sample(rng, d, 1.0)?.into_vec();
        x[0] += if y == 1 { separation / 2.0 } else { -separation / 2.0 };
        points.push(DataPoint::Classification {
            x: ParamVector::new(x)?,
            y,
        });
    }
    Dataset::new(points)
}

/// The forget anchor `θ*_R + n·√Δ·u` with `n = |retain| + 1`. Adding it to
/// `retain` moves the mean-of-anchors minimizer by exactly `√Δ` along `u`.
pub fn adversarial_forget_point(retain: &Dataset, delta: f64, direction: &ParamVector) -> Result<DataPoint> {
    if retain.kind() != PointKind::Anchor {
        return invalid("the adversarial construction needs anchor points");
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    if direction.dim() != retain.dim() {
        return invalid("direction dimension does not match the data");
    }
    if (direction.norm() - 1.0).abs() > 1e-12 {
        return invalid(format!("direction must have unit norm, got {}", direction.norm()));
    }
    let centre = LossModel::quadratic_anchor().exact_minimizer(retain, None)?;
    let n = (retain.len() + 1) as f64;
    Ok(DataPoint::Anchor(centre.add(&direction.scale(n * delta.sqrt()))))
}
