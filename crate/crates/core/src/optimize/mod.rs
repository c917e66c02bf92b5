//! Full-batch gradient descent and TrimGrad with precomputed iteration
//! budgets.
//!
//! Runs always stop after a fixed number of steps. The budget comes from
//! the a-priori bounds below, never from the observed distance to a
//! minimizer the caller does not know.

use crate::aggregate::{GradientColumns, TrimKernel};
use crate::error::{invalid, Result};
use crate::losses::{Dataset, ForgetSpec, LossModel};
use crate::numkit::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    BudgetExhausted,
    TargetReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_theta: ParamVector,
    pub iterations: usize,
    /// Per-sample gradient evaluations.
    pub grad_evals: u64,
    /// `(iteration, batch risk)` pairs, starting at iteration 0.
    pub risk_trajectory: Vec<(usize, f64)>,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    /// Record the batch risk every `stride` iterations (and at the last
    /// one). `0` records only the first and last.
    pub stride: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { stride: 1 }
    }
}

/// `(2/μ)·L(θ₀)`, an upper bound on `‖θ₀ − θ*‖²` for nonnegative losses.
pub fn init_error_bound(
    model: &LossModel,
    dataset: &Dataset,
    theta0: &ParamVector,
    exclude: Option<&ForgetSpec>,
) -> Result<f64> {
    Ok(2.0 / model.mu() * model.batch_risk(theta0, dataset, exclude)?)
}

/// Smallest `K` with `((L−μ)/(L+μ))^{2K} · init_bound ≤ target`.
pub fn gd_iterations(mu: f64, smooth_l: f64, init_bound: f64, target: f64) -> Result<usize> {
    if !(mu > 0.0 && smooth_l >= mu && smooth_l.is_finite()) {
        return invalid(format!("need 0 < mu <= L, got mu={mu}, L={smooth_l}"));
    }
    if !(target > 0.0) {
        return invalid(format!("target must be positive, got {target}"));
    }
    if !(init_bound >= 0.0 && init_bound.is_finite()) {
        return invalid(format!(
            "initial bound must be finite and nonnegative, got {init_bound}"
        ));
    }
    if init_bound <= target {
        return Ok(0);
    }
    let rho = (smooth_l - mu) / (smooth_l + mu);
    if rho == 0.0 {
        return Ok(1);
    }
    let meets = |k: usize| rho.powf(2.0 * k as f64) * init_bound <= target;
    let estimate = ((init_bound / target).ln() / (-2.0 * rho.ln())).ceil();
    if !estimate.is_finite() || estimate > 1e15 {
        return invalid(format!(
            "iteration budget overflows (condition number {})",
            smooth_l / mu
        ));
    }
    let mut k = (estimate as usize).max(1);
    while !meets(k) {
        k += 1;
    }
    while k > 1 && meets(k - 1) {
        k -= 1;
    }
    Ok(k)
}

/// `⌈(2L/μ)·ln(L·d·Δ/(α_emp·ε))⌉`, or 0 when the logarithm is not positive.
pub fn trimgrad_iterations(
    mu: f64,
    smooth_l: f64,
    d: usize,
    init_bound: f64,
    alpha_emp: f64,
    epsilon: f64,
) -> Result<usize> {
    for (name, v) in [
        ("mu", mu),
        ("L", smooth_l),
        ("init_bound", init_bound),
        ("alpha_emp", alpha_emp),
        ("epsilon", epsilon),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} must be positive and finite, got {v}"));
        }
    }
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let ratio = smooth_l * d as f64 * init_bound / (alpha_emp * epsilon);
    if ratio <= 1.0 {
        return Ok(0);
    }
    let k = (2.0 * smooth_l / mu * ratio.ln()).ceil();
    if k > 1e15 {
        return invalid("iteration budget overflows");
    }
    Ok(k as usize)
}

/// Gradient descent with step `2/(μ + L)`.
pub fn gd_train(
    model: &LossModel,
    dataset: &Dataset,
    exclude: Option<&ForgetSpec>,
    theta0: &ParamVector,
    iters: usize,
    options: TrainOptions,
) -> Result<TrainReport> {
    let step = 2.0 / (model.mu() + model.smooth_l());
    gd_train_with_step(model, dataset, exclude, theta0, iters, step, options)
}

pub fn gd_train_with_step(
    model: &LossModel,
    dataset: &Dataset,
    exclude: Option<&ForgetSpec>,
    theta0: &ParamVector,
    iters: usize,
    step: f64,
    options: TrainOptions,
) -> Result<TrainReport> {
    if !(step > 0.0 && step.is_finite()) {
        return invalid(format!("step size must be positive, got {step}"));
    }
    // validates kinds, dimensions and the exclusion set
    let initial_risk = model.batch_risk(theta0, dataset, exclude)?;
    let m = dataset.included_len(exclude);
    let d = theta0.dim();
    let mut theta = theta0.as_slice().to_vec();
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut recorder = Recorder::new(options, iters, initial_risk);
    for t in 1..=iters {
        model.batch_grad_unchecked(&theta, dataset, exclude, m, &mut scratch, &mut grad);
        descend(&mut theta, step, &grad)?;
        recorder.observe(t, || model.batch_risk_unchecked(&theta, dataset, exclude, m));
    }
    Ok(TrainReport {
        final_theta: ParamVector::from_vec_unchecked(theta),
        iterations: iters,
        grad_evals: iters as u64 * m as u64,
        risk_trajectory: recorder.finish(),
        stop_reason: StopReason::BudgetExhausted,
    })
}

/// TrimGrad: step `1/L` along the coordinate-wise trimmed mean of all
/// per-sample gradients on `dataset \ exclude`.
pub fn trimgrad_train(
    model: &LossModel,
    dataset: &Dataset,
    exclude: Option<&ForgetSpec>,
    f: usize,
    theta0: &ParamVector,
    iters: usize,
    options: TrainOptions,
) -> Result<TrainReport> {
    let initial_risk = model.batch_risk(theta0, dataset, exclude)?;
    let m = dataset.included_len(exclude);
    if 2 * f >= m {
        return invalid(format!(
            "trimming {f} from each side needs more than {} points, got {m}",
            2 * f
        ));
    }
    let d = theta0.dim();
    let step = 1.0 / model.smooth_l();
    let mut theta = theta0.as_slice().to_vec();
    let mut columns = GradientColumns::new(m, d);
    let mut row = vec![0.0; d];
    let mut direction = vec![0.0; d];
    let mut recorder = Recorder::new(options, iters, initial_risk);
    for t in 1..=iters {
        for (i, (_, z)) in dataset.included(exclude).enumerate() {
            model.grad_into(&theta, z, &mut row);
            columns.set_row(i, &row);
        }
        columns.trimmed_mean_into(f, TrimKernel::Select, &mut direction);
        descend(&mut theta, step, &direction)?;
        recorder.observe(t, || model.batch_risk_unchecked(&theta, dataset, exclude, m));
    }
    Ok(TrainReport {
        final_theta: ParamVector::from_vec_unchecked(theta),
        iterations: iters,
        grad_evals: iters as u64 * m as u64,
        risk_trajectory: recorder.finish(),
        stop_reason: StopReason::BudgetExhausted,
    })
}

fn descend(theta: &mut [f64], step: f64, grad: &[f64]) -> Result<()> {
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= step * g;
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::NumericalFailure {
            message: "iterate diverged".into(),
            last_value: None,
        });
    }
    Ok(())
}

struct Recorder {
    stride: usize,
    last: usize,
    points: Vec<(usize, f64)>,
}

impl Recorder {
    fn new(options: TrainOptions, iters: usize, initial: f64) -> Self {
        let mut points = Vec::with_capacity(match options.stride {
            0 => 2,
            s => iters / s + 2,
        });
        points.push((0, initial));
        Recorder {
            stride: options.stride,
            last: iters,
            points,
        }
    }

    fn observe(&mut self, t: usize, risk: impl FnOnce() -> f64) {
        let due = t == self.last || (self.stride > 0 && t.is_multiple_of(self.stride));
        if due {
            self.points.push((t, risk()));
        }
    }

    fn finish(self) -> Vec<(usize, f64)> {
        self.points
    }
}
