//! Certified unlearning pipelines, output perturbation and Rényi
//! certificates.
//!
//! Both pipelines optimize until the iterate is provably within
//! `α_emp·ε/(4Ld)` squared distance of the retain-set minimizer and then add
//! `N(0, α_emp/(2Ld)·I)`. Only the perturbed model is a certified release:
//! the pre-noise iterates kept in [`UnlearnReport`] are privacy-sensitive and
//! exist for testing and diagnostics.

use crate::error::{invalid, Result};
use crate::losses::{Dataset, ForgetSpec, LossModel};
use crate::numkit::{gaussian_sample, ParamVector, RngHandle};
use crate::optimize::{
    gd_iterations, gd_train, init_error_bound, trimgrad_iterations, trimgrad_train, StopReason, TrainOptions,
    TrainReport,
};

/// `(q, ε)` indistinguishability target plus the empirical loss target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertBudget {
    pub q: f64,
    pub epsilon: f64,
    pub alpha_emp: f64,
}

impl CertBudget {
    pub fn new(q: f64, epsilon: f64, alpha_emp: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return invalid(format!("Rényi order must exceed 1, got {q}"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        if !(alpha_emp > 0.0 && alpha_emp.is_finite()) {
            return invalid(format!("alpha_emp must be positive, got {alpha_emp}"));
        }
        Ok(CertBudget { q, epsilon, alpha_emp })
    }

    /// The pipelines' guarantees need `ε ≤ d`.
    pub fn check_dimension(&self, d: usize) -> Result<()> {
        if self.epsilon > d as f64 {
            return invalid(format!("epsilon {} exceeds the dimension {d}", self.epsilon));
        }
        Ok(())
    }

    /// Squared-distance precision `α_emp·ε/(4Ld)` required of both phases.
    pub fn precision_target(&self, smooth_l: f64, d: usize) -> f64 {
        self.alpha_emp * self.epsilon / (4.0 * smooth_l * d as f64)
    }

    pub fn divergence_budget(&self) -> f64 {
        self.q * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub variance: f64,
}

impl NoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return invalid(format!("noise variance must be positive, got {variance}"));
        }
        Ok(NoiseSpec { variance })
    }

    /// `α_emp/(2Ld)`.
    pub fn certified(budget: &CertBudget, smooth_l: f64, d: usize) -> Self {
        NoiseSpec {
            variance: budget.alpha_emp / (2.0 * smooth_l * d as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub q: f64,
    pub budget: f64,
    pub divergence: f64,
    pub distance_sq: f64,
    pub noise_variance: f64,
    pub satisfied: bool,
}

impl Certificate {
    pub fn from_distance(q: f64, budget: f64, distance_sq: f64, noise_variance: f64) -> Self {
        let divergence = gaussian_renyi(q, distance_sq, noise_variance);
        Certificate {
            q,
            budget,
            divergence,
            distance_sq,
            noise_variance,
            satisfied: divergence <= budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Gradient descent to the full-data minimizer, then on the retain set.
    NoisyGd,
    /// TrimGrad training, then gradient descent on the retain set.
    RobustTrimGrad,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::NoisyGd => "alg1",
            Algorithm::RobustTrimGrad => "alg3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub train: TrainOptions,
    /// Run the counterfactual and attach a certificate.
    pub verify: bool,
    /// Initialization error for the TrimGrad budget. Defaults to
    /// `init_error_bound` on the full dataset.
    pub delta: Option<f64>,
    /// TrimGrad trimming parameter. Defaults to the forget-set size.
    pub trim: Option<usize>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            train: TrainOptions::default(),
            verify: true,
            delta: None,
            trim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlearnReport {
    pub algorithm: Algorithm,
    pub perturbed_theta: ParamVector,
    /// Privacy-sensitive: not covered by the certificate.
    pub pre_noise_theta: ParamVector,
    pub train_report: TrainReport,
    pub unlearn_report: TrainReport,
    pub certificate: Option<Certificate>,
    pub noise: NoiseSpec,
    pub target: f64,
    /// Retain-set excess risk of the perturbed model, when the retain
    /// minimizer has a closed form.
    pub retain_excess_risk: Option<f64>,
    pub interp_error: Option<f64>,
}

/// `q·‖Δ‖²/(2σ²)` for `N(a, σ²I)` against `N(b, σ²I)`.
pub fn gaussian_renyi(q: f64, delta_sq: f64, variance: f64) -> f64 {
    q * (delta_sq / (2.0 * variance))
}

pub fn perturb(theta: &ParamVector, noise: NoiseSpec, rng: &mut RngHandle) -> Result<ParamVector> {
    let z = gaussian_sample(rng, theta.dim(), noise.variance)?;
    Ok(theta.add(&z))
}

pub fn pipeline_alg1(
    model: &LossModel,
    dataset: &Dataset,
    forget: &ForgetSpec,
    budget: CertBudget,
    theta0: &ParamVector,
    rng: &mut RngHandle,
    options: PipelineOptions,
) -> Result<UnlearnReport> {
    run_pipeline(Algorithm::NoisyGd, model, dataset, forget, budget, theta0, rng, options)
}

pub fn pipeline_alg3(
    model: &LossModel,
    dataset: &Dataset,
    forget: &ForgetSpec,
    budget: CertBudget,
    theta0: &ParamVector,
    rng: &mut RngHandle,
    options: PipelineOptions,
) -> Result<UnlearnReport> {
    run_pipeline(
        Algorithm::RobustTrimGrad,
        model,
        dataset,
        forget,
        budget,
        theta0,
        rng,
        options,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    algorithm: Algorithm,
    model: &LossModel,
    dataset: &Dataset,
    forget: &ForgetSpec,
    budget: CertBudget,
    theta0: &ParamVector,
    rng: &mut RngHandle,
    options: PipelineOptions,
) -> Result<UnlearnReport> {
    let d = dataset.dim();
    budget.check_dimension(d)?;
    dataset.check_forget(forget)?;
    if theta0.dim() != d {
        return invalid(format!("initial point has dimension {}, data has {d}", theta0.dim()));
    }
    let (train_report, unlearn_report) =
        deterministic_phases(algorithm, model, dataset, forget, budget, theta0, options, forget.len())?;
    let l = model.smooth_l();
    let noise = NoiseSpec::certified(&budget, l, d);
    let pre_noise_theta = unlearn_report.final_theta.clone();
    let perturbed_theta = perturb(&pre_noise_theta, noise, rng)?;

    let certificate = if options.verify {
        Some(verify_certificate(
            model,
            dataset,
            forget,
            budget,
            theta0,
            algorithm,
            options,
            &pre_noise_theta,
        )?)
    } else {
        None
    };

    let (retain_excess_risk, interp_error) = if model.has_closed_form() {
        let opt = model.exact_minimizer(dataset, Some(forget))?;
        let best = model.batch_risk(&opt, dataset, Some(forget))?;
        let risk = model.batch_risk(&perturbed_theta, dataset, Some(forget))?;
        (
            Some((risk - best).max(0.0)),
            Some(model.interpolation_error(&opt, dataset, Some(forget))?),
        )
    } else {
        (None, None)
    };

    Ok(UnlearnReport {
        algorithm,
        perturbed_theta,
        pre_noise_theta,
        train_report,
        unlearn_report,
        certificate,
        noise,
        target: budget.precision_target(l, d),
        retain_excess_risk,
        interp_error,
    })
}

/// Training then unlearning, without noise. `trim_default` is the trimming
/// parameter used when the options leave it unset.
#[allow(clippy::too_many_arguments)]
fn deterministic_phases(
    algorithm: Algorithm,
    model: &LossModel,
    dataset: &Dataset,
    forget: &ForgetSpec,
    budget: CertBudget,
    theta0: &ParamVector,
    options: PipelineOptions,
    trim_default: usize,
) -> Result<(TrainReport, TrainReport)> {
    let d = dataset.dim();
    let (mu, l) = (model.mu(), model.smooth_l());
    let target = budget.precision_target(l, d);
    let train_report = match algorithm {
        Algorithm::NoisyGd => {
            let bound = init_error_bound(model, dataset, theta0, None)?;
            let k = gd_iterations(mu, l, bound, target)?;
            let mut r = gd_train(model, dataset, None, theta0, k, options.train)?;
            r.stop_reason = StopReason::TargetReached;
            r
        }
        Algorithm::RobustTrimGrad => {
            let trim = options.trim.unwrap_or(trim_default);
            let delta = match options.delta {
                Some(v) => v,
                None => init_error_bound(model, dataset, theta0, None)?,
            };
            let k = if delta > 0.0 {
                trimgrad_iterations(mu, l, d, delta, budget.alpha_emp, budget.epsilon)?
            } else {
                0
            };
            trimgrad_train(model, dataset, None, trim, theta0, k, options.train)?
        }
    };
    let bound = init_error_bound(model, dataset, &train_report.final_theta, Some(forget))?;
    let k = gd_iterations(mu, l, bound, target)?;
    let mut unlearn_report = gd_train(
        model,
        dataset,
        Some(forget),
        &train_report.final_theta,
        k,
        options.train,
    )?;
    unlearn_report.stop_reason = StopReason::TargetReached;
    Ok((train_report, unlearn_report))
}

/// Reruns the pipeline on `dataset \ forget` with an empty removal request
/// and compares its pre-noise output with `unlearn_output`.
///
/// The counterfactual keeps the model's constants and the noise level of
/// the original run. For the TrimGrad pipeline it trains without trimming,
/// since the counterfactual dataset contains nothing to remove.
#[allow(clippy::too_many_arguments)]
pub fn verify_certificate(
    model: &LossModel,
    dataset: &Dataset,
    forget: &ForgetSpec,
    budget: CertBudget,
    theta0: &ParamVector,
    algorithm: Algorithm,
    options: PipelineOptions,
    unlearn_output: &ParamVector,
) -> Result<Certificate> {
    let d = dataset.dim();
    budget.check_dimension(d)?;
    if unlearn_output.dim() != d {
        return invalid("unlearned model dimension does not match the data");
    }
    let retain = dataset.retain(forget)?;
    let mut counter_options = options;
    counter_options.train = TrainOptions { stride: 0 };
    counter_options.trim = Some(0);
    if algorithm == Algorithm::RobustTrimGrad && options.delta.is_none() {
        counter_options.delta = Some(init_error_bound(model, &retain, theta0, None)?);
    }
    let (_, counter) = deterministic_phases(
        algorithm,
        model,
        &retain,
        &ForgetSpec::empty(),
        budget,
        theta0,
        counter_options,
        0,
    )?;
    let noise = NoiseSpec::certified(&budget, model.smooth_l(), d);
    Ok(Certificate::from_distance(
        budget.q,
        budget.divergence_budget(),
        unlearn_output.dist_sq(&counter.final_theta),
        noise.variance,
    ))
}
