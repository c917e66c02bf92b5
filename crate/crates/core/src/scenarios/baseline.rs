use crate::capacity::minimizer_shift_bound;
use crate::error::{invalid, Result};
use crate::losses::{Dataset, LossModel};
use crate::numkit::{gaussian_sample, ParamVector, RngHandle};
use crate::optimize::{gd_iterations, gd_train, init_error_bound, TrainOptions};
use crate::unlearn::CertBudget;

#[derive(Debug, Clone, PartialEq)]
pub struct LazyDpOutput {
    /// Released model.
    pub theta: ParamVector,
    /// Model before noise.
    pub trained: ParamVector,
    pub noise_variance: f64,
    /// Group sensitivity `2Rf/(μn)`.
    pub sensitivity: f64,
}

/// Trains once on the full dataset, then releases it with Gaussian noise
/// large enough to hide any group of `f` points. Later removal requests are
/// ignored.
///
/// The noise variance is `Δ_f²/(2ε)`, so a Gaussian mechanism with
/// sensitivity `Δ_f` has Rényi divergence exactly `q·ε` at every order `q`.
pub fn lazy_dp_baseline(
    model: &LossModel,
    dataset: &Dataset,
    f: usize,
    budget: CertBudget,
    theta0: &ParamVector,
    rng: &mut RngHandle,
) -> Result<LazyDpOutput> {
    let Some(r) = model.constants().lipschitz_r else {
        return invalid("the lazy DP baseline needs a Lipschitz constant (clipping radius)");
    };
    let n = dataset.len();
    if f >= n {
        return invalid(format!("group size {f} must be smaller than n = {n}"));
    }
    let trained = train_to_high_precision(model, dataset, theta0)?;
    let sensitivity = minimizer_shift_bound(r, model.mu(), n, f)?;
    let noise_variance = sensitivity * sensitivity / (2.0 * budget.epsilon);
    let theta = if noise_variance > 0.0 {
        trained.add(&gaussian_sample(rng, trained.dim(), noise_variance)?)
    } else {
        trained.clone()
    };
    Ok(LazyDpOutput {
        theta,
        trained,
        noise_variance,
        sensitivity,
    })
}

fn train_to_high_precision(model: &LossModel, dataset: &Dataset, theta0: &ParamVector) -> Result<ParamVector> {
    if model.has_closed_form() {
        return model.exact_minimizer(dataset, None);
    }
    let bound = init_error_bound(model, dataset, theta0, None)?;
    let k = gd_iterations(model.mu(), model.smooth_l(), bound, 1e-16 * (1.0 + bound))?;
    Ok(gd_train(model, dataset, None, theta0, k, TrainOptions { stride: 0 })?.final_theta)
}
