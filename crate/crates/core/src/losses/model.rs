use nalgebra::DMatrix;

use super::{DataPoint, Dataset, ForgetSpec, PointKind};
use crate::error::{invalid, Error, Result};
use crate::numkit::{solve_spd, symmetric_extreme_eigenvalues, DenseMatrix, ParamVector};

/// Strong convexity, smoothness and (optionally) Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    pub mu: f64,
    pub smooth_l: f64,
    pub lipschitz_r: Option<f64>,
}

impl LossConstants {
    pub fn new(mu: f64, smooth_l: f64, lipschitz_r: Option<f64>) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return invalid(format!("strong convexity must be positive, got {mu}"));
        }
        if !(smooth_l >= mu && smooth_l.is_finite()) {
            return invalid(format!("smoothness {smooth_l} must be >= strong convexity {mu}"));
        }
        if let Some(r) = lipschitz_r {
            if !(r > 0.0 && r.is_finite()) {
                return invalid(format!("Lipschitz constant must be positive, got {r}"));
            }
        }
        Ok(LossConstants {
            mu,
            smooth_l,
            lipschitz_r,
        })
    }

    pub fn condition_number(&self) -> f64 {
        self.smooth_l / self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `½‖θ − z‖²`
    QuadraticAnchor,
    /// `½(x·θ − y)² + (λ/2)‖θ‖²`
    RidgeLS { lambda: f64 },
    /// Binary logistic loss plus `(λ/2)‖θ‖²`.
    RegLogistic { lambda: f64 },
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::QuadraticAnchor => "quadratic-anchor",
            LossKind::RidgeLS { .. } => "ridge",
            LossKind::RegLogistic { .. } => "logistic",
        }
    }

    fn point_kind(&self) -> PointKind {
        match self {
            LossKind::QuadraticAnchor => PointKind::Anchor,
            LossKind::RidgeLS { .. } => PointKind::Regression,
            LossKind::RegLogistic { .. } => PointKind::Classification,
        }
    }

    fn lambda(&self) -> f64 {
        match *self {
            LossKind::QuadraticAnchor => 0.0,
            LossKind::RidgeLS { lambda } | LossKind::RegLogistic { lambda } => lambda,
        }
    }
}

/// Where a model's `(μ, L)` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    /// Every `ℓ(·; z)` is μ-strongly convex and L-smooth.
    PerSample,
    /// Extreme Hessian eigenvalues of the batch objectives the model was
    /// calibrated on. Valid for full-batch gradient descent on those
    /// objectives only.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    constants: LossConstants,
    curvature: Curvature,
}

impl LossModel {
    pub fn quadratic_anchor() -> Self {
        LossModel {
            kind: LossKind::QuadraticAnchor,
            constants: LossConstants {
                mu: 1.0,
                smooth_l: 1.0,
                lipschitz_r: None,
            },
            curvature: Curvature::PerSample,
        }
    }

    /// Ridge least squares bound to `dataset`: `μ = λ`, `L = λ + max‖x‖²`.
    pub fn ridge(lambda: f64, dataset: &Dataset) -> Result<Self> {
        check_lambda(lambda)?;
        expect_kind(dataset, PointKind::Regression)?;
        let max_sq = max_feature_norm_sq(dataset);
        Ok(LossModel {
            kind: LossKind::RidgeLS { lambda },
            constants: LossConstants::new(lambda, lambda + max_sq, None)?,
            curvature: Curvature::PerSample,
        })
    }

    /// Binary regularized logistic regression bound to `dataset`:
    /// `μ = λ`, `L = λ + max‖x‖²/4`.
    pub fn logistic(lambda: f64, dataset: &Dataset) -> Result<Self> {
        check_lambda(lambda)?;
        expect_kind(dataset, PointKind::Classification)?;
        if dataset.classes() != 2 {
            return invalid("logistic loss supports binary classification only");
        }
        let max_sq = max_feature_norm_sq(dataset);
        Ok(LossModel {
            kind: LossKind::RegLogistic { lambda },
            constants: LossConstants::new(lambda, lambda + max_sq / 4.0, None)?,
            curvature: Curvature::PerSample,
        })
    }

    /// Attaches a Lipschitz constant (a clipping radius for the unbounded
    /// ridge loss).
    pub fn with_lipschitz(mut self, r: f64) -> Result<Self> {
        self.constants = LossConstants::new(self.constants.mu, self.constants.smooth_l, Some(r))?;
        Ok(self)
    }

    /// Replaces `(μ, L)` by the extreme Hessian eigenvalues of the batch
    /// objective on `dataset` and on `dataset \ exclude`, taking the smaller
    /// μ and the larger L of the two. The quadratic anchor loss is unchanged.
    pub fn calibrated(self, dataset: &Dataset, exclude: Option<&ForgetSpec>) -> Result<Self> {
        expect_kind(dataset, self.kind.point_kind())?;
        let lambda = self.kind.lambda();
        let mut mu = f64::INFINITY;
        let mut smooth_l: f64 = 0.0;
        let mut sets: Vec<Option<&ForgetSpec>> = vec![None];
        if let Some(f) = exclude {
            dataset.check_forget(f)?;
            sets.push(Some(f));
        }
        for ex in sets {
            let (lo, hi) = match self.kind {
                LossKind::QuadraticAnchor => (1.0, 1.0),
                LossKind::RidgeLS { .. } => {
                    let (lo, hi) = symmetric_extreme_eigenvalues(&second_moment(dataset, ex))?;
                    (lambda + lo.max(0.0), lambda + hi)
                }
                LossKind::RegLogistic { .. } => {
                    let (_, hi) = symmetric_extreme_eigenvalues(&second_moment(dataset, ex))?;
                    (lambda, lambda + hi / 4.0)
                }
            };
            mu = mu.min(lo);
            smooth_l = smooth_l.max(hi);
        }
        // eigensolver round-off
        let mu = mu * (1.0 - 1e-9);
        let smooth_l = (smooth_l * (1.0 + 1e-9)).max(mu);
        Ok(LossModel {
            kind: self.kind,
            constants: LossConstants::new(mu, smooth_l, self.constants.lipschitz_r)?,
            curvature: Curvature::Empirical,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn constants(&self) -> LossConstants {
        self.constants
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn mu(&self) -> f64 {
        self.constants.mu
    }

    pub fn smooth_l(&self) -> f64 {
        self.constants.smooth_l
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, LossKind::RegLogistic { .. })
    }

    fn check_point(&self, theta: &ParamVector, z: &DataPoint) -> Result<()> {
        if z.kind() != self.kind.point_kind() {
            return invalid(format!("{:?} point given to {} loss", z.kind(), self.kind.name()));
        }
        if theta.dim() != z.dim() {
            return invalid(format!(
                "parameter dimension {} does not match data dimension {}",
                theta.dim(),
                z.dim()
            ));
        }
        Ok(())
    }

    fn check_dataset(&self, theta: &ParamVector, dataset: &Dataset, exclude: Option<&ForgetSpec>) -> Result<usize> {
        if dataset.kind() != self.kind.point_kind() {
            return invalid(format!(
                "{:?} dataset given to {} loss",
                dataset.kind(),
                self.kind.name()
            ));
        }
        if theta.dim() != dataset.dim() {
            return invalid(format!(
                "parameter dimension {} does not match data dimension {}",
                theta.dim(),
                dataset.dim()
            ));
        }
        if let Some(f) = exclude {
            dataset.check_forget(f)?;
        }
        let m = dataset.included_len(exclude);
        if m == 0 {
            return invalid("no points left after exclusion");
        }
        Ok(m)
    }

    pub fn loss_at(&self, theta: &ParamVector, z: &DataPoint) -> Result<f64> {
        self.check_point(theta, z)?;
        Ok(self.loss_raw(theta.as_slice(), z))
    }

    pub fn grad_at(&self, theta: &ParamVector, z: &DataPoint) -> Result<ParamVector> {
        self.check_point(theta, z)?;
        let mut out = vec![0.0; theta.dim()];
        self.grad_into(theta.as_slice(), z, &mut out);
        Ok(ParamVector::from_vec_unchecked(out))
    }

    /// Mean loss over the points of `dataset` not in `exclude`.
    pub fn batch_risk(&self, theta: &ParamVector, dataset: &Dataset, exclude: Option<&ForgetSpec>) -> Result<f64> {
        let m = self.check_dataset(theta, dataset, exclude)?;
        Ok(self.batch_risk_unchecked(theta.as_slice(), dataset, exclude, m))
    }

    pub(crate) fn batch_risk_unchecked(
        &self,
        theta: &[f64],
        dataset: &Dataset,
        exclude: Option<&ForgetSpec>,
        m: usize,
    ) -> f64 {
        let mut total = 0.0;
        for (_, z) in dataset.included(exclude) {
            total += self.loss_raw(theta, z);
        }
        total / m as f64
    }

    /// Mean per-sample gradient over the points of `dataset` not in `exclude`.
    pub fn batch_grad(
        &self,
        theta: &ParamVector,
        dataset: &Dataset,
        exclude: Option<&ForgetSpec>,
    ) -> Result<ParamVector> {
        let m = self.check_dataset(theta, dataset, exclude)?;
        let mut out = vec![0.0; theta.dim()];
        let mut scratch = vec![0.0; theta.dim()];
        self.batch_grad_unchecked(theta.as_slice(), dataset, exclude, m, &mut scratch, &mut out);
        Ok(ParamVector::from_vec_unchecked(out))
    }

    pub(crate) fn batch_grad_unchecked(
        &self,
        theta: &[f64],
        dataset: &Dataset,
        exclude: Option<&ForgetSpec>,
        m: usize,
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        out.fill(0.0);
        for (_, z) in dataset.included(exclude) {
            self.grad_into(theta, z, scratch);
            for (o, g) in out.iter_mut().zip(scratch.iter()) {
                *o += g;
            }
        }
        let m = m as f64;
        for o in out.iter_mut() {
            *o /= m;
        }
    }

    /// Closed-form minimizer of the batch objective over `dataset \ exclude`.
    pub fn exact_minimizer(&self, dataset: &Dataset, exclude: Option<&ForgetSpec>) -> Result<ParamVector> {
        let probe = ParamVector::zeros(dataset.dim());
        let m = self.check_dataset(&probe, dataset, exclude)?;
        match self.kind {
            LossKind::QuadraticAnchor => {
                let mut acc = vec![0.0; dataset.dim()];
                for (_, z) in dataset.included(exclude) {
                    for (a, v) in acc.iter_mut().zip(z.features().as_slice()) {
                        *a += v;
                    }
                }
                for a in acc.iter_mut() {
                    *a /= m as f64;
                }
                Ok(ParamVector::from_vec_unchecked(acc))
            }
            LossKind::RidgeLS { lambda } => {
                let d = dataset.dim();
                let mut a = second_moment(dataset, exclude);
                for i in 0..d {
                    a[(i, i)] += lambda;
                }
                let mut rhs = vec![0.0; d];
                for (_, z) in dataset.included(exclude) {
                    if let DataPoint::Regression { x, y } = z {
                        for (r, xi) in rhs.iter_mut().zip(x.as_slice()) {
                            *r += y * xi;
                        }
                    }
                }
                for r in rhs.iter_mut() {
                    *r /= m as f64;
                }
                solve_spd(&a, &ParamVector::new(rhs)?)
            }
            LossKind::RegLogistic { .. } => Err(Error::UnsupportedOracle("regularized logistic loss")),
        }
    }

    /// `E(R) = (1/|R|) Σ_{z ∈ R} ‖∇ℓ(θ*; z)‖²` over `dataset \ exclude`.
    ///
    /// `theta_star` is expected to be the minimizer over the same points; the
    /// statistic is still well defined at any other θ.
    pub fn interpolation_error(
        &self,
        theta_star: &ParamVector,
        dataset: &Dataset,
        exclude: Option<&ForgetSpec>,
    ) -> Result<f64> {
        let m = self.check_dataset(theta_star, dataset, exclude)?;
        let mut g = vec![0.0; theta_star.dim()];
        let mut total = 0.0;
        for (_, z) in dataset.included(exclude) {
            self.grad_into(theta_star.as_slice(), z, &mut g);
            total += g.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(total / m as f64)
    }

    pub(crate) fn loss_raw(&self, theta: &[f64], z: &DataPoint) -> f64 {
        match (self.kind, z) {
            (LossKind::QuadraticAnchor, DataPoint::Anchor(a)) => {
                0.5 * theta
                    .iter()
                    .zip(a.as_slice())
                    .fold(0.0, |acc, (t, v)| acc + (t - v) * (t - v))
            }
            (LossKind::RidgeLS { lambda }, DataPoint::Regression { x, y }) => {
                let r = dot(x.as_slice(), theta) - y;
                0.5 * r * r + 0.5 * lambda * dot(theta, theta)
            }
            (LossKind::RegLogistic { lambda }, DataPoint::Classification { x, y }) => {
                let m = margin_sign(*y) * dot(x.as_slice(), theta);
                softplus_neg(m) + 0.5 * lambda * dot(theta, theta)
            }
            _ => unreachable!("point kind checked at the public boundary"),
        }
    }

    pub(crate) fn grad_into(&self, theta: &[f64], z: &DataPoint, out: &mut [f64]) {
        match (self.kind, z) {
            (LossKind::QuadraticAnchor, DataPoint::Anchor(a)) => {
                for ((o, t), v) in out.iter_mut().zip(theta).zip(a.as_slice()) {
                    *o = t - v;
                }
            }
            (LossKind::RidgeLS { lambda }, DataPoint::Regression { x, y }) => {
                let r = dot(x.as_slice(), theta) - y;
                for ((o, t), xi) in out.iter_mut().zip(theta).zip(x.as_slice()) {
                    *o = r * xi + lambda * t;
                }
            }
            (LossKind::RegLogistic { lambda }, DataPoint::Classification { x, y }) => {
                let s = margin_sign(*y);
                let m = s * dot(x.as_slice(), theta);
                // d/dm log(1 + e^{-m}) = -σ(-m)
                let coef = -s * sigmoid(-m);
                for ((o, t), xi) in out.iter_mut().zip(theta).zip(x.as_slice()) {
                    *o = coef * xi + lambda * t;
                }
            }
            _ => unreachable!("point kind checked at the public boundary"),
        }
    }

    /// Predicted class of a classification point (`x·θ > 0` → class 1).
    pub fn predict(&self, theta: &ParamVector, x: &ParamVector) -> usize {
        usize::from(dot(x.as_slice(), theta.as_slice()) > 0.0)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("regularization must be positive, got {lambda}"));
    }
    Ok(())
}

fn expect_kind(dataset: &Dataset, kind: PointKind) -> Result<()> {
    if dataset.kind() != kind {
        return invalid(format!("expected a {kind:?} dataset, got {:?}", dataset.kind()));
    }
    Ok(())
}

fn max_feature_norm_sq(dataset: &Dataset) -> f64 {
    dataset
        .points()
        .iter()
        .map(|p| p.features().norm_sq())
        .fold(0.0, f64::max)
}

/// `(1/m) Σ x xᵀ` over the included points.
fn second_moment(dataset: &Dataset, exclude: Option<&ForgetSpec>) -> DenseMatrix {
    let d = dataset.dim();
    let m = dataset.included_len(exclude);
    let mut x = DMatrix::<f64>::zeros(m, d);
    for (row, (_, z)) in dataset.included(exclude).enumerate() {
        for (j, v) in z.features().as_slice().iter().enumerate() {
            x[(row, j)] = *v;
        }
    }
    let mut g = x.transpose() * &x;
    g /= m as f64;
    // exact symmetry for the factorizations downstream
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = avg;
            g[(j, i)] = avg;
        }
    }
    g
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::numkit::vector_dot(a, b)
}

#[inline]
fn margin_sign(y: usize) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `log(1 + e^{-m})` without overflow.
#[inline]
fn softplus_neg(m: f64) -> f64 {
    (-m.abs()).exp().ln_1p() + (-m).max(0.0)
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
