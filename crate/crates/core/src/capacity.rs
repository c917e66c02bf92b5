//! Deletion-capacity order estimates.
//!
//! The hidden constants of the asymptotic formulas are set to 1, so every
//! number here is an order estimate, not a calibrated count. Time budgets are
//! in per-sample gradient evaluations; one full-batch step costs `n`.

use crate::error::{invalid, Result};

pub const ORDER_ESTIMATE_LABEL: &str = "order estimate (constant = 1)";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityInputs {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub time_budget_t: f64,
    pub lipschitz_r: Option<f64>,
    /// `‖θ₀ − θ*‖`
    pub init_dist: f64,
    pub interp_error: f64,
}

impl CapacityInputs {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return invalid("n and d must be positive");
        }
        positive("alpha", self.alpha)?;
        positive("epsilon", self.epsilon)?;
        if !(self.time_budget_t >= 0.0 && self.time_budget_t.is_finite()) {
            return invalid(format!("time budget must be nonnegative, got {}", self.time_budget_t));
        }
        if !(self.init_dist > 0.0 && self.init_dist.is_finite()) {
            return invalid(format!("initial distance must be positive, got {}", self.init_dist));
        }
        if !(self.interp_error >= 0.0 && self.interp_error.is_finite()) {
            return invalid(format!(
                "interpolation error must be nonnegative, got {}",
                self.interp_error
            ));
        }
        Ok(())
    }

    fn clamp(&self, raw: f64) -> f64 {
        raw.clamp(0.0, (self.n - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    /// Clamped to `[0, n − 1]`.
    pub value: f64,
    pub raw: f64,
    /// Set when the interpolation error is zero and the formula degenerates.
    pub perfect_interpolation: bool,
}

/// `n·√α`. Not clamped: with `α = 1` the whole dataset may go.
pub fn id_utility_capacity(n: usize, alpha: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    Ok(n as f64 * alpha.sqrt())
}

/// `n·αε·exp(T/(2nd)) / (R·d·‖θ₀ − θ*‖)`.
pub fn id_computational_capacity(inputs: &CapacityInputs) -> Result<CapacityEstimate> {
    inputs.validate()?;
    let Some(r) = inputs.lipschitz_r else {
        return invalid("the in-distribution computational capacity needs a Lipschitz constant");
    };
    positive("lipschitz_r", r)?;
    let (n, d) = (inputs.n as f64, inputs.d as f64);
    let raw =
        n * inputs.alpha * inputs.epsilon * (inputs.time_budget_t / (2.0 * n * d)).exp() / (r * d * inputs.init_dist);
    Ok(CapacityEstimate {
        value: inputs.clamp(raw),
        raw,
        perfect_interpolation: false,
    })
}

/// `n·α²ε²·exp(T/(nd)) / (E·d²·‖θ₀ − θ*_R‖²)`.
pub fn ood_computational_capacity(inputs: &CapacityInputs) -> Result<CapacityEstimate> {
    inputs.validate()?;
    if inputs.interp_error == 0.0 {
        return Ok(CapacityEstimate {
            value: (inputs.n - 1) as f64,
            raw: f64::INFINITY,
            perfect_interpolation: true,
        });
    }
    let (n, d) = (inputs.n as f64, inputs.d as f64);
    let ae = inputs.alpha * inputs.epsilon;
    let raw = n * ae * ae * (inputs.time_budget_t / (n * d)).exp()
        / (inputs.interp_error * d * d * inputs.init_dist * inputs.init_dist);
    Ok(CapacityEstimate {
        value: inputs.clamp(raw),
        raw,
        perfect_interpolation: false,
    })
}

/// `2Rf/(μn)`, a bound on `‖θ*_S − θ*_{S∖S_f}‖` for μ-strongly convex,
/// R-Lipschitz losses.
pub fn minimizer_shift_bound(lipschitz_r: f64, mu: f64, n: usize, f: usize) -> Result<f64> {
    positive("lipschitz_r", lipschitz_r)?;
    positive("mu", mu)?;
    if n == 0 || f > n {
        return invalid(format!("need f <= n and n > 0, got f={f}, n={n}"));
    }
    Ok(2.0 * lipschitz_r * f as f64 / (mu * n as f64))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return invalid(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{DataPoint, Dataset, ForgetSpec, LossModel};
    use crate::numkit::{gaussian_sample, RngHandle};

    fn base() -> CapacityInputs {
        CapacityInputs {
            n: 1000,
            d: 10,
            alpha: 0.1,
            epsilon: 1.0,
            time_budget_t: 0.0,
            lipschitz_r: Some(1.0),
            init_dist: 1.0,
            interp_error: 1.0,
        }
    }

    #[test]
    fn utility_capacity() {
        assert_eq!(id_utility_capacity(37, 1.0).unwrap(), 37.0);
        assert_eq!(id_utility_capacity(100, 0.04).unwrap(), 20.0);
        assert_eq!(
            id_utility_capacity(200, 0.3).unwrap(),
            2.0 * id_utility_capacity(100, 0.3).unwrap()
        );
        assert!(id_utility_capacity(10, 0.0).is_err());
    }

    #[test]
    fn id_computational_examples() {
        let at0 = id_computational_capacity(&base()).unwrap();
        assert_eq!(at0.value, 10.0);
        let t = 2.0 * 1000.0 * 10.0 * 10f64.ln();
        let later = id_computational_capacity(&CapacityInputs {
            time_budget_t: t,
            ..base()
        })
        .unwrap();
        assert!((later.value - 100.0).abs() < 1e-9);
        let mut prev = 0.0;
        for k in 0..20 {
            let v = id_computational_capacity(&CapacityInputs {
                time_budget_t: 5000.0 * k as f64,
                ..base()
            })
            .unwrap()
            .value;
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(prev, 999.0);
        assert!(id_computational_capacity(&CapacityInputs {
            lipschitz_r: None,
            ..base()
        })
        .is_err());
        assert!(id_computational_capacity(&CapacityInputs {
            init_dist: 0.0,
            ..base()
        })
        .is_err());
    }

    #[test]
    fn ood_computational_examples() {
        let unit = CapacityInputs {
            n: 100,
            d: 1,
            alpha: 1.0,
            epsilon: 1.0,
            time_budget_t: 0.0,
            lipschitz_r: None,
            init_dist: 1.0,
            interp_error: 1.0,
        };
        let c = ood_computational_capacity(&unit).unwrap();
        assert_eq!((c.raw, c.value), (100.0, 99.0));
        let half = ood_computational_capacity(&CapacityInputs { alpha: 0.5, ..unit }).unwrap();
        assert_eq!(half.raw, 25.0);
        let huge = ood_computational_capacity(&CapacityInputs {
            interp_error: 1e300,
            ..unit
        })
        .unwrap();
        assert!(huge.value > 0.0 && huge.value < 1e-290);
        let perfect = ood_computational_capacity(&CapacityInputs {
            interp_error: 0.0,
            ..unit
        })
        .unwrap();
        assert!(perfect.perfect_interpolation);
        assert_eq!(perfect.value, 99.0);
    }

    #[test]
    fn monotone_directions() {
        let b = CapacityInputs {
            time_budget_t: 3000.0,
            alpha: 0.01,
            epsilon: 0.5,
            ..base()
        };
        let id = |c: CapacityInputs| id_computational_capacity(&c).unwrap().raw;
        let ood = |c: CapacityInputs| ood_computational_capacity(&c).unwrap().raw;
        for f in [id, ood] {
            let v = f(b);
            assert!(f(CapacityInputs { n: 1100, ..b }) >= v);
            assert!(f(CapacityInputs { alpha: 0.011, ..b }) > v);
            assert!(f(CapacityInputs { epsilon: 0.6, ..b }) > v);
            assert!(
                f(CapacityInputs {
                    time_budget_t: 3100.0,
                    ..b
                }) > v
            );
            assert!(f(CapacityInputs { d: 11, ..b }) < v);
            assert!(f(CapacityInputs { init_dist: 1.1, ..b }) < v);
        }
        assert!(
            id(CapacityInputs {
                lipschitz_r: Some(1.1),
                ..b
            }) < id(b)
        );
        assert!(ood(CapacityInputs { interp_error: 1.1, ..b }) < ood(b));
    }

    #[test]
    fn shift_bound_examples() {
        assert_eq!(minimizer_shift_bound(1.0, 1.0, 100, 0).unwrap(), 0.0);
        assert_eq!(minimizer_shift_bound(1.0, 1.0, 100, 5).unwrap(), 0.1);
        assert!(minimizer_shift_bound(0.0, 1.0, 100, 5).is_err());
    }

    #[test]
    fn shift_bound_dominates_measured_shift() {
        let mut rng = RngHandle::new(50, 0);
        for _ in 0..200 {
            let n = 10 + rng.below(40);
            let d = 1 + rng.below(4);
            let lambda = 0.05 + rng.uniform();
            // features in the unit ball, labels in [-1, 1]
            let pts: Vec<DataPoint> = (0..n)
                .map(|_| {
                    let x = gaussian_sample(&mut rng, d, 1.0).unwrap();
                    let x = x.scale(rng.uniform() / x.norm());
                    DataPoint::Regression {
                        x,
                        y: 2.0 * rng.uniform() - 1.0,
                    }
                })
                .collect();
            let ds = Dataset::new(pts).unwrap();
            let model = LossModel::ridge(lambda, &ds).unwrap();
            // minimizers satisfy ‖θ*‖ ≤ 1/√λ; gradients are bounded on that ball
            let radius = 1.0 / lambda.sqrt();
            let r = radius + 1.0 + lambda * radius;
            let f = 1 + rng.below(n / 2);
            let forget = ForgetSpec::new(rng.sample_indices(n, f), n).unwrap();
            let full = model.exact_minimizer(&ds, None).unwrap();
            let retain = model.exact_minimizer(&ds, Some(&forget)).unwrap();
            let bound = minimizer_shift_bound(r, lambda, n, f).unwrap();
            assert!(full.dist_sq(&retain).sqrt() <= bound);
        }
    }
}
