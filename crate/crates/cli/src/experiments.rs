//! Experiment runners behind the subcommands. Each is a pure function of
//! its settings (including the seed).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use unlearn_core::losses::{DataPoint, Dataset, ForgetSpec, LossModel};
use unlearn_core::numkit::{solve_spd, DenseMatrix, ParamVector, RngHandle};
use unlearn_core::optimize::{TrainOptions, TrainReport};
use unlearn_core::scenarios::{
    blobs, corrupt_labels, label_offset_ood, lazy_dp_baseline, microbatch_trimgrad_study, regression_with_theta,
    synthetic_regression, StudyConfig, StudyRecord,
};
use unlearn_core::unlearn::{
    pipeline_alg1, pipeline_alg3, verify_certificate, Algorithm, CertBudget, Certificate, PipelineOptions,
    UnlearnReport,
};
use unlearn_core::Result;

/// What a derived random stream is used for.
#[derive(Clone, Copy)]
enum Purpose {
    Truth = 1,
    Test = 2,
    Data = 3,
    Forget = 4,
    Noise = 5,
    DpNoise = 6,
    Sweep = 7,
}

/// Disjoint stream id for `(sweep point, trial, purpose)`.
fn stream(point: usize, trial: usize, purpose: Purpose) -> u64 {
    ((point as u64) << 40) | ((trial as u64 & 0xffff_ffff) << 8) | purpose as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdSeparationSettings {
    pub n: usize,
    pub f: usize,
    pub epsilon: f64,
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub noise_std: f64,
    pub clip_radius: f64,
    pub dims: Vec<usize>,
    pub trials: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for IdSeparationSettings {
    fn default() -> Self {
        IdSeparationSettings {
            n: 10_000,
            f: 20,
            epsilon: 1.0,
            q: 2.0,
            alpha: 0.1,
            lambda: 0.01,
            noise_std: 0.1,
            clip_radius: 1.0,
            dims: vec![25, 50, 100, 200],
            trials: 5,
            test_size: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdRow {
    pub d: usize,
    pub method: &'static str,
    pub trial: usize,
    pub excess_risk: f64,
}

pub const ALG1: &str = "alg1";
pub const ALG3: &str = "alg3";
pub const LAZY_DP: &str = "lazy_dp";

/// In-distribution removal: the certified pipeline against the lazy DP
/// baseline across dimensions. Rows come out grouped by `d`, then method,
/// then trial.
pub fn run_id_separation(s: &IdSeparationSettings) -> Result<Vec<IdRow>> {
    let budget = CertBudget::new(s.q, s.epsilon, s.alpha)?;
    let root = RngHandle::new(s.seed, 0);
    let mut rows = Vec::new();
    for (di, &d) in s.dims.iter().enumerate() {
        let truth = unlearn_core::numkit::gaussian_sample(&mut root.derive(stream(di, 0, Purpose::Truth)), d, 1.0)?;
        let test = TestObjective::sample(
            &truth,
            s.lambda,
            s.noise_std,
            s.test_size,
            &mut root.derive(stream(di, 0, Purpose::Test)),
        )?;
        let mut alg1 = Vec::with_capacity(s.trials);
        let mut dp = Vec::with_capacity(s.trials);
        for trial in 0..s.trials {
            let ds = regression_with_theta(
                s.n,
                &truth,
                &mut root.derive(stream(di, trial, Purpose::Data)),
                s.noise_std,
            )?;
            let picked = root.derive(stream(di, trial, Purpose::Forget)).sample_indices(s.n, s.f);
            let forget = ForgetSpec::new(picked, s.n)?;
            let model = LossModel::ridge(s.lambda, &ds)?
                .with_lipschitz(s.clip_radius)?
                .calibrated(&ds, Some(&forget))?;
            let theta0 = ParamVector::zeros(d);
            let options = PipelineOptions {
                train: TrainOptions { stride: 0 },
                verify: false,
                ..PipelineOptions::default()
            };
            let report = pipeline_alg1(
                &model,
                &ds,
                &forget,
                budget,
                &theta0,
                &mut root.derive(stream(di, trial, Purpose::Noise)),
                options,
            )?;
            alg1.push(test.excess(&report.perturbed_theta));
            let base = lazy_dp_baseline(
                &model,
                &ds,
                s.f,
                budget,
                &theta0,
                &mut root.derive(stream(di, trial, Purpose::DpNoise)),
            )?;
            dp.push(test.excess(&base.theta));
        }
        for (method, values) in [(ALG1, alg1), (LAZY_DP, dp)] {
            for (trial, excess_risk) in values.into_iter().enumerate() {
                rows.push(IdRow {
                    d,
                    method,
                    trial,
                    excess_risk,
                });
            }
        }
    }
    Ok(rows)
}

/// Regularized squared loss on a held-out sample, reduced to its quadratic
/// form so the excess over the sample minimizer is computed without
/// cancellation: `½(θ − θ_ref)ᵀ(Ĥ + λI)(θ − θ_ref)`.
pub struct TestObjective {
    hessian: DenseMatrix,
    reference: DVector<f64>,
}

impl TestObjective {
    pub fn sample(truth: &ParamVector, lambda: f64, noise_std: f64, size: usize, rng: &mut RngHandle) -> Result<Self> {
        if size == 0 {
            return Err(unlearn_core::Error::InvalidArgument("test set must be nonempty".into()));
        }
        let d = truth.dim();
        let t = DVector::from_column_slice(truth.as_slice());
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut b = DVector::<f64>::zeros(d);
        const BLOCK: usize = 2048;
        let mut done = 0;
        while done < size {
            let rows = BLOCK.min(size - done);
            let mut x = DMatrix::<f64>::zeros(rows, d);
            let mut y = DVector::<f64>::zeros(rows);
            for i in 0..rows {
                for j in 0..d {
                    x[(i, j)] = rng.standard_normal();
                }
                let mut yi = x.row(i).transpose().dot(&t);
                if noise_std > 0.0 {
                    yi += noise_std * rng.standard_normal();
                }
                y[i] = yi;
            }
            h.gemm_tr(1.0, &x, &x, 1.0);
            b.gemv_tr(1.0, &x, &y, 1.0);
            done += rows;
        }
        let m = size as f64;
        h /= m;
        b /= m;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = avg;
                h[(j, i)] = avg;
            }
            h[(i, i)] += lambda;
        }
        let reference = solve_spd(&h, &ParamVector::new(b.as_slice().to_vec())?)?;
        Ok(TestObjective {
            hessian: h,
            reference: DVector::from_column_slice(reference.as_slice()),
        })
    }

    pub fn excess(&self, theta: &ParamVector) -> f64 {
        let diff = DVector::from_column_slice(theta.as_slice()) - &self.reference;
        0.5 * diff.dot(&(&self.hessian * &diff))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodSettings {
    pub n: usize,
    pub d: usize,
    pub forget_sizes: Vec<usize>,
    pub offset: f64,
    pub epsilon: f64,
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub noise_std: f64,
    /// Excess retain risk counted as "unlearned". Defaults to `(L/2)·τ`
    /// with `τ = α·ε/(4Ld)`, which the certified budget guarantees.
    pub threshold: Option<f64>,
    pub seed: u64,
}

impl Default for OodSettings {
    fn default() -> Self {
        OodSettings {
            n: 1000,
            d: 100,
            forget_sizes: vec![1, 100, 450],
            offset: 1e3,
            epsilon: 10.0,
            q: 2.0,
            alpha: 0.1,
            lambda: 0.01,
            noise_std: 1.0,
            threshold: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodTrace {
    pub f: usize,
    pub method: &'static str,
    pub train_iterations: usize,
    pub unlearn_iterations: usize,
    /// `(iteration, retain excess risk)` during unlearning.
    pub excess: Vec<(usize, f64)>,
    pub grad_evals_per_iteration: u64,
    pub threshold: f64,
    pub iterations_to_threshold: Option<usize>,
}

/// Out-of-distribution removal of label-shifted points: unlearning
/// trajectories of both pipelines for each forget-set size.
pub fn run_ood_iterations(s: &OodSettings) -> Result<Vec<OodTrace>> {
    let budget = CertBudget::new(s.q, s.epsilon, s.alpha)?;
    let root = RngHandle::new(s.seed, 0);
    let (clean, _) = synthetic_regression(s.n, s.d, &mut root.derive(stream(0, 0, Purpose::Data)), s.noise_std)?;
    let mut traces = Vec::new();
    for (fi, &f) in s.forget_sizes.iter().enumerate() {
        let (ds, forget) = label_offset_ood(&clean, f, s.offset, &mut root.derive(stream(fi, 0, Purpose::Forget)))?;
        let model = LossModel::ridge(s.lambda, &ds)?.calibrated(&ds, Some(&forget))?;
        let best = {
            let opt = model.exact_minimizer(&ds, Some(&forget))?;
            model.batch_risk(&opt, &ds, Some(&forget))?
        };
        let threshold = s
            .threshold
            .unwrap_or(0.5 * model.smooth_l() * budget.precision_target(model.smooth_l(), s.d));
        let theta0 = ParamVector::zeros(s.d);
        let options = PipelineOptions {
            verify: false,
            ..PipelineOptions::default()
        };
        for (ai, (method, alg)) in [(ALG1, Algorithm::NoisyGd), (ALG3, Algorithm::RobustTrimGrad)]
            .into_iter()
            .enumerate()
        {
            let mut rng = root.derive(stream(fi, ai, Purpose::Noise));
            let report = match alg {
                Algorithm::NoisyGd => pipeline_alg1(&model, &ds, &forget, budget, &theta0, &mut rng, options)?,
                Algorithm::RobustTrimGrad => pipeline_alg3(&model, &ds, &forget, budget, &theta0, &mut rng, options)?,
            };
            let excess: Vec<(usize, f64)> = report
                .unlearn_report
                .risk_trajectory
                .iter()
                .map(|&(t, r)| (t, (r - best).max(0.0)))
                .collect();
            let iterations_to_threshold = excess.iter().find(|p| p.1 <= threshold).map(|p| p.0);
            traces.push(OodTrace {
                f,
                method,
                train_iterations: report.train_report.iterations,
                unlearn_iterations: report.unlearn_report.iterations,
                excess,
                grad_evals_per_iteration: per_iteration(&report.unlearn_report),
                threshold,
                iterations_to_threshold,
            });
        }
    }
    Ok(traces)
}

fn per_iteration(r: &TrainReport) -> u64 {
    if r.iterations == 0 {
        0
    } else {
        r.grad_evals / r.iterations as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgetStudySettings {
    pub n: usize,
    pub d: usize,
    pub separation: f64,
    pub corruption: f64,
    pub lambda: f64,
    pub study: StudyConfig,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for ForgetStudySettings {
    fn default() -> Self {
        ForgetStudySettings {
            n: 2000,
            d: 500,
            separation: 3.0,
            corruption: 0.1,
            lambda: 1e-3,
            study: StudyConfig::default(),
            test_size: 2000,
            seed: 0,
        }
    }
}

/// Corrupted-label study on Gaussian blobs.
pub fn run_forget_study(s: &ForgetStudySettings) -> Result<StudyRecord> {
    let root = RngHandle::new(s.seed, 0);
    let clean = blobs(s.n, s.d, s.separation, &mut root.derive(stream(0, 0, Purpose::Data)))?;
    let test = blobs(
        s.test_size,
        s.d,
        s.separation,
        &mut root.derive(stream(0, 0, Purpose::Test)),
    )?;
    let (ds, forget) = if s.corruption > 0.0 {
        corrupt_labels(&clean, s.corruption, &mut root.derive(stream(0, 0, Purpose::Forget)))?
    } else {
        (clean, ForgetSpec::empty())
    };
    let model = LossModel::logistic(s.lambda, &ds)?;
    microbatch_trimgrad_study(
        &model,
        &ds,
        &forget,
        &test,
        s.study,
        &root.derive(stream(0, 0, Purpose::Noise)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Anchor,
    Ridge,
    Logistic,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "anchor" => Ok(Scenario::Anchor),
            "ridge" => Ok(Scenario::Ridge),
            "logistic" => Ok(Scenario::Logistic),
            other => Err(format!("unknown scenario `{other}` (anchor, ridge, logistic)")),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Anchor => "anchor",
            Scenario::Ridge => "ridge",
            Scenario::Logistic => "logistic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlgorithmArg(pub Algorithm);

impl FromStr for AlgorithmArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "alg1" => Ok(AlgorithmArg(Algorithm::NoisyGd)),
            "alg3" => Ok(AlgorithmArg(Algorithm::RobustTrimGrad)),
            other => Err(format!("unknown algorithm `{other}` (alg1, alg3)")),
        }
    }
}

impl fmt::Display for AlgorithmArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureArg {
    PerSample,
    Empirical,
}

impl FromStr for CurvatureArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-sample" => Ok(CurvatureArg::PerSample),
            "empirical" => Ok(CurvatureArg::Empirical),
            other => Err(format!("unknown curvature `{other}` (per-sample, empirical)")),
        }
    }
}

impl fmt::Display for CurvatureArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurvatureArg::PerSample => "per-sample",
            CurvatureArg::Empirical => "empirical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifySettings {
    pub scenario: Scenario,
    pub algorithm: Algorithm,
    pub curvature: CurvatureArg,
    pub n: usize,
    pub d: usize,
    pub f: usize,
    /// Label offset applied to the forget points (regression only).
    pub offset: f64,
    pub epsilon: f64,
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub noise_std: f64,
    /// Extra random forget sets of the same size to certify.
    pub sweep_pairs: usize,
    pub seed: u64,
}

impl Default for CertifySettings {
    fn default() -> Self {
        CertifySettings {
            scenario: Scenario::Ridge,
            algorithm: Algorithm::NoisyGd,
            curvature: CurvatureArg::Empirical,
            n: 200,
            d: 5,
            f: 5,
            offset: 0.0,
            epsilon: 1.0,
            q: 2.0,
            alpha: 0.1,
            lambda: 0.1,
            noise_std: 0.5,
            sweep_pairs: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOutcome {
    pub report: UnlearnReport,
    pub certificate: Certificate,
    pub sweep: Vec<Certificate>,
}

/// One pipeline run plus its counterfactual certificate, and optionally
/// certificates for further random forget sets.
pub fn run_certify(s: &CertifySettings) -> Result<CertifyOutcome> {
    let budget = CertBudget::new(s.q, s.epsilon, s.alpha)?;
    let root = RngHandle::new(s.seed, 0);
    let mut data_rng = root.derive(stream(0, 0, Purpose::Data));
    let clean = match s.scenario {
        Scenario::Anchor => {
            let pts = (0..s.n)
                .map(|_| {
                    Ok(DataPoint::Anchor(unlearn_core::numkit::gaussian_sample(
                        &mut data_rng,
                        s.d,
                        1.0,
                    )?))
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::new(pts)?
        }
        Scenario::Ridge => synthetic_regression(s.n, s.d, &mut data_rng, s.noise_std)?.0,
        Scenario::Logistic => blobs(s.n, s.d, 2.0, &mut data_rng)?,
    };
    let pick = |rng: &mut RngHandle| -> Result<(Dataset, ForgetSpec)> {
        if s.scenario == Scenario::Ridge && s.offset != 0.0 {
            label_offset_ood(&clean, s.f, s.offset, rng)
        } else {
            Ok((clean.clone(), ForgetSpec::new(rng.sample_indices(s.n, s.f), s.n)?))
        }
    };
    let model_for = |ds: &Dataset, forget: &ForgetSpec| -> Result<LossModel> {
        let base = match s.scenario {
            Scenario::Anchor => LossModel::quadratic_anchor(),
            Scenario::Ridge => LossModel::ridge(s.lambda, ds)?,
            Scenario::Logistic => LossModel::logistic(s.lambda, ds)?,
        };
        match s.curvature {
            CurvatureArg::PerSample => Ok(base),
            CurvatureArg::Empirical => base.calibrated(ds, Some(forget)),
        }
    };
    let options = PipelineOptions {
        train: TrainOptions { stride: 0 },
        ..PipelineOptions::default()
    };
    let theta0 = ParamVector::zeros(s.d);

    let (ds, forget) = pick(&mut root.derive(stream(0, 0, Purpose::Forget)))?;
    let model = model_for(&ds, &forget)?;
    let mut noise = root.derive(stream(0, 0, Purpose::Noise));
    let report = match s.algorithm {
        Algorithm::NoisyGd => pipeline_alg1(&model, &ds, &forget, budget, &theta0, &mut noise, options)?,
        Algorithm::RobustTrimGrad => pipeline_alg3(&model, &ds, &forget, budget, &theta0, &mut noise, options)?,
    };
    let certificate = report.certificate.expect("verification requested");

    let mut sweep = Vec::with_capacity(s.sweep_pairs);
    for k in 0..s.sweep_pairs {
        let (ds, forget) = pick(&mut root.derive(stream(0, k + 1, Purpose::Sweep)))?;
        let model = model_for(&ds, &forget)?;
        let mut noise = root.derive(stream(0, k + 1, Purpose::Noise));
        let quiet = PipelineOptions {
            verify: false,
            ..options
        };
        let r = match s.algorithm {
            Algorithm::NoisyGd => pipeline_alg1(&model, &ds, &forget, budget, &theta0, &mut noise, quiet)?,
            Algorithm::RobustTrimGrad => pipeline_alg3(&model, &ds, &forget, budget, &theta0, &mut noise, quiet)?,
        };
        sweep.push(verify_certificate(
            &model,
            &ds,
            &forget,
            budget,
            &theta0,
            s.algorithm,
            quiet,
            &r.pre_noise_theta,
        )?);
    }
    Ok(CertifyOutcome {
        report,
        certificate,
        sweep,
    })
}
