//! End-to-end acceptance gates. Runs as a plain binary (no libtest harness)
//! and prints one PASS/FAIL line per criterion; exits non-zero if any fail.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};

use unlearn_cli::experiments::{
    run_forget_study, run_id_separation, run_ood_iterations, ForgetStudySettings, IdSeparationSettings, OodSettings,
    ALG1, ALG3, LAZY_DP,
};
use unlearn_core::aggregate::deviation_bound;
use unlearn_core::numkit::gaussian_sample;
use unlearn_core::optimize::{gd_iterations, gd_train, init_error_bound, trimgrad_train};
use unlearn_core::scenarios::{adversarial_forget_point, load_housing_csv, StudyMethod};
use unlearn_core::unlearn::{perturb, pipeline_alg1, pipeline_alg3};
use unlearn_core::{
    trimmed_mean, Algorithm, CertBudget, DataPoint, Dataset, ForgetSpec, LossKind, LossModel, ParamVector,
    PipelineOptions, RngHandle, TrainOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Outcome;

fn main() {
    let checks: [(&str, &str, Option<Duration>, Check); 12] = [
        (
            "c01",
            "trimmed mean equals sort oracle",
            Some(secs(10)),
            c01_trimmed_mean_matches_sort_oracle,
        ),
        (
            "c02",
            "trimmed mean deviation bound",
            Some(secs(30)),
            c02_deviation_bound_holds_exhaustively,
        ),
        (
            "c03",
            "adversarial point shift is exact",
            Some(secs(5)),
            c03_adversarial_shift_is_exact,
        ),
        (
            "c04",
            "budgeted gradient descent precision",
            None,
            c04_budgeted_gd_reaches_target,
        ),
        ("c05", "certificate chain", None, c05_certificate_chain_holds),
        (
            "c06",
            "utility of the perturbed output",
            None,
            c06_expected_excess_within_alpha,
        ),
        (
            "c07",
            "dimension separation against lazy DP",
            Some(secs(300)),
            c07_dimension_separation,
        ),
        ("c08", "out-of-distribution slowdown", Some(secs(300)), c08_ood_slowdown),
        ("c09", "TrimGrad plateau bound", None, c09_trimgrad_plateau),
        ("c10", "corrupted-label study direction", None, c10_study_direction),
        ("c11", "California Housing ingestion", None, c11_housing_ingestion),
        (
            "c12",
            "byte-identical subcommand output",
            None,
            c12_subcommands_are_deterministic,
        ),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, limit, check) in checks {
        if !only.is_empty()
            && !only
                .iter()
                .any(|o| id.contains(o.as_str()) || name.contains(o.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_message(&e))));
        let took = start.elapsed();
        let mut pass = outcome.pass;
        let mut detail = outcome.detail;
        if let Some(limit) = limit {
            if took > limit {
                pass = false;
                detail.push_str(&format!("; over the {}s time limit", limit.as_secs()));
            }
        }
        if !pass {
            failed += 1;
        }
        println!(
            "{id} {name}: {} ({detail}; {:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}

fn pv(v: Vec<f64>) -> ParamVector {
    ParamVector::new(v).unwrap()
}

fn anchor_set(points: &[Vec<f64>]) -> Dataset {
    Dataset::new(points.iter().map(|p| DataPoint::Anchor(pv(p.clone()))).collect()).unwrap()
}

fn naive_mean(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let mut m = vec![0.0; d];
    for p in points {
        for k in 0..d {
            m[k] += p[k];
        }
    }
    m.iter().map(|v| v / points.len() as f64).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------- c01

const FIXED_SCALE: i32 = 130;

/// Exact integer image of `v · 2^FIXED_SCALE`. Inputs are drawn so this is
/// always an integer.
fn fixed(v: f64) -> BigInt {
    let scaled = v * 2f64.powi(FIXED_SCALE);
    assert!(scaled.fract() == 0.0, "value {v:e} is below the fixed-point grid");
    BigInt::from_f64(scaled).unwrap()
}

/// Sort the column, sum the kept ranks exactly with big integers and round
/// once. `f = 0` is the plain input-order mean.
fn oracle_column(col: &[f64], prefix: &[BigInt], f: usize) -> f64 {
    let n = col.len();
    if f == 0 {
        return col.iter().fold(0.0, |s, v| s + v) / n as f64;
    }
    let exact = &prefix[n - f] - &prefix[f];
    round_fixed(&exact) / (n - 2 * f) as f64
}

/// `x · 2^-FIXED_SCALE` rounded to nearest, ties to even. Done by hand:
/// `BigInt::to_f64` is not correctly rounded for wide integers.
fn round_fixed(x: &BigInt) -> f64 {
    let negative = x.sign() == Sign::Minus;
    let mag = x.magnitude();
    let bits = mag.bits();
    let (mantissa, shift) = if bits <= 53 {
        (mag.to_u64().unwrap(), 0)
    } else {
        let drop = bits - 53;
        let mut q = mag >> drop;
        let rem = mag - (&q << drop);
        let half = BigUint::one() << (drop - 1);
        if rem > half || (rem == half && q.bit(0)) {
            q += 1u32;
        }
        (q.to_u64().unwrap(), drop as i32)
    };
    let v = mantissa as f64 * 2f64.powi(shift - FIXED_SCALE);
    if negative {
        -v
    } else {
        v
    }
}

fn c01_trimmed_mean_matches_sort_oracle() -> Outcome {
    let mut rng = RngHandle::new(101, 0);
    let mut comparisons = 0usize;
    let mut mismatches = 0usize;
    let mut spent = Duration::ZERO;
    for _ in 0..10_000 {
        let n = 1 + rng.below(200);
        let d = 1 + rng.below(20);
        let ties = rng.below(3) == 0;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        if ties {
                            rng.below(5) as f64 * 0.25 - 0.5
                        } else {
                            let scale = 10f64.powi(rng.below(13) as i32 - 6);
                            // keep every value on the fixed-point grid
                            let z = rng.standard_normal();
                            if z.abs() < 1e-10 {
                                1.0
                            } else {
                                z * scale
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        let vectors: Vec<ParamVector> = rows.iter().map(|r| pv(r.clone())).collect();
        let top = n.div_ceil(2) - 1;
        let mut fs = vec![0, rng.below(top + 1), top];
        fs.dedup();
        let mut expected = vec![Vec::with_capacity(d); fs.len()];
        for k in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let mut prefix = vec![BigInt::zero()];
            for v in &sorted {
                let next = prefix.last().unwrap() + fixed(*v);
                prefix.push(next);
            }
            for (&f, out) in fs.iter().zip(expected.iter_mut()) {
                out.push(oracle_column(&col, &prefix, f));
            }
        }
        for (&f, want) in fs.iter().zip(&expected) {
            comparisons += 1;
            let t = Instant::now();
            let got = trimmed_mean(&vectors, f).unwrap();
            spent += t.elapsed();
            if got.as_slice().iter().zip(want).any(|(a, b)| a.to_bits() != b.to_bits()) {
                mismatches += 1;
            }
        }
    }
    Outcome::new(
        mismatches == 0,
        format!(
            "{mismatches} mismatches in {comparisons} (instance, f) pairs over 10000 instances; \
             {:.1}s inside the trimmed mean",
            spent.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- c02

fn c02_deviation_bound_holds_exhaustively() -> Outcome {
    let mut rng = RngHandle::new(102, 0);
    let mut subsets = 0usize;
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 3 + rng.below(10);
        let f = rng.below(n.div_ceil(2));
        let d = 1 + rng.below(4);
        let heavy = rng.below(2) == 0;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let z = rng.standard_normal();
                        if heavy {
                            z / (rng.uniform() + 1e-3)
                        } else {
                            z
                        }
                    })
                    .collect()
            })
            .collect();
        let vectors: Vec<ParamVector> = rows.iter().map(|r| pv(r.clone())).collect();
        let tm = trimmed_mean(&vectors, f).unwrap();
        let kappa = 6.0 * f as f64 / (n - 2 * f) as f64 * (1.0 + f as f64 / (n - 2 * f) as f64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n - f {
                continue;
            }
            subsets += 1;
            let members: Vec<Vec<f64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rows[i].clone()).collect();
            let centre = naive_mean(&members);
            let var = members.iter().map(|m| sq_dist(m, &centre)).sum::<f64>() / members.len() as f64;
            let lhs = sq_dist(tm.as_slice(), &centre);
            let bound = deviation_bound(n, f, var).unwrap();
            assert!((bound - kappa * var).abs() <= 1e-12 * bound.max(1e-300));
            if lhs > bound * (1.0 + 1e-12) + 1e-15 {
                violations += 1;
            }
            if bound > 0.0 {
                worst = worst.max(lhs / bound);
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("{violations} violations over {subsets} subsets; largest lhs/bound {worst:.3}"),
    )
}

// ---------------------------------------------------------------- c03

fn c03_adversarial_shift_is_exact() -> Outcome {
    let mut rng = RngHandle::new(103, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 1 + rng.below(200);
        let d = 1 + rng.below(10);
        let retain: Vec<Vec<f64>> = (0..n)
            .map(|_| gaussian_sample(&mut rng, d, 1.0).unwrap().into_vec())
            .collect();
        let dir = gaussian_sample(&mut rng, d, 1.0).unwrap();
        let dir = dir.scale(1.0 / dir.norm());
        let delta = 10f64.powf(rng.uniform() * 8.0 - 4.0);
        let z = match adversarial_forget_point(&anchor_set(&retain), delta, &dir).unwrap() {
            DataPoint::Anchor(a) => a.into_vec(),
            other => panic!("unexpected point {other:?}"),
        };
        let before = naive_mean(&retain);
        let mut all = retain.clone();
        all.push(z);
        let after = naive_mean(&all);
        let shift = sq_dist(&after, &before);
        worst = worst.max((shift - delta).abs() / delta);
    }
    Outcome::new(
        worst <= 1e-9,
        format!("largest relative error {worst:.2e} over 1000 cases"),
    )
}

// ---------------------------------------------------------------- c04

struct Quadratic {
    hessian: DMatrix<f64>,
    minimizer: DVector<f64>,
}

impl Quadratic {
    fn excess(&self, theta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(theta) - &self.minimizer;
        0.5 * diff.dot(&(&self.hessian * &diff))
    }

    fn dist_sq(&self, theta: &[f64]) -> f64 {
        (DVector::from_column_slice(theta) - &self.minimizer).norm_squared()
    }
}

/// Hessian and minimizer of the averaged loss over `points`, solved by LU.
fn quadratic_oracle(kind: LossKind, points: &[&DataPoint]) -> Quadratic {
    let m = points.len() as f64;
    let d = points[0].dim();
    match kind {
        LossKind::QuadraticAnchor => {
            let rows: Vec<Vec<f64>> = points.iter().map(|p| p.features().as_slice().to_vec()).collect();
            Quadratic {
                hessian: DMatrix::identity(d, d),
                minimizer: DVector::from_vec(naive_mean(&rows)),
            }
        }
        LossKind::RidgeLS { lambda } => {
            let mut h = DMatrix::identity(d, d) * lambda;
            let mut b = DVector::zeros(d);
            for p in points {
                let DataPoint::Regression { x, y } = p else {
                    panic!("not a regression point")
                };
                let x = DVector::from_column_slice(x.as_slice());
                h += &x * x.transpose() / m;
                b += &x * (*y / m);
            }
            let minimizer = h.clone().lu().solve(&b).expect("ridge system is nonsingular");
            Quadratic { hessian: h, minimizer }
        }
        LossKind::RegLogistic { .. } => panic!("no closed-form oracle for the logistic loss"),
    }
}

fn oracle_for(model: &LossModel, ds: &Dataset, exclude: Option<&ForgetSpec>) -> Quadratic {
    let pts: Vec<&DataPoint> = ds.included(exclude).map(|(_, p)| p).collect();
    quadratic_oracle(model.kind(), &pts)
}

/// A random anchor or ridge instance. Ridge features are scaled so the
/// per-sample condition number stays moderate.
fn random_instance(rng: &mut RngHandle, n: usize, d: usize) -> (LossModel, Dataset) {
    if rng.below(2) == 0 {
        let shift = gaussian_sample(rng, d, 4.0).unwrap();
        let pts = (0..n)
            .map(|_| DataPoint::Anchor(gaussian_sample(rng, d, 1.0).unwrap().add(&shift)))
            .collect();
        (LossModel::quadratic_anchor(), Dataset::new(pts).unwrap())
    } else {
        let lambda = 0.1 + rng.uniform();
        let truth = gaussian_sample(rng, d, 1.0).unwrap();
        let pts = (0..n)
            .map(|_| {
                let x = gaussian_sample(rng, d, 1.0 / d as f64).unwrap();
                let y = x.dot(&truth) + 0.3 * rng.standard_normal();
                DataPoint::Regression { x, y }
            })
            .collect();
        let ds = Dataset::new(pts).unwrap();
        (LossModel::ridge(lambda, &ds).unwrap(), ds)
    }
}

fn c04_budgeted_gd_reaches_target() -> Outcome {
    let mut rng = RngHandle::new(104, 0);
    let mut failures = 0;
    let mut total_iters = 0usize;
    for _ in 0..10_000 {
        let n = 2 + rng.below(40);
        let d = 1 + rng.below(6);
        let (model, ds) = random_instance(&mut rng, n, d);
        let theta0 = gaussian_sample(&mut rng, d, 1.0).unwrap();
        let target = 10f64.powf(-1.0 - 9.0 * rng.uniform());
        let bound = init_error_bound(&model, &ds, &theta0, None).unwrap();
        let k = gd_iterations(model.mu(), model.smooth_l(), bound, target).unwrap();
        let report = gd_train(&model, &ds, None, &theta0, k, TrainOptions { stride: 0 }).unwrap();
        total_iters += k;
        let oracle = oracle_for(&model, &ds, None);
        if oracle.dist_sq(report.final_theta.as_slice()) > target {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("{failures} failures over 10000 instances ({total_iters} iterations in total)"),
    )
}

// ---------------------------------------------------------------- c05

fn random_forget(rng: &mut RngHandle, n: usize, max_f: usize) -> ForgetSpec {
    let f = 1 + rng.below(max_f);
    ForgetSpec::new(rng.sample_indices(n, f), n).unwrap()
}

fn c05_certificate_chain_holds() -> Outcome {
    let mut rng = RngHandle::new(105, 0);
    let mut failures = 0;
    let mut covered = 0;
    let mut missed_targets = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..500 {
        let n = 12 + rng.below(60);
        let d = 1 + rng.below(5);
        let (base, ds) = random_instance(&mut rng, n, d);
        let forget = random_forget(&mut rng, n, (n - 1) / 2 - 1);
        let model = if rng.below(2) == 0 {
            base
        } else {
            base.calibrated(&ds, Some(&forget)).unwrap()
        };
        let epsilon = d as f64 * (0.05 + 0.95 * rng.uniform());
        let budget = CertBudget::new(1.5 + 3.0 * rng.uniform(), epsilon, 0.01 + rng.uniform()).unwrap();
        let theta0 = gaussian_sample(&mut rng, d, 1.0).unwrap();
        let algorithm = if i % 2 == 0 {
            Algorithm::NoisyGd
        } else {
            Algorithm::RobustTrimGrad
        };
        let options = PipelineOptions {
            train: TrainOptions { stride: 0 },
            ..PipelineOptions::default()
        };
        let run = |ds: &Dataset, forget: &ForgetSpec, options: PipelineOptions, rng: &mut RngHandle| match algorithm {
            Algorithm::NoisyGd => pipeline_alg1(&model, ds, forget, budget, &theta0, rng, options).unwrap(),
            Algorithm::RobustTrimGrad => pipeline_alg3(&model, ds, forget, budget, &theta0, rng, options).unwrap(),
        };
        let report = run(&ds, &forget, options, &mut rng.derive(1000 + i));
        let retain = ds.retain(&forget).unwrap();
        let counter_options = PipelineOptions {
            verify: false,
            trim: Some(0),
            ..options
        };
        let counter = run(
            &retain,
            &ForgetSpec::empty(),
            counter_options,
            &mut rng.derive(2000 + i),
        );

        let tau = budget.epsilon * budget.alpha_emp / (4.0 * model.smooth_l() * d as f64);
        let oracle = oracle_for(&model, &ds, Some(&forget));
        let real_ok = oracle.dist_sq(report.pre_noise_theta.as_slice()) <= tau;
        let counter_ok = oracle.dist_sq(counter.pre_noise_theta.as_slice()) <= tau;
        let cert = report.certificate.expect("certificate requested");
        let dist = report.pre_noise_theta.dist_sq(&counter.pre_noise_theta);
        if (cert.distance_sq - dist).abs() > 1e-12 * dist.max(1e-300) {
            failures += 1;
            continue;
        }
        if !(real_ok && counter_ok) {
            missed_targets += 1;
            continue;
        }
        covered += 1;
        let sigma2 = budget.alpha_emp / (2.0 * model.smooth_l() * d as f64);
        let divergence = budget.q * dist / (2.0 * sigma2);
        worst_ratio = worst_ratio.max(divergence / (budget.q * budget.epsilon));
        if divergence > budget.q * budget.epsilon * (1.0 + 1e-12) || !cert.satisfied {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0 && covered > 0,
        format!(
            "{failures} failures; {covered} instances with both phases on target, {missed_targets} off target; \
             largest divergence/(q·ε) {worst_ratio:.3}"
        ),
    )
}

// ---------------------------------------------------------------- c06

fn c06_expected_excess_within_alpha() -> Outcome {
    let mut rng = RngHandle::new(106, 0);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = 20 + rng.below(80);
        let d = 1 + rng.below(8);
        let (base, ds) = random_instance(&mut rng, n, d);
        let forget = random_forget(&mut rng, n, n / 4);
        let model = base.calibrated(&ds, Some(&forget)).unwrap();
        let alpha = 0.01 + 0.5 * rng.uniform();
        let budget = CertBudget::new(2.0, d as f64 * (0.1 + 0.9 * rng.uniform()), alpha).unwrap();
        let theta0 = ParamVector::zeros(d);
        let options = PipelineOptions {
            train: TrainOptions { stride: 0 },
            verify: false,
            ..PipelineOptions::default()
        };
        let mut noise_rng = rng.derive(3000 + i);
        let report = if i % 2 == 0 {
            pipeline_alg1(&model, &ds, &forget, budget, &theta0, &mut noise_rng, options).unwrap()
        } else {
            pipeline_alg3(&model, &ds, &forget, budget, &theta0, &mut noise_rng, options).unwrap()
        };
        let oracle = oracle_for(&model, &ds, Some(&forget));
        let draws: Vec<f64> = (0..200)
            .map(|_| {
                let theta = perturb(&report.pre_noise_theta, report.noise, &mut noise_rng).unwrap();
                oracle.excess(theta.as_slice())
            })
            .collect();
        let k = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / k;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        let se = (var / k).sqrt();
        worst = worst.max(mean / alpha);
        if mean > alpha + 3.0 * se {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("{failures} of 50 instances above α + 3 SE; largest mean/α {worst:.3}"),
    )
}

// ---------------------------------------------------------------- c07

fn mean_excess(rows: &[unlearn_cli::experiments::IdRow], d: usize, method: &str) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.d == d && r.method == method)
        .map(|r| r.excess_risk)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c07_dimension_separation() -> Outcome {
    let s = IdSeparationSettings {
        n: 2000,
        seed: 7,
        ..IdSeparationSettings::default()
    };
    let rows = run_id_separation(&s).unwrap();
    let dp = mean_excess(&rows, 200, LAZY_DP) / mean_excess(&rows, 50, LAZY_DP);
    let alg1 = mean_excess(&rows, 200, ALG1) / mean_excess(&rows, 50, ALG1);
    Outcome::new(
        dp >= 2.0 && alg1 <= 2.0,
        format!("lazy DP ratio d=200/d=50 {dp:.2} (need >= 2), alg1 ratio {alg1:.2} (need <= 2)"),
    )
}

// ---------------------------------------------------------------- c08

fn c08_ood_slowdown() -> Outcome {
    let s = OodSettings {
        forget_sizes: vec![100],
        seed: 1,
        ..OodSettings::default()
    };
    let traces = run_ood_iterations(&s).unwrap();
    let get = |m: &str| traces.iter().find(|t| t.method == m).unwrap();
    let (a1, a3) = (get(ALG1), get(ALG3));
    let (Some(k1), Some(k3)) = (a1.iterations_to_threshold, a3.iterations_to_threshold) else {
        return Outcome::new(false, "a method never reached the threshold");
    };
    let ratio = k1 as f64 / k3.max(1) as f64;
    let same_cost = a1.grad_evals_per_iteration == a3.grad_evals_per_iteration;
    Outcome::new(
        ratio >= 3.0 && same_cost,
        format!(
            "iterations to threshold alg1 {k1}, alg3 {k3}, ratio {ratio:.2} (need >= 3); \
             gradient evaluations per iteration {} vs {}",
            a1.grad_evals_per_iteration, a3.grad_evals_per_iteration
        ),
    )
}

// ---------------------------------------------------------------- c09

fn c09_trimgrad_plateau() -> Outcome {
    let mut rng = RngHandle::new(109, 0);
    let model = LossModel::quadratic_anchor();
    let (mu, l) = (model.mu(), model.smooth_l());
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = 6 + rng.below(90);
        let f = 1 + rng.below(n / 3);
        let d = 1 + rng.below(6);
        let retain: Vec<Vec<f64>> = (0..n - f)
            .map(|_| gaussian_sample(&mut rng, d, 1.0).unwrap().into_vec())
            .collect();
        let far = 10f64.powi(rng.below(6) as i32);
        let outliers: Vec<Vec<f64>> = (0..f)
            .map(|_| gaussian_sample(&mut rng, d, 1.0).unwrap().scale(far).into_vec())
            .collect();
        let forget_idx = rng.sample_indices(n, f);
        let mut points = Vec::with_capacity(n);
        let (mut r, mut o) = (retain.iter(), outliers.iter());
        for i in 0..n {
            let p = if forget_idx.binary_search(&i).is_ok() {
                o.next()
            } else {
                r.next()
            };
            points.push(p.unwrap().clone());
        }
        let ds = anchor_set(&points);
        let theta0 = gaussian_sample(&mut rng, d, 25.0).unwrap();
        let steps = rng.below(12);
        let report = trimgrad_train(&model, &ds, None, f, &theta0, steps, TrainOptions { stride: 0 }).unwrap();

        let centre = naive_mean(&retain);
        let interp = retain.iter().map(|z| sq_dist(z, &centre)).sum::<f64>() / retain.len() as f64;
        let excess = |t: &[f64]| 0.5 * sq_dist(t, &centre);
        let bound = 45.0 * f as f64 / (mu * n as f64) * interp
            + (-mu * steps as f64 / (2.0 * l)).exp() * excess(theta0.as_slice());
        let got = excess(report.final_theta.as_slice());
        worst = worst.max(got / bound);
        if got > bound {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("{failures} failures over 200 instances; largest excess/bound {worst:.3}"),
    )
}

// ---------------------------------------------------------------- c10

fn c10_study_direction() -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in 1..=5 {
        let s = ForgetStudySettings {
            seed,
            ..ForgetStudySettings::default()
        };
        let record = run_forget_study(&s).unwrap();
        let naive = record.final_row(StudyMethod::Naive).unwrap().forget_acc;
        let trim = record.final_row(StudyMethod::TrimGrad).unwrap().forget_acc;
        if trim < naive {
            wins += 1;
        }
        parts.push(format!("seed {seed}: {trim:.3} vs {naive:.3}"));
    }
    Outcome::new(
        wins >= 4,
        format!(
            "TrimGrad below naive forget accuracy in {wins}/5 runs ({})",
            parts.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- c11

fn housing_path() -> PathBuf {
    match std::env::var_os("UNLEARN_HOUSING_CSV") {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/california_housing.csv"),
    }
}

fn c11_housing_ingestion() -> Outcome {
    let path = housing_path();
    if !path.exists() {
        return Outcome::new(
            false,
            format!(
                "data file not available at {} (set UNLEARN_HOUSING_CSV to the full table)",
                path.display()
            ),
        );
    }
    let ds = match load_housing_csv(&path, true) {
        Ok(ds) => ds,
        Err(e) => return Outcome::new(false, format!("load failed: {e}")),
    };
    let n = ds.len();
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for k in 0..9 {
        let col: Vec<f64> = ds
            .points()
            .iter()
            .map(|p| match p {
                DataPoint::Regression { x, y } => {
                    if k < 8 {
                        x[k]
                    } else {
                        *y
                    }
                }
                _ => unreachable!(),
            })
            .collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        worst_mean = worst_mean.max(mean.abs());
        worst_var = worst_var.max((var - 1.0).abs());
    }
    Outcome::new(
        n == 20_640 && worst_mean <= 1e-12 && worst_var <= 1e-12,
        format!("{n} rows (need 20640); largest |mean| {worst_mean:.1e}, largest |var − 1| {worst_var:.1e}"),
    )
}

// ---------------------------------------------------------------- c12

fn run_to_files(args: &[&str], outputs: &[&str], dir: &Path) -> Vec<Vec<u8>> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_unlearn"));
    cmd.args(args);
    for o in outputs {
        cmd.arg(format!("--{o}")).arg(dir.join(o));
    }
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut files = vec![out.stdout];
    files.extend(outputs.iter().map(|o| std::fs::read(dir.join(o)).unwrap()));
    files
}

fn c12_subcommands_are_deterministic() -> Outcome {
    let cases: [(&str, Vec<&str>, Vec<&str>); 4] = [
        (
            "id-separation",
            vec![
                "id-separation",
                "--seed",
                "7",
                "--n",
                "200",
                "--d",
                "5,10",
                "--trials",
                "2",
                "--test-size",
                "2000",
            ],
            vec!["out", "plot"],
        ),
        (
            "ood-iterations",
            vec![
                "ood-iterations",
                "--seed",
                "7",
                "--n",
                "200",
                "--d",
                "10",
                "--f",
                "1,20",
            ],
            vec!["out", "summary", "plot"],
        ),
        (
            "forget-study",
            vec![
                "forget-study",
                "--seed",
                "7",
                "--n",
                "200",
                "--d",
                "20",
                "--iters",
                "60",
                "--finetune-iters",
                "20",
                "--stride",
                "10",
                "--test-size",
                "200",
            ],
            vec!["out", "plot"],
        ),
        ("certify", vec!["certify", "--seed", "7", "--sweep-pairs", "2"], vec![]),
    ];
    let mut differing = Vec::new();
    for (name, args, outputs) in &cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let first = run_to_files(args, outputs, a.path());
        let second = run_to_files(args, outputs, b.path());
        if first != second || first.iter().all(|f| f.is_empty()) {
            differing.push(*name);
        }
    }
    Outcome::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} subcommands repeated with identical bytes", cases.len())
        } else {
            format!("output differs for {}", differing.join(", "))
        },
    )
}
