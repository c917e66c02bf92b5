//! Subcommand definitions and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use unlearn_core::capacity::{
    id_computational_capacity, id_utility_capacity, ood_computational_capacity, CapacityInputs, ORDER_ESTIMATE_LABEL,
};
use unlearn_core::scenarios::{StudyConfig, StudyMethod};

use crate::config::{ConfigFile, Effective, List, Resolver};
use crate::experiments::{
    run_certify, run_forget_study, run_id_separation, run_ood_iterations, AlgorithmArg, CertifySettings, CurvatureArg,
    ForgetStudySettings, IdRow, IdSeparationSettings, OodSettings, OodTrace, Scenario,
};
use crate::svg::{LineChart, Series};
use crate::table::{real, Table};
use crate::CliError;

pub const ID_HEADER: [&str; 4] = ["d", "method", "trial", "excess_risk"];
pub const OOD_HEADER: [&str; 4] = ["f", "method", "iteration", "excess_retain_risk"];
pub const OOD_SUMMARY_HEADER: [&str; 8] = [
    "f",
    "method",
    "train_iterations",
    "unlearn_iterations",
    "grad_evals_per_iteration",
    "threshold",
    "iterations_to_threshold",
    "final_excess_retain_risk",
];
pub const STUDY_HEADER: [&str; 5] = ["iteration", "method", "retain_acc", "forget_acc", "test_acc"];

#[derive(Debug, Parser)]
#[command(name = "unlearn", version, about = "Certified unlearning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// In-distribution removal: certified pipeline vs lazy DP across dimensions.
    IdSeparation(IdArgs),
    /// Out-of-distribution removal: unlearning iterations of both pipelines.
    OodIterations(OodArgs),
    /// Micro-batch TrimGrad on data with flipped labels.
    ForgetStudy(StudyArgs),
    /// Run a pipeline and print its counterfactual certificate.
    Certify(CertifyArgs),
    /// Print deletion-capacity order estimates.
    Capacity(CapacityArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IdArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    f: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    clip_radius: Option<f64>,
    /// Comma-separated dimensions.
    #[arg(long)]
    d: Option<List<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OodArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated forget-set sizes.
    #[arg(long)]
    f: Option<List<usize>>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Per-method summary CSV (iterations to threshold, cost per iteration).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    corruption: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    microbatch: Option<usize>,
    #[arg(long)]
    cohort: Option<usize>,
    #[arg(long)]
    trim: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    finetune_iters: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// anchor, ridge or logistic.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// alg1 or alg3.
    #[arg(long)]
    algorithm: Option<AlgorithmArg>,
    /// per-sample or empirical.
    #[arg(long)]
    curvature: Option<CurvatureArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    f: Option<usize>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    /// Also certify this many further random forget sets.
    #[arg(long)]
    sweep_pairs: Option<usize>,
}

#[derive(Debug, Args)]
struct CapacityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Time budget in per-sample gradient evaluations.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    init_dist: Option<f64>,
    #[arg(long)]
    interp_error: Option<f64>,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::IdSeparation(a) => id_separation(a),
        Command::OodIterations(a) => ood_iterations(a),
        Command::ForgetStudy(a) => forget_study(a),
        Command::Certify(a) => certify(a),
        Command::Capacity(a) => capacity(a),
    }
}

fn load_config(common: &Common) -> Result<ConfigFile, CliError> {
    match &common.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage("a seed is required (--seed or `seed = ...` in the config file)".into()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
        }
    }
}

fn print_config(effective: &Effective) -> Result<(), CliError> {
    emit(None, &effective.to_string())
}

fn id_separation(a: IdArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let d = IdSeparationSettings::default();
    let seed = r.pick_opt("seed", a.seed)?;
    let mut s = IdSeparationSettings {
        n: r.pick("n", a.n, d.n)?,
        f: r.pick("f", a.f, d.f)?,
        epsilon: r.pick("epsilon", a.epsilon, d.epsilon)?,
        q: r.pick("q", a.q, d.q)?,
        alpha: r.pick("alpha", a.alpha, d.alpha)?,
        lambda: r.pick("lambda", a.lambda, d.lambda)?,
        noise_std: r.pick("noise-std", a.noise_std, d.noise_std)?,
        clip_radius: r.pick("clip-radius", a.clip_radius, d.clip_radius)?,
        dims: r.pick("d", a.d, List(d.dims))?.0,
        trials: r.pick("trials", a.trials, d.trials)?,
        test_size: r.pick("test-size", a.test_size, d.test_size)?,
        seed: 0,
    };
    let out = r.pick_path("out", a.common.out)?;
    let plot = r.pick_path("plot", a.plot)?;
    let effective = r.finish()?;
    if a.common.print_config {
        return print_config(&effective);
    }
    s.seed = require_seed(seed)?;
    let rows = run_id_separation(&s)?;
    emit(out.as_deref(), &id_table(&rows).to_csv())?;
    if let Some(p) = plot {
        emit(Some(&p), &id_chart(&rows).render())?;
    }
    Ok(())
}

pub fn id_table(rows: &[IdRow]) -> Table {
    let mut t = Table::new(&ID_HEADER);
    for r in rows {
        t.push(vec![
            r.d.to_string(),
            r.method.to_string(),
            r.trial.to_string(),
            real(r.excess_risk),
        ]);
    }
    t
}

fn id_chart(rows: &[IdRow]) -> LineChart {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let series = methods
        .into_iter()
        .map(|m| {
            let mut dims: Vec<usize> = rows.iter().filter(|r| r.method == m).map(|r| r.d).collect();
            dims.dedup();
            let mut points = Vec::new();
            let mut range = Vec::new();
            for d in dims {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == m && r.d == d)
                    .map(|r| r.excess_risk)
                    .collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                points.push((d as f64, mean));
                range.push((d as f64, lo, hi));
            }
            Series {
                name: m.to_string(),
                points,
                range,
            }
        })
        .collect();
    LineChart {
        title: "Excess risk after in-distribution removal".into(),
        x_label: "dimension d".into(),
        y_label: "test excess risk (mean, min-max)".into(),
        log_y: true,
        series,
    }
}

fn ood_iterations(a: OodArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let d = OodSettings::default();
    let seed = r.pick_opt("seed", a.seed)?;
    let mut s = OodSettings {
        n: r.pick("n", a.n, d.n)?,
        d: r.pick("d", a.d, d.d)?,
        forget_sizes: r.pick("f", a.f, List(d.forget_sizes))?.0,
        offset: r.pick("offset", a.offset, d.offset)?,
        epsilon: r.pick("epsilon", a.epsilon, d.epsilon)?,
        q: r.pick("q", a.q, d.q)?,
        alpha: r.pick("alpha", a.alpha, d.alpha)?,
        lambda: r.pick("lambda", a.lambda, d.lambda)?,
        noise_std: r.pick("noise-std", a.noise_std, d.noise_std)?,
        threshold: r.pick_opt("threshold", a.threshold)?,
        seed: 0,
    };
    let out = r.pick_path("out", a.common.out)?;
    let summary = r.pick_path("summary", a.summary)?;
    let plot = r.pick_path("plot", a.plot)?;
    let effective = r.finish()?;
    if a.common.print_config {
        return print_config(&effective);
    }
    s.seed = require_seed(seed)?;
    let traces = run_ood_iterations(&s)?;
    emit(out.as_deref(), &ood_table(&traces).to_csv())?;
    if let Some(p) = summary {
        emit(Some(&p), &ood_summary_table(&traces).to_csv())?;
    }
    if let Some(p) = plot {
        let series = traces
            .iter()
            .map(|t| Series {
                name: format!("{} f={}", t.method, t.f),
                points: t.excess.iter().map(|&(i, e)| (i as f64, e.max(1e-300))).collect(),
                range: Vec::new(),
            })
            .collect();
        let chart = LineChart {
            title: "Retain excess risk during unlearning".into(),
            x_label: "unlearning iteration".into(),
            y_label: "excess retain risk".into(),
            log_y: true,
            series,
        };
        emit(Some(&p), &chart.render())?;
    }
    Ok(())
}

pub fn ood_table(traces: &[OodTrace]) -> Table {
    let mut t = Table::new(&OOD_HEADER);
    for tr in traces {
        for &(i, e) in &tr.excess {
            t.push(vec![tr.f.to_string(), tr.method.to_string(), i.to_string(), real(e)]);
        }
    }
    t
}

pub fn ood_summary_table(traces: &[OodTrace]) -> Table {
    let mut t = Table::new(&OOD_SUMMARY_HEADER);
    for tr in traces {
        t.push(vec![
            tr.f.to_string(),
            tr.method.to_string(),
            tr.train_iterations.to_string(),
            tr.unlearn_iterations.to_string(),
            tr.grad_evals_per_iteration.to_string(),
            real(tr.threshold),
            tr.iterations_to_threshold
                .map(|v| v.to_string())
                .unwrap_or_else(|| "NA".into()),
            real(tr.excess.last().map(|p| p.1).unwrap_or(f64::NAN)),
        ]);
    }
    t
}

fn forget_study(a: StudyArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let d = ForgetStudySettings::default();
    let seed = r.pick_opt("seed", a.seed)?;
    let mut s = ForgetStudySettings {
        n: r.pick("n", a.n, d.n)?,
        d: r.pick("d", a.d, d.d)?,
        separation: r.pick("separation", a.separation, d.separation)?,
        corruption: r.pick("corruption", a.corruption, d.corruption)?,
        lambda: r.pick("lambda", a.lambda, d.lambda)?,
        study: StudyConfig {
            microbatch: r.pick("microbatch", a.microbatch, d.study.microbatch)?,
            cohort: r.pick("cohort", a.cohort, d.study.cohort)?,
            trim: r.pick("trim", a.trim, d.study.trim)?,
            iters: r.pick("iters", a.iters, d.study.iters)?,
            finetune_iters: r.pick("finetune-iters", a.finetune_iters, d.study.finetune_iters)?,
            stride: r.pick("stride", a.stride, d.study.stride)?,
        },
        test_size: r.pick("test-size", a.test_size, d.test_size)?,
        seed: 0,
    };
    let out = r.pick_path("out", a.common.out)?;
    let plot = r.pick_path("plot", a.plot)?;
    let effective = r.finish()?;
    if a.common.print_config {
        return print_config(&effective);
    }
    s.seed = require_seed(seed)?;
    let record = run_forget_study(&s)?;
    let mut t = Table::new(&STUDY_HEADER);
    for row in &record.rows {
        t.push(vec![
            row.iteration.to_string(),
            row.method.name().to_string(),
            real(row.retain_acc),
            real(row.forget_acc),
            real(row.test_acc),
        ]);
    }
    emit(out.as_deref(), &t.to_csv())?;
    if let Some(p) = plot {
        let series = StudyMethod::ALL
            .iter()
            .map(|m| Series {
                name: m.name().to_string(),
                points: record
                    .rows_for(*m)
                    .map(|r| (r.iteration as f64, r.forget_acc))
                    .collect(),
                range: Vec::new(),
            })
            .collect();
        let chart = LineChart {
            title: "Accuracy on the mislabeled forget set".into(),
            x_label: "iteration".into(),
            y_label: "forget accuracy".into(),
            log_y: false,
            series,
        };
        emit(Some(&p), &chart.render())?;
    }
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let d = CertifySettings::default();
    let seed = r.pick_opt("seed", a.seed)?;
    let mut s = CertifySettings {
        scenario: r.pick("scenario", a.scenario, d.scenario)?,
        algorithm: r.pick("algorithm", a.algorithm, AlgorithmArg(d.algorithm))?.0,
        curvature: r.pick("curvature", a.curvature, d.curvature)?,
        n: r.pick("n", a.n, d.n)?,
        d: r.pick("d", a.d, d.d)?,
        f: r.pick("f", a.f, d.f)?,
        offset: r.pick("offset", a.offset, d.offset)?,
        epsilon: r.pick("epsilon", a.epsilon, d.epsilon)?,
        q: r.pick("q", a.q, d.q)?,
        alpha: r.pick("alpha", a.alpha, d.alpha)?,
        lambda: r.pick("lambda", a.lambda, d.lambda)?,
        noise_std: r.pick("noise-std", a.noise_std, d.noise_std)?,
        sweep_pairs: r.pick("sweep-pairs", a.sweep_pairs, d.sweep_pairs)?,
        seed: 0,
    };
    let out = r.pick_path("out", a.common.out)?;
    let effective = r.finish()?;
    if a.common.print_config {
        return print_config(&effective);
    }
    s.seed = require_seed(seed)?;
    let outcome = run_certify(&s)?;
    let c = outcome.certificate;
    let rep = &outcome.report;
    let mut text = String::new();
    let mut line = |k: &str, v: String| {
        text.push_str(k);
        text.push('=');
        text.push_str(&v);
        text.push('\n');
    };
    line("algorithm", rep.algorithm.name().into());
    line("q", real(c.q));
    line("budget", real(c.budget));
    line("divergence", real(c.divergence));
    line("distance_sq", real(c.distance_sq));
    line("noise_variance", real(c.noise_variance));
    line("satisfied", c.satisfied.to_string());
    line("target", real(rep.target));
    line("train_iterations", rep.train_report.iterations.to_string());
    line("unlearn_iterations", rep.unlearn_report.iterations.to_string());
    line(
        "retain_excess_risk",
        rep.retain_excess_risk.map(real).unwrap_or_else(|| "NA".into()),
    );
    if s.sweep_pairs > 0 {
        line("sweep_pairs", outcome.sweep.len().to_string());
        line(
            "sweep_satisfied",
            outcome.sweep.iter().filter(|c| c.satisfied).count().to_string(),
        );
        line(
            "sweep_max_divergence",
            real(outcome.sweep.iter().map(|c| c.divergence).fold(0.0, f64::max)),
        );
    }
    emit(out.as_deref(), &text)
}

fn capacity(a: CapacityArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let inputs = CapacityInputs {
        n: r.pick("n", a.n, 1000)?,
        d: r.pick("d", a.d, 10)?,
        alpha: r.pick("alpha", a.alpha, 0.1)?,
        epsilon: r.pick("epsilon", a.epsilon, 1.0)?,
        time_budget_t: r.pick("time-budget", a.time_budget, 0.0)?,
        lipschitz_r: r.pick_opt("lipschitz", a.lipschitz)?,
        init_dist: r.pick("init-dist", a.init_dist, 1.0)?,
        interp_error: r.pick("interp-error", a.interp_error, 1.0)?,
    };
    let out = r.pick_path("out", a.common.out)?;
    let effective = r.finish()?;
    if a.common.print_config {
        return print_config(&effective);
    }
    let mut text = format!("label={ORDER_ESTIMATE_LABEL}\n");
    text.push_str(&format!(
        "id_utility={}\n",
        real(id_utility_capacity(inputs.n, inputs.alpha)?)
    ));
    let id = match inputs.lipschitz_r {
        Some(_) => real(id_computational_capacity(&inputs)?.value),
        None => "NA".into(),
    };
    text.push_str(&format!("id_computational={id}\n"));
    let ood = ood_computational_capacity(&inputs)?;
    text.push_str(&format!("ood_computational={}\n", real(ood.value)));
    text.push_str(&format!("perfect_interpolation={}\n", ood.perfect_interpolation));
    emit(out.as_deref(), &text)
}
