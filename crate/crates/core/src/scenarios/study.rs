use crate::aggregate::{GradientColumns, TrimKernel};
use crate::error::{invalid, Result};
use crate::losses::{Dataset, ForgetSpec, LossKind, LossModel, PointKind};
use crate::numkit::{ParamVector, RngHandle};

/// Micro-batch study settings. Not certified: this is stochastic training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyConfig {
    /// Points per micro-batch.
    pub microbatch: usize,
    /// Micro-batches per step.
    pub cohort: usize,
    /// Micro-batch means trimmed from each side, per coordinate.
    pub trim: usize,
    pub iters: usize,
    /// Extra naive steps on the retain set after training.
    pub finetune_iters: usize,
    /// Accuracy recording interval (the last iteration is always recorded).
    pub stride: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            microbatch: 8,
            cohort: 15,
            trim: 3,
            iters: 1500,
            finetune_iters: 300,
            stride: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StudyMethod {
    Naive,
    TrimGrad,
    Retrain,
    NaiveFinetune,
    TrimGradFinetune,
}

impl StudyMethod {
    pub const ALL: [StudyMethod; 5] = [
        StudyMethod::Naive,
        StudyMethod::TrimGrad,
        StudyMethod::Retrain,
        StudyMethod::NaiveFinetune,
        StudyMethod::TrimGradFinetune,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StudyMethod::Naive => "naive",
            StudyMethod::TrimGrad => "trimgrad",
            StudyMethod::Retrain => "retrain",
            StudyMethod::NaiveFinetune => "naive+finetune",
            StudyMethod::TrimGradFinetune => "trimgrad+finetune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub iteration: usize,
    pub method: StudyMethod,
    pub retain_acc: f64,
    /// Accuracy against the corrupted labels of the forget set.
    pub forget_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub method: StudyMethod,
    pub grad_evals: u64,
    /// Gradient evaluations on forget-set points.
    pub forget_grad_evals: u64,
    pub final_theta: ParamVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub rows: Vec<StudyRow>,
    pub arms: Vec<ArmSummary>,
}

impl StudyRecord {
    pub fn rows_for(&self, method: StudyMethod) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn final_row(&self, method: StudyMethod) -> Option<&StudyRow> {
        self.rows_for(method).last()
    }

    pub fn arm(&self, method: StudyMethod) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.method == method)
    }
}

/// Naive micro-batch SGD, micro-batch TrimGrad and retraining on the retain
/// set, each followed (except retraining) by naive fine-tuning on the retain
/// set.
///
/// Every step draws `cohort·microbatch` distinct points, splits them into
/// micro-batches, averages per-sample gradients inside each micro-batch and
/// aggregates the micro-batch means with a trimmed mean (`trim = 0` for the
/// naive arms). The naive and TrimGrad arms share one sampling stream, so
/// with `trim = 0` they coincide exactly. The retraining arm samples only
/// the retain set from its own stream; fine-tuning shares a third stream.
pub fn microbatch_trimgrad_study(
    model: &LossModel,
    dataset: &Dataset,
    forget: &ForgetSpec,
    test: &Dataset,
    config: StudyConfig,
    rng: &RngHandle,
) -> Result<StudyRecord> {
    if !matches!(model.kind(), LossKind::RegLogistic { .. }) {
        return invalid("the study trains regularized logistic regression");
    }
    if dataset.kind() != PointKind::Classification || dataset.classes() != 2 {
        return invalid("the study needs a binary classification dataset");
    }
    if test.kind() != PointKind::Classification || test.dim() != dataset.dim() {
        return invalid("test set must be classification data of the same dimension");
    }
    dataset.check_forget(forget)?;
    if config.microbatch == 0 || config.cohort == 0 {
        return invalid("micro-batch and cohort sizes must be positive");
    }
    if 2 * config.trim >= config.cohort {
        return invalid(format!(
            "trimming {} from each side needs more than {} micro-batches, got {}",
            config.trim,
            2 * config.trim,
            config.cohort
        ));
    }
    let draw = config.microbatch * config.cohort;
    let retain_idx: Vec<usize> = dataset.included(Some(forget)).map(|(i, _)| i).collect();
    if draw > retain_idx.len() {
        return invalid(format!(
            "a step draws {draw} points but only {} are retained",
            retain_idx.len()
        ));
    }

    let all_idx: Vec<usize> = (0..dataset.len()).collect();
    let base = rng.stream_id().wrapping_mul(8);
    let train_stream = rng.derive(base.wrapping_add(1));
    let retrain_stream = rng.derive(base.wrapping_add(2));
    let finetune_stream = rng.derive(base.wrapping_add(3));

    let eval = Evaluator {
        model,
        dataset,
        forget,
        test,
    };
    let zero = ParamVector::zeros(dataset.dim());
    let mut rows = Vec::new();
    let mut arms = Vec::new();

    let mut run =
        |method, pool: &[usize], trim, stream: &RngHandle, start: &ParamVector, offset, iters| -> Result<ArmSummary> {
            let mut arm = Arm::new(model, dataset, forget, config, start);
            let mut stream = stream.clone();
            if offset == 0 {
                rows.push(eval.row(0, method, &arm.theta));
            }
            for t in 1..=iters {
                arm.step(pool, trim, &mut stream)?;
                if t == iters || (config.stride > 0 && t % config.stride == 0) {
                    rows.push(eval.row(offset + t, method, &arm.theta));
                }
            }
            Ok(arm.summary(method))
        };

    let naive = run(StudyMethod::Naive, &all_idx, 0, &train_stream, &zero, 0, config.iters)?;
    let trimmed = run(
        StudyMethod::TrimGrad,
        &all_idx,
        config.trim,
        &train_stream,
        &zero,
        0,
        config.iters,
    )?;
    let retrain = run(
        StudyMethod::Retrain,
        &retain_idx,
        0,
        &retrain_stream,
        &zero,
        0,
        config.iters,
    )?;
    let mut naive_ft = run(
        StudyMethod::NaiveFinetune,
        &retain_idx,
        0,
        &finetune_stream,
        &naive.final_theta,
        config.iters,
        config.finetune_iters,
    )?;
    let mut trimmed_ft = run(
        StudyMethod::TrimGradFinetune,
        &retain_idx,
        0,
        &finetune_stream,
        &trimmed.final_theta,
        config.iters,
        config.finetune_iters,
    )?;
    // fine-tuned arms inherit the cost of the training they start from
    naive_ft.grad_evals += naive.grad_evals;
    naive_ft.forget_grad_evals += naive.forget_grad_evals;
    trimmed_ft.grad_evals += trimmed.grad_evals;
    trimmed_ft.forget_grad_evals += trimmed.forget_grad_evals;
    arms.extend([naive, trimmed, retrain, naive_ft, trimmed_ft]);
    Ok(StudyRecord { rows, arms })
}

struct Arm<'a> {
    model: &'a LossModel,
    dataset: &'a Dataset,
    forget: &'a ForgetSpec,
    config: StudyConfig,
    theta: Vec<f64>,
    picks: Vec<usize>,
    columns: GradientColumns,
    grad: Vec<f64>,
    batch_mean: Vec<f64>,
    direction: Vec<f64>,
    grad_evals: u64,
    forget_grad_evals: u64,
}

impl<'a> Arm<'a> {
    fn new(
        model: &'a LossModel,
        dataset: &'a Dataset,
        forget: &'a ForgetSpec,
        config: StudyConfig,
        start: &ParamVector,
    ) -> Self {
        let d = dataset.dim();
        Arm {
            model,
            dataset,
            forget,
            config,
            theta: start.as_slice().to_vec(),
            picks: Vec::with_capacity(config.microbatch * config.cohort),
            columns: GradientColumns::new(config.cohort, d),
            grad: vec![0.0; d],
            batch_mean: vec![0.0; d],
            direction: vec![0.0; d],
            grad_evals: 0,
            forget_grad_evals: 0,
        }
    }

    fn step(&mut self, pool: &[usize], trim: usize, stream: &mut RngHandle) -> Result<()> {
        let draw = self.config.microbatch * self.config.cohort;
        self.picks.clear();
        self.picks
            .extend(stream.sample_indices(pool.len(), draw).into_iter().map(|j| pool[j]));
        stream.shuffle(&mut self.picks);
        let points = self.dataset.points();
        for (b, batch) in self.picks.chunks(self.config.microbatch).enumerate() {
            self.batch_mean.fill(0.0);
            for &i in batch {
                self.model.grad_into(&self.theta, &points[i], &mut self.grad);
                for (m, g) in self.batch_mean.iter_mut().zip(&self.grad) {
                    *m += g;
                }
                if self.forget.contains(i) {
                    self.forget_grad_evals += 1;
                }
            }
            let size = batch.len() as f64;
            self.batch_mean.iter_mut().for_each(|m| *m /= size);
            self.columns.set_row(b, &self.batch_mean);
        }
        self.grad_evals += draw as u64;
        self.columns
            .trimmed_mean_into(trim, TrimKernel::Select, &mut self.direction);
        let step = 1.0 / self.model.smooth_l();
        for (t, g) in self.theta.iter_mut().zip(&self.direction) {
            *t -= step * g;
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::NumericalFailure {
                message: "study iterate diverged".into(),
                last_value: None,
            });
        }
        Ok(())
    }

    fn summary(self, method: StudyMethod) -> ArmSummary {
        ArmSummary {
            method,
            grad_evals: self.grad_evals,
            forget_grad_evals: self.forget_grad_evals,
            final_theta: ParamVector::from_vec_unchecked(self.theta),
        }
    }
}

struct Evaluator<'a> {
    model: &'a LossModel,
    dataset: &'a Dataset,
    forget: &'a ForgetSpec,
    test: &'a Dataset,
}

impl Evaluator<'_> {
    fn row(&self, iteration: usize, method: StudyMethod, theta: &[f64]) -> StudyRow {
        let theta = ParamVector::from_vec_unchecked(theta.to_vec());
        let (mut retain_hit, mut retain_n, mut forget_hit, mut forget_n) = (0usize, 0usize, 0usize, 0usize);
        for (i, p) in self.dataset.points().iter().enumerate() {
            let hit = self.correct(&theta, p);
            if self.forget.contains(i) {
                forget_n += 1;
                forget_hit += usize::from(hit);
            } else {
                retain_n += 1;
                retain_hit += usize::from(hit);
            }
        }
        let test_hit = self.test.points().iter().filter(|p| self.correct(&theta, p)).count();
        StudyRow {
            iteration,
            method,
            retain_acc: ratio(retain_hit, retain_n),
            forget_acc: ratio(forget_hit, forget_n),
            test_acc: ratio(test_hit, self.test.len()),
        }
    }

    fn correct(&self, theta: &ParamVector, p: &crate::losses::DataPoint) -> bool {
        match p {
            crate::losses::DataPoint::Classification { x, y } => self.model.predict(theta, x) == *y,
            _ => false,
        }
    }
}

/// Fraction of hits; an empty split reports 0.
fn ratio(hit: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
