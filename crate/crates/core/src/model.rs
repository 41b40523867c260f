//! Logistic regression (binary and multinomial) on feature tables, plus the
//! evaluation metrics: accuracy, MCC, AUC variants, ROC points, confusion.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::features::{FeatureRow, FeatureTable};
use crate::ingest::{BinaryLabel, Superclass};
use crate::preprocess::median_sorted;
use crate::ranks::midranks;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("test fold {0} outside 1..=10")]
    BadFold(u8),
    #[error("test fold {0} has no records")]
    EmptyTestFold(u8),
    #[error("training data has {0} class(es); need at least 2")]
    SingleClass(usize),
    #[error("no usable features after dropping all-missing and zero-variance columns")]
    NoFeatures,
    #[error("empty {0} set")]
    Empty(&'static str),
    #[error("non-finite loss during optimisation")]
    NonFinite,
    #[error("invalid option: {0}")]
    Param(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub rule: String,
}

pub const DEFAULT_TEST_FOLD: u8 = 10;

pub fn split_by_fold(rows: &[FeatureRow], test_fold: u8) -> Result<Split, ModelError> {
    if !(1..=10).contains(&test_fold) {
        return Err(ModelError::BadFold(test_fold));
    }
    let (test, train): (Vec<&FeatureRow>, Vec<&FeatureRow>) =
        rows.iter().partition(|r| r.strat_fold == test_fold);
    if test.is_empty() {
        return Err(ModelError::EmptyTestFold(test_fold));
    }
    Ok(Split {
        train_ids: train.iter().map(|r| r.record_id.clone()).collect(),
        test_ids: test.iter().map(|r| r.record_id.clone()).collect(),
        rule: format!("test = strat_fold {test_fold}; train = all other folds"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// healthy (0) vs diseased (1)
    Binary,
    /// NORM, MI, STTC, CD, HYP by priority label
    FiveClass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::FiveClass => 5,
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Binary => vec![BinaryLabel::Healthy.as_str(), BinaryLabel::Diseased.as_str()],
            Task::FiveClass => Superclass::ALL.iter().map(|s| s.as_str()).collect(),
        }
    }

    pub fn target(self, row: &FeatureRow) -> usize {
        match self {
            Task::Binary => usize::from(row.binary_label == BinaryLabel::Diseased),
            Task::FiveClass => row.superclass.index(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::FiveClass => "five_class",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" => Ok(Task::Binary),
            "five_class" | "5class" | "multiclass" => Ok(Task::FiveClass),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Median imputation and standardisation, fit on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    /// Source column of each kept feature.
    pub kept: Vec<usize>,
    pub names: Vec<String>,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Preprocessor {
    pub fn fit(names: &[String], rows: &[&[Option<f64>]]) -> Result<Self, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::Empty("training"));
        }
        let mut p = Preprocessor {
            kept: Vec::new(),
            names: Vec::new(),
            medians: Vec::new(),
            means: Vec::new(),
            stds: Vec::new(),
        };
        for (col, name) in names.iter().enumerate() {
            let mut present: Vec<f64> = rows.iter().filter_map(|r| r[col]).collect();
            if present.is_empty() {
                log::info!("dropping feature {name}: no training values");
                continue;
            }
            present.sort_by(f64::total_cmp);
            let median = median_sorted(&present);
            let filled: Vec<f64> = rows.iter().map(|r| r[col].unwrap_or(median)).collect();
            let n = filled.len() as f64;
            let mean = filled.iter().sum::<f64>() / n;
            let sd = (filled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            if sd <= 1e-12 * mean.abs().max(1.0) {
                log::info!("dropping feature {name}: zero variance on training rows");
                continue;
            }
            p.kept.push(col);
            p.names.push(name.clone());
            p.medians.push(median);
            p.means.push(mean);
            p.stds.push(sd);
        }
        if p.kept.is_empty() {
            return Err(ModelError::NoFeatures);
        }
        Ok(p)
    }

    pub fn transform(&self, values: &[Option<f64>]) -> Vec<f64> {
        self.kept
            .iter()
            .enumerate()
            .map(|(i, &col)| (values[col].unwrap_or(self.medians[i]) - self.means[i]) / self.stds[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub l2_lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            l2_lambda: 1e-3,
            max_iter: 2000,
            tol: 1e-6,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(ModelError::Param(format!("l2_lambda = {}", self.l2_lambda)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(ModelError::Param("max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    /// Flat parameters; see [`LinearModel`] for the layout.
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every accepted step, starting from the initial point.
    pub loss_history: Vec<f64>,
    pub grad_inf_norm: f64,
}

const ARMIJO_C: f64 = 1e-4;

/// Full-batch gradient descent with backtracking from `theta`.
pub fn minimize(
    objective: impl Fn(&[f64]) -> (f64, Vec<f64>),
    mut theta: Vec<f64>,
    opts: &TrainOptions,
) -> Result<Fit, ModelError> {
    let (mut loss, mut grad) = objective(&theta);
    if !loss.is_finite() {
        return Err(ModelError::NonFinite);
    }
    let mut history = vec![loss];
    let mut step = 1.0;
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut iterations = 0;
    while iterations < opts.max_iter && inf_norm(&grad) >= opts.tol {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        while step > 1e-16 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (l, g) = objective(&trial);
            if l.is_finite() && l <= loss - ARMIJO_C * step * g2 {
                accepted = Some((trial, l, g));
                break;
            }
            step *= 0.5;
        }
        let Some((t, l, g)) = accepted else {
            log::warn!("line search stalled after {iterations} iterations");
            break;
        };
        theta = t;
        loss = l;
        grad = g;
        history.push(loss);
        iterations += 1;
        step *= 2.0;
    }
    let grad_inf_norm = inf_norm(&grad);
    Ok(Fit {
        theta,
        converged: grad_inf_norm < opts.tol,
        iterations,
        loss_history: history,
        grad_inf_norm,
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood plus `lambda/2 * |w|^2` (bias unpenalised)
/// and its gradient; `theta = [w_1..w_d, b]`.
pub fn logistic_objective(x: &[Vec<f64>], y: &[bool], theta: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let d = theta.len() - 1;
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (row, &label) in x.iter().zip(y) {
        let z = theta[d] + row.iter().zip(theta).map(|(a, w)| a * w).sum::<f64>();
        loss += softplus(z) - if label { z } else { 0.0 };
        let r = sigmoid(z) - f64::from(u8::from(label));
        for (g, a) in grad.iter_mut().zip(row) {
            *g += r * a;
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for j in 0..d {
        loss += 0.5 * lambda * theta[j] * theta[j];
        grad[j] += lambda * theta[j];
    }
    (loss, grad)
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

/// Multinomial counterpart of [`logistic_objective`]; `theta` holds `k`
/// blocks of `[w_1..w_d, b]`.
pub fn softmax_objective(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    theta: &[f64],
    lambda: f64,
) -> (f64, Vec<f64>) {
    let stride = theta.len() / k;
    let d = stride - 1;
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    let mut z = vec![0.0; k];
    for (row, &label) in x.iter().zip(y) {
        for (c, zc) in z.iter_mut().enumerate() {
            let w = &theta[c * stride..(c + 1) * stride];
            *zc = w[d] + row.iter().zip(w).map(|(a, w)| a * w).sum::<f64>();
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        softmax_in_place(&mut z);
        for c in 0..k {
            let r = z[c] - f64::from(u8::from(c == label));
            let g = &mut grad[c * stride..(c + 1) * stride];
            for (gj, a) in g.iter_mut().zip(row) {
                *gj += r * a;
            }
            g[d] += r;
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for c in 0..k {
        for j in 0..d {
            let t = theta[c * stride + j];
            loss += 0.5 * lambda * t * t;
            grad[c * stride + j] += lambda * t;
        }
    }
    (loss, grad)
}

/// Linear scores over standardised features.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearModel {
    Binary { weights: Vec<f64>, bias: f64 },
    Multinomial { weights: Vec<Vec<f64>>, biases: Vec<f64> },
}

impl LinearModel {
    /// Class probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LinearModel::Binary { weights, bias } => {
                let p = sigmoid(bias + x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>());
                vec![1.0 - p, p]
            }
            LinearModel::Multinomial { weights, biases } => {
                let mut z: Vec<f64> = weights
                    .iter()
                    .zip(biases)
                    .map(|(w, b)| b + x.iter().zip(w).map(|(a, w)| a * w).sum::<f64>())
                    .collect();
                softmax_in_place(&mut z);
                z
            }
        }
    }
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], opts: &TrainOptions) -> Result<(LinearModel, Fit), ModelError> {
    opts.validate()?;
    let classes = y.iter().collect::<BTreeSet<_>>().len();
    if classes < 2 {
        return Err(ModelError::SingleClass(classes));
    }
    let d = x[0].len();
    let fit = minimize(
        |t| logistic_objective(x, y, t, opts.l2_lambda),
        vec![0.0; d + 1],
        opts,
    )?;
    let model = LinearModel::Binary {
        weights: fit.theta[..d].to_vec(),
        bias: fit.theta[d],
    };
    Ok((model, fit))
}

pub fn fit_multinomial(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    opts: &TrainOptions,
) -> Result<(LinearModel, Fit), ModelError> {
    opts.validate()?;
    let classes = y.iter().collect::<BTreeSet<_>>().len();
    if classes < 2 {
        return Err(ModelError::SingleClass(classes));
    }
    if let Some(bad) = y.iter().find(|c| **c >= k) {
        return Err(ModelError::Param(format!("label {bad} outside 0..{k}")));
    }
    let stride = x[0].len() + 1;
    let fit = minimize(
        |t| softmax_objective(x, y, k, t, opts.l2_lambda),
        vec![0.0; k * stride],
        opts,
    )?;
    let model = LinearModel::Multinomial {
        weights: (0..k)
            .map(|c| fit.theta[c * stride..(c + 1) * stride - 1].to_vec())
            .collect(),
        biases: (0..k).map(|c| fit.theta[(c + 1) * stride - 1]).collect(),
    };
    Ok((model, fit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub task: Task,
    pub preprocessor: Preprocessor,
    pub model: LinearModel,
    pub l2_lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub loss_history: Vec<f64>,
}

impl TrainedModel {
    pub fn predict_proba(&self, values: &[Option<f64>]) -> Vec<f64> {
        self.model.predict_proba(&self.preprocessor.transform(values))
    }
}

/// Fit imputation, scaling, and the classifier on `rows`.
pub fn train(
    names: &[String],
    rows: &[&FeatureRow],
    task: Task,
    opts: &TrainOptions,
) -> Result<TrainedModel, ModelError> {
    let raw: Vec<&[Option<f64>]> = rows.iter().map(|r| r.values.as_slice()).collect();
    let pre = Preprocessor::fit(names, &raw)?;
    let x: Vec<Vec<f64>> = raw.iter().map(|v| pre.transform(v)).collect();
    let (model, fit) = match task {
        Task::Binary => {
            let y: Vec<bool> = rows.iter().map(|r| task.target(r) == 1).collect();
            fit_logistic(&x, &y, opts)?
        }
        Task::FiveClass => {
            let y: Vec<usize> = rows.iter().map(|r| task.target(r)).collect();
            fit_multinomial(&x, &y, task.n_classes(), opts)?
        }
    };
    if !fit.converged {
        log::warn!(
            "{task} model stopped after {} iterations with gradient norm {:.3e}",
            fit.iterations,
            fit.grad_inf_norm
        );
    }
    Ok(TrainedModel {
        task,
        preprocessor: pre,
        model,
        l2_lambda: opts.l2_lambda,
        converged: fit.converged,
        iterations: fit.iterations,
        loss_history: fit.loss_history,
    })
}

/// Rank AUC `U / (n1 n2)` with mid-ranks for tied scores; `None` unless both
/// classes are present.
pub fn auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n1 = positive.iter().filter(|p| **p).count();
    let n0 = positive.len() - n1;
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let (ranks, _) = midranks(scores);
    let r1: f64 = ranks.iter().zip(positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    Some(u / (n1 as f64 * n0 as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points for thresholds at each distinct score, descending, starting
/// from (0, 0).
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<RocPoint> {
    let p = positive.iter().filter(|v| **v).count() as f64;
    let n = positive.len() as f64 - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let rate = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        out.push(RocPoint {
            threshold: s,
            fpr: rate(fp, n),
            tpr: rate(tp, p),
        });
    }
    out
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], k: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

/// Matthews correlation over a k x k confusion matrix (rows = truth); the
/// binary formula is the k = 2 case. Zero when the denominator vanishes.
pub fn mcc(cm: &[Vec<u64>]) -> f64 {
    let k = cm.len();
    let s: f64 = cm.iter().flatten().map(|v| *v as f64).sum();
    let c: f64 = (0..k).map(|i| cm[i][i] as f64).sum();
    let t: Vec<f64> = cm.iter().map(|r| r.iter().map(|v| *v as f64).sum()).collect();
    let p: Vec<f64> = (0..k).map(|j| cm.iter().map(|r| r[j] as f64).sum()).collect();
    let tp: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
    let den = ((s * s - p.iter().map(|v| v * v).sum::<f64>())
        * (s * s - t.iter().map(|v| v * v).sum::<f64>()))
    .sqrt();
    if den == 0.0 {
        0.0
    } else {
        ((c * s - tp) / den).clamp(-1.0, 1.0)
    }
}

/// One-vs-rest AUC: (macro, prevalence-weighted), over classes that have
/// both positives and negatives in `truth`.
pub fn ovr_auc(probs: &[Vec<f64>], truth: &[usize], k: usize) -> Option<(f64, f64)> {
    let mut scores = Vec::new();
    for c in 0..k {
        let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|t| *t == c).collect();
        if let Some(a) = auc(&s, &pos) {
            scores.push((a, pos.iter().filter(|v| **v).count() as f64));
        }
    }
    weighted_means(&scores)
}

/// One-vs-one AUC: pairwise AUCs averaged over both directions, then
/// (macro, weighted by the pair's share of samples).
pub fn ovo_auc(probs: &[Vec<f64>], truth: &[usize], k: usize) -> Option<(f64, f64)> {
    let mut scores = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let idx: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == a || truth[i] == b).collect();
            let is_a: Vec<bool> = idx.iter().map(|&i| truth[i] == a).collect();
            let s_a: Vec<f64> = idx.iter().map(|&i| probs[i][a]).collect();
            let s_b: Vec<f64> = idx.iter().map(|&i| probs[i][b]).collect();
            let is_b: Vec<bool> = is_a.iter().map(|v| !v).collect();
            if let (Some(ab), Some(ba)) = (auc(&s_a, &is_a), auc(&s_b, &is_b)) {
                scores.push(((ab + ba) / 2.0, idx.len() as f64));
            }
        }
    }
    weighted_means(&scores)
}

fn weighted_means(scores: &[(f64, f64)]) -> Option<(f64, f64)> {
    if scores.is_empty() {
        return None;
    }
    let macro_ = scores.iter().map(|s| s.0).sum::<f64>() / scores.len() as f64;
    let w: f64 = scores.iter().map(|s| s.1).sum();
    let weighted = scores.iter().map(|s| s.0 * s.1).sum::<f64>() / w;
    Some((macro_, weighted))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub task: Task,
    pub n: usize,
    pub accuracy: f64,
    pub mcc: f64,
    /// Binary AUC; for five classes the one-vs-rest macro AUC.
    pub auc: Option<f64>,
    pub ovr_macro_auc: Option<f64>,
    pub ovr_weighted_auc: Option<f64>,
    pub ovo_macro_auc: Option<f64>,
    pub ovo_weighted_auc: Option<f64>,
    pub confusion: Vec<Vec<u64>>,
    /// Binary task only.
    pub roc: Vec<RocPoint>,
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > p[best] { i } else { best })
}

/// Metrics from class probabilities; accuracy uses argmax (0.5 threshold
/// for two classes).
pub fn metrics_from_probs(task: Task, probs: &[Vec<f64>], truth: &[usize]) -> Result<EvalMetrics, ModelError> {
    if truth.is_empty() {
        return Err(ModelError::Empty("test"));
    }
    let k = task.n_classes();
    let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let correct = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    let confusion = confusion_matrix(truth, &predicted, k);
    let (ovr, ovo) = (ovr_auc(probs, truth, k), ovo_auc(probs, truth, k));
    let (auc_value, roc) = match task {
        Task::Binary => {
            let s: Vec<f64> = probs.iter().map(|p| p[1]).collect();
            let pos: Vec<bool> = truth.iter().map(|t| *t == 1).collect();
            (auc(&s, &pos), roc_curve(&s, &pos))
        }
        Task::FiveClass => (ovr.map(|o| o.0), Vec::new()),
    };
    if auc_value.is_none() {
        log::warn!("{task} test set lacks a class; AUC is undefined");
    }
    Ok(EvalMetrics {
        task,
        n: truth.len(),
        accuracy: correct as f64 / truth.len() as f64,
        mcc: mcc(&confusion),
        auc: auc_value,
        ovr_macro_auc: ovr.map(|o| o.0),
        ovr_weighted_auc: ovr.map(|o| o.1),
        ovo_macro_auc: ovo.map(|o| o.0),
        ovo_weighted_auc: ovo.map(|o| o.1),
        confusion,
        roc,
    })
}

pub fn evaluate(model: &TrainedModel, rows: &[&FeatureRow]) -> Result<EvalMetrics, ModelError> {
    let probs: Vec<Vec<f64>> = rows.iter().map(|r| model.predict_proba(&r.values)).collect();
    let truth: Vec<usize> = rows.iter().map(|r| model.task.target(r)).collect();
    metrics_from_probs(model.task, &probs, &truth)
}

/// Train on all folds but `test_fold`, evaluate on it.
pub fn train_and_evaluate(
    table: &FeatureTable,
    task: Task,
    test_fold: u8,
    opts: &TrainOptions,
) -> Result<(TrainedModel, EvalMetrics, Split), ModelError> {
    let split = split_by_fold(&table.rows, test_fold)?;
    let (test, train_rows): (Vec<&FeatureRow>, Vec<&FeatureRow>) =
        table.rows.iter().partition(|r| r.strat_fold == test_fold);
    if train_rows.is_empty() {
        return Err(ModelError::Empty("training"));
    }
    let model = train(&table.feature_names, &train_rows, task, opts)?;
    let metrics = evaluate(&model, &test)?;
    Ok((model, metrics, split))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const METRICS_HEADER: &str = "feature_set,task,n_features,n_train,n_test,accuracy,mcc,auc,ovr_macro_auc,ovr_weighted_auc,ovo_macro_auc,ovo_weighted_auc,converged,iterations,split";

/// One CSV line matching [`METRICS_HEADER`].
pub fn metrics_csv_line(
    feature_set: &str,
    model: &TrainedModel,
    m: &EvalMetrics,
    split: &Split,
) -> String {
    format!(
        "{feature_set},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
        m.task,
        model.preprocessor.kept.len(),
        split.train_ids.len(),
        m.n,
        m.accuracy,
        m.mcc,
        opt(m.auc),
        opt(m.ovr_macro_auc),
        opt(m.ovr_weighted_auc),
        opt(m.ovo_macro_auc),
        opt(m.ovo_weighted_auc),
        model.converged,
        model.iterations,
        split.rule
    )
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}

/// Rows are true classes, columns predicted.
pub fn confusion_csv(task: Task, cm: &[Vec<u64>]) -> String {
    let names = task.class_names();
    let mut out = format!("true\\predicted,{}\n", names.join(","));
    for (name, row) in names.iter().zip(cm) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&format!("{name},{}\n", cells.join(",")));
    }
    out
}
