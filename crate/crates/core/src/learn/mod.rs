//! Gradient-based parameter estimation: generative (log-likelihood) and
//! discriminative (cross-entropy) objectives optimized with Adam.

mod backward;
mod init;
mod optim;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::inference::{argmax, check_tree, Evaluator, Mode};
use crate::ingest::DataTree;
use crate::logspace::log_sum_exp;
use crate::rng::{stream_rng, Stream};

pub use backward::{backward, GradientBuffer};
pub use init::{init_params, init_params_with, InitOptions};
pub use optim::{project, Adam, LOGIT_CLAMP, LOG_RATE_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Mean log density; with several roots and labels, the mean joint
    /// log-likelihood `log prior_y + log p_y(T)`.
    Nll,
    /// Mean log posterior of the true class.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    pub step_size: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Share of the corpus held out for checkpoint selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Nll,
            step_size: 0.01,
            batch_size: 10,
            epochs: 20,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument("step size must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch's minibatches (before each
    /// step); `None` for the initial checkpoint.
    pub train_objective: Option<f64>,
    /// Mean log density (generative) or mean log posterior of the true class.
    pub val_log_score: f64,
    /// Validation accuracy, for labeled data with several roots.
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 = initial parameters).
    pub best_epoch: usize,
    /// How the checkpoint was chosen.
    pub selection: &'static str,
}

/// Objective value and gradient for one example.
fn example_gradient(
    circuit: &Circuit,
    tree: &DataTree,
    label: Option<usize>,
    objective: Objective,
) -> Result<(f64, GradientBuffer)> {
    let eval = Evaluator::new(circuit);
    let mut grad = vec![0.0; circuit.params().len()];
    let roots = circuit.roots();
    let off = circuit.prior_offset();
    let priors = circuit.class_log_priors();
    match (objective, label) {
        (Objective::Nll, None) => {
            let tape = eval.record(roots[0], &tree.root);
            let v = backward::accumulate(&eval, &tape, 1.0, &mut grad)?;
            Ok((v, grad))
        }
        (Objective::Nll, Some(y)) => {
            let tape = eval.record(roots[y], &tree.root);
            let v = backward::accumulate(&eval, &tape, 1.0, &mut grad)?;
            for (j, p) in priors.iter().enumerate() {
                let onehot = if j == y { 1.0 } else { 0.0 };
                grad[off + j] += onehot - p.exp();
            }
            Ok((v + priors[y], grad))
        }
        (Objective::CrossEntropy, Some(y)) => {
            let tapes: Vec<_> = roots.iter().map(|&r| eval.record(r, &tree.root)).collect();
            let joint: Vec<f64> = tapes
                .iter()
                .zip(&priors)
                .map(|(t, p)| p + t.entries.last().map_or(f64::NEG_INFINITY, |e| e.value))
                .collect();
            let z = log_sum_exp(&joint);
            if !z.is_finite() {
                return Err(Error::NonFiniteGradient { batch: None });
            }
            for (k, tape) in tapes.iter().enumerate() {
                let post = (joint[k] - z).exp();
                let seed = if k == y { 1.0 - post } else { -post };
                if tape.entries.last().is_some_and(|e| e.value.is_finite()) {
                    backward::accumulate(&eval, tape, seed, &mut grad)?;
                }
                grad[off + k] += seed;
            }
            Ok((joint[y] - z, grad))
        }
        (Objective::CrossEntropy, None) => Err(Error::InvalidArgument(
            "cross-entropy training needs labels".into(),
        )),
    }
}

/// Per-example objective and its gradient: the log density (or joint
/// log-likelihood when labeled) for [`Objective::Nll`], the log posterior of
/// the label for [`Objective::CrossEntropy`].
pub fn objective_gradient(
    circuit: &Circuit,
    tree: &DataTree,
    label: Option<usize>,
    objective: Objective,
) -> Result<(f64, GradientBuffer)> {
    check_tree(circuit, tree, Mode::Marginal)?;
    if let Some(y) = label {
        crate::inference::root_unit(circuit, y)?;
    }
    example_gradient(circuit, tree, label, objective)
}

/// Validation score: (accuracy if classifying, mean log score).
fn score(
    circuit: &Circuit,
    trees: &[&DataTree],
    labels: Option<&[usize]>,
    objective: Objective,
) -> (Option<f64>, f64) {
    if trees.is_empty() {
        return (None, 0.0);
    }
    let eval = Evaluator::new(circuit);
    let priors = circuit.class_log_priors();
    let per: Vec<(f64, f64)> = trees
        .par_iter()
        .enumerate()
        .map(|(i, t)| match labels {
            None => (0.0, eval.value(circuit.roots()[0], &t.root)),
            Some(ls) => {
                let y = ls[i];
                let joint: Vec<f64> = circuit
                    .roots()
                    .iter()
                    .zip(&priors)
                    .map(|(&r, p)| p + eval.value(r, &t.root))
                    .collect();
                let hit = f64::from(u8::from(argmax(&joint) == y));
                let s = match objective {
                    Objective::Nll => joint[y],
                    Objective::CrossEntropy => joint[y] - log_sum_exp(&joint),
                };
                (hit, s)
            }
        })
        .collect();
    let n = per.len() as f64;
    let acc = labels.map(|_| per.iter().map(|p| p.0).sum::<f64>() / n);
    (acc, per.iter().map(|p| p.1).sum::<f64>() / n)
}

fn better(a: (Option<f64>, f64), b: (Option<f64>, f64), objective: Objective) -> bool {
    match (objective, a.0, b.0) {
        (Objective::CrossEntropy, Some(x), Some(y)) if x != y => x > y,
        _ => a.1 > b.1,
    }
}

/// Trains a copy of `circuit` on `trees` and returns the checkpoint with the
/// best validation score (accuracy first for cross-entropy, then mean log
/// score). Labels are class indices aligned with `trees`; they are required
/// for cross-entropy and for generative training of several roots.
pub fn fit(
    circuit: &Circuit,
    trees: &[DataTree],
    labels: Option<&[usize]>,
    config: &TrainConfig,
) -> Result<(Circuit, History)> {
    config.validate()?;
    if trees.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_c = circuit.n_classes();
    if let Some(ls) = labels {
        if ls.len() != trees.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} documents",
                ls.len(),
                trees.len()
            )));
        }
        if let Some(bad) = ls.iter().find(|&&y| y >= n_c) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {n_c} classes"
            )));
        }
    } else if n_c > 1 {
        return Err(Error::InvalidArgument(
            "a model with several roots needs labels".into(),
        ));
    }
    for t in trees {
        check_tree(circuit, t, Mode::Marginal)?;
    }

    let mut order: Vec<usize> = (0..trees.len()).collect();
    order.shuffle(&mut stream_rng(config.seed, Stream::Split));
    let n_val = if trees.len() >= 2 {
        ((trees.len() as f64 * config.validation_fraction).round() as usize).min(trees.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let (score_idx, selection) = if val_idx.is_empty() {
        (train_idx.clone(), "best training score")
    } else {
        (val_idx.to_vec(), "best validation score")
    };
    let score_trees: Vec<&DataTree> = score_idx.iter().map(|&i| &trees[i]).collect();
    let score_labels: Option<Vec<usize>> = labels.map(|ls| score_idx.iter().map(|&i| ls[i]).collect());

    let mut work = circuit.clone();
    let kinds = work.param_kinds();
    let mut adam = Adam::new(
        work.params.len(),
        config.step_size,
        config.beta1,
        config.beta2,
        config.eps,
    );
    let mut rng = stream_rng(config.seed, Stream::Train);
    let initial = score(&work, &score_trees, score_labels.as_deref(), config.objective);
    let mut history = History {
        epochs: vec![EpochRecord {
            epoch: 0,
            train_objective: None,
            val_log_score: initial.1,
            val_accuracy: initial.0,
        }],
        best_epoch: 0,
        selection,
    };
    let mut best = (initial, work.params.clone());
    let mut batch_no = 0usize;

    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            let results: Vec<Result<(f64, GradientBuffer)>> = batch
                .par_iter()
                .map(|&i| {
                    example_gradient(&work, &trees[i], labels.map(|l| l[i]), config.objective)
                })
                .collect();
            let mut grad = vec![0.0; work.params.len()];
            for r in results {
                let (v, g) = r.map_err(|e| match e {
                    Error::NonFiniteGradient { .. } => Error::NonFiniteGradient {
                        batch: Some(batch_no),
                    },
                    other => other,
                })?;
                total += v;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    batch: Some(batch_no),
                });
            }
            adam.step(&mut work.params, &grad);
            project(&mut work.params, &kinds);
            batch_no += 1;
        }
        let s = score(&work, &score_trees, score_labels.as_deref(), config.objective);
        history.epochs.push(EpochRecord {
            epoch,
            train_objective: Some(total / train_idx.len().max(1) as f64),
            val_log_score: s.1,
            val_accuracy: s.0,
        });
        if better(s, best.0, config.objective) {
            best = (s, work.params.clone());
            history.best_epoch = epoch;
        }
    }
    work.params = best.1;
    Ok((work, history))
}
