//! Reverse-mode gradients of the log marginal density.

use crate::circuit::{Circuit, LeafDist, Unit};
use crate::error::{Error, Result};
use crate::inference::{check_tree, locate, root_unit, Evaluator, Mode, Tape};
use crate::ingest::{DataNode, DataTree, LeafValue};
use crate::logspace::{log_softmax, softmax, LogValue};

/// Gradient vector aligned with the circuit's parameter vector.
pub type GradientBuffer = Vec<f64>;

/// Log marginal density of `tree` under root `root` and its gradient with
/// respect to every parameter. Missing values are integrated out and
/// contribute nothing to the gradient.
pub fn backward(circuit: &Circuit, root: usize, tree: &DataTree) -> Result<(LogValue, GradientBuffer)> {
    let unit = root_unit(circuit, root)?;
    check_tree(circuit, tree, Mode::Marginal)?;
    let eval = Evaluator::new(circuit);
    let tape = eval.record(unit, &tree.root);
    let mut grad = vec![0.0; circuit.params().len()];
    let value = accumulate(&eval, &tape, 1.0, &mut grad)?;
    Ok((value, grad))
}

/// Adds `seed * d(root value)/d(params)` into `grad` and returns the root
/// value recorded on the tape.
pub(crate) fn accumulate(
    eval: &Evaluator<'_>,
    tape: &Tape<'_>,
    seed: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let n = tape.entries.len();
    let root_value = tape.entries[n - 1].value;
    if !root_value.is_finite() {
        return Err(Error::NonFiniteGradient { batch: None });
    }
    if seed == 0.0 {
        return Ok(root_value);
    }
    let params = eval.params;
    let mut adj = vec![0.0; n];
    adj[n - 1] = seed;
    for i in (0..n).rev() {
        let a = adj[i];
        if a == 0.0 {
            continue;
        }
        let e = &tape.entries[i];
        let kids = &tape.kids[e.kids.clone()];
        match eval.circuit.unit(e.unit) {
            Unit::Sum { children, offset } => {
                let lw = log_softmax(&params[*offset..offset + children.len()]);
                for (j, &k) in kids.iter().enumerate() {
                    let r = (lw[j] + tape.entries[k].value - e.value).exp();
                    adj[k] += a * r;
                    grad[offset + j] += a * (r - lw[j].exp());
                }
            }
            Unit::Product { .. } => {
                for &k in kids {
                    adj[k] += a;
                }
            }
            Unit::Set {
                locator,
                cardinality,
                ..
            } => {
                if let DataNode::Hom(elems) = locate(e.data, locator) {
                    grad[cardinality.offset] += a * (elems.len() as f64 - cardinality.mean(params));
                }
                for &k in kids {
                    adj[k] += a;
                }
            }
            Unit::Input { leaves } => {
                for leaf in leaves {
                    let DataNode::Leaf(v) = locate(e.data, &leaf.locator) else {
                        continue;
                    };
                    if matches!(v, LeafValue::Missing) {
                        continue;
                    }
                    leaf_gradient(&leaf.dist, params, v, a, grad);
                }
            }
        }
    }
    if grad.iter().all(|g| g.is_finite()) {
        Ok(root_value)
    } else {
        Err(Error::NonFiniteGradient { batch: None })
    }
}

fn leaf_gradient(dist: &LeafDist, params: &[f64], v: &LeafValue, a: f64, grad: &mut [f64]) {
    match dist {
        LeafDist::Gaussian {
            offset,
            standardize,
            ..
        } => {
            let Some(x) = LeafDist::gaussian_input(*standardize, v) else {
                return;
            };
            let (mu, log_std) = (params[*offset], params[offset + 1]);
            let inv = (-log_std).exp();
            let z = (x - mu) * inv;
            grad[*offset] += a * z * inv;
            grad[offset + 1] += a * (z * z - 1.0);
        }
        LeafDist::Categorical { offset, levels } => {
            let Some(b) = levels.bucket(v) else {
                return;
            };
            let p = softmax(&params[*offset..offset + levels.n_logits()]);
            for (k, pk) in p.iter().enumerate() {
                let onehot = if k == b { 1.0 } else { 0.0 };
                grad[offset + k] += a * (onehot - pk);
            }
        }
    }
}
