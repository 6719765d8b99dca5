//! Input and cardinality distributions. Parameters live in the circuit's
//! flat parameter vector; these types only hold offsets into it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ingest::LeafValue;
use crate::logspace::{ln_factorial, log_sum_exp};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Categories of a categorical input. One extra out-of-vocabulary bucket
/// follows the listed levels.
#[derive(Debug, Clone)]
pub enum Levels {
    Str {
        values: Vec<String>,
        index: HashMap<String, usize>,
    },
    Int(Vec<i64>),
}

impl Levels {
    pub fn strings(values: Vec<String>) -> Self {
        let index = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Levels::Str { values, index }
    }

    pub fn ints(mut values: Vec<i64>) -> Self {
        values.sort_unstable();
        values.dedup();
        Levels::Int(values)
    }

    pub fn len(&self) -> usize {
        match self {
            Levels::Str { values, .. } => values.len(),
            Levels::Int(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of logits, including the OOV bucket.
    pub fn n_logits(&self) -> usize {
        self.len() + 1
    }

    /// Bucket index of an observed value; unknown values map to the OOV
    /// bucket, wrong-typed values to `None`.
    pub fn bucket(&self, v: &LeafValue) -> Option<usize> {
        match (self, v) {
            (Levels::Str { index, values }, LeafValue::Str(s)) => {
                Some(index.get(s).copied().unwrap_or(values.len()))
            }
            (Levels::Int(levels), LeafValue::Int(i)) => {
                Some(levels.binary_search(i).unwrap_or(levels.len()))
            }
            _ => None,
        }
    }

    pub fn value(&self, bucket: usize) -> LeafValue {
        match self {
            Levels::Str { values, .. } => LeafValue::Str(values[bucket].clone()),
            Levels::Int(v) => LeafValue::Int(v[bucket]),
        }
    }

    /// A value guaranteed to land in the OOV bucket.
    pub fn oov_value(&self) -> LeafValue {
        match self {
            Levels::Str { index, .. } => {
                let mut s = String::from("\u{1}oov");
                while index.contains_key(&s) {
                    s.push('_');
                }
                LeafValue::Str(s)
            }
            Levels::Int(v) => LeafValue::Int(v.last().map_or(0, |m| m + 1)),
        }
    }
}

/// Affine map applied to integer values before a Gaussian scores them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardize {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub enum LeafDist {
    /// Parameters `[mean, log_std]`.
    Gaussian {
        offset: usize,
        standardize: Option<Standardize>,
        integer: bool,
    },
    /// `levels.n_logits()` logits.
    Categorical { offset: usize, levels: Levels },
}

impl LeafDist {
    pub fn offset(&self) -> usize {
        match self {
            LeafDist::Gaussian { offset, .. } | LeafDist::Categorical { offset, .. } => *offset,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            LeafDist::Gaussian { .. } => 2,
            LeafDist::Categorical { levels, .. } => levels.n_logits(),
        }
    }

    /// Value on the scale the Gaussian operates on.
    pub(crate) fn gaussian_input(standardize: Option<Standardize>, v: &LeafValue) -> Option<f64> {
        let x = match v {
            LeafValue::Real(x) => *x,
            LeafValue::Int(i) => *i as f64,
            _ => return None,
        };
        Some(match standardize {
            Some(s) => (x - s.mean) / s.scale,
            None => x,
        })
    }

    /// Log density (or mass) of an observed value; `None` for a value of the
    /// wrong type.
    pub fn log_prob(&self, params: &[f64], v: &LeafValue) -> Option<f64> {
        match self {
            LeafDist::Gaussian {
                offset,
                standardize,
                ..
            } => {
                let x = Self::gaussian_input(*standardize, v)?;
                let (mu, log_std) = (params[*offset], params[offset + 1]);
                let jacobian = standardize.map_or(0.0, |s| s.scale.ln());
                Some(gaussian_log_pdf(x, mu, log_std) - jacobian)
            }
            LeafDist::Categorical { offset, levels } => {
                let k = levels.bucket(v)?;
                let logits = &params[*offset..offset + levels.n_logits()];
                Some(logits[k] - log_sum_exp(logits))
            }
        }
    }
}

pub fn gaussian_log_pdf(x: f64, mu: f64, log_std: f64) -> f64 {
    let z = (x - mu) * (-log_std).exp();
    -0.5 * z * z - log_std - LN_SQRT_2PI
}

/// Poisson cardinality distribution truncated to `{0, ..., k_max}` and
/// renormalized. The single parameter is the log of the rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardinalityDist {
    pub offset: usize,
    pub k_max: usize,
}

impl CardinalityDist {
    /// `ln sum_k exp(k*eta - ln k!)` over the truncated support.
    pub fn log_normalizer(&self, log_rate: f64) -> f64 {
        let terms: Vec<f64> = (0..=self.k_max)
            .map(|k| k as f64 * log_rate - ln_factorial(k))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn log_pmf(&self, params: &[f64], m: usize) -> f64 {
        if m > self.k_max {
            return f64::NEG_INFINITY;
        }
        let eta = params[self.offset];
        m as f64 * eta - ln_factorial(m) - self.log_normalizer(eta)
    }

    pub fn pmf(&self, params: &[f64]) -> Vec<f64> {
        (0..=self.k_max)
            .map(|k| self.log_pmf(params, k).exp())
            .collect()
    }

    /// Mean of the truncated distribution; also `d log_normalizer / d eta`.
    pub fn mean(&self, params: &[f64]) -> f64 {
        self.pmf(params)
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}
