//! Data-driven parameter initialization.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::builder::MIN_STD;
use crate::circuit::{Circuit, LeafDist, Unit};
use crate::ingest::{DataNode, DataTree, LeafValue, SchemaPath};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Scale of random perturbations of Gaussian means (in units of the
    /// corpus standard deviation) and categorical logits. Zero leaves every
    /// copy of a leaf identical, which mixture components then only escape
    /// through the sum-weight noise.
    pub jitter: f64,
    /// Half-width of the uniform noise on sum logits.
    pub sum_noise: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            jitter: 0.0,
            sum_noise: 0.01,
        }
    }
}

#[derive(Default)]
struct PathData<'a> {
    values: HashMap<SchemaPath, Vec<&'a LeafValue>>,
    sizes: HashMap<SchemaPath, Vec<usize>>,
}

fn collect<'a>(node: &'a DataNode, path: SchemaPath, out: &mut PathData<'a>) {
    match node {
        DataNode::Het(fields) => {
            for (name, child) in fields {
                collect(child, path.field(name), out);
            }
        }
        DataNode::Hom(elems) => {
            let elem = path.element();
            for e in elems {
                collect(e, elem.clone(), out);
            }
            out.sizes.entry(path).or_default().push(elems.len());
        }
        DataNode::Leaf(LeafValue::Missing) => {}
        DataNode::Leaf(v) => out.values.entry(path).or_default().push(v),
    }
}

fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt().max(MIN_STD)))
}

/// Initializes `circuit` from corpus statistics with default options.
pub fn init_params(circuit: &mut Circuit, corpus: &[DataTree], seed: u64) {
    init_params_with(circuit, corpus, seed, &InitOptions::default());
}

/// Gaussian leaves start at the per-path corpus mean and standard deviation
/// (floored), categorical logits at Laplace-smoothed log frequencies,
/// cardinality rates at the mean observed size, and sum logits at small
/// uniform noise. Paths without observations keep their current values.
pub fn init_params_with(circuit: &mut Circuit, corpus: &[DataTree], seed: u64, opts: &InitOptions) {
    let mut data = PathData::default();
    for t in corpus {
        collect(&t.root, SchemaPath::root(), &mut data);
    }
    let mut rng = stream_rng(seed, Stream::Init);
    let mut params = std::mem::take(&mut circuit.params);
    for u in &circuit.units {
        match u {
            Unit::Sum { children, offset } => {
                for p in &mut params[*offset..offset + children.len()] {
                    *p = if opts.sum_noise > 0.0 {
                        rng.random_range(-opts.sum_noise..opts.sum_noise)
                    } else {
                        0.0
                    };
                }
            }
            Unit::Set {
                path, cardinality, ..
            } => {
                if let Some(sizes) = data.sizes.get(&circuit.paths[*path]) {
                    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
                    params[cardinality.offset] = mean.max(0.05).ln();
                }
            }
            Unit::Input { leaves } => {
                for leaf in leaves {
                    let Some(values) = data.values.get(&circuit.paths[leaf.path]) else {
                        continue;
                    };
                    match &leaf.dist {
                        LeafDist::Gaussian {
                            offset,
                            standardize,
                            ..
                        } => {
                            let xs: Vec<f64> = values
                                .iter()
                                .filter_map(|v| LeafDist::gaussian_input(*standardize, v))
                                .collect();
                            if let Some((mean, std)) = mean_std(&xs) {
                                let z: f64 = rng.sample(StandardNormal);
                                params[*offset] = mean + opts.jitter * std * z;
                                params[offset + 1] = std.ln();
                            }
                        }
                        LeafDist::Categorical { offset, levels } => {
                            let mut counts = vec![1.0; levels.n_logits()];
                            for v in values {
                                if let Some(b) = levels.bucket(v) {
                                    counts[b] += 1.0;
                                }
                            }
                            let total: f64 = counts.iter().sum();
                            for (k, c) in counts.iter().enumerate() {
                                let z: f64 = if opts.jitter > 0.0 {
                                    rng.sample(StandardNormal)
                                } else {
                                    0.0
                                };
                                params[offset + k] = (c / total).ln() + opts.jitter * z;
                            }
                        }
                    }
                }
            }
            Unit::Product { .. } => {}
        }
    }
    circuit.params = params;
}
