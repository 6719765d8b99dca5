//! Ancestral sampling: choose a child at every sum, descend into every
//! product child, draw a cardinality and that many i.i.d. elements at every
//! set unit, and draw leaf values at input units.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circuit::{Circuit, LeafDist, Locator, Unit, UnitId};
use crate::error::Result;
use crate::inference::root_unit;
use crate::ingest::{DataNode, DataTree, LeafValue, SchemaNode};
use crate::logspace::softmax;
use crate::rng::{item_rng, stream_rng, Stream};

/// Empty instance of a schema node: objects with all fields, empty arrays,
/// missing leaves.
fn skeleton(node: &SchemaNode) -> DataNode {
    match node {
        SchemaNode::Het { fields } => DataNode::Het(
            fields
                .iter()
                .map(|f| (f.name.clone(), skeleton(&f.schema)))
                .collect(),
        ),
        SchemaNode::Hom { .. } => DataNode::Hom(Vec::new()),
        SchemaNode::Leaf(_) => DataNode::MISSING,
    }
}

fn locate_mut<'a>(mut node: &'a mut DataNode, loc: &Locator) -> &'a mut DataNode {
    for &i in &loc.0 {
        match node {
            DataNode::Het(fields) => node = &mut fields[i].1,
            _ => unreachable!("skeleton follows the schema"),
        }
    }
    node
}

/// Index drawn from normalized probabilities by inverse CDF.
fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

struct Sampler<'c> {
    circuit: &'c Circuit,
}

impl Sampler<'_> {
    fn fill<R: Rng + ?Sized>(&self, unit: UnitId, data: &mut DataNode, rng: &mut R) {
        let params = self.circuit.params();
        match self.circuit.unit(unit) {
            Unit::Sum { children, offset } => {
                let w = softmax(&params[*offset..offset + children.len()]);
                let c = children[draw_index(&w, rng)];
                self.fill(c, data, rng);
            }
            Unit::Product { children } => {
                for &c in children {
                    self.fill(c, data, rng);
                }
            }
            Unit::Set {
                path,
                locator,
                cardinality,
                feature,
            } => {
                let Some(SchemaNode::Hom { element, .. }) =
                    self.circuit.schema().node(self.circuit.path(*path))
                else {
                    unreachable!("set unit at a collection path");
                };
                let m = draw_index(&cardinality.pmf(params), rng);
                let elems = (0..m)
                    .map(|_| {
                        let mut e = skeleton(element);
                        self.fill(*feature, &mut e, rng);
                        e
                    })
                    .collect();
                *locate_mut(data, locator) = DataNode::Hom(elems);
            }
            Unit::Input { leaves } => {
                for leaf in leaves {
                    let v = draw_leaf(&leaf.dist, params, rng);
                    *locate_mut(data, &leaf.locator) = DataNode::Leaf(v);
                }
            }
        }
    }
}

fn draw_leaf<R: Rng + ?Sized>(dist: &LeafDist, params: &[f64], rng: &mut R) -> LeafValue {
    match dist {
        LeafDist::Gaussian {
            offset,
            standardize,
            integer,
        } => {
            let z: f64 = rng.sample(StandardNormal);
            let mut x = params[*offset] + params[offset + 1].exp() * z;
            if let Some(s) = standardize {
                x = s.mean + s.scale * x;
            }
            if *integer {
                LeafValue::Int(x.round() as i64)
            } else {
                LeafValue::Real(x)
            }
        }
        LeafDist::Categorical { offset, levels } => {
            if levels.is_empty() {
                return LeafValue::Missing;
            }
            // The OOV bucket is never emitted: draw among the known levels.
            let p = softmax(&params[*offset..offset + levels.len()]);
            levels.value(draw_index(&p, rng))
        }
    }
}

/// Draws one tree from root `root` using `rng`.
pub fn sample_with<R: Rng + ?Sized>(circuit: &Circuit, root: usize, rng: &mut R) -> Result<DataTree> {
    let unit = root_unit(circuit, root)?;
    let mut data = skeleton(&circuit.schema().root);
    Sampler { circuit }.fill(unit, &mut data, rng);
    Ok(DataTree::new(data))
}

/// Draws one tree from root `root`, deterministically in `seed`.
pub fn sample_tree(circuit: &Circuit, root: usize, seed: u64) -> Result<DataTree> {
    sample_with(circuit, root, &mut stream_rng(seed, Stream::Sample))
}

/// Draws `n` (class, tree) pairs in parallel. Each item has its own random
/// stream, so the output depends only on `seed` and `n`. With several roots
/// the class is drawn from the class priors.
pub fn sample_labeled(circuit: &Circuit, n: usize, seed: u64) -> Vec<(usize, DataTree)> {
    let priors: Vec<f64> = circuit.class_log_priors().iter().map(|p| p.exp()).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, Stream::Sample, i as u64);
            let class = if priors.len() > 1 {
                draw_index(&priors, &mut rng)
            } else {
                0
            };
            let tree = sample_with(circuit, class, &mut rng).expect("class index in range");
            (class, tree)
        })
        .collect()
}

/// Writes `n` sampled trees as JSON lines.
pub fn sample_corpus<W: Write>(circuit: &Circuit, n: usize, seed: u64, out: &mut W) -> Result<()> {
    for (_, tree) in sample_labeled(circuit, n, seed) {
        writeln!(out, "{}", tree.to_json())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{spsn_network, BuildConfig};
    use crate::ingest::infer_schema;

    #[test]
    fn samples_validate_and_are_deterministic() {
        let schema = infer_schema([
            r#"{"a": 1.5, "n": 3, "tags": ["x", "y"], "kids": [{"v": 1.0, "w": [true]}]}"#,
            r#"{"a": -0.5, "n": 7, "tags": [], "kids": []}"#,
        ])
        .unwrap();
        let c = spsn_network(&schema, &BuildConfig::default()).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        sample_corpus(&c, 50, 3, &mut a).unwrap();
        sample_corpus(&c, 50, 3, &mut b).unwrap();
        assert_eq!(a, b);
        for t in sample_labeled(&c, 200, 9) {
            t.1.validate(&schema).unwrap();
            assert!(!t.1.contains_missing());
        }
    }
}
