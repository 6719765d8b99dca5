//! Exact log-density and marginal evaluation, classification and first
//! moments. Everything is computed bottom-up in the log domain; a unit whose
//! data are missing integrates to one and contributes zero.

use rayon::prelude::*;

use crate::circuit::{Circuit, LeafDist, Locator, Unit, UnitId};
use crate::error::{Error, Result};
use crate::ingest::{mask_with, DataNode, DataTree, LeafValue, SchemaNode, SchemaPath};
use crate::logspace::{ln_factorial, log_softmax, log_sum_exp, sorted_sum, LogValue};
use crate::rng::{item_rng, Stream};

static MISSING: DataNode = DataNode::Leaf(LeafValue::Missing);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full evidence; missing values are an error.
    Density,
    /// Missing values are integrated out.
    Marginal,
}

#[derive(Debug, Clone, Copy)]
pub struct Query<'t> {
    pub tree: &'t DataTree,
    pub mode: Mode,
}

/// Walks a chain of field indices from a block's data node. Anything below a
/// missing node is missing.
pub(crate) fn locate<'a>(mut node: &'a DataNode, loc: &Locator) -> &'a DataNode {
    for &i in &loc.0 {
        match node {
            DataNode::Het(fields) => node = &fields[i].1,
            _ => return &MISSING,
        }
    }
    node
}

/// One evaluated (unit, data node) pair. Children are stored before their
/// parents.
#[derive(Debug, Clone)]
pub(crate) struct TapeEntry<'a> {
    pub unit: UnitId,
    pub data: &'a DataNode,
    pub value: f64,
    pub kids: std::ops::Range<usize>,
}

#[derive(Debug, Default)]
pub(crate) struct Tape<'a> {
    pub entries: Vec<TapeEntry<'a>>,
    pub kids: Vec<usize>,
}

pub(crate) struct Evaluator<'c> {
    pub circuit: &'c Circuit,
    pub params: &'c [f64],
}

impl<'c> Evaluator<'c> {
    pub fn new(circuit: &'c Circuit) -> Self {
        Evaluator {
            circuit,
            params: circuit.params(),
        }
    }

    pub fn value(&self, unit: UnitId, data: &DataNode) -> f64 {
        self.visit(unit, data, &mut None).0
    }

    pub fn record<'a>(&self, unit: UnitId, data: &'a DataNode) -> Tape<'a> {
        let mut tape = Some(Tape::default());
        self.visit(unit, data, &mut tape);
        tape.expect("tape present")
    }

    fn visit<'a>(
        &self,
        unit: UnitId,
        data: &'a DataNode,
        tape: &mut Option<Tape<'a>>,
    ) -> (f64, usize) {
        let params = self.params;
        let mut kid_ids = Vec::new();
        let value = match self.circuit.unit(unit) {
            Unit::Sum { children, offset } => {
                let lw = log_softmax(&params[*offset..offset + children.len()]);
                let terms: Vec<f64> = children
                    .iter()
                    .zip(&lw)
                    .map(|(&c, w)| {
                        let (v, i) = self.visit(c, data, tape);
                        kid_ids.push(i);
                        w + v
                    })
                    .collect();
                log_sum_exp(&terms)
            }
            Unit::Product { children } => children
                .iter()
                .map(|&c| {
                    let (v, i) = self.visit(c, data, tape);
                    kid_ids.push(i);
                    v
                })
                .sum(),
            Unit::Set {
                locator,
                cardinality,
                feature,
                ..
            } => match locate(data, locator) {
                DataNode::Hom(elems) => {
                    let m = elems.len();
                    // Sorting makes the sum independent of element order.
                    let mut vals: Vec<f64> = elems
                        .iter()
                        .map(|e| {
                            let (v, i) = self.visit(*feature, e, tape);
                            kid_ids.push(i);
                            v
                        })
                        .collect();
                    cardinality.log_pmf(params, m) + ln_factorial(m) + sorted_sum(&mut vals)
                }
                _ => 0.0,
            },
            Unit::Input { leaves } => leaves
                .iter()
                .map(|leaf| match locate(data, &leaf.locator) {
                    DataNode::Leaf(LeafValue::Missing) => 0.0,
                    DataNode::Leaf(v) => leaf.dist.log_prob(params, v).unwrap_or(f64::NEG_INFINITY),
                    _ => f64::NEG_INFINITY,
                })
                .sum(),
        };
        let value = if value.is_nan() { f64::NEG_INFINITY } else { value };
        match tape {
            Some(t) => {
                let start = t.kids.len();
                t.kids.extend_from_slice(&kid_ids);
                t.entries.push(TapeEntry {
                    unit,
                    data,
                    value,
                    kids: start..t.kids.len(),
                });
                (value, t.entries.len() - 1)
            }
            None => (value, 0),
        }
    }
}

pub(crate) fn root_unit(circuit: &Circuit, root: usize) -> Result<UnitId> {
    circuit.roots().get(root).copied().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "root {root} out of range (circuit has {})",
            circuit.n_classes()
        ))
    })
}

pub(crate) fn check_tree(circuit: &Circuit, tree: &DataTree, mode: Mode) -> Result<()> {
    tree.validate(circuit.schema())?;
    if mode == Mode::Density {
        if let Some(p) = tree.first_missing() {
            return Err(Error::MissingInDensityMode(p));
        }
    }
    Ok(())
}

pub fn evaluate(circuit: &Circuit, root: usize, query: Query<'_>) -> Result<LogValue> {
    let unit = root_unit(circuit, root)?;
    check_tree(circuit, query.tree, query.mode)?;
    Ok(Evaluator::new(circuit).value(unit, &query.tree.root))
}

/// Log density of a fully observed tree under root `root`.
pub fn log_density(circuit: &Circuit, root: usize, tree: &DataTree) -> Result<LogValue> {
    evaluate(circuit, root, Query { tree, mode: Mode::Density })
}

/// Log probability of the region where observed values are fixed and every
/// missing leaf or subtree is free.
pub fn marginal_log_density(circuit: &Circuit, root: usize, tree: &DataTree) -> Result<LogValue> {
    evaluate(circuit, root, Query { tree, mode: Mode::Marginal })
}

/// Evaluates many trees in parallel; results keep input order.
pub fn evaluate_batch(
    circuit: &Circuit,
    root: usize,
    trees: &[DataTree],
    mode: Mode,
) -> Vec<Result<LogValue>> {
    trees
        .par_iter()
        .map(|tree| evaluate(circuit, root, Query { tree, mode }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    pub log_posterior: Vec<f64>,
}

/// Posterior over classes from class log-priors and per-root marginals.
/// If every root assigns zero density the priors are returned.
pub fn classify(circuit: &Circuit, tree: &DataTree) -> Result<Classification> {
    check_tree(circuit, tree, Mode::Marginal)?;
    let eval = Evaluator::new(circuit);
    let priors = circuit.class_log_priors();
    let joint: Vec<f64> = circuit
        .roots()
        .iter()
        .zip(&priors)
        .map(|(&r, p)| p + eval.value(r, &tree.root))
        .collect();
    let z = log_sum_exp(&joint);
    let log_posterior = if z == f64::NEG_INFINITY {
        priors
    } else {
        joint.iter().map(|j| j - z).collect()
    };
    let class = argmax(&log_posterior);
    Ok(Classification {
        class,
        log_posterior,
    })
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

pub fn classify_batch(circuit: &Circuit, trees: &[DataTree]) -> Vec<Result<Classification>> {
    trees.par_iter().map(|t| classify(circuit, t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub fraction: f64,
    pub repeat: usize,
    pub accuracy: f64,
}

/// Classification accuracy under random missing leaves: for every fraction
/// and repeat, each leaf of each tree is masked independently with that
/// probability and the tree is classified by marginal inference. Masks are
/// drawn per (repeat, tree) from `seed`, so they do not depend on the
/// other fractions or on evaluation order.
pub fn missing_sweep(
    circuit: &Circuit,
    trees: &[DataTree],
    labels: &[usize],
    fractions: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if trees.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} documents",
            labels.len(),
            trees.len()
        )));
    }
    if trees.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("fraction {f} outside [0, 1]")));
    }
    let mut rows = Vec::new();
    for &fraction in fractions {
        for repeat in 0..repeats {
            let hits = trees
                .par_iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (t, &y))| {
                    let item = ((repeat as u64) << 32) | i as u64;
                    let mut rng = item_rng(seed, Stream::Mask, item);
                    let masked = mask_with(t, fraction, &mut rng);
                    classify(circuit, &masked).map(|c| usize::from(c.class == y))
                })
                .collect::<Result<Vec<usize>>>()?;
            rows.push(SweepRow {
                fraction,
                repeat,
                accuracy: hits.iter().sum::<usize>() as f64 / trees.len() as f64,
            });
        }
    }
    Ok(rows)
}

/// Conditional mean of a Gaussian leaf given the observed part of
/// `evidence` (or unconditionally when `evidence` is `None`). The leaf must
/// not sit under a collection. Integer leaves report the mean of the
/// underlying continuous density.
pub fn expectation(
    circuit: &Circuit,
    root: usize,
    path: &SchemaPath,
    evidence: Option<&DataTree>,
) -> Result<f64> {
    let unit = root_unit(circuit, root)?;
    if path.under_collection() {
        return Err(Error::InvalidArgument(format!(
            "`{path}` lies under a collection"
        )));
    }
    match circuit.schema().node(path) {
        Some(SchemaNode::Leaf(_)) => {}
        _ => return Err(Error::InvalidArgument(format!("`{path}` is not a leaf"))),
    }
    let target = circuit
        .paths()
        .iter()
        .position(|p| p == path)
        .ok_or_else(|| Error::InvalidArgument(format!("no input unit models `{path}`")))?;
    let empty = DataTree::new(DataNode::Leaf(LeafValue::Missing));
    let tree = evidence.unwrap_or(&empty);
    check_tree(circuit, tree, Mode::Marginal)?;
    let eval = Evaluator::new(circuit);
    let (v, m) = moment(&eval, unit, &tree.root, target)?;
    if v == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("evidence has zero density".into()));
    }
    m.ok_or_else(|| Error::InvalidArgument(format!("no input unit models `{path}`")))
}

/// Log marginal of a unit together with the conditional mean of the target
/// leaf when it lies in the unit's scope.
fn moment(
    eval: &Evaluator<'_>,
    unit: UnitId,
    data: &DataNode,
    target: usize,
) -> Result<(f64, Option<f64>)> {
    let params = eval.params;
    Ok(match eval.circuit.unit(unit) {
        Unit::Sum { children, offset } => {
            let lw = log_softmax(&params[*offset..offset + children.len()]);
            let parts = children
                .iter()
                .map(|&c| moment(eval, c, data, target))
                .collect::<Result<Vec<_>>>()?;
            let terms: Vec<f64> = parts.iter().zip(&lw).map(|((v, _), w)| v + w).collect();
            let total = log_sum_exp(&terms);
            let mean = if parts.iter().all(|(_, m)| m.is_some()) && total.is_finite() {
                Some(
                    parts
                        .iter()
                        .zip(&terms)
                        .map(|((_, m), t)| (t - total).exp() * m.unwrap_or(0.0))
                        .sum(),
                )
            } else {
                None
            };
            (total, mean)
        }
        Unit::Product { children } => {
            let mut total = 0.0;
            let mut mean = None;
            for &c in children {
                let (v, m) = moment(eval, c, data, target)?;
                total += v;
                mean = mean.or(m);
            }
            (total, mean)
        }
        Unit::Set { .. } => (eval.value(unit, data), None),
        Unit::Input { leaves } => {
            let mut mean = None;
            for leaf in leaves.iter().filter(|l| l.path == target) {
                mean = Some(match locate(data, &leaf.locator) {
                    DataNode::Leaf(LeafValue::Real(x)) => *x,
                    DataNode::Leaf(LeafValue::Int(i)) => *i as f64,
                    DataNode::Leaf(LeafValue::Missing) => match &leaf.dist {
                        LeafDist::Gaussian {
                            offset,
                            standardize,
                            ..
                        } => {
                            let mu = params[*offset];
                            standardize.map_or(mu, |s| s.mean + s.scale * mu)
                        }
                        LeafDist::Categorical { .. } => {
                            return Err(Error::InvalidArgument(
                                "expectation needs a Gaussian leaf".into(),
                            ))
                        }
                    },
                    _ => return Err(Error::InvalidArgument("unexpected data".into())),
                });
            }
            (eval.value(unit, data), mean)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{spsn_network, BuildConfig};
    use crate::circuit::{CardinalityDist, InputLeaf, Levels};
    use crate::ingest::{infer_schema, parse_document, PathStep, Schema};

    fn bernoulli_set_circuit(rate: f64) -> (Circuit, Schema) {
        let schema = Schema::from_json(
            r#"{"version":1,"root":{"kind":"hom","cardinality":{"instances":1,"min":0,"max":2,"mean":1.0},
            "element":{"kind":"leaf","type":"str","count":2,"vocabulary":["h","t"]}}}"#,
        )
        .unwrap();
        let elem = SchemaPath(vec![PathStep::Element]);
        let units = vec![
            Unit::Input {
                leaves: vec![InputLeaf {
                    path: 1,
                    locator: Locator::anchor(),
                    dist: LeafDist::Categorical {
                        offset: 1,
                        levels: Levels::strings(vec!["h".into(), "t".into()]),
                    },
                }],
            },
            Unit::Set {
                path: 0,
                locator: Locator::anchor(),
                cardinality: CardinalityDist { offset: 4, k_max: 60 },
                feature: 0,
            },
        ];
        // OOV logit far below so heads/tails are each one half.
        let params = vec![0.0, 0.0, 0.0, -1e3, rate.ln()];
        let c = Circuit::from_parts(
            schema.clone(),
            units,
            vec![1],
            params,
            0,
            vec![SchemaPath::root(), elem],
        )
        .unwrap();
        (c, schema)
    }

    #[test]
    fn set_unit_hand_computed() {
        let (c, schema) = bernoulli_set_circuit(2.0);
        let t = parse_document(r#"["h","t"]"#, &schema).unwrap();
        // p(2) = 2e^-2, so p(2) * 2! * (1/2)^2 = e^-2; and p(0) = e^-2.
        let v = log_density(&c, 0, &t).unwrap();
        assert!((v + 2.0).abs() < 1e-12, "{v}");
        let empty = parse_document("[]", &schema).unwrap();
        let v0 = log_density(&c, 0, &empty).unwrap();
        assert!((v0 + 2.0).abs() < 1e-12);
    }

    #[test]
    fn fully_missing_is_zero_and_density_mode_rejects_missing() {
        let corpus = [r#"{"a": 1.0, "b": "x", "c": [1, 2]}"#, r#"{"a": 2.5, "b": "y", "c": []}"#];
        let schema = infer_schema(corpus).unwrap();
        let c = spsn_network(&schema, &BuildConfig::default()).unwrap();
        let t = parse_document(r#"{"a": null}"#, &schema).unwrap();
        assert_eq!(marginal_log_density(&c, 0, &t).unwrap(), 0.0);
        assert!(matches!(
            log_density(&c, 0, &t),
            Err(Error::MissingInDensityMode(_))
        ));
        let full = parse_document(corpus[0], &schema).unwrap();
        assert_eq!(
            log_density(&c, 0, &full).unwrap(),
            marginal_log_density(&c, 0, &full).unwrap()
        );
    }

    #[test]
    fn classify_uses_priors_when_uninformative() {
        let schema = infer_schema([r#"{"a": 1.0}"#, r#"{"a": 3.0}"#]).unwrap();
        let mut c = spsn_network(&schema, &BuildConfig { n_c: 2, ..Default::default() }).unwrap();
        let off = c.prior_offset();
        c.params_mut()[off] = 0.7f64.ln();
        c.params_mut()[off + 1] = 0.3f64.ln();
        let t = parse_document("{}", &schema).unwrap();
        let post = classify(&c, &t).unwrap();
        assert_eq!(post.class, 0);
        assert!((post.log_posterior[0].exp() - 0.7).abs() < 1e-12);
        assert!((post.log_posterior[1].exp() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn expectation_of_single_gaussian() {
        let schema = infer_schema([r#"{"a": 1.0}"#, r#"{"a": 3.0}"#]).unwrap();
        let c = spsn_network(&schema, &BuildConfig::default()).unwrap();
        let m = expectation(&c, 0, &SchemaPath::root().field("a"), None).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
    }
}
