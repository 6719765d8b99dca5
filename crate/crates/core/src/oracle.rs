//! Brute-force references for testing: exhaustive enumeration over
//! all-categorical circuits, central finite differences, permutation sweeps,
//! and a generator of small random discrete circuits.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::builder::{spsn_network, BuildConfig};
use crate::circuit::{Circuit, LeafDist, Levels, Unit};
use crate::error::{Error, Result};
use crate::inference::{check_tree, root_unit, Evaluator, Mode};
use crate::ingest::{
    CardinalityStats, DataNode, DataTree, LeafSchema, LeafValue, NumericStats, Schema,
    SchemaField, SchemaNode, SchemaPath,
};
use crate::logspace::{ln_factorial, log_sum_exp, LogValue};

/// Enumerations larger than this many terms are refused.
pub const MAX_TERMS: f64 = 1e7;

/// Allowed outcomes for a brute-force mass computation. Unlisted paths are
/// unconstrained.
#[derive(Debug, Clone, Default)]
pub struct Region {
    /// Allowed values for every occurrence of a leaf path.
    pub values: HashMap<SchemaPath, Vec<LeafValue>>,
    /// Allowed sizes for every occurrence of a collection path.
    pub sizes: HashMap<SchemaPath, Vec<usize>>,
}

impl Region {
    pub fn everything() -> Self {
        Region::default()
    }

    fn admits(&self, node: &DataNode, path: &SchemaPath) -> bool {
        match node {
            DataNode::Het(fields) => fields
                .iter()
                .all(|(name, c)| self.admits(c, &path.field(name))),
            DataNode::Hom(elems) => {
                let elem = path.element();
                self.sizes.get(path).is_none_or(|s| s.contains(&elems.len()))
                    && elems.iter().all(|e| self.admits(e, &elem))
            }
            DataNode::Leaf(v) => self.values.get(path).is_none_or(|vs| vs.contains(v)),
        }
    }
}

/// Enumeration tables derived from a discrete circuit.
struct Space {
    /// Every value of each leaf path, OOV representative included.
    values: HashMap<SchemaPath, Vec<LeafValue>>,
    /// Largest truncation among the set units of each collection path.
    k_max: HashMap<SchemaPath, usize>,
}

impl Space {
    fn of(circuit: &Circuit) -> Result<Self> {
        let mut values: HashMap<SchemaPath, Vec<LeafValue>> = HashMap::new();
        let mut k_max: HashMap<SchemaPath, usize> = HashMap::new();
        for u in circuit.units() {
            match u {
                Unit::Input { leaves } => {
                    for leaf in leaves {
                        let LeafDist::Categorical { levels, .. } = &leaf.dist else {
                            return Err(Error::InvalidArgument(format!(
                                "`{}` has a continuous input; enumeration needs categorical leaves",
                                circuit.path(leaf.path)
                            )));
                        };
                        values
                            .entry(circuit.path(leaf.path).clone())
                            .or_insert_with(|| all_values(levels));
                    }
                }
                Unit::Set {
                    path, cardinality, ..
                } => {
                    let k = k_max.entry(circuit.path(*path).clone()).or_insert(0);
                    *k = (*k).max(cardinality.k_max);
                }
                _ => {}
            }
        }
        Ok(Space { values, k_max })
    }

    /// Number of completions of `data` (Missing marks free positions).
    fn count(&self, schema: &SchemaNode, data: &DataNode, path: &SchemaPath) -> f64 {
        match (schema, data) {
            (SchemaNode::Het { fields }, DataNode::Het(df)) => fields
                .iter()
                .zip(df)
                .map(|(f, (_, c))| self.count(&f.schema, c, &path.field(&f.name)))
                .product(),
            (SchemaNode::Het { fields }, _) => fields
                .iter()
                .map(|f| self.count(&f.schema, &DataNode::MISSING, &path.field(&f.name)))
                .product(),
            (SchemaNode::Hom { element, .. }, DataNode::Hom(elems)) => {
                let p = path.element();
                elems.iter().map(|e| self.count(element, e, &p)).product()
            }
            (SchemaNode::Hom { element, .. }, _) => {
                let per = self.count(element, &DataNode::MISSING, &path.element());
                let k = self.k_max.get(path).copied().unwrap_or(0);
                (0..=k).map(|i| per.powi(i as i32)).sum()
            }
            (SchemaNode::Leaf(_), DataNode::Leaf(LeafValue::Missing)) => {
                self.values.get(path).map_or(1.0, |v| v.len() as f64)
            }
            (SchemaNode::Leaf(_), _) => 1.0,
        }
    }

    /// Every completion of `data` with its log weight: `-ln k!` for each
    /// enumerated collection, so that ordered tuples count each unordered
    /// set once.
    fn completions(
        &self,
        schema: &SchemaNode,
        data: &DataNode,
        path: &SchemaPath,
    ) -> Vec<(DataNode, f64)> {
        match (schema, data) {
            (SchemaNode::Het { fields }, _) => {
                let mut acc: Vec<(Vec<(String, DataNode)>, f64)> = vec![(Vec::new(), 0.0)];
                for (i, f) in fields.iter().enumerate() {
                    let child = match data {
                        DataNode::Het(df) => &df[i].1,
                        _ => &DataNode::MISSING,
                    };
                    let opts = self.completions(&f.schema, child, &path.field(&f.name));
                    acc = cartesian(acc, &opts, |mut v, c| {
                        v.push((f.name.clone(), c));
                        v
                    });
                }
                acc.into_iter().map(|(v, w)| (DataNode::Het(v), w)).collect()
            }
            (SchemaNode::Hom { element, .. }, DataNode::Hom(elems)) => {
                let p = path.element();
                let mut acc: Vec<(Vec<DataNode>, f64)> = vec![(Vec::new(), 0.0)];
                for e in elems {
                    let opts = self.completions(element, e, &p);
                    acc = cartesian(acc, &opts, |mut v, c| {
                        v.push(c);
                        v
                    });
                }
                acc.into_iter().map(|(v, w)| (DataNode::Hom(v), w)).collect()
            }
            (SchemaNode::Hom { element, .. }, _) => {
                let opts = self.completions(element, &DataNode::MISSING, &path.element());
                let k = self.k_max.get(path).copied().unwrap_or(0);
                let mut out = Vec::new();
                let mut layer: Vec<(Vec<DataNode>, f64)> = vec![(Vec::new(), 0.0)];
                for size in 0..=k {
                    if size > 0 {
                        layer = cartesian(layer, &opts, |mut v, c| {
                            v.push(c);
                            v
                        });
                    }
                    let corr = -ln_factorial(size);
                    out.extend(
                        layer
                            .iter()
                            .map(|(v, w)| (DataNode::Hom(v.clone()), w + corr)),
                    );
                }
                out
            }
            (SchemaNode::Leaf(_), DataNode::Leaf(LeafValue::Missing)) => match self.values.get(path) {
                Some(vs) => vs.iter().map(|v| (DataNode::Leaf(v.clone()), 0.0)).collect(),
                None => vec![(DataNode::MISSING, 0.0)],
            },
            (SchemaNode::Leaf(_), d) => vec![(d.clone(), 0.0)],
        }
    }
}

fn cartesian<T: Clone>(
    acc: Vec<(T, f64)>,
    opts: &[(DataNode, f64)],
    join: impl Fn(T, DataNode) -> T,
) -> Vec<(T, f64)> {
    let mut out = Vec::with_capacity(acc.len() * opts.len());
    for (a, wa) in &acc {
        for (o, wo) in opts {
            out.push((join(a.clone(), o.clone()), wa + wo));
        }
    }
    out
}

/// Known levels followed by one value that lands in the OOV bucket.
fn all_values(levels: &Levels) -> Vec<LeafValue> {
    let mut v: Vec<LeafValue> = (0..levels.len()).map(|i| levels.value(i)).collect();
    v.push(levels.oov_value());
    v
}

fn check_size(terms: f64) -> Result<()> {
    if terms > MAX_TERMS {
        Err(Error::TooLarge {
            terms,
            limit: MAX_TERMS,
        })
    } else {
        Ok(())
    }
}

/// Number of terms [`brute_force_mass`] would enumerate.
pub fn enumeration_size(circuit: &Circuit) -> Result<f64> {
    let space = Space::of(circuit)?;
    Ok(space.count(&circuit.schema().root, &DataNode::MISSING, &SchemaPath::root()))
}

/// Every ordered outcome (collections as ordered tuples) with its log
/// probability under root `root`, i.e. the log density minus `ln m!` for
/// each collection of size `m`. This is the distribution the sampler draws
/// from when its output is read in order.
pub fn enumerate_outcomes(circuit: &Circuit, root: usize) -> Result<Vec<(DataTree, LogValue)>> {
    let unit = root_unit(circuit, root)?;
    let space = Space::of(circuit)?;
    let schema = &circuit.schema().root;
    let rootp = SchemaPath::root();
    check_size(space.count(schema, &DataNode::MISSING, &rootp))?;
    let eval = Evaluator::new(circuit);
    Ok(space
        .completions(schema, &DataNode::MISSING, &rootp)
        .into_iter()
        .map(|(t, w)| {
            let v = eval.value(unit, &t) + w;
            (DataTree::new(t), v)
        })
        .collect())
}

/// Log probability of `region` by enumerating every tree: every size
/// `0..=k_max` of every collection, every ordered tuple of elements, and
/// every leaf value (including one out-of-vocabulary representative). Each
/// collection of size `m` is weighted by `1/m!` so that a set is counted
/// once.
pub fn brute_force_mass(circuit: &Circuit, root: usize, region: &Region) -> Result<LogValue> {
    let unit = root_unit(circuit, root)?;
    let space = Space::of(circuit)?;
    let schema = &circuit.schema().root;
    let rootp = SchemaPath::root();
    check_size(space.count(schema, &DataNode::MISSING, &rootp))?;
    let eval = Evaluator::new(circuit);
    let terms: Vec<f64> = space
        .completions(schema, &DataNode::MISSING, &rootp)
        .into_iter()
        .filter(|(t, _)| region.admits(t, &rootp))
        .map(|(t, w)| eval.value(unit, &t) + w)
        .collect();
    Ok(sorted_log_sum_exp(terms))
}

/// Log probability of the query region of `tree`: observed values are
/// fixed, observed collections keep their elements in the given order, and
/// every missing leaf or subtree is enumerated exhaustively.
pub fn brute_force_marginal(circuit: &Circuit, root: usize, tree: &DataTree) -> Result<LogValue> {
    let unit = root_unit(circuit, root)?;
    check_tree(circuit, tree, Mode::Marginal)?;
    let space = Space::of(circuit)?;
    let schema = &circuit.schema().root;
    let rootp = SchemaPath::root();
    check_size(space.count(schema, &tree.root, &rootp))?;
    let eval = Evaluator::new(circuit);
    let terms: Vec<f64> = space
        .completions(schema, &tree.root, &rootp)
        .into_iter()
        .map(|(t, w)| eval.value(unit, &t) + w)
        .collect();
    Ok(sorted_log_sum_exp(terms))
}

/// Log-sum-exp with terms sorted first, so the result does not depend on
/// enumeration order.
fn sorted_log_sum_exp(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    log_sum_exp(&terms)
}

/// Central finite differences of the log marginal density with respect to
/// every parameter.
pub fn finite_diff_grad(circuit: &Circuit, root: usize, tree: &DataTree, h: f64) -> Result<Vec<f64>> {
    let unit = root_unit(circuit, root)?;
    check_tree(circuit, tree, Mode::Marginal)?;
    let mut params = circuit.params().to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let up = Evaluator {
            circuit,
            params: &params,
        }
        .value(unit, &tree.root);
        params[i] = orig - h;
        let down = Evaluator {
            circuit,
            params: &params,
        }
        .value(unit, &tree.root);
        params[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Positions of collections in a tree, as chains of child indices.
fn collection_sites(node: &DataNode, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    match node {
        DataNode::Het(fields) => {
            for (i, (_, c)) in fields.iter().enumerate() {
                cur.push(i);
                collection_sites(c, cur, out);
                cur.pop();
            }
        }
        DataNode::Hom(elems) => {
            out.push(cur.clone());
            for (i, e) in elems.iter().enumerate() {
                cur.push(i);
                collection_sites(e, cur, out);
                cur.pop();
            }
        }
        DataNode::Leaf(_) => {}
    }
}

fn node_at_mut<'a>(mut node: &'a mut DataNode, site: &[usize]) -> &'a mut DataNode {
    for &i in site {
        node = match node {
            DataNode::Het(fields) => &mut fields[i].1,
            DataNode::Hom(elems) => &mut elems[i],
            DataNode::Leaf(_) => unreachable!("site addresses an inner node"),
        };
    }
    node
}

/// Advances `p` to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Largest absolute change of the log marginal density when the elements of
/// any one collection of `tree` are permuted. Up to `max_perms`
/// permutations are tried per collection, in lexicographic order.
pub fn permutation_sweep(
    circuit: &Circuit,
    root: usize,
    tree: &DataTree,
    max_perms: usize,
) -> Result<f64> {
    let unit = root_unit(circuit, root)?;
    check_tree(circuit, tree, Mode::Marginal)?;
    let eval = Evaluator::new(circuit);
    let base = eval.value(unit, &tree.root);
    let mut sites = Vec::new();
    collection_sites(&tree.root, &mut Vec::new(), &mut sites);
    let mut worst: f64 = 0.0;
    for site in sites {
        let mut work = tree.root.clone();
        let DataNode::Hom(original) = node_at_mut(&mut work, &site).clone() else {
            unreachable!("site is a collection");
        };
        let mut perm: Vec<usize> = (0..original.len()).collect();
        let mut tried = 0;
        loop {
            if tried >= max_perms {
                break;
            }
            *node_at_mut(&mut work, &site) =
                DataNode::Hom(perm.iter().map(|&i| original[i].clone()).collect());
            let v = eval.value(unit, &work);
            let d = if v == base { 0.0 } else { (v - base).abs() };
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
            tried += 1;
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }
    Ok(worst)
}

/// Result of swapping two field values of an object.
#[derive(Debug, Clone, PartialEq)]
pub enum SwapOutcome {
    /// The swapped tree no longer conforms to the schema.
    Rejected(String),
    /// The swapped tree conforms and its log density moved by this much.
    Changed(f64),
    /// The swapped tree scores exactly like the original.
    Unchanged,
}

/// Negative control for exchangeability: swaps the values of the first two
/// observed fields of the first object holding two distinct field values,
/// and reports how the tree fares. `None` if no such object exists.
pub fn het_swap(circuit: &Circuit, root: usize, tree: &DataTree) -> Result<Option<SwapOutcome>> {
    fn find(node: &DataNode, cur: &mut Vec<usize>) -> Option<(Vec<usize>, usize, usize)> {
        match node {
            DataNode::Het(fields) => {
                let observed: Vec<usize> =
                    (0..fields.len()).filter(|&i| !fields[i].1.is_missing()).collect();
                for (a, &i) in observed.iter().enumerate() {
                    for &j in &observed[a + 1..] {
                        if fields[i].1 != fields[j].1 {
                            return Some((cur.clone(), i, j));
                        }
                    }
                }
                for (i, (_, c)) in fields.iter().enumerate() {
                    cur.push(i);
                    let r = find(c, cur);
                    cur.pop();
                    if r.is_some() {
                        return r;
                    }
                }
                None
            }
            DataNode::Hom(elems) => elems.iter().enumerate().find_map(|(i, e)| {
                cur.push(i);
                let r = find(e, cur);
                cur.pop();
                r
            }),
            DataNode::Leaf(_) => None,
        }
    }
    let unit = root_unit(circuit, root)?;
    check_tree(circuit, tree, Mode::Marginal)?;
    let Some((site, i, j)) = find(&tree.root, &mut Vec::new()) else {
        return Ok(None);
    };
    let mut swapped = tree.clone();
    if let DataNode::Het(fields) = node_at_mut(&mut swapped.root, &site) {
        let vi = std::mem::replace(&mut fields[i].1, DataNode::MISSING);
        let vj = std::mem::replace(&mut fields[j].1, vi);
        fields[i].1 = vj;
    }
    if let Err(e) = swapped.validate(circuit.schema()) {
        return Ok(Some(SwapOutcome::Rejected(e.to_string())));
    }
    let eval = Evaluator::new(circuit);
    let before = eval.value(unit, &tree.root);
    let after = eval.value(unit, &swapped.root);
    Ok(Some(if before == after {
        SwapOutcome::Unchanged
    } else {
        SwapOutcome::Changed((after - before).abs())
    }))
}

fn random_leaf<R: Rng + ?Sized>(rng: &mut R, p_real: f64) -> SchemaNode {
    if p_real > 0.0 && rng.random_bool(p_real) {
        return SchemaNode::Leaf(LeafSchema::Real {
            stats: NumericStats {
                count: 1,
                mean: 0.0,
                variance: 1.0,
            },
        });
    }
    let n = rng.random_range(1..=2usize);
    if rng.random_bool(0.5) {
        let vocabulary: Vec<String> = ["a", "b"][..n].iter().map(|s| s.to_string()).collect();
        SchemaNode::Leaf(LeafSchema::Str {
            count: 1,
            vocabulary,
        })
    } else {
        let levels: Vec<i64> = (0..n as i64).collect();
        SchemaNode::Leaf(LeafSchema::Int {
            stats: NumericStats {
                count: 1,
                mean: 0.0,
                variance: 0.0,
            },
            distinct: n as u64,
            levels: Some(levels),
        })
    }
}

fn fields_of(names: &[&str], nodes: Vec<SchemaNode>) -> SchemaNode {
    SchemaNode::Het {
        fields: names
            .iter()
            .zip(nodes)
            .map(|(n, schema)| SchemaField {
                name: n.to_string(),
                schema,
            })
            .collect(),
    }
}

/// A random schema with one to three categorical leaf paths and at most one
/// collection path, with one or two levels per leaf.
pub fn random_discrete_schema<R: Rng + ?Sized>(rng: &mut R) -> Schema {
    random_schema(rng, 0.0)
}

/// Like [`random_discrete_schema`], but each leaf is real-valued with
/// probability `p_real`.
pub fn random_schema<R: Rng + ?Sized>(rng: &mut R, p_real: f64) -> Schema {
    let n_leaves = rng.random_range(1..=3usize);
    if !rng.random_bool(0.75) {
        let leaves = (0..n_leaves).map(|_| random_leaf(rng, p_real)).collect();
        return Schema::new(fields_of(&["a", "b", "c"][..n_leaves], leaves));
    }
    let inner = rng.random_range(1..=n_leaves);
    let outer = n_leaves - inner;
    let element = if inner == 1 && rng.random_bool(0.5) {
        random_leaf(rng, p_real)
    } else {
        let leaves = (0..inner).map(|_| random_leaf(rng, p_real)).collect();
        fields_of(&["u", "v", "w"][..inner], leaves)
    };
    let hom = SchemaNode::Hom {
        element: Box::new(element),
        cardinality: CardinalityStats {
            instances: 1,
            min: 0,
            max: 3,
            mean: 1.0,
        },
    };
    if outer == 0 && rng.random_bool(0.3) {
        return Schema::new(hom);
    }
    let mut nodes: Vec<SchemaNode> = (0..outer).map(|_| random_leaf(rng, p_real)).collect();
    let names = ["a", "b", "c", "xs"];
    let mut chosen: Vec<&str> = names[..outer].to_vec();
    chosen.push("xs");
    nodes.push(hom);
    Schema::new(fields_of(&chosen, nodes))
}

/// A random all-categorical circuit over [`random_discrete_schema`], with a
/// random small layout, random parameters and truncations in `1..=3`.
pub fn random_discrete_circuit<R: Rng + ?Sized>(rng: &mut R) -> Circuit {
    random_circuit(rng, 0.0, 1)
}

/// A random circuit over [`random_schema`] with `n_c` roots.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, p_real: f64, n_c: usize) -> Circuit {
    let schema = random_schema(rng, p_real);
    let config = BuildConfig {
        n_c,
        n_l: rng.random_range(1..=2),
        n_s: rng.random_range(2..=3),
        n_p: 2,
        k_cat: 100,
    };
    let mut c = spsn_network(&schema, &config).expect("valid config");
    randomize_params(&mut c, rng);
    c.set_truncation(rng.random_range(1..=3));
    c
}

/// Replaces every parameter with a random draw: logits and means standard
/// normal, log standard deviations and log rates in a moderate range.
pub fn randomize_params<R: Rng + ?Sized>(circuit: &mut Circuit, rng: &mut R) {
    use crate::circuit::ParamKind;
    let kinds = circuit.param_kinds();
    for (p, k) in circuit.params_mut().iter_mut().zip(kinds) {
        let z: f64 = rng.sample(StandardNormal);
        *p = match k {
            ParamKind::GaussLogStd => 0.3 * z,
            ParamKind::LogRate => 0.7 * z,
            _ => z,
        };
    }
}

/// Random query tree: a sample from the circuit in which leaves are
/// replaced by out-of-vocabulary values with probability `p_oov`, leaves by
/// Missing with probability `p_missing`, and whole collections or elements
/// by Missing with probability `p_subtree`.
pub fn random_query<R: Rng + ?Sized>(
    circuit: &Circuit,
    rng: &mut R,
    p_oov: f64,
    p_missing: f64,
    p_subtree: f64,
) -> DataTree {
    let oov: HashMap<SchemaPath, LeafValue> = circuit
        .units()
        .iter()
        .filter_map(|u| match u {
            Unit::Input { leaves } => Some(leaves),
            _ => None,
        })
        .flatten()
        .filter_map(|l| match &l.dist {
            LeafDist::Categorical { levels, .. } => {
                Some((circuit.path(l.path).clone(), levels.oov_value()))
            }
            _ => None,
        })
        .collect();
    let tree = crate::sample::sample_with(circuit, 0, rng).expect("root 0 exists");
    fn go<R: Rng + ?Sized>(
        node: DataNode,
        path: &SchemaPath,
        oov: &HashMap<SchemaPath, LeafValue>,
        rng: &mut R,
        p: (f64, f64, f64),
    ) -> DataNode {
        match node {
            DataNode::Het(fields) => DataNode::Het(
                fields
                    .into_iter()
                    .map(|(n, c)| {
                        let c = go(c, &path.field(&n), oov, rng, p);
                        (n, c)
                    })
                    .collect(),
            ),
            DataNode::Hom(elems) => {
                if rng.random_bool(p.2) {
                    return DataNode::MISSING;
                }
                let ep = path.element();
                DataNode::Hom(
                    elems
                        .into_iter()
                        .map(|e| {
                            if rng.random_bool(p.2) {
                                DataNode::MISSING
                            } else {
                                go(e, &ep, oov, rng, p)
                            }
                        })
                        .collect(),
                )
            }
            DataNode::Leaf(v) => {
                if rng.random_bool(p.1) {
                    DataNode::MISSING
                } else if rng.random_bool(p.0) {
                    DataNode::Leaf(oov.get(path).cloned().unwrap_or(v))
                } else {
                    DataNode::Leaf(v)
                }
            }
        }
    }
    DataTree::new(go(tree.root, &SchemaPath::root(), &oov, rng, (p_oov, p_missing, p_subtree)))
}

/// Shuffles the elements of every collection in a tree.
pub fn shuffle_collections<R: Rng + ?Sized>(tree: &DataTree, rng: &mut R) -> DataTree {
    fn go<R: Rng + ?Sized>(node: &DataNode, rng: &mut R) -> DataNode {
        match node {
            DataNode::Het(fields) => DataNode::Het(
                fields
                    .iter()
                    .map(|(n, c)| (n.clone(), go(c, rng)))
                    .collect(),
            ),
            DataNode::Hom(elems) => {
                let mut v: Vec<DataNode> = elems.iter().map(|e| go(e, rng)).collect();
                v.shuffle(rng);
                DataNode::Hom(v)
            }
            leaf => leaf.clone(),
        }
    }
    DataTree::new(go(&tree.root, rng))
}

/// Discrete stand-in for a circuit's schema: every leaf becomes a
/// categorical with at most `levels` values, and the copy is rebuilt with a
/// small layout and truncation `k_max`. Used to run the enumeration oracles
/// on models whose own leaves are continuous.
pub fn downscale(circuit: &Circuit, levels: usize, k_max: usize) -> Circuit {
    fn go(node: &SchemaNode, levels: usize) -> SchemaNode {
        match node {
            SchemaNode::Het { fields } => SchemaNode::Het {
                fields: fields
                    .iter()
                    .map(|f| SchemaField {
                        name: f.name.clone(),
                        schema: go(&f.schema, levels),
                    })
                    .collect(),
            },
            SchemaNode::Hom {
                element,
                cardinality,
            } => SchemaNode::Hom {
                element: Box::new(go(element, levels)),
                cardinality: *cardinality,
            },
            SchemaNode::Leaf(LeafSchema::Str { count, vocabulary }) => {
                SchemaNode::Leaf(LeafSchema::Str {
                    count: *count,
                    vocabulary: vocabulary.iter().take(levels).cloned().collect(),
                })
            }
            SchemaNode::Leaf(LeafSchema::Real { stats } | LeafSchema::Int { stats, .. }) => {
                SchemaNode::Leaf(LeafSchema::Int {
                    stats: stats.clone(),
                    distinct: levels as u64,
                    levels: Some((0..levels as i64).collect()),
                })
            }
        }
    }
    let schema = Schema::new(go(&circuit.schema().root, levels.max(1)));
    let config = BuildConfig {
        n_c: 1,
        n_l: 1,
        n_s: 2,
        n_p: 2,
        k_cat: levels.max(1),
    };
    let mut c = spsn_network(&schema, &config).expect("valid config");
    c.set_truncation(k_max);
    c
}
