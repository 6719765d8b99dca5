//! Layer-wise construction of a circuit from a schema.
//!
//! Each object node of the schema gets a block of alternating sum and
//! product layers over its scope items, closed by an input layer. Every
//! collection position in an input layer becomes a set unit whose element
//! density is a further block, built for all set units of that position at
//! once (one independent copy per set unit).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    anchor_items, BlockInfo, CardinalityDist, Circuit, InputLeaf, Item, LeafDist, Levels,
    PathId, Standardize, Unit, UnitId,
};
use crate::error::{Error, Result};
use crate::ingest::{LeafSchema, Schema, SchemaNode, SchemaPath};

/// Gaussian scale floor.
pub const MIN_STD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Number of roots (classes).
    pub n_c: usize,
    /// Sum/product layer pairs per block.
    pub n_l: usize,
    /// Children per sum unit.
    pub n_s: usize,
    /// Children per product unit.
    pub n_p: usize,
    /// Integer positions with at most this many distinct values are
    /// categorical; others get a Gaussian on standardized values.
    pub k_cat: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            n_c: 1,
            n_l: 2,
            n_s: 2,
            n_p: 2,
            k_cat: 100,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.n_c < 1 {
            return bad("n_c must be at least 1");
        }
        if self.n_l < 1 {
            return bad("n_l must be at least 1");
        }
        if self.n_s < 2 {
            return bad("n_s must be at least 2");
        }
        if self.n_p < 2 {
            return bad("n_p must be at least 2");
        }
        Ok(())
    }
}

/// Truncation of the cardinality distribution for a collection whose
/// largest observed size is `max_observed`.
pub fn truncation_for(max_observed: u64) -> usize {
    (2 * max_observed as usize).max(8)
}

/// Balanced contiguous split into at most `n_p` parts; the leftmost parts
/// take the remainder. Scopes smaller than `n_p` split into singletons.
pub fn split<T: Clone>(scope: &[T], n_p: usize) -> Vec<Vec<T>> {
    let parts = n_p.min(scope.len()).max(1);
    let base = scope.len() / parts;
    let extra = scope.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(scope[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Each scope repeated `n_s` times (children of a sum share a scope).
pub fn scope_slayer<T: Clone>(psi: &[Vec<T>], n_s: usize) -> Vec<Vec<T>> {
    psi.iter()
        .flat_map(|s| std::iter::repeat_n(s.clone(), n_s))
        .collect()
}

/// Each scope split into `n_p` disjoint parts (children of a product).
pub fn scope_player<T: Clone>(psi: &[Vec<T>], n_p: usize) -> Vec<Vec<T>> {
    psi.iter().flat_map(|s| split(s, n_p)).collect()
}

fn minimum_length<T>(psi: &[Vec<T>]) -> usize {
    psi.iter().map(Vec::len).min().unwrap_or(0)
}

/// Layers of scopes of one block. Layer 0 is the input multiset; each round
/// repeats then splits. Layering stops after `n_l` rounds or as soon as a
/// layer holds a singleton scope (immediately, if the input already does).
pub fn scope_layers<T: Clone>(
    psi: &[Vec<T>],
    mut n_l: usize,
    n_s: usize,
    n_p: usize,
) -> Vec<Vec<Vec<T>>> {
    let mut layers = vec![psi.to_vec()];
    if psi.is_empty() || minimum_length(psi) <= 1 {
        return layers;
    }
    let mut cur = psi.to_vec();
    loop {
        cur = scope_player(&scope_slayer(&cur, n_s), n_p);
        layers.push(cur.clone());
        if minimum_length(&cur) == 1 || n_l <= 1 {
            break;
        }
        n_l -= 1;
    }
    layers
}

/// Closed-form number of sum units in a block without early stop.
pub fn block_sum_count(copies: usize, n_l: usize, n_s: usize, n_p: usize) -> usize {
    (0..n_l).map(|l| copies * (n_s * n_p).pow(l as u32)).sum()
}

/// Closed-form number of input-layer positions in a block without early stop.
pub fn block_input_count(copies: usize, n_l: usize, n_s: usize, n_p: usize) -> usize {
    copies * (n_s * n_p).pow(n_l as u32)
}

struct Builder<'s> {
    schema: &'s Schema,
    config: BuildConfig,
    units: Vec<Unit>,
    params: Vec<f64>,
    paths: Vec<SchemaPath>,
    path_ids: HashMap<SchemaPath, PathId>,
    blocks: Vec<BlockInfo>,
    pending: Vec<(UnitId, SchemaPath)>,
}

struct BlockCounter {
    n_sum: usize,
    n_prod: usize,
    n_input_positions: usize,
    n_forced: usize,
}

impl<'s> Builder<'s> {
    fn push(&mut self, u: Unit) -> UnitId {
        self.units.push(u);
        self.units.len() - 1
    }

    fn alloc(&mut self, values: &[f64]) -> usize {
        let off = self.params.len();
        self.params.extend_from_slice(values);
        off
    }

    fn path_id(&mut self, p: &SchemaPath) -> PathId {
        if let Some(&id) = self.path_ids.get(p) {
            return id;
        }
        let id = self.paths.len();
        self.paths.push(p.clone());
        self.path_ids.insert(p.clone(), id);
        id
    }

    fn leaf_dist(&mut self, leaf: &LeafSchema) -> LeafDist {
        match leaf {
            LeafSchema::Real { stats } => {
                let offset = self.alloc(&[stats.mean, stats.std_dev().max(MIN_STD).ln()]);
                LeafDist::Gaussian {
                    offset,
                    standardize: None,
                    integer: false,
                }
            }
            LeafSchema::Int { levels: Some(levels), .. } if levels.len() <= self.config.k_cat => {
                let levels = Levels::ints(levels.clone());
                let offset = self.alloc(&vec![0.0; levels.n_logits()]);
                LeafDist::Categorical { offset, levels }
            }
            LeafSchema::Int { stats, .. } => {
                let sd = stats.std_dev();
                let offset = self.alloc(&[0.0, 0.0]);
                LeafDist::Gaussian {
                    offset,
                    standardize: Some(Standardize {
                        mean: stats.mean,
                        scale: if sd > 0.0 { sd } else { 1.0 },
                    }),
                    integer: true,
                }
            }
            LeafSchema::Str { vocabulary, .. } => {
                let levels = Levels::strings(vocabulary.clone());
                let offset = self.alloc(&vec![0.0; levels.n_logits()]);
                LeafDist::Categorical { offset, levels }
            }
        }
    }

    fn set_unit(&mut self, item: &Item<'_>) -> UnitId {
        let SchemaNode::Hom { cardinality, .. } = item.node else {
            unreachable!("set unit on a non-collection item");
        };
        let rate = cardinality.mean.max(0.05);
        let offset = self.alloc(&[rate.ln()]);
        let path = self.path_id(&item.path);
        let id = self.push(Unit::Set {
            path,
            locator: item.locator.clone(),
            cardinality: CardinalityDist {
                offset,
                k_max: truncation_for(cardinality.max),
            },
            feature: UnitId::MAX,
        });
        self.pending.push((id, item.path.clone()));
        id
    }

    /// Unit for one input-layer scope: a (possibly multivariate) input for
    /// the leaves, a set unit per collection, joined by a product when the
    /// scope mixes them.
    fn input_position(&mut self, items: &[Item<'_>], count: &mut BlockCounter) -> UnitId {
        count.n_input_positions += 1;
        let mut parts = Vec::new();
        let leaves: Vec<InputLeaf> = items
            .iter()
            .filter_map(|it| match it.node {
                SchemaNode::Leaf(leaf) => Some((it, leaf)),
                _ => None,
            })
            .map(|(it, leaf)| InputLeaf {
                path: self.path_id(&it.path),
                locator: it.locator.clone(),
                dist: self.leaf_dist(leaf),
            })
            .collect();
        if !leaves.is_empty() {
            parts.push(self.push(Unit::Input { leaves }));
        }
        for it in items.iter().filter(|it| matches!(it.node, SchemaNode::Hom { .. })) {
            parts.push(self.set_unit(it));
        }
        if parts.len() == 1 {
            parts[0]
        } else {
            count.n_forced += 1;
            self.push(Unit::Product { children: parts })
        }
    }

    fn sum_over(&mut self, children: Vec<UnitId>) -> UnitId {
        let offset = self.alloc(&vec![0.0; children.len()]);
        self.push(Unit::Sum { children, offset })
    }

    fn sum_layer(
        &mut self,
        items: &[Item<'_>],
        level: usize,
        depth: usize,
        count: &mut BlockCounter,
    ) -> UnitId {
        count.n_sum += 1;
        let children = (0..self.config.n_s)
            .map(|_| self.product_layer(items, level, depth, count))
            .collect();
        self.sum_over(children)
    }

    fn product_layer(
        &mut self,
        items: &[Item<'_>],
        level: usize,
        depth: usize,
        count: &mut BlockCounter,
    ) -> UnitId {
        count.n_prod += 1;
        let children = split(items, self.config.n_p)
            .iter()
            .map(|part| {
                if level + 1 == depth {
                    self.input_position(part, count)
                } else {
                    self.sum_layer(part, level + 1, depth, count)
                }
            })
            .collect();
        self.push(Unit::Product { children })
    }

    /// Builds `copies` independent sub-networks over the node at `anchor`
    /// and returns their roots.
    fn block(&mut self, anchor: &SchemaPath, node: &'s SchemaNode, copies: usize) -> Vec<UnitId> {
        let items = anchor_items(node, anchor);
        let pending_start = self.pending.len();
        let indices: Vec<usize> = (0..items.len()).collect();
        let layers = scope_layers(&[indices], self.config.n_l, self.config.n_s, self.config.n_p);
        let depth = layers.len() - 1;
        let mut count = BlockCounter {
            n_sum: 0,
            n_prod: 0,
            n_input_positions: 0,
            n_forced: 0,
        };
        let mut roots = Vec::with_capacity(copies);
        for _ in 0..copies {
            let root = if items.is_empty() {
                count.n_prod += 1;
                self.push(Unit::Product { children: vec![] })
            } else if depth == 0 {
                count.n_sum += 1;
                let children = (0..self.config.n_s)
                    .map(|_| self.input_position(&items, &mut count))
                    .collect();
                self.sum_over(children)
            } else {
                self.sum_layer(&items, 0, depth, &mut count)
            };
            roots.push(root);
        }
        self.blocks.push(BlockInfo {
            anchor: anchor.clone(),
            copies,
            scope_len: items.len(),
            depth,
            singleton_stop: depth < self.config.n_l,
            n_sum: count.n_sum,
            n_prod: count.n_prod,
            n_input_positions: count.n_input_positions,
            n_forced: count.n_forced,
        });

        // Attach element densities, one block per collection position.
        let pending: Vec<(UnitId, SchemaPath)> = self.pending.drain(pending_start..).collect();
        let mut groups: Vec<(SchemaPath, Vec<UnitId>)> = Vec::new();
        for (id, path) in pending {
            match groups.iter_mut().find(|(p, _)| *p == path) {
                Some((_, ids)) => ids.push(id),
                None => groups.push((path, vec![id])),
            }
        }
        for (path, set_ids) in groups {
            let Some(SchemaNode::Hom { element, .. }) = self.schema.node(&path) else {
                unreachable!("pending set unit at non-collection path");
            };
            let features = self.block(&path.element(), element, set_ids.len());
            for (set_id, f) in set_ids.into_iter().zip(features) {
                if let Unit::Set { feature, .. } = &mut self.units[set_id] {
                    *feature = f;
                }
            }
        }
        roots
    }

    /// Renumbers units so children precede parents (post-order from roots).
    fn into_topological(self, roots: Vec<UnitId>) -> (Vec<Unit>, Vec<UnitId>) {
        let n = self.units.len();
        let mut new_id = vec![UnitId::MAX; n];
        let mut order = Vec::with_capacity(n);
        for &r in &roots {
            let mut stack = vec![(r, false)];
            while let Some((u, expanded)) = stack.pop() {
                if new_id[u] != UnitId::MAX {
                    continue;
                }
                if expanded {
                    new_id[u] = order.len();
                    order.push(u);
                } else {
                    stack.push((u, true));
                    for &c in self.units[u].children().iter().rev() {
                        if new_id[c] == UnitId::MAX {
                            stack.push((c, false));
                        }
                    }
                }
            }
        }
        let mut units: Vec<Option<Unit>> = self.units.into_iter().map(Some).collect();
        let remap = |ids: &mut Vec<UnitId>| ids.iter_mut().for_each(|c| *c = new_id[*c]);
        let out = order
            .iter()
            .map(|&old| {
                let mut u = units[old].take().expect("unit visited once");
                match &mut u {
                    Unit::Sum { children, .. } | Unit::Product { children } => remap(children),
                    Unit::Set { feature, .. } => *feature = new_id[*feature],
                    Unit::Input { .. } => {}
                }
                u
            })
            .collect();
        (out, roots.iter().map(|&r| new_id[r]).collect())
    }
}

/// Builds the network for `schema`: `n_c` independent root blocks over the
/// full schema, with element blocks attached below every set unit.
pub fn spsn_network(schema: &Schema, config: &BuildConfig) -> Result<Circuit> {
    config.validate()?;
    let mut b = Builder {
        schema,
        config: config.clone(),
        units: Vec::new(),
        params: Vec::new(),
        paths: Vec::new(),
        path_ids: HashMap::new(),
        blocks: Vec::new(),
        pending: Vec::new(),
    };
    let prior_offset = b.alloc(&vec![0.0; config.n_c]);
    let roots = b.block(&SchemaPath::root(), &schema.root, config.n_c);
    let params = std::mem::take(&mut b.params);
    let paths = std::mem::take(&mut b.paths);
    let blocks = std::mem::take(&mut b.blocks);
    let (units, roots) = b.into_topological(roots);
    Ok(Circuit {
        schema: schema.clone(),
        config: config.clone(),
        units,
        roots,
        params,
        prior_offset,
        paths,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::infer_schema;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn balanced_contiguous_split() {
        assert_eq!(split(&chars("abcde"), 2), [chars("abc"), chars("de")]);
        assert_eq!(split(&chars("abcde"), 3), [chars("ab"), chars("cd"), chars("e")]);
        assert_eq!(split(&chars("ab"), 3), [chars("a"), chars("b")]);
    }

    #[test]
    fn repeat_then_split() {
        let layers = scope_layers(&[chars("abcd")], 1, 2, 2);
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[1], [chars("ab"), chars("cd"), chars("ab"), chars("cd")]);
        assert_eq!(scope_layers(&[chars("a")], 3, 2, 2).len(), 1);
        // Singletons after the first round end layering early.
        assert_eq!(scope_layers(&[chars("ab")], 3, 2, 2).len(), 2);
    }

    #[test]
    fn closed_form_block_sizes() {
        assert_eq!(block_sum_count(1, 2, 2, 2), 5);
        assert_eq!(block_input_count(1, 2, 2, 2), 16);
        assert_eq!(block_sum_count(3, 1, 4, 2), 3);
        assert_eq!(block_sum_count(2, 2, 3, 2), 2 * block_sum_count(1, 2, 3, 2));
    }

    #[test]
    fn built_block_matches_closed_form() {
        let schema = infer_schema([r#"{"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}"#]).unwrap();
        let c = spsn_network(&schema, &BuildConfig::default()).unwrap();
        let census = c.count_units();
        assert_eq!(census.n_sum, 5);
        assert_eq!(census.n_input, 16);
        let block = &c.blocks()[0];
        assert!(!block.singleton_stop);
        assert_eq!((block.n_sum, block.n_input_positions), (5, 16));
    }

    #[test]
    fn single_leaf_is_a_sum_over_inputs() {
        let schema = infer_schema([r#"{"a": 1.0}"#]).unwrap();
        for n_s in [2, 5] {
            let config = BuildConfig { n_s, ..Default::default() };
            let c = spsn_network(&schema, &config).unwrap();
            let Unit::Sum { children, .. } = c.unit(c.roots()[0]) else {
                panic!("root is not a sum")
            };
            assert_eq!(children.len(), n_s);
            assert!(children.iter().all(|&k| matches!(c.unit(k), Unit::Input { .. })));
            assert_eq!(c.units().len(), n_s + 1);
        }
    }

    #[test]
    fn classes_repeat_structure_with_own_parameters() {
        let schema = infer_schema([include_str!("../tests/fixtures/molecule.json")]).unwrap();
        let one = spsn_network(&schema, &BuildConfig::default()).unwrap();
        let three = spsn_network(&schema, &BuildConfig { n_c: 3, ..Default::default() }).unwrap();
        assert_eq!(three.roots().len(), 3);
        let a = one.count_units();
        let b = three.count_units();
        assert_eq!(b.n_sum, 3 * a.n_sum);
        assert_eq!(b.n_set, 3 * a.n_set);
        assert_eq!(b.n_input, 3 * a.n_input);
        assert_eq!(b.n_params - 3, 3 * (a.n_params - 1));
        let mut offsets: Vec<usize> = three
            .units()
            .iter()
            .filter_map(|u| match u {
                Unit::Sum { offset, .. } => Some(*offset),
                _ => None,
            })
            .collect();
        let n = offsets.len();
        offsets.dedup();
        assert_eq!(offsets.len(), n);
    }

    #[test]
    fn molecule_is_covered_and_valid() {
        let schema = infer_schema([include_str!("../tests/fixtures/molecule.json")]).unwrap();
        let config = BuildConfig { n_l: 1, ..Default::default() };
        let c = spsn_network(&schema, &config).unwrap();
        assert!(c.validate_structure().is_ok());
        let mut modeled: Vec<&SchemaPath> = c
            .units()
            .iter()
            .flat_map(|u| match u {
                Unit::Set { path, .. } => vec![c.path(*path)],
                Unit::Input { leaves } => leaves.iter().map(|l| c.path(l.path)).collect(),
                _ => vec![],
            })
            .collect();
        modeled.sort();
        modeled.dedup();
        let mut expected: Vec<SchemaPath> = schema.leaf_paths();
        expected.extend(schema.collection_paths());
        expected.sort();
        assert_eq!(modeled, expected.iter().collect::<Vec<_>>());
    }

    #[test]
    fn construction_is_deterministic() {
        let schema = infer_schema([include_str!("../tests/fixtures/molecule.json")]).unwrap();
        let config = BuildConfig { n_c: 2, n_s: 3, ..Default::default() };
        let a = spsn_network(&schema, &config).unwrap();
        let b = spsn_network(&schema, &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn config_ranges() {
        for bad in [
            BuildConfig { n_c: 0, ..Default::default() },
            BuildConfig { n_l: 0, ..Default::default() },
            BuildConfig { n_s: 1, ..Default::default() },
            BuildConfig { n_p: 1, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!(truncation_for(3), 8);
        assert_eq!(truncation_for(7), 14);
    }
}
