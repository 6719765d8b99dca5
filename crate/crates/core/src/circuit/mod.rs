//! The computational graph: sum, product, set and input units over a
//! schema, with scope bookkeeping and the structural-constraint check.

mod dist;
mod io;
mod scope;

use serde::{Deserialize, Serialize};

use crate::builder::BuildConfig;
use crate::ingest::{Schema, SchemaNode, SchemaPath};
use crate::logspace::log_softmax;

pub use dist::{gaussian_log_pdf, CardinalityDist, LeafDist, Levels, Standardize};
pub use io::MODEL_VERSION;
pub use scope::{Scope, StructureReport, Violation, ViolationKind};

pub type UnitId = usize;

/// Index into the circuit's table of schema paths.
pub type PathId = usize;

/// Where a unit finds its data: a chain of field indices starting at the
/// node its block models. Nested objects are walked through; an empty chain
/// addresses the block's node itself (blocks over non-object elements).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Locator(pub Vec<usize>);

impl Locator {
    pub fn anchor() -> Self {
        Locator(Vec::new())
    }
}

/// A scope item of a block: a leaf or collection position reachable from
/// the block's node through objects only.
#[derive(Debug, Clone)]
pub struct Item<'s> {
    pub path: SchemaPath,
    pub locator: Locator,
    pub node: &'s SchemaNode,
}

/// Scope items of the node at `anchor`, in field order.
pub fn anchor_items<'s>(node: &'s SchemaNode, anchor: &SchemaPath) -> Vec<Item<'s>> {
    fn go<'s>(node: &'s SchemaNode, path: SchemaPath, loc: Vec<usize>, out: &mut Vec<Item<'s>>) {
        match node {
            SchemaNode::Het { fields } => {
                for (i, f) in fields.iter().enumerate() {
                    let mut l = loc.clone();
                    l.push(i);
                    go(&f.schema, path.field(&f.name), l, out);
                }
            }
            _ => out.push(Item {
                path,
                locator: Locator(loc),
                node,
            }),
        }
    }
    let mut out = Vec::new();
    go(node, anchor.clone(), Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct InputLeaf {
    pub path: PathId,
    pub locator: Locator,
    pub dist: LeafDist,
}

#[derive(Debug, Clone)]
pub enum Unit {
    /// Mixture; weights are the softmax of `children.len()` logits at
    /// `offset`.
    Sum { children: Vec<UnitId>, offset: usize },
    Product { children: Vec<UnitId> },
    /// Density of a finite set: cardinality times i.i.d. elements drawn from
    /// the `feature` sub-network.
    Set {
        path: PathId,
        locator: Locator,
        cardinality: CardinalityDist,
        feature: UnitId,
    },
    /// Fully factorized density over one or more leaf positions.
    Input { leaves: Vec<InputLeaf> },
}

impl Unit {
    pub fn children(&self) -> &[UnitId] {
        match self {
            Unit::Sum { children, .. } | Unit::Product { children } => children,
            Unit::Set { feature, .. } => std::slice::from_ref(feature),
            Unit::Input { .. } => &[],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Unit::Sum { .. } => "sum",
            Unit::Product { .. } => "product",
            Unit::Set { .. } => "set",
            Unit::Input { .. } => "input",
        }
    }
}

/// Role of each entry of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PriorLogit,
    SumLogit,
    GaussMean,
    GaussLogStd,
    CatLogit,
    LogRate,
}

/// Construction record of one block, used to check unit counts against the
/// closed-form block sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    /// Schema node the block models.
    pub anchor: SchemaPath,
    /// Number of independent copies built (the size of the scope multiset).
    pub copies: usize,
    /// Number of scope items of the anchor node.
    pub scope_len: usize,
    /// Sum/product rounds actually built.
    pub depth: usize,
    /// True if a singleton scope ended layering before the configured depth.
    pub singleton_stop: bool,
    pub n_sum: usize,
    pub n_prod: usize,
    pub n_input_positions: usize,
    /// Products inserted at the input layer to isolate collections.
    pub n_forced: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UnitCensus {
    pub n_sum: usize,
    pub n_prod: usize,
    pub n_set: usize,
    pub n_input: usize,
    pub n_params: usize,
}

#[derive(Debug, Clone)]
pub struct Circuit {
    pub(crate) schema: Schema,
    pub(crate) config: BuildConfig,
    pub(crate) units: Vec<Unit>,
    pub(crate) roots: Vec<UnitId>,
    pub(crate) params: Vec<f64>,
    pub(crate) prior_offset: usize,
    pub(crate) paths: Vec<SchemaPath>,
    pub(crate) blocks: Vec<BlockInfo>,
}

impl Circuit {
    /// Assembles a circuit from explicit parts. Units must be stored
    /// children first; class log-priors occupy `roots.len()` parameters at
    /// `prior_offset`.
    pub fn from_parts(
        schema: Schema,
        units: Vec<Unit>,
        roots: Vec<UnitId>,
        params: Vec<f64>,
        prior_offset: usize,
        paths: Vec<SchemaPath>,
    ) -> crate::error::Result<Self> {
        let c = Circuit {
            schema,
            config: BuildConfig {
                n_c: roots.len(),
                ..BuildConfig::default()
            },
            units,
            roots,
            params,
            prior_offset,
            paths,
            blocks: Vec::new(),
        };
        c.check_references()?;
        Ok(c)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn config(&self) -> &BuildConfig {
        &self.config
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, id: UnitId) -> &Unit {
        &self.units[id]
    }

    pub fn roots(&self) -> &[UnitId] {
        &self.roots
    }

    pub fn n_classes(&self) -> usize {
        self.roots.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len(), "parameter length mismatch");
        self.params = params;
    }

    pub fn path(&self, id: PathId) -> &SchemaPath {
        &self.paths[id]
    }

    pub fn paths(&self) -> &[SchemaPath] {
        &self.paths
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn prior_offset(&self) -> usize {
        self.prior_offset
    }

    /// Normalized class log-priors, one per root.
    pub fn class_log_priors(&self) -> Vec<f64> {
        log_softmax(&self.params[self.prior_offset..self.prior_offset + self.roots.len()])
    }

    /// Normalized log-weights of a sum unit.
    pub fn sum_log_weights(&self, id: UnitId) -> Option<Vec<f64>> {
        match &self.units[id] {
            Unit::Sum { children, offset } => {
                Some(log_softmax(&self.params[*offset..offset + children.len()]))
            }
            _ => None,
        }
    }

    /// Sets the truncation point of every cardinality distribution.
    pub fn set_truncation(&mut self, k_max: usize) {
        for u in &mut self.units {
            if let Unit::Set { cardinality, .. } = u {
                cardinality.k_max = k_max;
            }
        }
    }

    pub fn max_truncation(&self) -> usize {
        self.units
            .iter()
            .filter_map(|u| match u {
                Unit::Set { cardinality, .. } => Some(cardinality.k_max),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let mut kinds = vec![ParamKind::SumLogit; self.params.len()];
        for k in &mut kinds[self.prior_offset..self.prior_offset + self.roots.len()] {
            *k = ParamKind::PriorLogit;
        }
        for u in &self.units {
            match u {
                Unit::Set { cardinality, .. } => kinds[cardinality.offset] = ParamKind::LogRate,
                Unit::Input { leaves } => {
                    for leaf in leaves {
                        match &leaf.dist {
                            LeafDist::Gaussian { offset, .. } => {
                                kinds[*offset] = ParamKind::GaussMean;
                                kinds[offset + 1] = ParamKind::GaussLogStd;
                            }
                            LeafDist::Categorical { offset, levels } => {
                                for k in &mut kinds[*offset..offset + levels.n_logits()] {
                                    *k = ParamKind::CatLogit;
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        kinds
    }

    /// Exact census of the unit arena.
    pub fn count_units(&self) -> UnitCensus {
        let mut c = UnitCensus {
            n_params: self.params.len(),
            ..Default::default()
        };
        for u in &self.units {
            match u {
                Unit::Sum { .. } => c.n_sum += 1,
                Unit::Product { .. } => c.n_prod += 1,
                Unit::Set { .. } => c.n_set += 1,
                Unit::Input { .. } => c.n_input += 1,
            }
        }
        c
    }

    /// True if every input is categorical, so the density is over a
    /// countable space.
    pub fn is_discrete(&self) -> bool {
        self.units.iter().all(|u| match u {
            Unit::Input { leaves } => leaves
                .iter()
                .all(|l| matches!(l.dist, LeafDist::Categorical { .. })),
            _ => true,
        })
    }
}
