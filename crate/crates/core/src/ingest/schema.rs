use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One step from a schema node to a child.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStep {
    Field(String),
    Element,
}

/// Address of a node in a [`Schema`], starting from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaPath(pub Vec<PathStep>);

impl SchemaPath {
    pub fn root() -> Self {
        SchemaPath(Vec::new())
    }

    pub fn field(&self, name: &str) -> Self {
        let mut steps = self.0.clone();
        steps.push(PathStep::Field(name.to_owned()));
        SchemaPath(steps)
    }

    pub fn element(&self) -> Self {
        let mut steps = self.0.clone();
        steps.push(PathStep::Element);
        SchemaPath(steps)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// True if the path passes through a homogeneous node.
    pub fn under_collection(&self) -> bool {
        self.0.iter().any(|s| matches!(s, PathStep::Element))
    }
}

impl fmt::Display for SchemaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("$");
        }
        let mut first = true;
        for step in &self.0 {
            match step {
                PathStep::Field(name) => {
                    if !first {
                        f.write_str(".")?;
                    }
                    f.write_str(name)?;
                }
                PathStep::Element => f.write_str("[]")?,
            }
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
}

impl NumericStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardinalityStats {
    pub instances: u64,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Real,
    Int,
    Str,
}

impl fmt::Display for LeafKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeafKind::Real => "real",
            LeafKind::Int => "int",
            LeafKind::Str => "string",
        })
    }
}

/// Type descriptor of a leaf position with its corpus statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LeafSchema {
    Real {
        stats: NumericStats,
    },
    Int {
        stats: NumericStats,
        distinct: u64,
        /// Sorted distinct values, kept while their number stays small.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<i64>>,
    },
    Str {
        count: u64,
        /// Distinct strings in first-seen order.
        vocabulary: Vec<String>,
    },
}

impl LeafSchema {
    pub fn kind(&self) -> LeafKind {
        match self {
            LeafSchema::Real { .. } => LeafKind::Real,
            LeafSchema::Int { .. } => LeafKind::Int,
            LeafSchema::Str { .. } => LeafKind::Str,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaField {
    pub name: String,
    pub schema: SchemaNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemaNode {
    /// Fixed, ordered fields (a JSON object).
    Het { fields: Vec<SchemaField> },
    /// A variable-size collection sharing one element schema (a JSON array).
    Hom {
        element: Box<SchemaNode>,
        cardinality: CardinalityStats,
    },
    Leaf(LeafSchema),
}

impl SchemaNode {
    pub fn describe(&self) -> String {
        match self {
            SchemaNode::Het { .. } => "object".into(),
            SchemaNode::Hom { .. } => "array".into(),
            SchemaNode::Leaf(l) => l.kind().to_string(),
        }
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        match self {
            SchemaNode::Het { fields } => fields.iter().position(|f| f.name == name),
            _ => None,
        }
    }
}

/// Per-corpus type skeleton: every child of an object, one representative
/// child of each array.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub root: SchemaNode,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    version: u32,
    root: SchemaNode,
}

#[derive(Serialize)]
struct SchemaFileRef<'a> {
    version: u32,
    root: &'a SchemaNode,
}

impl Serialize for Schema {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SchemaFileRef {
            version: SCHEMA_VERSION,
            root: &self.root,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = SchemaFile::deserialize(d)?;
        if file.version != SCHEMA_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported schema version {}",
                file.version
            )));
        }
        Ok(Schema { root: file.root })
    }
}

impl Schema {
    pub fn new(root: SchemaNode) -> Self {
        Schema { root }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn node(&self, path: &SchemaPath) -> Option<&SchemaNode> {
        let mut node = &self.root;
        for step in &path.0 {
            node = match (step, node) {
                (PathStep::Field(name), SchemaNode::Het { fields }) => {
                    &fields.iter().find(|f| &f.name == name)?.schema
                }
                (PathStep::Element, SchemaNode::Hom { element, .. }) => element,
                _ => return None,
            };
        }
        Some(node)
    }

    pub fn node_mut(&mut self, path: &SchemaPath) -> Option<&mut SchemaNode> {
        let mut node = &mut self.root;
        for step in &path.0 {
            node = match (step, node) {
                (PathStep::Field(name), SchemaNode::Het { fields }) => {
                    &mut fields.iter_mut().find(|f| &f.name == name)?.schema
                }
                (PathStep::Element, SchemaNode::Hom { element, .. }) => element,
                _ => return None,
            };
        }
        Some(node)
    }

    /// All leaf paths, depth-first in field order.
    pub fn leaf_paths(&self) -> Vec<SchemaPath> {
        let mut out = Vec::new();
        walk(&self.root, SchemaPath::root(), &mut |p, n| {
            if matches!(n, SchemaNode::Leaf(_)) {
                out.push(p.clone());
            }
        });
        out
    }

    /// All homogeneous-node paths, depth-first in field order.
    pub fn collection_paths(&self) -> Vec<SchemaPath> {
        let mut out = Vec::new();
        walk(&self.root, SchemaPath::root(), &mut |p, n| {
            if matches!(n, SchemaNode::Hom { .. }) {
                out.push(p.clone());
            }
        });
        out
    }

    pub fn check_invariants(&self) -> Result<()> {
        let mut err = None;
        walk(&self.root, SchemaPath::root(), &mut |p, n| match n {
            SchemaNode::Hom { cardinality, .. } if cardinality.min > cardinality.max => {
                err.get_or_insert_with(|| {
                    Error::InvalidModel(format!("cardinality min > max at `{p}`"))
                });
            }
            SchemaNode::Leaf(LeafSchema::Str { vocabulary, .. }) => {
                let mut seen = std::collections::HashSet::new();
                if !vocabulary.iter().all(|v| seen.insert(v)) {
                    err.get_or_insert_with(|| {
                        Error::InvalidModel(format!("duplicate vocabulary entry at `{p}`"))
                    });
                }
            }
            _ => {}
        });
        err.map_or(Ok(()), Err)
    }
}

pub(crate) fn walk(
    node: &SchemaNode,
    path: SchemaPath,
    visit: &mut impl FnMut(&SchemaPath, &SchemaNode),
) {
    visit(&path, node);
    match node {
        SchemaNode::Het { fields } => {
            for f in fields {
                walk(&f.schema, path.field(&f.name), visit);
            }
        }
        SchemaNode::Hom { element, .. } => walk(element, path.element(), visit),
        SchemaNode::Leaf(_) => {}
    }
}
