use serde_json::{Map, Number, Value};

use super::schema::{LeafSchema, Schema, SchemaNode, SchemaPath};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LeafValue {
    Real(f64),
    Int(i64),
    Str(String),
    Missing,
}

/// One node of a parsed document.
///
/// `Leaf(Missing)` doubles as the marker for a whole object or array that is
/// absent from the document.
#[derive(Debug, Clone, PartialEq)]
pub enum DataNode {
    Het(Vec<(String, DataNode)>),
    Hom(Vec<DataNode>),
    Leaf(LeafValue),
}

impl DataNode {
    pub const MISSING: DataNode = DataNode::Leaf(LeafValue::Missing);

    pub fn is_missing(&self) -> bool {
        matches!(self, DataNode::Leaf(LeafValue::Missing))
    }

    /// True if any leaf or subtree below (or at) this node is missing.
    pub fn contains_missing(&self) -> bool {
        match self {
            DataNode::Het(fields) => fields.iter().any(|(_, c)| c.contains_missing()),
            DataNode::Hom(elems) => elems.iter().any(DataNode::contains_missing),
            DataNode::Leaf(v) => matches!(v, LeafValue::Missing),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            DataNode::Het(fields) => fields.iter().map(|(_, c)| c.leaf_count()).sum(),
            DataNode::Hom(elems) => elems.iter().map(DataNode::leaf_count).sum(),
            DataNode::Leaf(_) => 1,
        }
    }

    fn to_value(&self) -> Value {
        match self {
            DataNode::Het(fields) => {
                let mut map = Map::new();
                for (name, child) in fields {
                    map.insert(name.clone(), child.to_value());
                }
                Value::Object(map)
            }
            DataNode::Hom(elems) => Value::Array(elems.iter().map(DataNode::to_value).collect()),
            DataNode::Leaf(LeafValue::Real(x)) => {
                Number::from_f64(*x).map_or(Value::Null, Value::Number)
            }
            DataNode::Leaf(LeafValue::Int(i)) => Value::Number((*i).into()),
            DataNode::Leaf(LeafValue::Str(s)) => Value::String(s.clone()),
            DataNode::Leaf(LeafValue::Missing) => Value::Null,
        }
    }
}

/// A parsed document instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTree {
    pub root: DataNode,
}

impl DataTree {
    pub fn new(root: DataNode) -> Self {
        DataTree { root }
    }

    /// JSON text that [`super::parse_document`] maps back to this tree.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.root.to_value()).expect("tree serializes")
    }

    pub fn contains_missing(&self) -> bool {
        self.root.contains_missing()
    }

    /// Path of the first missing node, if any.
    pub fn first_missing(&self) -> Option<String> {
        fn go(n: &DataNode, path: SchemaPath) -> Option<SchemaPath> {
            match n {
                DataNode::Het(fields) => fields
                    .iter()
                    .find_map(|(name, c)| go(c, path.field(name))),
                DataNode::Hom(elems) => elems.iter().find_map(|c| go(c, path.element())),
                DataNode::Leaf(LeafValue::Missing) => Some(path),
                DataNode::Leaf(_) => None,
            }
        }
        go(&self.root, SchemaPath::root()).map(|p| p.to_string())
    }

    /// Checks that the tree conforms to `schema`. Missing is accepted at any
    /// position.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        validate_node(&self.root, &schema.root, &SchemaPath::root())
    }
}

fn describe(n: &DataNode) -> &'static str {
    match n {
        DataNode::Het(_) => "object",
        DataNode::Hom(_) => "array",
        DataNode::Leaf(LeafValue::Real(_)) => "real",
        DataNode::Leaf(LeafValue::Int(_)) => "int",
        DataNode::Leaf(LeafValue::Str(_)) => "string",
        DataNode::Leaf(LeafValue::Missing) => "missing",
    }
}

pub(crate) fn validate_node(node: &DataNode, schema: &SchemaNode, path: &SchemaPath) -> Result<()> {
    if node.is_missing() {
        return Ok(());
    }
    match (schema, node) {
        (SchemaNode::Het { fields: sf }, DataNode::Het(df)) => {
            if sf.len() != df.len() {
                return Err(Error::violation(
                    path.to_string(),
                    format!("{} fields", sf.len()),
                    format!("{} fields", df.len()),
                ));
            }
            for (s, (name, child)) in sf.iter().zip(df) {
                if &s.name != name {
                    return Err(Error::violation(
                        path.field(&s.name).to_string(),
                        format!("field `{}`", s.name),
                        format!("field `{name}`"),
                    ));
                }
                validate_node(child, &s.schema, &path.field(name))?;
            }
            Ok(())
        }
        (SchemaNode::Hom { element, .. }, DataNode::Hom(elems)) => {
            let p = path.element();
            elems.iter().try_for_each(|e| validate_node(e, element, &p))
        }
        (SchemaNode::Leaf(leaf), DataNode::Leaf(v)) => match (leaf, v) {
            (LeafSchema::Real { .. }, LeafValue::Real(x)) if x.is_finite() => Ok(()),
            (LeafSchema::Int { .. }, LeafValue::Int(_)) => Ok(()),
            (LeafSchema::Str { .. }, LeafValue::Str(_)) => Ok(()),
            _ => Err(Error::violation(
                path.to_string(),
                leaf.kind().to_string(),
                describe(node),
            )),
        },
        _ => Err(Error::violation(
            path.to_string(),
            schema.describe(),
            describe(node),
        )),
    }
}
