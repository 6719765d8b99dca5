use serde_json::Value;

use super::schema::{LeafSchema, Schema, SchemaNode, SchemaPath};
use super::tree::{DataNode, DataTree, LeafValue};
use crate::error::{Error, Result};

/// Parses one JSON document into a tree that conforms to `schema`.
///
/// Nulls and absent object fields become missing values. Strings outside a
/// vocabulary are kept as-is; they score as out-of-vocabulary.
pub fn parse_document(text: &str, schema: &Schema) -> Result<DataTree> {
    let value: Value = serde_json::from_str(text)?;
    parse_value(&value, schema)
}

pub fn parse_value(value: &Value, schema: &Schema) -> Result<DataTree> {
    Ok(DataTree::new(convert(value, &schema.root, &SchemaPath::root())?))
}

fn found(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(_) => "bool".into(),
        Value::Number(n) if n.is_i64() || n.is_u64() => "int".into(),
        Value::Number(_) => "real".into(),
        Value::String(_) => "string".into(),
        Value::Array(_) => "array".into(),
        Value::Object(_) => "object".into(),
    }
}

fn convert(v: &Value, schema: &SchemaNode, path: &SchemaPath) -> Result<DataNode> {
    if v.is_null() {
        return Ok(DataNode::MISSING);
    }
    match (schema, v) {
        (SchemaNode::Het { fields }, Value::Object(map)) => {
            if let Some(extra) = map.keys().find(|k| !fields.iter().any(|f| &f.name == *k)) {
                return Err(Error::violation(
                    path.field(extra).to_string(),
                    "no such field",
                    found(&map[extra]),
                ));
            }
            let children = fields
                .iter()
                .map(|f| {
                    let child = match map.get(&f.name) {
                        Some(c) => convert(c, &f.schema, &path.field(&f.name))?,
                        None => DataNode::MISSING,
                    };
                    Ok((f.name.clone(), child))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DataNode::Het(children))
        }
        (SchemaNode::Hom { element, .. }, Value::Array(items)) => {
            let p = path.element();
            let elems = items
                .iter()
                .map(|item| convert(item, element, &p))
                .collect::<Result<Vec<_>>>()?;
            Ok(DataNode::Hom(elems))
        }
        (SchemaNode::Leaf(leaf), _) => convert_leaf(v, leaf, path).map(DataNode::Leaf),
        _ => Err(Error::violation(path.to_string(), schema.describe(), found(v))),
    }
}

fn convert_leaf(v: &Value, leaf: &LeafSchema, path: &SchemaPath) -> Result<LeafValue> {
    let mismatch = || Error::violation(path.to_string(), leaf.kind().to_string(), found(v));
    match (leaf, v) {
        (LeafSchema::Real { .. }, Value::Number(n)) => {
            n.as_f64().map(LeafValue::Real).ok_or_else(mismatch)
        }
        (LeafSchema::Int { .. }, Value::Number(n)) => {
            n.as_i64().map(LeafValue::Int).ok_or_else(mismatch)
        }
        (LeafSchema::Int { .. }, Value::Bool(b)) => Ok(LeafValue::Int(i64::from(*b))),
        (LeafSchema::Str { .. }, Value::String(s)) => Ok(LeafValue::Str(s.clone())),
        _ => Err(mismatch()),
    }
}
