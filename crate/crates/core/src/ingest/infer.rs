use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde_json::Value;

use super::schema::{
    CardinalityStats, LeafSchema, NumericStats, Schema, SchemaField, SchemaNode, SchemaPath,
};
use crate::error::{Error, Result};

/// Integer positions keep their sorted distinct values up to this many.
pub const MAX_INT_LEVELS: usize = 1024;

#[derive(Default)]
struct LeafAcc {
    reals: Vec<f64>,
    ints: Vec<i64>,
    strings: Vec<String>,
    seen: HashSet<String>,
    n_str: u64,
}

enum Acc {
    /// Only nulls or nothing observed so far.
    Unknown,
    Het(BTreeMap<String, Acc>),
    Hom { element: Box<Acc>, lengths: Vec<u64> },
    Leaf(LeafAcc),
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn acc_kind(a: &Acc) -> &'static str {
    match a {
        Acc::Unknown => "unknown",
        Acc::Het(_) => "object",
        Acc::Hom { .. } => "array",
        Acc::Leaf(l) if l.n_str > 0 => "string",
        Acc::Leaf(_) => "number",
    }
}

impl Acc {
    fn absorb(&mut self, v: &Value, path: &SchemaPath) -> Result<()> {
        if v.is_null() {
            return Ok(());
        }
        if matches!(self, Acc::Unknown) {
            *self = match v {
                Value::Object(_) => Acc::Het(BTreeMap::new()),
                Value::Array(_) => Acc::Hom {
                    element: Box::new(Acc::Unknown),
                    lengths: Vec::new(),
                },
                _ => Acc::Leaf(LeafAcc::default()),
            };
        }
        let conflict = |a: &Acc| Error::ConflictingTypes {
            path: path.to_string(),
            detail: format!("{} vs. {}", acc_kind(a), kind_of(v)),
        };
        match (&mut *self, v) {
            (Acc::Het(fields), Value::Object(map)) => {
                for (k, child) in map {
                    fields
                        .entry(k.clone())
                        .or_insert(Acc::Unknown)
                        .absorb(child, &path.field(k))?;
                }
                Ok(())
            }
            (Acc::Hom { element, lengths }, Value::Array(items)) => {
                lengths.push(items.len() as u64);
                let p = path.element();
                items.iter().try_for_each(|item| element.absorb(item, &p))
            }
            (Acc::Leaf(leaf), Value::String(s)) => {
                if !leaf.reals.is_empty() || !leaf.ints.is_empty() {
                    return Err(Error::ConflictingTypes {
                        path: path.to_string(),
                        detail: "number vs. string".into(),
                    });
                }
                leaf.n_str += 1;
                if leaf.seen.insert(s.clone()) {
                    leaf.strings.push(s.clone());
                }
                Ok(())
            }
            (Acc::Leaf(leaf), Value::Number(_) | Value::Bool(_)) => {
                if leaf.n_str > 0 {
                    return Err(Error::ConflictingTypes {
                        path: path.to_string(),
                        detail: "string vs. number".into(),
                    });
                }
                match v {
                    Value::Bool(b) => leaf.ints.push(i64::from(*b)),
                    Value::Number(n) => match n.as_i64() {
                        Some(i) => leaf.ints.push(i),
                        None => leaf.reals.push(n.as_f64().unwrap_or(f64::NAN)),
                    },
                    _ => unreachable!(),
                }
                Ok(())
            }
            (acc, _) => Err(conflict(acc)),
        }
    }

    fn finish(self, path: &SchemaPath) -> Result<SchemaNode> {
        match self {
            Acc::Unknown => Err(Error::ConflictingTypes {
                path: path.to_string(),
                detail: "no concrete value observed (only nulls or empty arrays)".into(),
            }),
            Acc::Het(fields) => {
                // BTreeMap order: fields sorted by name, independent of corpus order.
                let fields = fields
                    .into_iter()
                    .map(|(name, acc)| {
                        let schema = acc.finish(&path.field(&name))?;
                        Ok(SchemaField { name, schema })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SchemaNode::Het { fields })
            }
            Acc::Hom { element, lengths } => {
                let element = element.finish(&path.element())?;
                let instances = lengths.len() as u64;
                let total: u64 = lengths.iter().sum();
                let cardinality = CardinalityStats {
                    instances,
                    min: lengths.iter().copied().min().unwrap_or(0),
                    max: lengths.iter().copied().max().unwrap_or(0),
                    mean: if instances == 0 {
                        0.0
                    } else {
                        total as f64 / instances as f64
                    },
                };
                Ok(SchemaNode::Hom {
                    element: Box::new(element),
                    cardinality,
                })
            }
            Acc::Leaf(leaf) => Ok(SchemaNode::Leaf(leaf.finish())),
        }
    }
}

impl LeafAcc {
    fn finish(self) -> LeafSchema {
        if self.n_str > 0 {
            return LeafSchema::Str {
                count: self.n_str,
                vocabulary: self.strings,
            };
        }
        if self.reals.is_empty() {
            let mut values: Vec<f64> = self.ints.iter().map(|&i| i as f64).collect();
            let stats = numeric_stats(&mut values);
            let distinct: BTreeSet<i64> = self.ints.iter().copied().collect();
            let levels = (distinct.len() <= MAX_INT_LEVELS).then(|| distinct.iter().copied().collect());
            LeafSchema::Int {
                stats,
                distinct: distinct.len() as u64,
                levels,
            }
        } else {
            // Int promoted to Real when both occur at one position.
            let mut values = self.reals;
            values.extend(self.ints.iter().map(|&i| i as f64));
            LeafSchema::Real {
                stats: numeric_stats(&mut values),
            }
        }
    }
}

/// Mean and population variance, summed in sorted order so the result does
/// not depend on document order.
fn numeric_stats(values: &mut [f64]) -> NumericStats {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return NumericStats {
            count: 0,
            mean: 0.0,
            variance: 0.0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_unstable_by(f64::total_cmp);
    let variance = sq.iter().sum::<f64>() / n as f64;
    NumericStats {
        count: n as u64,
        mean,
        variance,
    }
}

/// Infers the least schema that every document of the corpus validates
/// against.
pub fn infer_schema<I, S>(corpus: I) -> Result<Schema>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut values = Vec::new();
    for doc in corpus {
        values.push(serde_json::from_str::<Value>(doc.as_ref())?);
    }
    infer_schema_from_values(&values)
}

pub fn infer_schema_from_values(values: &[Value]) -> Result<Schema> {
    if values.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let root = SchemaPath::root();
    let mut acc = Acc::Unknown;
    for v in values {
        acc.absorb(v, &root)?;
    }
    Ok(Schema::new(acc.finish(&root)?))
}
