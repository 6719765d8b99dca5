//! Document ingestion: JSON parsing, schema inference and validation.

mod infer;
mod mask;
mod parse;
mod schema;
mod tree;

pub use infer::{infer_schema, infer_schema_from_values, MAX_INT_LEVELS};
pub use mask::{mask_missing, mask_with};
pub use parse::{parse_document, parse_value};
pub use schema::{
    CardinalityStats, LeafKind, LeafSchema, NumericStats, PathStep, Schema, SchemaField,
    SchemaNode, SchemaPath, SCHEMA_VERSION,
};
pub use tree::{DataNode, DataTree, LeafValue};

#[cfg(test)]
mod tests;
