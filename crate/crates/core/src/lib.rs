//! Sum-product-set networks: tractable densities over tree-structured,
//! heterogeneous documents with variable-size collections.

pub mod builder;
pub mod circuit;
pub mod error;
pub mod inference;
pub mod ingest;
pub mod learn;
pub mod logspace;
pub mod oracle;
pub mod rng;
pub mod sample;

pub use builder::{spsn_network, BuildConfig};
pub use circuit::{Circuit, Scope, StructureReport, Unit, UnitCensus, UnitId};
pub use error::{Error, Result};
pub use inference::{classify, log_density, marginal_log_density, Classification};
pub use ingest::{
    infer_schema, mask_missing, parse_document, DataNode, DataTree, LeafValue, Schema,
    SchemaNode, SchemaPath,
};
pub use logspace::LogValue;
