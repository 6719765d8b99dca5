//! Model file: JSON with the embedded schema, a topologically ordered unit
//! table and the parameters as a base64 blob of little-endian f64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{
    BlockInfo, CardinalityDist, Circuit, InputLeaf, LeafDist, Levels, Locator, PathId,
    Standardize, Unit, UnitId,
};
use crate::builder::BuildConfig;
use crate::error::{Error, Result};
use crate::ingest::{Schema, SchemaPath};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum UnitRecord {
    Sum {
        children: Vec<UnitId>,
        offset: usize,
    },
    Product {
        children: Vec<UnitId>,
    },
    Set {
        path: PathId,
        locator: Locator,
        offset: usize,
        k_max: usize,
        feature: UnitId,
    },
    Input {
        leaves: Vec<LeafRecord>,
    },
}

#[derive(Serialize, Deserialize)]
struct LeafRecord {
    path: PathId,
    locator: Locator,
    dist: DistRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum DistRecord {
    Gaussian {
        offset: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        standardize: Option<Standardize>,
        integer: bool,
    },
    Categorical {
        offset: usize,
        levels: LevelsRecord,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LevelsRecord {
    Str(Vec<String>),
    Int(Vec<i64>),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    schema: Schema,
    config: BuildConfig,
    roots: Vec<UnitId>,
    prior_offset: usize,
    paths: Vec<SchemaPath>,
    blocks: Vec<BlockInfo>,
    units: Vec<UnitRecord>,
    n_params: usize,
    params: String,
}

fn encode_params(params: &[f64]) -> String {
    let bytes: Vec<u8> = params.iter().flat_map(|p| p.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_params(blob: &str, n: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(blob)
        .map_err(|e| Error::InvalidModel(format!("parameter blob: {e}")))?;
    if bytes.len() != n * 8 {
        return Err(Error::InvalidModel(format!(
            "parameter blob holds {} bytes, expected {}",
            bytes.len(),
            n * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl From<&Unit> for UnitRecord {
    fn from(u: &Unit) -> Self {
        match u {
            Unit::Sum { children, offset } => UnitRecord::Sum {
                children: children.clone(),
                offset: *offset,
            },
            Unit::Product { children } => UnitRecord::Product {
                children: children.clone(),
            },
            Unit::Set {
                path,
                locator,
                cardinality,
                feature,
            } => UnitRecord::Set {
                path: *path,
                locator: locator.clone(),
                offset: cardinality.offset,
                k_max: cardinality.k_max,
                feature: *feature,
            },
            Unit::Input { leaves } => UnitRecord::Input {
                leaves: leaves
                    .iter()
                    .map(|l| LeafRecord {
                        path: l.path,
                        locator: l.locator.clone(),
                        dist: match &l.dist {
                            LeafDist::Gaussian {
                                offset,
                                standardize,
                                integer,
                            } => DistRecord::Gaussian {
                                offset: *offset,
                                standardize: *standardize,
                                integer: *integer,
                            },
                            LeafDist::Categorical { offset, levels } => DistRecord::Categorical {
                                offset: *offset,
                                levels: match levels {
                                    Levels::Str { values, .. } => LevelsRecord::Str(values.clone()),
                                    Levels::Int(v) => LevelsRecord::Int(v.clone()),
                                },
                            },
                        },
                    })
                    .collect(),
            },
        }
    }
}

impl From<UnitRecord> for Unit {
    fn from(r: UnitRecord) -> Self {
        match r {
            UnitRecord::Sum { children, offset } => Unit::Sum { children, offset },
            UnitRecord::Product { children } => Unit::Product { children },
            UnitRecord::Set {
                path,
                locator,
                offset,
                k_max,
                feature,
            } => Unit::Set {
                path,
                locator,
                cardinality: CardinalityDist { offset, k_max },
                feature,
            },
            UnitRecord::Input { leaves } => Unit::Input {
                leaves: leaves
                    .into_iter()
                    .map(|l| InputLeaf {
                        path: l.path,
                        locator: l.locator,
                        dist: match l.dist {
                            DistRecord::Gaussian {
                                offset,
                                standardize,
                                integer,
                            } => LeafDist::Gaussian {
                                offset,
                                standardize,
                                integer,
                            },
                            DistRecord::Categorical { offset, levels } => LeafDist::Categorical {
                                offset,
                                levels: match levels {
                                    LevelsRecord::Str(v) => Levels::strings(v),
                                    LevelsRecord::Int(v) => Levels::ints(v),
                                },
                            },
                        },
                    })
                    .collect(),
            },
        }
    }
}

impl Circuit {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION,
            schema: self.schema.clone(),
            config: self.config.clone(),
            roots: self.roots.clone(),
            prior_offset: self.prior_offset,
            paths: self.paths.clone(),
            blocks: self.blocks.clone(),
            units: self.units.iter().map(UnitRecord::from).collect(),
            n_params: self.params.len(),
            params: encode_params(&self.params),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let params = decode_params(&file.params, file.n_params)?;
        let circuit = Circuit {
            schema: file.schema,
            config: file.config,
            units: file.units.into_iter().map(Unit::from).collect(),
            roots: file.roots,
            params,
            prior_offset: file.prior_offset,
            paths: file.paths,
            blocks: file.blocks,
        };
        circuit.check_references()?;
        Ok(circuit)
    }

    /// Index sanity for a loaded model: every child, path and parameter
    /// reference is in range and children precede parents.
    pub(crate) fn check_references(&self) -> Result<()> {
        let n_params = self.params.len();
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.roots.is_empty() {
            return bad("model has no roots".into());
        }
        if self.prior_offset + self.roots.len() > n_params {
            return bad("class priors out of range".into());
        }
        for &r in &self.roots {
            if r >= self.units.len() {
                return bad(format!("root {r} out of range"));
            }
        }
        for (id, u) in self.units.iter().enumerate() {
            if u.children().iter().any(|&c| c >= id) {
                return bad(format!("unit {id} references a later unit"));
            }
            let ok = match u {
                Unit::Sum { children, offset } => offset + children.len() <= n_params,
                Unit::Product { .. } => true,
                Unit::Set {
                    path, cardinality, ..
                } => *path < self.paths.len() && cardinality.offset < n_params,
                Unit::Input { leaves } => leaves.iter().all(|l| {
                    l.path < self.paths.len() && l.dist.offset() + l.dist.n_params() <= n_params
                }),
            };
            if !ok {
                return bad(format!("unit {id} has an out-of-range reference"));
            }
        }
        Ok(())
    }
}
