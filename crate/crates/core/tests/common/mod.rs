#![allow(dead_code)]

use spsn::circuit::{LeafDist, ParamKind, Unit};
use spsn::oracle::randomize_params;
use spsn::rng::{stream_rng, Stream};
use spsn::{spsn_network, BuildConfig, Circuit, DataTree, Schema};

pub const MOLECULE: &str = include_str!("../fixtures/molecule.json");

/// Two-level schema: a categorical and a real field at the top, and a
/// collection of objects with a categorical and a real field.
pub fn two_level_schema() -> Schema {
    Schema::from_json(
        r#"{"version": 1, "root": {"kind": "het", "fields": [
            {"name": "c", "schema": {"kind": "leaf", "type": "str", "count": 1, "vocabulary": ["a", "b", "c"]}},
            {"name": "items", "schema": {"kind": "hom",
                "cardinality": {"instances": 1, "min": 0, "max": 5, "mean": 2.0},
                "element": {"kind": "het", "fields": [
                    {"name": "t", "schema": {"kind": "leaf", "type": "str", "count": 1, "vocabulary": ["p", "q"]}},
                    {"name": "v", "schema": {"kind": "leaf", "type": "real", "stats": {"count": 1, "mean": 0.0, "variance": 1.0}}}
                ]}}},
            {"name": "x", "schema": {"kind": "leaf", "type": "real", "stats": {"count": 1, "mean": 0.0, "variance": 1.0}}}
        ]}}"#,
    )
    .expect("fixture schema parses")
}

/// Ground-truth generative circuit over [`two_level_schema`].
pub fn ground_truth(seed: u64) -> Circuit {
    let config = BuildConfig {
        n_c: 1,
        n_l: 1,
        n_s: 2,
        n_p: 2,
        k_cat: 100,
    };
    let mut c = spsn_network(&two_level_schema(), &config).unwrap();
    let mut rng = stream_rng(seed, Stream::Oracle);
    randomize_params(&mut c, &mut rng);
    spread_means(&mut c, 2.0);
    pin_oov(&mut c);
    c
}

/// The sampler never emits the out-of-vocabulary bucket; pinning its logits
/// at the clamp gives it negligible mass, so sampled data follow the density.
pub fn pin_oov(c: &mut Circuit) {
    let mut offsets = Vec::new();
    for u in c.units() {
        if let Unit::Input { leaves } = u {
            for l in leaves {
                if let LeafDist::Categorical { offset, levels } = &l.dist {
                    offsets.push(offset + levels.len());
                }
            }
        }
    }
    for o in offsets {
        c.params_mut()[o] = -30.0;
    }
}

/// Scales every Gaussian mean so mixture components are distinguishable.
fn spread_means(c: &mut Circuit, factor: f64) {
    let kinds = c.param_kinds();
    for (p, k) in c.params_mut().iter_mut().zip(kinds) {
        if k == ParamKind::GaussMean {
            *p *= factor;
        }
    }
}

/// Two-class ground truth: the classes differ in the mean of the top-level
/// real field (at -3 and +3 with unit scale) and share one cardinality
/// distribution, so the label is recoverable from `x` alone.
pub fn two_class_truth(seed: u64) -> Circuit {
    let config = BuildConfig {
        n_c: 2,
        n_l: 1,
        n_s: 2,
        n_p: 2,
        k_cat: 100,
    };
    let mut c = spsn_network(&two_level_schema(), &config).unwrap();
    let mut rng = stream_rng(seed, Stream::Oracle);
    randomize_params(&mut c, &mut rng);
    let prior = c.prior_offset();
    c.params_mut()[prior] = 0.0;
    c.params_mut()[prior + 1] = 0.0;
    let x_path = c
        .paths()
        .iter()
        .position(|p| p.to_string() == "x")
        .expect("x is modeled");
    for (class, &root) in c.roots().to_vec().iter().enumerate() {
        let mean = if class == 0 { -3.0 } else { 3.0 };
        for u in descendants(&c, root) {
            let unit = c.unit(u).clone();
            match unit {
                Unit::Input { leaves } => {
                    for l in leaves {
                        if let (true, LeafDist::Gaussian { offset, .. }) = (l.path == x_path, &l.dist) {
                            c.params_mut()[*offset] = mean;
                            c.params_mut()[offset + 1] = 0.0;
                        }
                    }
                }
                Unit::Set { cardinality, .. } => {
                    c.params_mut()[cardinality.offset] = 2f64.ln();
                }
                _ => {}
            }
        }
    }
    pin_oov(&mut c);
    c
}

pub fn descendants(c: &Circuit, root: usize) -> Vec<usize> {
    let mut seen = vec![false; c.units().len()];
    let mut stack = vec![root];
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        if !std::mem::replace(&mut seen[u], true) {
            out.push(u);
            stack.extend_from_slice(c.unit(u).children());
        }
    }
    out
}

/// Re-reads sampled trees through JSON against another schema.
pub fn reparse(trees: &[DataTree], schema: &Schema) -> Vec<DataTree> {
    trees
        .iter()
        .map(|t| spsn::parse_document(&t.to_json(), schema).unwrap())
        .collect()
}
