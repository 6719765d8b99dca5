mod common;

use spsn::circuit::{LeafDist, ParamKind, Unit};
use spsn::oracle::randomize_params;
use spsn::rng::{stream_rng, Stream};
use spsn::sample::{sample_corpus, sample_labeled, sample_tree};
use spsn::{infer_schema, log_density, parse_document, spsn_network, BuildConfig, DataNode, LeafValue};

#[test]
fn degenerate_circuit_yields_the_modal_tree() {
    let schema = infer_schema([r#"{"s": "x", "xs": [1.0, 2.0]}"#, r#"{"s": "y", "xs": []}"#]).unwrap();
    let mut c = spsn_network(&schema, &BuildConfig::default()).unwrap();
    let kinds = c.param_kinds();
    let units = c.units().to_vec();
    let p = c.params_mut();
    for u in &units {
        match u {
            Unit::Sum { offset, children } => {
                p[*offset] = 30.0;
                p[offset + 1..offset + children.len()].fill(-30.0);
            }
            Unit::Input { leaves } => {
                for l in leaves {
                    match &l.dist {
                        LeafDist::Gaussian { offset, .. } => {
                            p[*offset] = 4.0;
                            p[offset + 1] = 1e-3f64.ln();
                        }
                        LeafDist::Categorical { offset, levels } => {
                            p[*offset] = 30.0;
                            p[offset + 1..offset + levels.n_logits()].fill(-30.0);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    for (k, v) in kinds.iter().zip(p.iter_mut()) {
        if *k == ParamKind::LogRate {
            *v = 10.0;
        }
    }
    for seed in 0..5 {
        let t = sample_tree(&c, 0, seed).unwrap();
        let DataNode::Het(fields) = &t.root else { unreachable!() };
        assert_eq!(fields[0].1, DataNode::Leaf(LeafValue::Str("x".into())));
        let DataNode::Hom(elems) = &fields[1].1 else { unreachable!() };
        // Rate e^10 puts nearly all truncated mass on k_max = 8.
        assert_eq!(elems.len(), 8);
        for e in elems {
            let DataNode::Leaf(LeafValue::Real(x)) = e else { unreachable!() };
            assert!((x - 4.0).abs() < 0.01);
        }
    }
}

#[test]
fn cardinality_mean_matches_truncated_pmf() {
    let schema = infer_schema([r#"{"xs": ["h", "t", "h"]}"#, r#"{"xs": []}"#]).unwrap();
    let mut c = spsn_network(&schema, &BuildConfig::default()).unwrap();
    c.set_truncation(8);
    let card = c
        .units()
        .iter()
        .find_map(|u| match u {
            Unit::Set { cardinality, .. } => Some(cardinality.clone()),
            _ => None,
        })
        .unwrap();
    // Every set unit gets the same rate, so the mixture over them is moot.
    let kinds = c.param_kinds();
    for (k, v) in kinds.iter().zip(c.params_mut()) {
        if *k == ParamKind::LogRate {
            *v = 5f64.ln();
        }
    }
    let pmf = card.pmf(c.params());
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let var: f64 = pmf.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum();
    let n = 100_000;
    let total: usize = sample_labeled(&c, n, 3)
        .iter()
        .map(|(_, t)| match &t.root {
            DataNode::Het(f) => match &f[0].1 {
                DataNode::Hom(e) => e.len(),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        })
        .sum();
    let empirical = total as f64 / n as f64;
    let se = (var / n as f64).sqrt();
    assert!((empirical - mean).abs() < 3.0 * se, "{empirical} vs {mean} (se {se})");
    assert!(mean < 5.0);
}

#[test]
fn own_samples_score_higher_than_under_a_mismatched_circuit() {
    let a = common::ground_truth(1);
    let b = common::ground_truth(2);
    let samples = sample_labeled(&a, 10_000, 4);
    let mean = |c: &spsn::Circuit| {
        samples.iter().map(|(_, t)| log_density(c, 0, t).unwrap()).sum::<f64>() / samples.len() as f64
    };
    assert!(mean(&a) > mean(&b));
}

#[test]
fn corpus_files_are_deterministic_and_reparse() {
    let schema = infer_schema([common::MOLECULE]).unwrap();
    let mut c = spsn_network(&schema, &BuildConfig::default()).unwrap();
    randomize_params(&mut c, &mut stream_rng(12, Stream::Init));
    let mut empty = Vec::new();
    sample_corpus(&c, 0, 1, &mut empty).unwrap();
    assert!(empty.is_empty());
    let mut first = Vec::new();
    let mut second = Vec::new();
    sample_corpus(&c, 3, 7, &mut first).unwrap();
    sample_corpus(&c, 3, 7, &mut second).unwrap();
    assert_eq!(first, second);
    let mut big = Vec::new();
    sample_corpus(&c, 10_000, 8, &mut big).unwrap();
    let text = String::from_utf8(big).unwrap();
    assert_eq!(text.lines().count(), 10_000);
    for line in text.lines() {
        parse_document(line, &schema).unwrap().validate(&schema).unwrap();
    }
}
