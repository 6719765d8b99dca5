mod common;

use rand::Rng;
use spsn::circuit::{LeafDist, ParamKind, Unit};
use spsn::learn::{backward, fit, init_params, Objective, TrainConfig};
use spsn::logspace::log_softmax;
use spsn::oracle::{finite_diff_grad, randomize_params};
use spsn::rng::{stream_rng, Stream};
use spsn::{infer_schema, parse_document, spsn_network, BuildConfig, Circuit, DataTree};

fn leaf_dists(c: &Circuit) -> Vec<LeafDist> {
    c.units()
        .iter()
        .flat_map(|u| match u {
            Unit::Input { leaves } => leaves.iter().map(|l| l.dist.clone()).collect(),
            _ => vec![],
        })
        .collect()
}

fn corpus(docs: &[&str]) -> (Circuit, Vec<DataTree>) {
    let schema = infer_schema(docs).unwrap();
    let c = spsn_network(&schema, &BuildConfig::default()).unwrap();
    let trees = docs.iter().map(|d| parse_document(d, &schema).unwrap()).collect();
    (c, trees)
}

#[test]
fn gaussian_mean_gradient_closed_form() {
    let (mut c, _) = corpus(&[r#"{"a": 0.0}"#, r#"{"a": 1.0}"#]);
    let (mu, sigma, x) = (0.3, 0.7f64, 1.9);
    let mut mean_offsets = Vec::new();
    for d in leaf_dists(&c) {
        let LeafDist::Gaussian { offset, .. } = d else { unreachable!() };
        c.params_mut()[offset] = mu;
        c.params_mut()[offset + 1] = sigma.ln();
        mean_offsets.push(offset);
    }
    let tree = parse_document(&format!(r#"{{"a": {x}}}"#), c.schema()).unwrap();
    let (_, g) = backward(&c, 0, &tree).unwrap();
    // Identical components share the responsibility in proportion to weight.
    let total: f64 = mean_offsets.iter().map(|&o| g[o]).sum();
    assert!((total - (x - mu) / (sigma * sigma)).abs() < 1e-12);
}

#[test]
fn fully_missing_tree_has_zero_gradient() {
    let (c, _) = corpus(&[common::MOLECULE]);
    let tree = parse_document("{}", c.schema()).unwrap();
    let (v, g) = backward(&c, 0, &tree).unwrap();
    assert_eq!(v, 0.0);
    assert!(g.iter().all(|&x| x == 0.0));
    let numeric = finite_diff_grad(&c, 0, &tree, 1e-5).unwrap();
    assert!(numeric.iter().all(|&x| x == 0.0));
}

#[test]
fn three_unit_circuit_matches_finite_differences() {
    let (mut c, _) = corpus(&[r#"{"a": 0.0}"#, r#"{"a": 1.0}"#]);
    assert_eq!(c.units().len(), 3);
    let mut rng = stream_rng(3, Stream::Oracle);
    for _ in 0..20 {
        randomize_params(&mut c, &mut rng);
        let x: f64 = rng.random_range(-2.0..2.0);
        let tree = parse_document(&format!(r#"{{"a": {x}}}"#), c.schema()).unwrap();
        let (_, a) = backward(&c, 0, &tree).unwrap();
        let f = finite_diff_grad(&c, 0, &tree, 1e-5).unwrap();
        for (a, f) in a.iter().zip(&f) {
            if a.abs().max(f.abs()) < 1e-8 {
                assert!((a - f).abs() < 1e-8);
            } else {
                assert!((a - f).abs() / a.abs().max(f.abs()) < 1e-4, "{a} vs {f}");
            }
        }
    }
}

#[test]
fn finite_differences_are_symmetric_in_h() {
    let (mut c, _) = corpus(&[r#"{"a": 0.0, "s": "x"}"#, r#"{"a": 1.0, "s": "y"}"#]);
    randomize_params(&mut c, &mut stream_rng(4, Stream::Oracle));
    let tree = parse_document(r#"{"a": 0.5, "s": "y"}"#, c.schema()).unwrap();
    let plus = finite_diff_grad(&c, 0, &tree, 1e-5).unwrap();
    let minus = finite_diff_grad(&c, 0, &tree, -1e-5).unwrap();
    assert_eq!(plus, minus);
}

#[test]
fn init_constant_leaf_floors_the_scale() {
    let docs = [r#"{"a": 5.0}"#; 3];
    let (mut c, trees) = corpus(&docs);
    init_params(&mut c, &trees, 1);
    for d in leaf_dists(&c) {
        let LeafDist::Gaussian { offset, .. } = d else { unreachable!() };
        assert_eq!(c.params()[offset], 5.0);
        assert!((c.params()[offset + 1].exp() - 1e-3).abs() < 1e-15);
    }
}

#[test]
fn init_rate_is_mean_cardinality() {
    let docs = [r#"{"xs": [0.5]}"#, r#"{"xs": [0.5, 1.5]}"#, r#"{"xs": [1.0, 2.0, 3.0]}"#];
    let (mut c, trees) = corpus(&docs);
    init_params(&mut c, &trees, 1);
    let kinds = c.param_kinds();
    let rates: Vec<f64> = kinds
        .iter()
        .zip(c.params())
        .filter(|(k, _)| **k == ParamKind::LogRate)
        .map(|(_, p)| p.exp())
        .collect();
    assert!(!rates.is_empty());
    assert!(rates.iter().all(|r| (r - 2.0).abs() < 1e-12), "{rates:?}");
}

#[test]
fn init_categorical_is_laplace_smoothed() {
    let docs = [r#"{"s": "a"}"#, r#"{"s": "a"}"#, r#"{"s": "a"}"#, r#"{"s": "b"}"#];
    let (mut c, trees) = corpus(&docs);
    init_params(&mut c, &trees, 1);
    for d in leaf_dists(&c) {
        let LeafDist::Categorical { offset, .. } = d else { unreachable!() };
        let probs: Vec<f64> = log_softmax(&c.params()[offset..offset + 3])
            .iter()
            .map(|l| l.exp())
            .collect();
        for (p, q) in probs.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((p - q).abs() < 1e-12, "{probs:?}");
        }
    }
}

fn synthetic(n: usize) -> (Circuit, Vec<DataTree>) {
    let truth = common::ground_truth(11);
    let trees = spsn::sample::sample_labeled(&truth, n, 5)
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let model = spsn_network(truth.schema(), &BuildConfig { n_l: 1, ..Default::default() }).unwrap();
    (model, trees)
}

#[test]
fn zero_step_leaves_parameters_unchanged() {
    let (mut c, trees) = synthetic(60);
    init_params(&mut c, &trees, 2);
    let config = TrainConfig {
        step_size: 0.0,
        epochs: 3,
        ..Default::default()
    };
    let (trained, history) = fit(&c, &trees, None, &config).unwrap();
    assert_eq!(trained.params(), c.params());
    assert_eq!(history.epochs.len(), 4);
}

#[test]
fn training_is_deterministic_and_keeps_parameters_valid() {
    let (mut c, trees) = synthetic(120);
    init_params(&mut c, &trees, 2);
    let config = TrainConfig {
        step_size: 0.05,
        epochs: 4,
        seed: 9,
        ..Default::default()
    };
    let (a, ha) = fit(&c, &trees, None, &config).unwrap();
    let (b, hb) = fit(&c, &trees, None, &config).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(ha, hb);
    let best = &ha.epochs[ha.best_epoch];
    assert!(ha.epochs.iter().all(|e| e.val_log_score <= best.val_log_score));
    for (k, p) in a.param_kinds().iter().zip(a.params()) {
        assert!(p.is_finite());
        if *k == ParamKind::GaussLogStd {
            assert!(*p >= 1e-3f64.ln() - 1e-12);
        }
    }
}

#[test]
fn cross_entropy_needs_labels() {
    let (c, trees) = synthetic(20);
    let config = TrainConfig {
        objective: Objective::CrossEntropy,
        epochs: 1,
        ..Default::default()
    };
    assert!(fit(&c, &trees, None, &config).is_err());
}
