use proptest::prelude::*;
use serde_json::{json, Value};

use super::*;
use crate::error::Error;

fn leaf<'a>(schema: &'a Schema, path: &str) -> &'a LeafSchema {
    let node = schema
        .leaf_paths()
        .into_iter()
        .find(|p| p.to_string() == path)
        .and_then(|p| schema.node(&p))
        .unwrap_or_else(|| panic!("no leaf at {path}"));
    match node {
        SchemaNode::Leaf(l) => l,
        other => panic!("{path} is {}", other.describe()),
    }
}

fn hom_stats(schema: &Schema, path: &str) -> CardinalityStats {
    let p = schema
        .collection_paths()
        .into_iter()
        .find(|p| p.to_string() == path)
        .unwrap();
    match schema.node(&p) {
        Some(SchemaNode::Hom { cardinality, .. }) => *cardinality,
        _ => unreachable!(),
    }
}

#[test]
fn single_real_document() {
    let s = infer_schema([r#"{"a": 1.0}"#]).unwrap();
    match leaf(&s, "a") {
        LeafSchema::Real { stats } => {
            assert_eq!(stats.count, 1);
            assert_eq!(stats.mean, 1.0);
            assert_eq!(stats.variance, 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn cardinality_stats() {
    let s = infer_schema([r#"{"xs": [1, 2]}"#, r#"{"xs": [3]}"#]).unwrap();
    let c = hom_stats(&s, "xs");
    assert_eq!((c.min, c.max, c.mean), (1, 2, 1.5));
}

#[test]
fn int_promoted_to_real() {
    let s = infer_schema([r#"{"a": 1}"#, r#"{"a": 2.5}"#]).unwrap();
    assert_eq!(leaf(&s, "a").kind(), LeafKind::Real);
    let s = infer_schema([r#"{"a": true}"#, r#"{"a": false}"#]).unwrap();
    match leaf(&s, "a") {
        LeafSchema::Int { levels, .. } => assert_eq!(levels.as_deref(), Some(&[0, 1][..])),
        other => panic!("{other:?}"),
    }
}

#[test]
fn inference_errors() {
    assert!(matches!(
        infer_schema(Vec::<String>::new()),
        Err(Error::EmptyCorpus)
    ));
    assert!(matches!(
        infer_schema([r#"{"a": "x"}"#, r#"{"a": {"b": 1}}"#]),
        Err(Error::ConflictingTypes { path, .. }) if path == "a"
    ));
    assert!(matches!(
        infer_schema([r#"{"a": null}"#]),
        Err(Error::ConflictingTypes { .. })
    ));
    assert!(matches!(infer_schema(["{"]), Err(Error::MalformedJson(_))));
}

#[test]
fn empty_arrays_take_element_type_elsewhere() {
    let s = infer_schema([r#"{"xs": []}"#, r#"{"xs": ["a"]}"#]).unwrap();
    assert_eq!(hom_stats(&s, "xs").min, 0);
    assert!(matches!(
        infer_schema([r#"{"xs": []}"#]),
        Err(Error::ConflictingTypes { .. })
    ));
}

#[test]
fn molecule_schema() {
    let doc = include_str!("../../tests/fixtures/molecule.json");
    let s = infer_schema([doc]).unwrap();
    let SchemaNode::Het { fields } = &s.root else {
        panic!("root is not an object")
    };
    let names: Vec<_> = fields.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["atoms", "ind1", "inda", "logp", "lumo"]);
    assert_eq!(leaf(&s, "ind1").kind(), LeafKind::Int);
    assert_eq!(leaf(&s, "lumo").kind(), LeafKind::Real);
    assert_eq!(leaf(&s, "atoms[].element").kind(), LeafKind::Str);
    assert_eq!(leaf(&s, "atoms[].charge").kind(), LeafKind::Real);
    assert!(s
        .collection_paths()
        .iter()
        .any(|p| p.to_string() == "atoms[].bonds"));
}

#[test]
fn parse_examples() {
    let s = infer_schema([r#"{"a": 1.0}"#]).unwrap();
    let t = parse_document(r#"{"a": 1.0}"#, &s).unwrap();
    assert_eq!(
        t.root,
        DataNode::Het(vec![("a".into(), DataNode::Leaf(LeafValue::Real(1.0)))])
    );
    for text in [r#"{"a": null}"#, "{}"] {
        let t = parse_document(text, &s).unwrap();
        assert_eq!(t.root, DataNode::Het(vec![("a".into(), DataNode::MISSING)]));
    }
    assert!(matches!(
        parse_document(r#"{"a": "x"}"#, &s),
        Err(Error::SchemaViolation { path, .. }) if path == "a"
    ));
    assert!(matches!(parse_document("[", &s), Err(Error::MalformedJson(_))));
}

#[test]
fn schema_json_round_trip_is_exact() {
    let doc = include_str!("../../tests/fixtures/molecule.json");
    let s = infer_schema([doc, r#"{"lumo": 0.1, "logp": 2}"#]).unwrap();
    let text = s.to_json();
    let back = Schema::from_json(&text).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_json(), text);
}

#[test]
fn mask_extremes() {
    let s = infer_schema([r#"{"a": 1.0, "xs": [1, 2, 3]}"#]).unwrap();
    let t = parse_document(r#"{"a": 1.0, "xs": [1, 2, 3]}"#, &s).unwrap();
    assert_eq!(mask_missing(&t, 0.0, 9), t);
    let all = mask_missing(&t, 1.0, 9);
    assert_eq!(all.root.leaf_count(), 4);
    fn all_missing(n: &DataNode) -> bool {
        match n {
            DataNode::Het(f) => f.iter().all(|(_, c)| all_missing(c)),
            DataNode::Hom(e) => e.iter().all(all_missing),
            DataNode::Leaf(v) => *v == LeafValue::Missing,
        }
    }
    assert!(all_missing(&all.root));
}

#[test]
fn mask_rate_and_reproducibility() {
    let xs: Vec<Value> = (0..10_000).map(|i| json!(i)).collect();
    let doc = json!({ "xs": xs }).to_string();
    let s = infer_schema([&doc]).unwrap();
    let t = parse_document(&doc, &s).unwrap();
    let a = mask_missing(&t, 0.5, 42);
    assert_eq!(a, mask_missing(&t, 0.5, 42));
    let DataNode::Het(fields) = &a.root else {
        unreachable!()
    };
    let DataNode::Hom(elems) = &fields[0].1 else {
        unreachable!()
    };
    let rate = elems.iter().filter(|e| e.is_missing()).count() as f64 / 1e4;
    assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
}

fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-50i64..50).prop_map(|i| json!(i)),
        (-1e3f64..1e3).prop_map(|x| json!(x)),
        Just(Value::Null),
    ]
}

fn word() -> impl Strategy<Value = Value> {
    prop_oneof![
        prop::sample::select(vec!["C", "H", "O", "N", "Cl"]).prop_map(|s| json!(s)),
        Just(Value::Null),
    ]
}

/// Documents of one fixed shape with random values, nulls and absences.
fn document() -> impl Strategy<Value = Value> {
    let atom = (word(), scalar(), prop::collection::vec(-5i64..5, 0..3))
        .prop_map(|(e, q, b)| json!({"element": e, "charge": q, "bonds": b}));
    (
        scalar(),
        word(),
        prop::collection::vec(atom, 0..4),
        any::<bool>(),
    )
        .prop_map(|(x, w, atoms, drop_x)| {
            let mut doc = json!({"w": w, "atoms": atoms});
            if !drop_x {
                doc["x"] = x;
            }
            doc
        })
}

/// Vocabularies are stored in first-seen order; sort them for comparison.
fn canonical(node: &mut SchemaNode) {
    match node {
        SchemaNode::Het { fields } => fields.iter_mut().for_each(|f| canonical(&mut f.schema)),
        SchemaNode::Hom { element, .. } => canonical(element),
        SchemaNode::Leaf(LeafSchema::Str { vocabulary, .. }) => vocabulary.sort(),
        SchemaNode::Leaf(_) => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_documents_validate_and_round_trip(docs in prop::collection::vec(document(), 1..12)) {
        let Ok(schema) = infer_schema_from_values(&docs) else {
            // Every value at some path was null or empty.
            return Ok(());
        };
        for d in &docs {
            let t = parse_value(d, &schema).unwrap();
            t.validate(&schema).unwrap();
            let back = parse_document(&t.to_json(), &schema).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn inference_is_order_invariant(
        docs in prop::collection::vec(document(), 1..12),
        perm in any::<prop::sample::Index>(),
    ) {
        let mut shuffled = docs.clone();
        shuffled.rotate_left(perm.index(docs.len()));
        shuffled.reverse();
        match (infer_schema_from_values(&docs), infer_schema_from_values(&shuffled)) {
            (Ok(mut a), Ok(mut b)) => {
                canonical(&mut a.root);
                canonical(&mut b.root);
                prop_assert_eq!(a, b);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn masking_only_removes_values(doc in document(), fraction in 0.0f64..=1.0, seed in any::<u64>()) {
        let Ok(schema) = infer_schema_from_values(std::slice::from_ref(&doc)) else {
            return Ok(());
        };
        let t = parse_value(&doc, &schema).unwrap();
        let m = mask_missing(&t, fraction, seed);
        m.validate(&schema).unwrap();
        prop_assert_eq!(m.root.leaf_count(), t.root.leaf_count());
        fn covered(a: &DataNode, b: &DataNode) -> bool {
            match (a, b) {
                (_, DataNode::Leaf(LeafValue::Missing)) => true,
                (DataNode::Het(x), DataNode::Het(y)) => x.iter().zip(y).all(|(p, q)| p.0 == q.0 && covered(&p.1, &q.1)),
                (DataNode::Hom(x), DataNode::Hom(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| covered(p, q)),
                (p, q) => p == q,
            }
        }
        prop_assert!(covered(&t.root, &m.root));
    }
}
