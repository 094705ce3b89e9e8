//! The loader returns errors, never panics, on hostile input.

use proptest::prelude::*;
use serde_json::{json, Value};

use idg_core::fixtures;
use idg_core::io::{load, load_with, save, LoadOptions};
use idg_core::validate;

fn options() -> impl Strategy<Value = LoadOptions> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(renormalize, complete_no_forgetting, validate)| LoadOptions {
            renormalize,
            complete_no_forgetting,
            validate,
        },
    )
}

/// Loading either fails or yields a diagram; with validation on, a valid one.
fn check(bytes: &[u8], opts: LoadOptions) {
    if let Ok(d) = load_with(bytes, opts) {
        if opts.validate {
            assert!(validate(&d).is_valid());
        }
        let _ = save(&d);
    }
}

fn json_leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        (-5i64..5).prop_map(Value::from),
        (-2.0..2.0f64).prop_map(Value::from),
        prop::sample::select(vec![
            "a", "b", "C", "D", "V", "chance", "decision", "value", ""
        ])
        .prop_map(Value::from),
    ]
}

fn json_value() -> impl Strategy<Value = Value> {
    json_leaf().prop_recursive(4, 32, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
            prop::collection::vec(
                (
                    prop::sample::select(vec![
                        "id",
                        "name",
                        "kind",
                        "outcomes",
                        "parents",
                        "table",
                        "payoffs",
                        "risk_aversion",
                        "scale",
                        "schema_version",
                        "nodes",
                        "layout",
                        "x",
                        "y",
                    ]),
                    inner
                ),
                0..6
            )
            .prop_map(|kv| Value::Object(kv.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())),
        ]
    })
}

fn seed_documents() -> Vec<Vec<u8>> {
    vec![
        save(&fixtures::wildcatter()),
        save(&fixtures::bet_pass(0.002)),
        save(&fixtures::two_stage()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, ..ProptestConfig::default() })]

    #[test]
    fn arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256), opts in options()) {
        check(&bytes, opts);
    }

    #[test]
    fn mutated_documents(
        which in 0usize..3,
        edits in prop::collection::vec((any::<usize>(), any::<u8>(), 0u8..3), 1..8),
        opts in options(),
    ) {
        let mut bytes = seed_documents().swap_remove(which);
        for (at, byte, action) in edits {
            if bytes.is_empty() {
                break;
            }
            let at = at % bytes.len();
            match action {
                0 => bytes[at] = byte,
                1 => { bytes.remove(at); }
                _ => bytes.truncate(at),
            }
        }
        check(&bytes, opts);
    }

    #[test]
    fn structured_garbage(nodes in prop::collection::vec(json_value(), 0..5), opts in options()) {
        let doc = json!({ "schema_version": 1, "nodes": nodes });
        check(&serde_json::to_vec(&doc).unwrap(), opts);
    }

    #[test]
    fn mutated_fields(which in 0usize..3, node in any::<usize>(), field in prop::sample::select(vec![
        "id", "kind", "outcomes", "parents", "table", "payoffs", "risk_aversion", "scale",
    ]), value in json_value(), opts in options()) {
        let mut doc: Value = serde_json::from_slice(&seed_documents()[which]).unwrap();
        let nodes = doc["nodes"].as_array_mut().unwrap();
        let n = node % nodes.len();
        nodes[n][field] = value;
        check(&serde_json::to_vec(&doc).unwrap(), opts);
    }
}

#[test]
fn numeric_edge_cases() {
    let mut doc: Value = serde_json::from_slice(&save(&fixtures::bet_pass(0.0))).unwrap();
    for v in [json!(1e308), json!(-1e308), json!(-0.0), json!(5e-324)] {
        doc["nodes"][0]["table"] = json!([[v, 1.0]]);
        check(&serde_json::to_vec(&doc).unwrap(), LoadOptions::default());
        doc["nodes"][2]["payoffs"] = json!([v, v, v, v]);
        check(&serde_json::to_vec(&doc).unwrap(), LoadOptions::default());
        doc["nodes"][2]["risk_aversion"] = v.clone();
        check(&serde_json::to_vec(&doc).unwrap(), LoadOptions::default());
    }
    assert!(load(b"{\"schema_version\": 1, \"nodes\": []}").is_err());
    assert!(load(br#"{"schema_version": 1, "nodes": [{"id": "v", "kind": "value", "parents": ["v"], "payoffs": [1]}]}"#).is_err());
}

#[test]
fn huge_parent_products_are_rejected() {
    let mut nodes = Vec::new();
    for i in 0..70 {
        nodes.push(json!({"id": format!("c{i}"), "kind": "chance", "outcomes": ["a", "b"], "parents": [], "table": [[0.5, 0.5]]}));
    }
    let parents: Vec<String> = (0..70).map(|i| format!("c{i}")).collect();
    nodes.push(json!({"id": "v", "kind": "value", "parents": parents, "payoffs": [0]}));
    let doc = json!({"schema_version": 1, "nodes": nodes});
    assert!(load(&serde_json::to_vec(&doc).unwrap()).is_err());
}
