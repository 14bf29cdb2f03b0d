//! The example benchmark specs and the JSON schema under docs/ track the
//! spec types.

use std::collections::BTreeSet;
use std::path::PathBuf;

use fforge::bench::{DatasetSpec, ExperimentSpec, FinslerSpec, MethodSpec};
use fforge::manifold::zoo::{ManifoldParams, ZOO_NAMES};
use fforge::manifold::ManifoldSpec;
use serde_json::Value;

fn docs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

fn schema() -> Value {
    serde_json::from_str(&std::fs::read_to_string(docs().join("benchmark-spec.schema.json")).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn example_specs_parse_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(docs().join("specs")).unwrap() {
        let path = entry.unwrap().path();
        let spec: ExperimentSpec = serde_json::from_str(&std::fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        spec.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 2);
}

#[test]
fn schema_lists_every_serialized_field() {
    let full = ExperimentSpec {
        manifold: ManifoldSpec {
            params: ManifoldParams {
                half_axes: Some(vec![1.0; 3]),
                axes_endpoint: Some(true),
                major_radius: Some(3.0),
                minor_radius: Some(1.0),
            },
            ..ManifoldSpec::new("torus", 2)
        },
        finsler: Some(FinslerSpec::default()),
        dataset: DatasetSpec {
            path: Some("x.csv".into()),
            ..Default::default()
        },
        methods: vec![MethodSpec {
            method: "adam".into(),
            label: Some("a".into()),
            max_iter: Some(1),
            step_size: Some(0.1),
            batch_size: Some(1),
            batch_fraction: Some(0.5),
            sub_iters: Some(1),
            lambda: Some(0.5),
            seed: Some(1),
        }],
        output_dir: Some("out".into()),
        ..Default::default()
    };
    let v = serde_json::to_value(&full).unwrap();
    let s = schema();
    let props = &s["properties"];
    assert_eq!(keys(&v), keys(props));
    assert_eq!(keys(&v["manifold"]), keys(&props["manifold"]["properties"]));
    assert_eq!(keys(&v["manifold"]["params"]), keys(&props["manifold"]["properties"]["params"]["properties"]));
    assert_eq!(keys(&v["finsler"]), keys(&props["finsler"]["properties"]));
    assert_eq!(keys(&v["dataset"]), keys(&props["dataset"]["properties"]));
    assert_eq!(keys(&v["methods"][0]), keys(&props["methods"]["items"]["properties"]));
}

#[test]
fn unknown_keys_are_rejected() {
    for bad in [
        r#"{"repeat": 2}"#,
        r#"{"methods": [{"method": "adam", "maxiter": 5}]}"#,
        r#"{"manifold": {"name": "sphere", "dims": 3}}"#,
        r#"{"dataset": {"N": 10}}"#,
    ] {
        assert!(serde_json::from_str::<ExperimentSpec>(bad).is_err(), "{bad}");
    }
}

#[test]
fn schema_enums_match_the_parsers() {
    let s = schema();
    let names: Vec<&str> = s["properties"]["manifold"]["properties"]["name"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n.as_str().unwrap())
        .collect();
    assert_eq!(names, ZOO_NAMES);
    for m in s["properties"]["methods"]["items"]["properties"]["method"]["enum"].as_array().unwrap() {
        let spec = ExperimentSpec {
            methods: vec![MethodSpec::new(m.as_str().unwrap())],
            ..Default::default()
        };
        spec.validate().unwrap();
    }
    for mode in s["properties"]["mode"]["enum"].as_array().unwrap() {
        serde_json::from_value::<fforge::frechet::Mode>(mode.clone()).unwrap();
    }
}
