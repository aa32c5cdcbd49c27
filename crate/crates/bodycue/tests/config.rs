use bodycue::config::parse_override;
use bodycue::{Command, Error, RunConfig};
use serde_json::json;

fn config_error(e: Error) -> String {
    assert_eq!(e.exit_code(), 2, "{e}");
    e.to_string()
}

#[test]
fn unknown_keys_are_named() {
    let e = RunConfig::from_value(json!({ "seed": 1, "smoothnig": 0.2 })).unwrap_err();
    let msg = config_error(e);
    assert!(msg.contains("smoothnig"), "{msg}");
}

#[test]
fn invalid_values_name_the_field() {
    let cases = [
        (json!({ "K": 0 }), "`K`"),
        (json!({ "smoothing": 1.0 }), "`smoothing`"),
        (json!({ "folds": 1 }), "`folds`"),
        (json!({ "smooth_window": 10 }), "`smooth_window`"),
        (json!({ "l": 0 }), "`l`"),
    ];
    for (value, field) in cases {
        let mut cfg = RunConfig::from_value(value).unwrap();
        cfg.corpus = Some("c".into());
        cfg.out = Some("o".into());
        cfg.seed = Some(1);
        let msg = config_error(cfg.validate(Command::Evaluate).unwrap_err());
        assert!(msg.contains(field), "{msg}");
    }
}

#[test]
fn seeds_are_required_only_for_training() {
    let cfg = RunConfig {
        corpus: Some("c".into()),
        out: Some("o".into()),
        ..RunConfig::default()
    };
    assert!(cfg.validate(Command::GestureStats).is_ok());
    assert!(cfg.validate(Command::DetectAdaptors).is_ok());
    let msg = config_error(cfg.validate(Command::TrainFusion).unwrap_err());
    assert!(msg.contains("`seed`"), "{msg}");
    let with_model = RunConfig {
        model: Some("m".into()),
        ..cfg.clone()
    };
    assert!(with_model.validate(Command::Evaluate).is_ok());
}

#[test]
fn encode_without_motion_model_is_a_model_error() {
    let cfg = RunConfig {
        corpus: Some("c".into()),
        out: Some("o".into()),
        ..RunConfig::default()
    };
    assert_eq!(cfg.validate(Command::EncodeFidgets).unwrap_err().exit_code(), 4);
}

#[test]
fn overrides_parse_json_or_fall_back_to_strings() {
    assert_eq!(parse_override("K=16").unwrap(), ("K".to_string(), json!(16)));
    assert_eq!(parse_override("classifier=LR").unwrap(), ("classifier".to_string(), json!("LR")));
    assert_eq!(parse_override("normalize=false").unwrap(), ("normalize".to_string(), json!(false)));
    assert!(parse_override("K16").is_err());
}

#[test]
fn hash_ignores_the_output_directory() {
    let a = RunConfig {
        seed: Some(3),
        out: Some("one".into()),
        ..RunConfig::default()
    };
    let b = RunConfig {
        out: Some("two".into()),
        ..a.clone()
    };
    let c = RunConfig {
        seed: Some(4),
        ..a.clone()
    };
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn config_round_trips_through_json() {
    let cfg = RunConfig::from_value(json!({ "seed": 9, "K": 8, "classifier": "LR", "shuffles": 3 })).unwrap();
    let back = RunConfig::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, back);
    assert_eq!(cfg.fusion().k, 8);
}
