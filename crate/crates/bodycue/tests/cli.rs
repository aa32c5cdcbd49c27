use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bodycue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bodycue"))
        .args(args)
        .arg("-q")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit status")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_evaluate_and_replay_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let first = dir.path().join("eval1");
    let replay = dir.path().join("eval2");

    let out = bodycue(&["synth", "--out", s(&corpus), "--seed", "5", "--set", "n_participants=6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(corpus.join("corpus.json").is_file());
    assert!(corpus.join("manifest.json").is_file());

    let out = bodycue(&["evaluate", "--corpus", s(&corpus), "--out", s(&first), "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(first.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["mode"], "cross_validation");
    assert_eq!(metrics["leak_check"], "passed");
    let f1 = metrics["f1_mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let manifest = first.join("manifest.json");
    let out = bodycue(&["evaluate", "--manifest", s(&manifest), "--out", s(&replay)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(first.join("metrics.json")).unwrap(),
        fs::read(replay.join("metrics.json")).unwrap()
    );
    assert_eq!(fs::read(&manifest).unwrap(), fs::read(replay.join("manifest.json")).unwrap());

    let adaptors = dir.path().join("adaptors");
    let out = bodycue(&["detect-adaptors", "--corpus", s(&corpus), "--out", s(&adaptors)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let detection: serde_json::Value =
        serde_json::from_slice(&fs::read(adaptors.join("detection.json")).unwrap()).unwrap();
    assert!(detection["score"]["precision"].as_f64().unwrap() > 0.5, "{detection}");

    let out = bodycue(&["encode-fidgets", "--corpus", s(&corpus), "--out", s(&dir.path().join("f"))]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");

    let out = bodycue(&["evaluate", "--corpus", "x", "--out", s(&out_dir), "--seed", "1", "--set", "K=0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`K`"), "{}", stderr(&out));

    let out = bodycue(&["evaluate", "--corpus", "x", "--out", s(&out_dir), "--set", "bogus_key=1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bogus_key"), "{}", stderr(&out));

    let missing = dir.path().join("no-such-corpus");
    let out = bodycue(&["gesture-stats", "--corpus", s(&missing), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}
