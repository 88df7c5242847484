use std::path::Path;
use std::process::Command;

use osaas_core::dataset::TensorDataset;
use osaas_core::metrics::EvalReport;
use osaas_core::pipeline::{self, ModelKind};
use osaas_core::scenarios::{read_corpus, Composition};
use osaas_core::topology::{default_config, NetworkConfig};
use osaas_core::train::Checkpoint;
use osaas_core::Error;

fn osaas(args: &[&str], out_dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_osaas"))
        .args(args)
        .env("OSAAS_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn config_json_roundtrip_and_validation() {
    let config = default_config();
    let text = config.to_json_string().unwrap();
    assert_eq!(NetworkConfig::from_json_str(&text).unwrap(), config);

    let mut broken = config.clone();
    broken.windows[1].first_slot = broken.windows[0].first_slot + 2;
    let err = broken.checked().unwrap_err();
    assert!(matches!(&err, Error::InvalidConfig(v) if v.iter().any(|m| m.contains("overlap"))), "{err}");

    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["schema_version"] = 7.into();
    let bumped = value.to_string();
    assert!(matches!(NetworkConfig::from_json_str(&bumped), Err(Error::SchemaVersion { found: 7, .. })));
}

#[test]
fn corpus_jsonl_and_tensor_datasets_roundtrip() {
    let corpus = pipeline::simulate(&default_config(), &Composition::uniform(5, 20), 11).unwrap();
    let bytes = pipeline::corpus_bytes(&corpus).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), corpus.len());
    assert_eq!(read_corpus(&text).unwrap(), corpus);

    let (split, train, test) = pipeline::make_datasets(&corpus, 4).unwrap();
    assert_eq!(train.split_id, split.fingerprint());
    let json = serde_json::to_string(&test).unwrap();
    assert_eq!(TensorDataset::from_json_str(&json).unwrap(), test);
    let csv = test.to_csv();
    assert_eq!(csv.lines().count(), test.samples.len() + 1);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 3 + 40 + 60);
}

#[test]
fn checkpoint_reload_gives_identical_predictions() {
    let corpus = pipeline::simulate(&default_config(), &Composition::uniform(5, 20), 12).unwrap();
    let (_, train, test) = pipeline::make_datasets(&corpus, 1).unwrap();
    for kind in [ModelKind::Cnn, ModelKind::Mlp] {
        let ckpt = pipeline::train_model(kind, &train, 3, 8).unwrap();
        let text = ckpt.to_json_string().unwrap();
        let back = Checkpoint::from_json_str(&text).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(
            pipeline::evaluate(&back, &test).unwrap(),
            pipeline::evaluate(&ckpt, &test).unwrap()
        );
    }
}

#[test]
fn reports_from_different_splits_are_not_compared() {
    let corpus = pipeline::simulate(&default_config(), &Composition::uniform(5, 20), 13).unwrap();
    let (_, train_a, test_a) = pipeline::make_datasets(&corpus, 1).unwrap();
    let (_, train_b, test_b) = pipeline::make_datasets(&corpus, 2).unwrap();
    let a = pipeline::evaluate(&pipeline::train_model(ModelKind::Mlp, &train_a, 1, 0).unwrap(), &test_a).unwrap();
    let b = pipeline::evaluate(&pipeline::train_model(ModelKind::Cnn, &train_b, 1, 0).unwrap(), &test_b).unwrap();
    let err = pipeline::report(&a, &b).unwrap_err();
    assert!(err.to_string().contains("different test splits"), "{err}");
}

#[test]
fn cli_help_lists_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = osaas(&["--help"], dir.path());
    assert!(out.status.success());
    let help = stdout(&out);
    for cmd in ["simulate", "dataset", "train", "evaluate", "report", "reproduce"] {
        assert!(help.contains(cmd), "help lacks {cmd}:\n{help}");
    }
    assert!(help.contains("OSAAS_OUT_DIR"));
}

#[test]
fn cli_stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let composition = d.join("composition.json");
    std::fs::write(&composition, serde_json::to_string(&Composition::uniform(5, 20)).unwrap()).unwrap();

    let out = osaas(&["simulate", "--seed", "3", "--composition", composition.to_str().unwrap()], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join(pipeline::CORPUS_FILE).exists());

    let corpus = d.join(pipeline::CORPUS_FILE);
    let out = osaas(&["dataset", "--corpus", corpus.to_str().unwrap(), "--csv"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("test.csv").exists());

    let train = d.join(pipeline::TRAIN_FILE);
    let test = d.join(pipeline::TEST_FILE);
    for model in ["cnn", "mlp"] {
        let out = osaas(&["train", "--model", model, "--epochs", "2", "--train", train.to_str().unwrap()], d);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }

    let mut reports = Vec::new();
    for (ckpt, name) in [(pipeline::MLP_CHECKPOINT_FILE, "base.json"), (pipeline::CNN_CHECKPOINT_FILE, "cnn.json")] {
        let report = d.join(name);
        let out = osaas(
            &[
                "evaluate",
                "--checkpoint",
                d.join(ckpt).to_str().unwrap(),
                "--test",
                test.to_str().unwrap(),
                "--report",
                "json",
                "--out",
                report.to_str().unwrap(),
            ],
            d,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let parsed: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(parsed.test_size, TensorDataset::from_json_str(&std::fs::read_to_string(&test).unwrap()).unwrap().samples.len());
        reports.push(report);
    }

    let out = osaas(
        &["report", "--base", reports[0].to_str().unwrap(), "--cnn", reports[1].to_str().unwrap(), "--format", "csv"],
        d,
    );
    assert!(out.status.success());
    let text = stdout(&out);
    let mut blocks = text.split("\n\n");
    assert_eq!(blocks.next().unwrap().lines().count(), 8);
    assert_eq!(blocks.next().unwrap().lines().count(), 5);
    assert_eq!(blocks.next().unwrap().trim_end().lines().count(), 5);
}

#[test]
fn cli_config_override_is_applied_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut config = default_config();
    config.windows[0].first_slot = 3;
    let bad = d.join("bad.json");
    std::fs::write(&bad, config.to_json_string().unwrap()).unwrap();
    let out = osaas(&["--config", bad.to_str().unwrap(), "simulate"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid network config"));

    let out = osaas(&["--config", d.join("missing.json").to_str().unwrap(), "simulate"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn cli_smoke_reproduce_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = osaas(&["reproduce", "--profile", "smoke", "--seed", "1"], dir.path());
    assert!(out.status.success(), "{}\n{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("[PASS] CNN accuracy floor"), "{text}");
    let manifest: pipeline::RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(pipeline::MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest.seeds.master, 1);
    assert!(manifest.all_passed());
}
