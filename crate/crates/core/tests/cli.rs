use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn amgcn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amgcn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AMGCN_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn listing(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let bytes = if e.path().is_file() {
                fs::read(e.path()).unwrap()
            } else {
                Vec::new()
            };
            (e.file_name().to_string_lossy().into_owned(), bytes)
        })
        .collect()
}

#[test]
fn gradcheck_default_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = amgcn(&["gradcheck"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().last().unwrap().starts_with("PASS"));
    assert_eq!(text.matches(" ok").count(), 11);
}

#[test]
fn generate_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = amgcn(&["generate", "case2", "--seed", "7", "--out", dir], tmp.path());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let (a, b) = (listing(&tmp.path().join("a")), listing(&tmp.path().join("b")));
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        ["edges.tsv", "features.csv", "labels.tsv", "split.json"]
    );
    assert_eq!(a, b);
}

#[test]
fn train_eval_and_knn_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(
        code(&amgcn(&["generate", "case1", "--seed", "1", "--out", "data"], p)),
        0
    );
    fs::write(p.join("run.cfg"), "epoch_max = 40\nnhid1 = 16\nnhid2 = 8\n").unwrap();
    let out = amgcn(
        &[
            "train",
            "--data",
            "data",
            "--config",
            "run.cfg",
            "--variant",
            "c",
            "--seed",
            "3",
            "--out",
            "run",
        ],
        p,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let files = listing(&p.join("run"));
    assert_eq!(
        files.keys().collect::<Vec<_>>(),
        ["attention.csv", "checkpoint.json", "history.csv", "metrics.json"]
    );
    let metrics: serde_json::Value = serde_json::from_slice(&files["metrics.json"]).unwrap();
    assert_eq!(metrics["schema_version"], 1);
    assert_eq!(metrics["variant"], "c");
    assert_eq!(metrics["seed"], 3);
    assert_eq!(metrics["epochs"], 40);
    let test_acc = metrics["test"]["accuracy"].as_f64().unwrap();
    assert!(test_acc >= 0.9, "test accuracy {test_acc}");
    let history = String::from_utf8_lossy(&files["history.csv"]).into_owned();
    assert_eq!(history.lines().next(), Some("# amgcn history v1"));
    assert_eq!(history.lines().count(), 2 + 40);
    let attention = String::from_utf8_lossy(&files["attention.csv"]).into_owned();
    assert_eq!(attention.lines().count(), 2 + 900);

    let out = amgcn(
        &["eval", "--checkpoint", "run/checkpoint.json", "--data", "data"],
        p,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let eval: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(eval["accuracy"].as_f64().unwrap(), test_acc);

    let out = amgcn(
        &[
            "knn-graph",
            "--data",
            "data",
            "--k",
            "4",
            "--metric",
            "heat",
            "--out",
            "knn.tsv",
        ],
        p,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let knn = fs::read_to_string(p.join("knn.tsv")).unwrap();
    assert!(knn.starts_with("# amgcn knn-graph k=4 metric=heat:2"));

    // Nothing outside the named outputs.
    let top: Vec<String> = listing(p).into_keys().collect();
    assert_eq!(top, ["data", "knn.tsv", "run", "run.cfg"]);
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(code(&amgcn(&["generate", "case1", "--out", "data"], p)), 0);
    fs::write(
        p.join("a.cfg"),
        "{\"epoch_max\": 1, \"nhid1\": 4, \"nhid2\": 2, \"seed\": 5}",
    )
    .unwrap();
    fs::write(p.join("b.cfg"), "epoch_max = 1\nnhid1 = 4\nnhid2 = 2\n").unwrap();
    let seed_of = |cfg: &str, flag: Option<&str>, env: Option<&str>| -> u64 {
        let mut args = vec!["train", "--data", "data", "--config", cfg, "--out", "r"];
        if let Some(s) = flag {
            args.extend(["--seed", s]);
        }
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_amgcn"));
        cmd.args(&args).current_dir(p).env_remove("AMGCN_SEED");
        if let Some(e) = env {
            cmd.env("AMGCN_SEED", e);
        }
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(p.join("r/metrics.json")).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of("a.cfg", Some("9"), Some("4")), 9);
    assert_eq!(seed_of("a.cfg", None, Some("4")), 5);
    assert_eq!(seed_of("b.cfg", None, Some("4")), 4);
    assert_eq!(seed_of("b.cfg", None, None), 0);
}

#[test]
fn failures_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(code(&amgcn(&["generate", "case1", "--out", "data"], p)), 0);

    let out = amgcn(&["train", "--data", "data", "--out", "r", "--bogus"], p);
    assert_eq!(code(&out), 2);

    fs::write(p.join("bad.cfg"), "learning_rate = 0.1\n").unwrap();
    let out = amgcn(
        &["train", "--data", "data", "--config", "bad.cfg", "--out", "r"],
        p,
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("learning_rate"));

    let out = amgcn(&["train", "--data", "nowhere", "--out", "r"], p);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("missing-file"));

    let out = amgcn(&["eval", "--checkpoint", "data/labels.tsv", "--data", "data"], p);
    assert_eq!(code(&out), 5);

    fs::write(p.join("bad.gc"), "tolerance = 1e-30\n").unwrap();
    let out = amgcn(&["gradcheck", "--config", "bad.gc"], p);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("gradient check failed"));

    assert!(!p.join("r").exists());
}

#[test]
fn default_training_on_case1() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(code(&amgcn(&["generate", "case1", "--out", "data"], p)), 0);
    let out = amgcn(&["train", "--data", "data", "--out", "run", "--embeddings"], p);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(p.join("run/metrics.json")).unwrap()).unwrap();
    assert!(metrics["test"]["accuracy"].as_f64().unwrap() >= 0.95);
    assert_eq!(metrics["attention"]["dominant"], "feature");
    let z = fs::read_to_string(p.join("run/embeddings.csv")).unwrap();
    assert_eq!(z.lines().filter(|l| !l.starts_with('#')).count(), 901);
}
