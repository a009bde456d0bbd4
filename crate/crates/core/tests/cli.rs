use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
[generation]
premises = 120
dev_instances = 16
test_instances = 24
multistep_chains = 12

[training]
epochs = 2
batch_size = 32

[training.encoder]
family = "bag"
dim = 16
"#;

fn opspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opspace")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        let (cfg, out) = (self.s("tiny.toml"), self.s(out));
        let mut args = vec![cmd, "--config", &cfg, "--out", &out];
        args.extend_from_slice(extra);
        opspace(&args)
    }

    fn generate(&self, out: &str) {
        let o = self.run("generate", out, &[]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }

    fn train(&self, data: &str, out: &str, extra: &[&str]) -> Output {
        let data = self.s(data);
        let mut args = vec!["--data", data.as_str()];
        args.extend_from_slice(extra);
        self.run("train", out, &args)
    }
}

fn files_except_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let ws = Workspace::new();
    ws.generate("a");
    ws.generate("b");
    let (a, b) = (files_except_manifest(&ws.path("a")), files_except_manifest(&ws.path("b")));
    assert!(a.len() >= 5);
    assert_eq!(a, b);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(ws.path("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_flag_changes_the_dataset() {
    let ws = Workspace::new();
    ws.generate("a");
    let o = ws.run("generate", "b", &["--seed", "9"]);
    assert_eq!(code(&o), 0);
    assert_ne!(
        fs::read(ws.path("a/triples.jsonl")).unwrap(),
        fs::read(ws.path("b/triples.jsonl")).unwrap()
    );
}

#[test]
fn missing_dataset_exits_with_io_code() {
    let ws = Workspace::new();
    let o = ws.train("nowhere", "run", &[]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn malformed_config_exits_with_config_code() {
    let ws = Workspace::new();
    fs::write(ws.path("bad.toml"), "[training]\nlearning_rat = 0.1\n").unwrap();
    let (cfg, out) = (ws.s("bad.toml"), ws.s("out"));
    let o = opspace(&["generate", "--config", &cfg, "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rat"));
    assert!(!ws.path("out").exists());
    assert_eq!(code(&opspace(&["generate", "--preset", "huge", "--out", &out])), 2);
    assert_eq!(code(&opspace(&["generate", "--seed", &u64::MAX.to_string(), "--out", &out])), 2);
}

#[test]
fn non_empty_output_needs_force() {
    let ws = Workspace::new();
    ws.generate("data");
    let before = fs::read(ws.path("data/triples.jsonl")).unwrap();
    assert_eq!(code(&ws.run("generate", "data", &[])), 3);
    assert_eq!(fs::read(ws.path("data/triples.jsonl")).unwrap(), before);
    assert_eq!(code(&ws.run("generate", "data", &["--force"])), 0);
}

#[test]
fn train_eval_pipeline_is_deterministic_and_checks_dimensions() {
    let ws = Workspace::new();
    ws.generate("data");
    for run in ["run_a", "run_b"] {
        let o = ws.train("data", run, &[]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let log = fs::read_to_string(ws.path("run_a/metrics.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "epoch,loss,dev_cross_map,dev_intra_map,avg_map");
    assert_eq!(log.lines().count(), 3);
    assert_eq!(log, fs::read_to_string(ws.path("run_b/metrics.csv")).unwrap());

    let (data, ckpt) = (ws.s("data"), ws.s("run_a/best.ckpt"));
    for protocol in ["retrieval", "multistep", "lengthgen", "separation", "export2d"] {
        let mut outputs = Vec::new();
        for out in ["eval_a", "eval_b"] {
            let o = ws.run(
                "eval",
                out,
                &["--data", &data, "--checkpoint", &ckpt, "--protocol", protocol, "--force"],
            );
            assert_eq!(code(&o), 0, "{protocol}: {}", String::from_utf8_lossy(&o.stderr));
            outputs.push(files_except_manifest(&ws.path(out)));
        }
        assert_eq!(outputs[0], outputs[1], "{protocol}");
    }
    let retrieval = fs::read_to_string(ws.path("eval_a/retrieval.csv")).unwrap();
    assert!(retrieval.starts_with("config_hash,paradigm,encoder,mode,num_vars,step,instances,map,hit_at_1,hit_at_3\n"));
    let export = fs::read_to_string(ws.path("eval_a/export2d.csv")).unwrap();
    assert!(export.starts_with("id,kind,x,y\n"));

    fs::write(ws.path("wide.toml"), TINY.replace("dim = 16", "dim = 32")).unwrap();
    let (wide, out) = (ws.s("wide.toml"), ws.s("eval_wide"));
    let o = opspace(&[
        "eval", "--config", &wide, "--out", &out, "--data", &data, "--checkpoint", &ckpt, "--protocol", "retrieval",
    ]);
    assert_eq!(code(&o), 5);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("32") && err.contains("16"), "{err}");

    let o = ws.run("analyze", "analysis", &["--data", &data, "--checkpoint", &ckpt]);
    assert_eq!(code(&o), 0);
    let analysis: serde_json::Value = serde_json::from_slice(&fs::read(ws.path("analysis/analysis.json")).unwrap()).unwrap();
    assert_eq!(analysis["training"]["epochs_completed"], 2);
}

#[test]
fn resume_continues_epoch_numbering() {
    let ws = Workspace::new();
    ws.generate("data");
    fs::write(ws.path("one.toml"), TINY.replace("epochs = 2", "epochs = 1")).unwrap();
    let (one, data, run) = (ws.s("one.toml"), ws.s("data"), ws.s("run"));
    assert_eq!(code(&opspace(&["train", "--config", &one, "--data", &data, "--out", &run])), 0);
    let o = ws.train("data", "run", &["--resume"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let resumed = fs::read_to_string(ws.path("run/metrics.csv")).unwrap();
    let epochs: Vec<&str> = resumed.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs, ["1", "2"]);

    assert_eq!(code(&ws.train("data", "straight", &[])), 0);
    assert_eq!(resumed, fs::read_to_string(ws.path("straight/metrics.csv")).unwrap());
}

#[test]
fn resume_without_checkpoint_fails() {
    let ws = Workspace::new();
    ws.generate("data");
    assert_eq!(code(&ws.train("data", "empty", &["--resume"])), 3);
}
