use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_fscil");

const CONFIG: &str = r#"
seed = 3

[dataset]
path = "blobs.csv"

[synth]
classes = 8
dim = 8
per_class = 40
spread = 0.8
seed = 11

[protocol]
base_classes = 4
steps = 2
ways = 2
shots = 3

[train]
epochs = 3
batch_size = 32
hidden = [16]
embedding_dim = 8
projection_hidden = 16
projection_output = 8
"#;

fn fscil(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run fscil")
}

fn text(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
        let ws = Self { dir };
        let out = ws.run("synth", "synth-out", &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        let config = self.path("run.toml");
        let out = self.path(out);
        let mut args = vec![cmd, config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        fscil(&args)
    }

    fn train_and_eval(&self, out: &str, extra: &[&str]) -> String {
        let t = self.run("train", out, extra);
        assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
        let e = self.run("eval", out, extra);
        assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
        text(self.path(out).join("report.csv"))
    }
}

#[test]
fn synth_writes_expected_rows_and_is_reproducible() {
    let ws = Workspace::new();
    let first = text(ws.path("blobs.csv"));
    assert_eq!(first.lines().count(), 8 * 40);
    assert!(first.lines().all(|l| l.split(',').count() == 9));
    let again = ws.run("synth", "synth-out", &[]);
    assert!(again.status.success());
    assert_eq!(first, text(ws.path("blobs.csv")));
}

#[test]
fn train_writes_checkpoint_log_and_effective_config() {
    let ws = Workspace::new();
    let out = ws.run("train", "run", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ws.path("run/checkpoint.bin").is_file());
    let log = text(ws.path("run/train_log.csv"));
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("epoch,loss"));
    assert_eq!(lines.count(), 3);
    let effective = text(ws.path("run/effective_config.toml"));
    assert!(effective.contains("epochs = 3"));
    assert!(effective.contains("momentum = 0.9"));
}

#[test]
fn eval_report_has_one_row_per_session_and_is_byte_identical() {
    let ws = Workspace::new();
    let report = ws.train_and_eval("run", &[]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "session,classes,samples,avg_acc,base_acc,inc_acc,harmonic_acc");
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[4].starts_with("PD,"));
    for name in ["splits.csv", "prototypes.txt", "confusion_session_0.csv", "confusion_session_2.csv"] {
        assert!(ws.path("run").join(name).is_file(), "{name}");
    }

    let again = ws.train_and_eval("rerun", &[]);
    assert_eq!(report.as_bytes(), again.as_bytes());
    assert_eq!(
        fs::read(ws.path("run/checkpoint.bin")).unwrap(),
        fs::read(ws.path("rerun/checkpoint.bin")).unwrap()
    );
    assert_eq!(text(ws.path("run/splits.csv")), text(ws.path("rerun/splits.csv")));
}

#[test]
fn baseline_flags_select_cross_entropy_and_full_prototypes() {
    let ws = Workspace::new();
    ws.train_and_eval("baseline", &["--loss", "cross-entropy", "--no-balance", "--class-aug", "off"]);
    let cfg = fscil::config::RunConfig::from_toml(&text(ws.path("baseline/effective_config.toml"))).unwrap();
    assert_eq!(cfg.flags.loss, fscil::config::LossKind::Ce);
    assert!(!cfg.flags.balance);
    assert!(!cfg.flags.class_aug);
    assert_eq!(cfg.base_prototypes(), fscil::protocol::BasePrototypes::Full);
    assert_eq!(cfg.loss_config(), fscil::loss::LossConfig::cross_entropy());

    let protos = text(ws.path("baseline/prototypes.txt"));
    let base_shots: Vec<&str> = protos
        .lines()
        .filter(|l| l.starts_with("class "))
        .map(|l| l.split_whitespace().nth(3).unwrap())
        .collect();
    assert!(base_shots.iter().any(|k| *k != "3"));
}

#[test]
fn report_compares_runs_and_rejects_mixed_session_counts() {
    let ws = Workspace::new();
    ws.train_and_eval("a", &[]);
    ws.train_and_eval("b", &["--loss", "ce"]);
    let a = ws.path("a/report.csv");
    let b = ws.path("b/report.csv");

    let one = fscil(&["report", a.to_str().unwrap()]);
    assert!(one.status.success());
    let one = String::from_utf8(one.stdout).unwrap();
    assert_eq!(one.lines().count(), 1 + 3 + 1);

    let two = fscil(&["report", a.to_str().unwrap(), b.to_str().unwrap()]);
    let two = String::from_utf8(two.stdout).unwrap();
    let header: Vec<&str> = two.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 2 * 2);

    let short = ws.path("short.csv");
    let full = text(&a);
    let mut kept: Vec<&str> = full.lines().collect();
    kept.remove(3);
    fs::write(&short, kept.join("\n") + "\n").unwrap();
    let bad = fscil(&["report", a.to_str().unwrap(), short.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("E_SCHEMA_MISMATCH: "));
}

#[test]
fn missing_dataset_fails_with_code_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[dataset]\npath = \"nowhere/data.csv\"\n").unwrap();
    let out = fscil(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("E_IO: "), "{err}");
    assert!(err.contains("nowhere/data.csv"), "{err}");
}

#[test]
fn eval_rejects_a_checkpoint_of_another_shape() {
    let ws = Workspace::new();
    let t = ws.run("train", "run", &[]);
    assert!(t.status.success());
    let bigger = CONFIG.replace("hidden = [16]", "hidden = [24]");
    fs::write(ws.path("other.toml"), bigger).unwrap();
    let out = fscil(&[
        "eval",
        ws.path("other.toml").to_str().unwrap(),
        "--out",
        ws.path("other").to_str().unwrap(),
        "--checkpoint",
        ws.path("run/checkpoint.bin").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_CHECKPOINT_MISMATCH: "));
}

#[test]
fn k_override_requires_explicit_flag() {
    let ws = Workspace::new();
    fs::write(ws.path("k.toml"), format!("{CONFIG}\n[flags]\nk_balanced = 4\n")).unwrap();
    let out = fscil(&["train", ws.path("k.toml").to_str().unwrap(), "--out", ws.path("k").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_INVALID_CONFIG: "));
}
