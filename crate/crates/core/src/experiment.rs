//! End-to-end commands: synthesize data, train the base session, evaluate the
//! incremental protocol, and compare reports.
//!
//! Every command writes `effective_config.toml` (defaults resolved) next to its
//! outputs. Given the same inputs and seed all artifacts are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::{load_dataset, write_synth};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, REPORT_HEADER};
use crate::model::{train_base, Backbone, TrainConfig, TrainedModel};
use crate::protocol::{build_splits, run_protocol, splits_manifest, ProtocolOutcome, SessionSplit};
use crate::sample::Sample;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SPLITS_FILE: &str = "splits.csv";
pub const PROTOTYPES_FILE: &str = "prototypes.txt";
pub const CONFIG_FILE: &str = "effective_config.toml";

/// Trains on the base session. Base class ids are mapped to training labels
/// by their position in `base.classes`.
pub fn train_on_base(base: &SessionSplit, cfg: &TrainConfig) -> Result<TrainedModel> {
    let data: Vec<Sample> = base
        .train
        .iter()
        .map(|s| {
            let label = base
                .classes
                .iter()
                .position(|&c| c == s.label)
                .ok_or_else(|| Error::SplitMismatch(format!("class {} not in base session", s.label)))?;
            Ok(Sample { label, ..s.clone() })
        })
        .collect::<Result<_>>()?;
    train_base(&data, cfg)
}

fn input_dim(dataset: &[Sample]) -> Result<usize> {
    dataset.first().map(|s| s.payload.len()).ok_or(Error::EmptyDataset)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub splits: Vec<SessionSplit>,
    pub trained: TrainedModel,
    pub protocol: ProtocolOutcome,
    pub report: MetricsReport,
}

/// Train and evaluate without touching the filesystem.
pub fn run_in_memory(cfg: &RunConfig, dataset: &[Sample]) -> Result<RunOutcome> {
    cfg.validate()?;
    let splits = build_splits(dataset, &cfg.protocol_spec())?;
    let trained = train_on_base(&splits[0], &cfg.train_config(input_dim(dataset)?))?;
    let backbone = trained.params.backbone.clone();
    let protocol = run_protocol(&backbone, &splits, cfg.base_prototypes())?;
    let report = MetricsReport::from_results(&protocol.sessions)?;
    Ok(RunOutcome {
        splits,
        trained,
        protocol,
        report,
    })
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn prepare_output(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.output.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, CONFIG_FILE, cfg.to_toml())?;
    Ok(dir)
}

/// Writes the `[synth]` dataset to `dataset.path`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let synth = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("config has no [synth] section".into()))?;
    synth.validate()?;
    prepare_output(cfg)?;
    write_synth(synth, &cfg.dataset.path)
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub epoch_losses: Vec<f64>,
}

/// Trains on session-0 data; writes the checkpoint and a per-epoch loss log.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainArtifacts> {
    cfg.validate()?;
    cfg.check_paths()?;
    let dataset = load_dataset(&cfg.dataset.path, cfg.dataset.format)?;
    let splits = build_splits(&dataset, &cfg.protocol_spec())?;
    let trained = train_on_base(&splits[0], &cfg.train_config(input_dim(&dataset)?))?;
    let dir = prepare_output(cfg)?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    checkpoint::save(&trained.params, &checkpoint)?;
    let mut log = String::from("epoch,loss\n");
    for (i, l) in trained.epoch_losses.iter().enumerate() {
        let _ = writeln!(log, "{},{}", i + 1, l);
    }
    let log = write(dir, TRAIN_LOG_FILE, log)?;
    Ok(TrainArtifacts {
        checkpoint,
        log,
        epoch_losses: trained.epoch_losses,
    })
}

fn check_backbone(backbone: &Backbone, cfg: &RunConfig, input_dim: usize) -> Result<()> {
    let want = cfg.model_config(input_dim);
    let mut widths = vec![want.input_dim];
    widths.extend(&want.hidden);
    widths.push(want.embedding_dim);
    let got: Vec<(usize, usize)> = backbone.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
    let expected: Vec<(usize, usize)> = widths.windows(2).map(|w| (w[0], w[1])).collect();
    if got != expected {
        return Err(Error::CheckpointMismatch(format!(
            "backbone layers {got:?} do not match the configured {expected:?}"
        )));
    }
    Ok(())
}

/// Runs the incremental protocol on a trained checkpoint and writes the
/// metrics table, per-session confusion matrices, split manifest and the
/// final prototype store.
pub fn cmd_eval(cfg: &RunConfig, checkpoint_path: &Path) -> Result<MetricsReport> {
    cfg.validate()?;
    cfg.check_paths()?;
    let dataset = load_dataset(&cfg.dataset.path, cfg.dataset.format)?;
    let backbone = checkpoint::load(checkpoint_path)?.into_backbone();
    check_backbone(&backbone, cfg, input_dim(&dataset)?)?;
    let splits = build_splits(&dataset, &cfg.protocol_spec())?;
    let outcome = run_protocol(&backbone, &splits, cfg.base_prototypes())?;
    let report = MetricsReport::from_results(&outcome.sessions)?;

    let dir = prepare_output(cfg)?;
    write(dir, REPORT_FILE, report.to_csv())?;
    for s in &report.sessions {
        write(dir, &format!("confusion_session_{}.csv", s.index), s.confusion.to_csv())?;
    }
    write(dir, SPLITS_FILE, splits_manifest(&splits))?;
    write(dir, PROTOTYPES_FILE, outcome.store.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
struct ParsedReport {
    rows: Vec<(String, String, String)>,
    pd: String,
}

fn parse_report(name: &str, text: &str) -> Result<ParsedReport> {
    let mismatch = |m: &str| Error::SchemaMismatch(format!("{name}: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(mismatch("unexpected header"));
    }
    let mut rows = Vec::new();
    let mut pd = None;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        match cells.as_slice() {
            ["PD", v] => pd = Some(v.to_string()),
            [session, _, _, avg, _, _, harm] if pd.is_none() => {
                rows.push((session.to_string(), avg.to_string(), harm.to_string()))
            }
            _ => return Err(mismatch(&format!("bad row {line:?}"))),
        }
    }
    Ok(ParsedReport {
        rows,
        pd: pd.ok_or_else(|| mismatch("missing PD row"))?,
    })
}

/// Side-by-side average and harmonic accuracy per session, plus PD, for
/// reports given as `(name, csv text)`.
pub fn compare_reports(reports: &[(String, String)]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::SchemaMismatch("no reports given".into()));
    }
    let parsed = reports
        .iter()
        .map(|(n, t)| parse_report(n, t))
        .collect::<Result<Vec<_>>>()?;
    let sessions = parsed[0].rows.len();
    if let Some(i) = parsed.iter().position(|p| p.rows.len() != sessions) {
        return Err(Error::SchemaMismatch(format!(
            "{} has {} sessions, {} has {sessions}",
            reports[i].0,
            parsed[i].rows.len(),
            reports[0].0
        )));
    }
    let mut out = String::from("session");
    for metric in ["avg_acc", "harmonic_acc"] {
        for (name, _) in reports {
            let _ = write!(out, ",{metric}[{name}]");
        }
    }
    out.push('\n');
    for s in 0..sessions {
        out.push_str(&parsed[0].rows[s].0);
        for p in &parsed {
            let _ = write!(out, ",{}", p.rows[s].1);
        }
        for p in &parsed {
            let _ = write!(out, ",{}", p.rows[s].2);
        }
        out.push('\n');
    }
    out.push_str("PD");
    for p in &parsed {
        let _ = write!(out, ",{}", p.pd);
    }
    out.push('\n');
    Ok(out)
}

pub fn cmd_report(paths: &[PathBuf]) -> Result<String> {
    let reports = paths
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .map_err(|e| Error::io(p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    compare_reports(&reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(rows: &[&str], pd: &str) -> String {
        let mut s = format!("{REPORT_HEADER}\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s.push_str(&format!("PD,{pd}\n"));
        s
    }

    #[test]
    fn single_report_echoes_values() {
        let r = report(&["0,2,10,90.0,90.0,-,-", "1,3,15,80.0,85.0,70.0,77.1"], "10.0");
        let out = compare_reports(&[("a".into(), r)]).unwrap();
        assert_eq!(
            out,
            "session,avg_acc[a],harmonic_acc[a]\n0,90.0,-\n1,80.0,77.1\nPD,10.0\n"
        );
    }

    #[test]
    fn two_reports_get_two_columns_each() {
        let a = report(&["0,2,10,90.0,90.0,-,-", "1,3,15,80.0,85.0,70.0,77.1"], "10.0");
        let b = report(&["0,2,10,88.0,88.0,-,-", "1,3,15,81.0,84.0,75.0,79.2"], "7.0");
        let out = compare_reports(&[("a".into(), a), ("b".into(), b)]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "session,avg_acc[a],avg_acc[b],harmonic_acc[a],harmonic_acc[b]");
        assert_eq!(lines[2], "1,80.0,81.0,77.1,79.2");
        assert_eq!(lines[3], "PD,10.0,7.0");
    }

    #[test]
    fn mismatched_sessions_are_rejected() {
        let a = report(&["0,2,10,90.0,90.0,-,-"], "-");
        let b = report(&["0,2,10,88.0,88.0,-,-", "1,3,15,81.0,84.0,75.0,79.2"], "7.0");
        assert!(matches!(
            compare_reports(&[("a".into(), a), ("b".into(), b)]),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            compare_reports(&[("x".into(), "nope\n".into())]),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(compare_reports(&[]).is_err());
    }
}
