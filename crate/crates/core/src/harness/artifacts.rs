//! Files written and read by the command-line front end.
//!
//! Every output directory gets a `config.toml` holding the effective
//! configuration, and every JSON record embeds the same text, so a run can
//! be repeated from its own outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{MetricsSummary, TrialMetrics};
use crate::ensemble::TopologyKind;
use crate::error::{Error, Result};
use crate::neural_net::QNetwork;

use super::config::ExperimentConfig;
use super::group::{run_group, trial_metrics, vp_group, Trajectory};
use super::training::{train_cp, TrainingLogRow, TRAINING_SCOPE};
use super::validation::{run_topology_sweep, steps_for, validate_with, Substitute, SweepReport, ValidationReport};

pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const METRICS_FILE: &str = "metrics.json";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_timeseries_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["t".to_string()];
    for k in 1..=traj.n_players() {
        header.push(format!("x_{k}"));
        header.push(format!("v_{k}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..traj.len() {
        row.clear();
        row.push(traj.time(i).to_string());
        for k in 0..traj.n_players() {
            row.push(traj.x[k][i].to_string());
            row.push(traj.v[k][i].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_timeseries_csv`]. `dt` is taken from the
/// first two time stamps.
pub fn read_timeseries_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let bad = |msg: &str| Error::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if !is_timeseries_header(&header) {
        return Err(bad("not a time-series file"));
    }
    let n = (header.len() - 1) / 2;
    let mut t = Vec::new();
    let mut traj = Trajectory::new(n, 1.0);
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad("unparsable number")))
            .collect::<Result<Vec<_>>>()?;
        t.push(vals[0]);
        for k in 0..n {
            traj.x[k].push(vals[1 + 2 * k]);
            traj.v[k].push(vals[2 + 2 * k]);
        }
    }
    if t.len() < 2 {
        return Err(bad("fewer than two samples"));
    }
    traj.dt = t[1] - t[0];
    Ok(traj)
}

fn is_timeseries_header(h: &csv::StringRecord) -> bool {
    h.len() >= 3
        && h.len() % 2 == 1
        && &h[0] == "t"
        && (1..h.len()).all(|i| {
            let k = (i + 1) / 2;
            h[i] == *if i % 2 == 1 { format!("x_{k}") } else { format!("v_{k}") }
        })
}

pub fn write_training_log(path: impl AsRef<Path>, log: &[TrainingLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in log {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_training_log(path: impl AsRef<Path>) -> Result<Vec<TrainingLogRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare(out: &Path, cfg: &ExperimentConfig) -> Result<String> {
    fs::create_dir_all(out)?;
    let text = cfg.to_toml();
    fs::write(out.join(CONFIG_FILE), &text)?;
    Ok(text)
}

fn trial_file(prefix: &str, trial: usize) -> String {
    format!("{prefix}trial_{:03}.csv", trial + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub config: String,
    pub topology: TopologyKind,
    /// 1-based.
    pub target_player: usize,
    pub trials: Vec<TrialMetrics>,
    pub summary: MetricsSummary,
}

/// VP-only group runs: one CSV per trial plus metrics of the target player.
pub fn simulate_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<MetricsRecord> {
    let setup = cfg.build()?;
    let config = prepare(out, cfg)?;
    let steps = steps_for(cfg.simulation.duration, setup.dt());
    let mut trials = Vec::with_capacity(cfg.simulation.trials);
    for trial in 0..cfg.simulation.trials {
        let mut g = vp_group(cfg, &setup, setup.topology.clone(), TRAINING_SCOPE, trial)?;
        let traj = run_group(&mut g, steps, trial)?;
        write_timeseries_csv(out.join(trial_file("", trial)), &traj)?;
        trials.push(trial_metrics(&traj, &setup.topology, setup.target, cfg.transient, cfg.validation.max_lag)?);
    }
    let record = MetricsRecord {
        config,
        topology: cfg.topology.kind,
        target_player: cfg.target_player,
        summary: MetricsSummary::of(&trials),
        trials,
    };
    write_json(out.join(METRICS_FILE), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: String,
    pub trials_run: usize,
    pub terminated_at: Option<usize>,
    pub truncated_trials: usize,
}

pub fn train_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<TrainingRecord> {
    cfg.build()?;
    let config = prepare(out, cfg)?;
    let outcome = train_cp(cfg)?;
    outcome.net.save(out.join(CHECKPOINT_FILE))?;
    write_training_log(out.join(TRAINING_LOG_FILE), &outcome.log)?;
    let record = TrainingRecord {
        config,
        trials_run: outcome.log.len(),
        terminated_at: outcome.terminated_at,
        truncated_trials: outcome.truncated_trials,
    };
    write_json(out.join("training.json"), &record)?;
    Ok(record)
}

/// Configuration stored next to a checkpoint, or the defaults.
pub fn config_beside(checkpoint: &Path) -> Result<ExperimentConfig> {
    let path = checkpoint.parent().map_or_else(|| PathBuf::from(CONFIG_FILE), |d| d.join(CONFIG_FILE));
    if path.exists() {
        ExperimentConfig::load(path)
    } else {
        Ok(ExperimentConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub config: String,
    #[serde(flatten)]
    pub report: ValidationReport,
}

/// Writes `vp_trial_*.csv`, `cp_trial_*.csv` and `metrics.json`. Substituted
/// runs that diverged have no `cp_` file.
pub fn validate_to_dir(
    cfg: &ExperimentConfig,
    net: &QNetwork,
    kind: TopologyKind,
    trials: usize,
    out: &Path,
) -> Result<ValidationRecord> {
    let mut cfg = cfg.clone();
    cfg.topology.kind = kind;
    cfg.validation.trials = trials;
    cfg.build()?;
    let config = prepare(out, &cfg)?;
    let mut write_err = None;
    let report = validate_with(&cfg, &Substitute::Cyber(net.clone()), kind, trials, |trial, vp, cp| {
        for (prefix, traj) in [("vp_", Some(vp)), ("cp_", cp)] {
            let Some(traj) = traj else { continue };
            if let Err(e) = write_timeseries_csv(out.join(trial_file(prefix, trial)), traj) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let record = ValidationRecord { config, report };
    write_json(out.join(METRICS_FILE), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub config: String,
    #[serde(flatten)]
    pub sweep: SweepReport,
}

/// Writes `sweep.json` and `sweep.csv` (one row per topology and condition).
pub fn sweep_to_dir(cfg: &ExperimentConfig, net: &QNetwork, out: &Path) -> Result<SweepRecord> {
    cfg.build()?;
    let config = prepare(out, cfg)?;
    let sweep = run_topology_sweep(cfg, &Substitute::Cyber(net.clone()), cfg.validation.trials)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv")).map_err(csv_err)?;
    for row in &sweep.rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    let record = SweepRecord { config, sweep };
    write_json(out.join("sweep.json"), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMetrics {
    pub file: String,
    pub metrics: TrialMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub config: String,
    pub files: Vec<FileMetrics>,
    pub summary: MetricsSummary,
}

/// Recomputes metrics for every time-series CSV in `input`, using the
/// `config.toml` found there.
pub fn analyze_dir(input: &Path, out: &Path) -> Result<AnalysisRecord> {
    let cfg = ExperimentConfig::load(input.join(CONFIG_FILE))?;
    let setup = cfg.build()?;
    let mut names: Vec<PathBuf> = fs::read_dir(input)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    names.sort();
    let mut files = Vec::new();
    for path in names {
        let header = csv::Reader::from_path(&path).and_then(|mut r| r.headers().cloned());
        if !header.is_ok_and(|h| is_timeseries_header(&h)) {
            continue;
        }
        let traj = read_timeseries_csv(&path)?;
        if traj.n_players() != setup.n_players() {
            return Err(Error::DimensionMismatch {
                expected: setup.n_players(),
                got: traj.n_players(),
            });
        }
        let metrics = trial_metrics(&traj, &setup.topology, setup.target, cfg.transient, cfg.validation.max_lag)?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        files.push(FileMetrics { file, metrics });
    }
    if files.is_empty() {
        return Err(Error::Config(format!("no time-series CSV files in {}", input.display())));
    }
    fs::create_dir_all(out)?;
    let summary = MetricsSummary::of(&files.iter().map(|f| f.metrics.clone()).collect::<Vec<_>>());
    let record = AnalysisRecord {
        config: cfg.to_toml(),
        files,
        summary,
    };
    write_json(out.join("analysis.json"), &record)?;
    Ok(record)
}
