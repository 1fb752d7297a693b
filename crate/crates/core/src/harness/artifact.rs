//! On-disk run directories.
//!
//! ```text
//! config.echo      resolved configuration
//! epochs.csv       epoch,loss,accuracy,stress,grad_norm,trace
//! events.jsonl     one intervention per line
//! final.salckpt    final parameters
//! summary.json     status and final metrics
//! timing.csv       epoch,seconds (wall clock, not reproducible)
//! trajectory.csv   epoch,w0,w1,... (optional)
//! ```
//!
//! Every float is written in shortest round-trip form, so parsing a file back
//! recovers the in-memory values bit for bit. Everything except `timing.csv`
//! is a pure function of the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint;
use super::config::RunConfig;
use crate::error::{Result, SalError};
use crate::params::ParameterSet;
use crate::perturb::{EventKind, InterventionEvent};
use crate::stress::{is_first_improvement, is_improvement, EpochMetrics, StressState};

pub const EPOCHS_HEADER: &str = "epoch,loss,accuracy,stress,grad_norm,trace";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub stress: f64,
    pub grad_norm: f64,
    pub trace: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub status: RunStatus,
    pub epochs_completed: u64,
    /// Metrics of the final parameters on the training data.
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub final_grad_norm: f64,
    pub final_trace: Option<f64>,
    /// Present when the run holds out a validation split.
    pub final_validation_loss: Option<f64>,
    pub final_validation_accuracy: Option<f64>,
    /// Landscape tasks only: well nearest to the start and end points.
    pub start_well: Option<usize>,
    pub final_well: Option<usize>,
    pub noise_events: usize,
    pub plastic_events: usize,
    pub revert_events: usize,
    pub failure: Option<String>,
}

impl RunSummary {
    /// True when a landscape run finished nearer a different well than it
    /// started in.
    pub fn escaped(&self) -> Option<bool> {
        match (self.start_well, self.final_well) {
            (Some(a), Some(b)) => Some(a != b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub config: RunConfig,
    pub rows: Vec<EpochRow>,
    pub events: Vec<InterventionEvent>,
    pub final_params: ParameterSet,
    pub summary: RunSummary,
    pub epoch_seconds: Vec<f64>,
    /// Flattened parameters after each epoch, when recorded.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

fn create(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| SalError::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SalError::io(path, e))
}

impl RunArtifact {
    pub fn stress_trace(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.stress).collect()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &InterventionEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn epochs_csv(&self) -> String {
        let mut s = String::from(EPOCHS_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},",
                r.epoch, r.loss, r.accuracy, r.stress, r.grad_norm
            );
            if let Some(t) = r.trace {
                let _ = write!(s, "{t}");
            }
            s.push('\n');
        }
        s
    }

    pub fn events_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&serde_json::to_string(e)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn trajectory_csv(&self) -> Option<String> {
        let traj = self.trajectory.as_ref()?;
        let width = traj.first().map_or(0, Vec::len);
        let mut s = String::from("epoch");
        for i in 0..width {
            let _ = write!(s, ",w{i}");
        }
        s.push('\n');
        for (i, w) in traj.iter().enumerate() {
            let _ = write!(s, "{}", i + 1);
            for v in w {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        Some(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| SalError::io(dir, e))?;
        create(&dir.join("config.echo"), &self.config.to_ini())?;
        create(&dir.join("epochs.csv"), &self.epochs_csv())?;
        create(&dir.join("events.jsonl"), &self.events_jsonl()?)?;
        checkpoint::save(&self.final_params, &dir.join("final.salckpt"))?;
        let mut summary = serde_json::to_string_pretty(&self.summary)?;
        summary.push('\n');
        create(&dir.join("summary.json"), &summary)?;
        let mut timing = String::from("epoch,seconds\n");
        for (i, t) in self.epoch_seconds.iter().enumerate() {
            let _ = writeln!(timing, "{},{t}", i + 1);
        }
        create(&dir.join("timing.csv"), &timing)?;
        let traj_path = dir.join("trajectory.csv");
        match self.trajectory_csv() {
            Some(t) => create(&traj_path, &t)?,
            None if traj_path.exists() => {
                fs::remove_file(&traj_path).map_err(|e| SalError::io(&traj_path, e))?
            }
            None => {}
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = RunConfig::load(&dir.join("config.echo"))?;
        let rows = parse_epochs(&dir.join("epochs.csv"))?;
        let events_path = dir.join("events.jsonl");
        let mut events = Vec::new();
        for (i, line) in read(&events_path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(line).map_err(|e| SalError::Parse {
                path: events_path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        let final_params = checkpoint::load(&dir.join("final.salckpt"))?;
        let summary = serde_json::from_str(&read(&dir.join("summary.json"))?)?;
        let timing_path = dir.join("timing.csv");
        let epoch_seconds = if timing_path.exists() {
            parse_columns(&timing_path)?.into_iter().map(|r| r[1]).collect()
        } else {
            Vec::new()
        };
        let traj_path = dir.join("trajectory.csv");
        let trajectory = if traj_path.exists() {
            Some(load_trajectory(&traj_path)?)
        } else {
            None
        };
        Ok(Self {
            config,
            rows,
            events,
            final_params,
            summary,
            epoch_seconds,
            trajectory,
        })
    }

    /// Replays the stress recursion over the logged metrics and plastic
    /// resets. Returns the first epoch whose logged stress differs.
    pub fn check_stress_trace(&self) -> Result<Option<u64>> {
        let cfg = &self.config.sal;
        let mut state = StressState::from_config(cfg)?;
        let mut prev: Option<EpochMetrics> = None;
        for r in &self.rows {
            let m = EpochMetrics::new(r.epoch, r.loss, r.accuracy)?;
            let improved = match &prev {
                None => is_first_improvement(&m, cfg)?,
                Some(p) => is_improvement(&m, p, cfg)?,
            };
            state.update(improved, cfg);
            if self
                .events
                .iter()
                .any(|e| e.epoch == r.epoch && e.kind == EventKind::Plastic)
            {
                state.reset();
            }
            if state.stress().to_bits() != r.stress.to_bits() {
                return Ok(Some(r.epoch));
            }
            prev = Some(m);
        }
        Ok(None)
    }
}

fn parse_columns(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| SalError::Parse {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })?;
        out.push(row);
    }
    Ok(out)
}

fn parse_epochs(path: &Path) -> Result<Vec<EpochRow>> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(EPOCHS_HEADER) {
        return Err(SalError::Parse {
            path: path.into(),
            line: 1,
            message: format!("expected header {EPOCHS_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let err = |message: String| SalError::Parse {
            path: path.into(),
            line: i + 2,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
        rows.push(EpochRow {
            epoch: f[0].parse().map_err(|e| err(format!("{:?}: {e}", f[0])))?,
            loss: num(f[1])?,
            accuracy: num(f[2])?,
            stress: num(f[3])?,
            grad_norm: num(f[4])?,
            trace: if f[5].is_empty() { None } else { Some(num(f[5])?) },
        });
    }
    Ok(rows)
}

/// Weight snapshots from a `trajectory.csv`, epoch column dropped.
pub fn load_trajectory(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(parse_columns(path)?
        .into_iter()
        .map(|mut r| {
            r.remove(0);
            r
        })
        .collect())
}

/// `<base>/seed<k>/<arm>` layout used by sweeps.
pub fn sweep_dir(base: &Path, seed: u64, arm: &str) -> PathBuf {
    base.join(format!("seed{seed}")).join(arm)
}
