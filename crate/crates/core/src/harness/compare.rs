//! Baseline-versus-SAL reports for single runs and seed ensembles.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::artifact::{sweep_dir, RunArtifact, RunStatus};
use super::config::RunConfig;
use super::train::train_run;
use crate::error::{Result, SalError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochGap {
    pub epoch: u64,
    pub baseline_accuracy: f64,
    pub sal_accuracy: f64,
    /// `sal - baseline`.
    pub accuracy_gap: f64,
    pub loss_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterventionCounts {
    pub noise: usize,
    pub plastic: usize,
    pub revert: usize,
}

impl InterventionCounts {
    fn of(a: &RunArtifact) -> Self {
        Self {
            noise: a.summary.noise_events,
            plastic: a.summary.plastic_events,
            revert: a.summary.revert_events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub epochs: Vec<EpochGap>,
    pub final_loss_delta: f64,
    pub final_accuracy_delta: f64,
    pub final_trace_delta: Option<f64>,
    pub baseline_interventions: InterventionCounts,
    pub sal_interventions: InterventionCounts,
}

pub fn compare_runs(baseline: &RunArtifact, sal: &RunArtifact) -> Result<CompareReport> {
    if baseline.config.task_ini() != sal.config.task_ini() {
        return Err(SalError::Invalid("runs were trained on different tasks".into()));
    }
    if baseline.rows.len() != sal.rows.len() {
        return Err(SalError::Invalid(format!(
            "epoch counts differ: {} vs {}",
            baseline.rows.len(),
            sal.rows.len()
        )));
    }
    let epochs = baseline
        .rows
        .iter()
        .zip(&sal.rows)
        .map(|(b, s)| EpochGap {
            epoch: b.epoch,
            baseline_accuracy: b.accuracy,
            sal_accuracy: s.accuracy,
            accuracy_gap: s.accuracy - b.accuracy,
            loss_gap: s.loss - b.loss,
        })
        .collect();
    let (bs, ss) = (&baseline.summary, &sal.summary);
    Ok(CompareReport {
        epochs,
        final_loss_delta: ss.final_loss - bs.final_loss,
        final_accuracy_delta: ss.final_accuracy - bs.final_accuracy,
        final_trace_delta: match (bs.final_trace, ss.final_trace) {
            (Some(b), Some(s)) => Some(s - b),
            _ => None,
        },
        baseline_interventions: InterventionCounts::of(baseline),
        sal_interventions: InterventionCounts::of(sal),
    })
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,baseline_accuracy,sal_accuracy,accuracy_gap,loss_gap\n");
        for g in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                g.epoch, g.baseline_accuracy, g.sal_accuracy, g.accuracy_gap, g.loss_gap
            );
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let max_gap = self
            .epochs
            .iter()
            .map(|g| g.accuracy_gap.abs())
            .fold(0.0, f64::max);
        let mean_gap = if self.epochs.is_empty() {
            0.0
        } else {
            self.epochs.iter().map(|g| g.accuracy_gap).sum::<f64>() / self.epochs.len() as f64
        };
        let _ = writeln!(s, "epochs compared:      {}", self.epochs.len());
        let _ = writeln!(s, "mean accuracy gap:    {mean_gap}");
        let _ = writeln!(s, "max |accuracy gap|:   {max_gap}");
        let _ = writeln!(s, "final loss delta:     {}", self.final_loss_delta);
        let _ = writeln!(s, "final accuracy delta: {}", self.final_accuracy_delta);
        match self.final_trace_delta {
            Some(t) => {
                let _ = writeln!(s, "final trace delta:    {t}");
            }
            None => {
                let _ = writeln!(s, "final trace delta:    n/a");
            }
        }
        for (arm, c) in [
            ("baseline", &self.baseline_interventions),
            ("sal", &self.sal_interventions),
        ] {
            let _ = writeln!(
                s,
                "{arm:<9} interventions: noise {} plastic {} revert {}",
                c.noise, c.plastic, c.revert
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub runs: usize,
    pub diverged: usize,
    pub mean_final_loss: f64,
    pub mean_final_accuracy: f64,
    /// Mean over runs with a validation split.
    pub mean_final_validation_accuracy: Option<f64>,
    /// Mean over runs that recorded a final trace.
    pub mean_final_trace: Option<f64>,
    /// Landscape runs: fraction that ended nearest a different well than
    /// they started in.
    pub escape_rate: Option<f64>,
}

impl ArmSummary {
    pub fn of(runs: &[RunArtifact]) -> Self {
        let n = runs.len().max(1) as f64;
        let traces: Vec<f64> = runs.iter().filter_map(|r| r.summary.final_trace).collect();
        let val: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.summary.final_validation_accuracy)
            .collect();
        let escapes: Vec<bool> = runs.iter().filter_map(|r| r.summary.escaped()).collect();
        Self {
            runs: runs.len(),
            diverged: runs
                .iter()
                .filter(|r| r.summary.status == RunStatus::Diverged)
                .count(),
            mean_final_loss: runs.iter().map(|r| r.summary.final_loss).sum::<f64>() / n,
            mean_final_accuracy: runs.iter().map(|r| r.summary.final_accuracy).sum::<f64>() / n,
            mean_final_validation_accuracy: (!val.is_empty())
                .then(|| val.iter().sum::<f64>() / val.len() as f64),
            mean_final_trace: (!traces.is_empty())
                .then(|| traces.iter().sum::<f64>() / traces.len() as f64),
            escape_rate: (!escapes.is_empty())
                .then(|| escapes.iter().filter(|&&e| e).count() as f64 / escapes.len() as f64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub seeds: Vec<u64>,
    pub baseline: Vec<RunArtifact>,
    pub sal: Vec<RunArtifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub seeds: Vec<u64>,
    pub baseline: ArmSummary,
    pub sal: ArmSummary,
}

impl Sweep {
    pub fn report(&self) -> EnsembleReport {
        EnsembleReport {
            seeds: self.seeds.clone(),
            baseline: ArmSummary::of(&self.baseline),
            sal: ArmSummary::of(&self.sal),
        }
    }
}

impl EnsembleReport {
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seeds: {}", self.seeds.len());
        for (arm, a) in [("baseline", &self.baseline), ("sal", &self.sal)] {
            let _ = write!(
                s,
                "{arm:<9} final loss {:.6}  final accuracy {:.4}",
                a.mean_final_loss, a.mean_final_accuracy
            );
            if let Some(v) = a.mean_final_validation_accuracy {
                let _ = write!(s, "  validation accuracy {v:.4}");
            }
            if let Some(t) = a.mean_final_trace {
                let _ = write!(s, "  trace {t:.6}");
            }
            if let Some(e) = a.escape_rate {
                let _ = write!(s, "  escape rate {e:.2}");
            }
            if a.diverged > 0 {
                let _ = write!(s, "  diverged {}", a.diverged);
            }
            s.push('\n');
        }
        s
    }
}

/// Trains both arms (`sal_enabled` false and true) for seeds
/// `cfg.seed .. cfg.seed + n_seeds` in parallel. With `out_dir` each run is
/// written to `<out_dir>/seed<k>/{baseline,sal}`.
pub fn run_sweep(cfg: &RunConfig, n_seeds: u64, out_dir: Option<&Path>) -> Result<Sweep> {
    if n_seeds == 0 {
        return Err(SalError::Config("a sweep needs at least one seed".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
    let jobs: Vec<(u64, bool)> = seeds
        .iter()
        .flat_map(|&s| [(s, false), (s, true)])
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, enabled)| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.sal_enabled = enabled;
            let arm = if enabled { "sal" } else { "baseline" };
            if let Some(dir) = out_dir {
                c.output_dir = sweep_dir(dir, seed, arm);
            }
            let art = train_run(&c)?;
            if out_dir.is_some() {
                art.write(&c.output_dir)?;
            }
            Ok(art)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut baseline, mut sal) = (Vec::new(), Vec::new());
    for (art, &(_, enabled)) in runs.into_iter().zip(&jobs) {
        if enabled {
            sal.push(art);
        } else {
            baseline.push(art);
        }
    }
    Ok(Sweep {
        seeds,
        baseline,
        sal,
    })
}
