//! The epoch loop: mini-batch optimizer steps, epoch metrics, then the
//! stress controller at the epoch boundary.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::artifact::{EpochRow, RunArtifact, RunStatus, RunSummary};
use super::config::{DatasetConfig, Monitor, RunConfig, TaskConfig};
use crate::analysis::{grad_norm_sharpness, hutchinson_trace_fd};
use crate::data::{gen_two_moons, load_csv_dataset, Dataset};
use crate::error::{Result, SalError};
use crate::landscape::LandscapeSpec;
use crate::nn::{accuracy, argmax, init_mlp, loss_and_grad, loss_grad_predictions, LossKind, MlpSpec};
use crate::optim::OptimizerState;
use crate::params::ParameterSet;
use crate::perturb::EventKind;
use crate::rng::{substream, substream_seed, SalRng, STREAM_DATA, STREAM_INIT, STREAM_PROBES};
use crate::sal::{wrap_with_sal, SalController};
use crate::stress::EpochMetrics;

/// Loss, accuracy and flat gradient at one point.
struct Eval {
    loss: f64,
    accuracy: f64,
    grad: Vec<f64>,
}

enum Problem {
    Landscape {
        spec: LandscapeSpec,
        steps: usize,
    },
    Classifier {
        spec: MlpSpec,
        loss: LossKind,
        train: Dataset,
        validation: Option<Dataset>,
    },
}

/// Name of the single entry holding a landscape point.
pub const LANDSCAPE_PARAM: &str = "w";

impl Problem {
    fn eval(&self, params: &ParameterSet) -> Result<Eval> {
        match self {
            Problem::Landscape { spec, .. } => {
                let w = params.flatten();
                Ok(Eval {
                    loss: spec.loss(&w)?,
                    accuracy: 0.0,
                    grad: spec.grad(&w)?,
                })
            }
            Problem::Classifier {
                spec, loss, train, ..
            } => eval_dataset(params, spec, *loss, train),
        }
    }

    fn eval_validation(&self, params: &ParameterSet) -> Result<Option<Eval>> {
        match self {
            Problem::Classifier {
                spec,
                loss,
                validation: Some(v),
                ..
            } => eval_dataset(params, spec, *loss, v).map(Some),
            _ => Ok(None),
        }
    }

    fn trace(&self, params: &ParameterSet, probes: usize, step: f64, rng: &mut SalRng) -> Result<f64> {
        let w = params.flatten();
        let mut scratch = params.clone();
        hutchinson_trace_fd(
            |x: &[f64]| {
                scratch.assign_flat(x)?;
                Ok(self.eval(&scratch)?.grad)
            },
            &w,
            probes,
            step,
            rng,
        )
    }

    fn nearest_well(&self, params: &ParameterSet) -> Option<usize> {
        match self {
            Problem::Landscape { spec, .. } => spec.nearest_well(&params.flatten()),
            Problem::Classifier { .. } => None,
        }
    }
}

fn eval_dataset(params: &ParameterSet, spec: &MlpSpec, kind: LossKind, data: &Dataset) -> Result<Eval> {
    let (loss, grads, pred) = loss_grad_predictions(params, spec, &data.as_batch(), kind)?;
    Ok(Eval {
        loss,
        accuracy: accuracy(&pred, &data.labels)?,
        grad: grads.flatten(),
    })
}

struct Setup {
    problem: Problem,
    params: ParameterSet,
    data_rng: SalRng,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let mut data_rng = substream(cfg.seed, STREAM_DATA);
    match &cfg.task {
        TaskConfig::Landscape(t) => {
            let spec = t.landscape.build()?;
            let mut init_rng = substream(cfg.seed, STREAM_INIT);
            let w: Vec<f64> = t
                .init
                .iter()
                .map(|&x| x + t.init_jitter * init_rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut params = ParameterSet::new();
            params.push(
                LANDSCAPE_PARAM,
                crate::params::Tensor::new(vec![w.len()], w)?,
                true,
            )?;
            Ok(Setup {
                problem: Problem::Landscape {
                    spec,
                    steps: t.steps_per_epoch,
                },
                params,
                data_rng,
            })
        }
        TaskConfig::Classifier(t) => {
            let data = match &t.dataset {
                DatasetConfig::TwoMoons { samples, noise } => {
                    gen_two_moons(*samples, *noise, data_rng.random())?
                }
                DatasetConfig::Csv {
                    path,
                    label_column,
                    standardize,
                } => load_csv_dataset(path, label_column, *standardize)?,
            };
            if data.features() != t.widths[0] {
                return Err(SalError::Config(format!(
                    "dataset has {} features, network input width is {}",
                    data.features(),
                    t.widths[0]
                )));
            }
            if data.classes > *t.widths.last().unwrap() {
                return Err(SalError::Config(format!(
                    "dataset has {} classes, network output width is {}",
                    data.classes,
                    t.widths.last().unwrap()
                )));
            }
            let (train, validation) = if cfg.validation_fraction > 0.0 {
                let mut order: Vec<usize> = (0..data.len()).collect();
                order.shuffle(&mut data_rng);
                let n_val = ((data.len() as f64) * cfg.validation_fraction).round() as usize;
                let (val, train) = data.split(&order, n_val.max(1))?;
                (train, Some(val))
            } else {
                (data, None)
            };
            let spec = MlpSpec::new(
                t.widths.clone(),
                t.activation,
                t.output,
                substream_seed(cfg.seed, STREAM_INIT),
            )?;
            let params = init_mlp(&spec)?;
            Ok(Setup {
                problem: Problem::Classifier {
                    spec,
                    loss: t.loss,
                    train,
                    validation,
                },
                params,
                data_rng,
            })
        }
    }
}

/// Mean loss and accuracy over the epoch's optimizer steps.
fn run_epoch(
    problem: &Problem,
    params: &mut ParameterSet,
    step: &mut dyn FnMut(&mut ParameterSet, &ParameterSet) -> Result<()>,
    batch_size: usize,
    data_rng: &mut SalRng,
) -> Result<(f64, f64)> {
    match problem {
        Problem::Landscape { spec, steps } => {
            let mut total = 0.0;
            for _ in 0..*steps {
                let w = params.flatten();
                let eval = spec.eval(&w)?;
                total += eval.loss;
                let grads = ParameterSet::from_vector(LANDSCAPE_PARAM, eval.grad);
                step(params, &grads)?;
            }
            Ok((total / *steps as f64, 0.0))
        }
        Problem::Classifier {
            spec, loss, train, ..
        } => {
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(data_rng);
            let (mut total, mut hits) = (0.0, 0usize);
            for chunk in order.chunks(batch_size) {
                let batch = train.subset(chunk);
                let (l, grads, pred) = loss_grad_predictions(params, spec, &batch, *loss)?;
                if !l.is_finite() {
                    return Err(SalError::non_finite("mini-batch loss"));
                }
                total += l * chunk.len() as f64;
                hits += chunk
                    .iter()
                    .enumerate()
                    .filter(|&(r, &i)| argmax(pred.row(r)) == train.labels[i])
                    .count();
                step(params, &grads)?;
            }
            let n = train.len() as f64;
            Ok((total / n, hits as f64 / n))
        }
    }
}

/// Runs one configuration to completion (or divergence) in memory.
pub fn train_run(cfg: &RunConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let Setup {
        problem,
        mut params,
        mut data_rng,
    } = setup(cfg)?;
    let start_well = problem.nearest_well(&params);
    let optimizer = OptimizerState::new(cfg.optimizer.clone(), &params)?;
    let controller = SalController::new(cfg.sal.clone(), cfg.seed, cfg.sal_enabled)?;
    let mut sal = wrap_with_sal(optimizer, controller);
    let mut probe_rng = substream(cfg.seed, STREAM_PROBES);

    let mut rows = Vec::new();
    let mut events = Vec::new();
    let mut epoch_seconds = Vec::new();
    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut failure: Option<String> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let last_good = params.clone();
        let result = (|| -> Result<EpochRow> {
            let (loss, acc) = run_epoch(
                &problem,
                &mut params,
                &mut |p, g| sal.step(p, g),
                cfg.batch_size,
                &mut data_rng,
            )?;
            if !loss.is_finite() {
                return Err(SalError::non_finite("epoch loss"));
            }
            let (m_loss, m_acc) = match cfg.monitor {
                Monitor::Train => (loss, acc),
                Monitor::Validation => {
                    let v = problem
                        .eval_validation(&params)?
                        .ok_or_else(|| SalError::Config("no validation split".into()))?;
                    (v.loss, v.accuracy)
                }
            };
            let full = problem.eval(&params)?;
            let grad_norm = grad_norm_sharpness(&full.grad);
            if !grad_norm.is_finite() {
                return Err(SalError::non_finite("gradient"));
            }
            let trace = if cfg.trace_every > 0 && epoch % cfg.trace_every == 0 {
                Some(problem.trace(&params, cfg.trace_probes, cfg.hvp_step, &mut probe_rng)?)
            } else {
                None
            };
            let outcome = sal.end_epoch(EpochMetrics::new(epoch, m_loss, m_acc)?, &mut params)?;
            events.extend(outcome.events);
            Ok(EpochRow {
                epoch,
                loss: m_loss,
                accuracy: m_acc,
                stress: outcome.stress,
                grad_norm,
                trace,
            })
        })();
        match result {
            Ok(row) => rows.push(row),
            Err(e @ SalError::NonFinite { .. }) => {
                log::warn!("run {} diverged at epoch {epoch}: {e}", cfg.name);
                params = last_good;
                failure = Some(format!("epoch {epoch}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
        epoch_seconds.push(started.elapsed().as_secs_f64());
        if let Some(t) = trajectory.as_mut() {
            t.push(params.flatten());
        }
    }

    let final_eval = problem.eval(&params)?;
    let final_val = problem.eval_validation(&params)?;
    let final_trace = if cfg.trace_final {
        match problem.trace(&params, cfg.trace_probes, cfg.hvp_step, &mut probe_rng) {
            Ok(t) => Some(t),
            Err(SalError::NonFinite { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let count = |k: EventKind| events.iter().filter(|e| e.kind == k).count();
    let summary = RunSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        status: if failure.is_some() {
            RunStatus::Diverged
        } else {
            RunStatus::Completed
        },
        epochs_completed: rows.len() as u64,
        final_loss: final_eval.loss,
        final_accuracy: final_eval.accuracy,
        final_grad_norm: grad_norm_sharpness(&final_eval.grad),
        final_trace,
        final_validation_loss: final_val.as_ref().map(|v| v.loss),
        final_validation_accuracy: final_val.as_ref().map(|v| v.accuracy),
        start_well,
        final_well: problem.nearest_well(&params),
        noise_events: count(EventKind::Noise),
        plastic_events: count(EventKind::Plastic),
        revert_events: count(EventKind::Revert),
        failure,
    };
    Ok(RunArtifact {
        config: cfg.clone(),
        rows,
        events,
        final_params: params,
        summary,
        epoch_seconds,
        trajectory,
    })
}

/// Full-batch training loss of arbitrary parameters under a configuration's
/// task (used for surfaces around a checkpoint).
pub fn task_loss_fn(cfg: &RunConfig, template: &ParameterSet) -> Result<impl FnMut(&[f64]) -> Result<f64>> {
    let Setup { problem, params, .. } = setup(cfg)?;
    if !params.same_layout(template) {
        return Err(SalError::Shape(
            "checkpoint layout does not match the configured task".into(),
        ));
    }
    let mut scratch = template.clone();
    Ok(move |w: &[f64]| -> Result<f64> {
        scratch.assign_flat(w)?;
        match &problem {
            Problem::Landscape { spec, .. } => spec.loss(w),
            Problem::Classifier {
                spec, loss, train, ..
            } => Ok(loss_and_grad(&scratch, spec, &train.as_batch(), *loss)?.0),
        }
    })
}
