//! Epoch-boundary control loop that wraps any base optimizer.
//!
//! Mini-batch steps pass straight through to the wrapped [`OptimizerState`].
//! After each epoch [`SalOptimizer::end_epoch`] receives the epoch metrics and:
//!
//! 1. takes a pending revert decision for the last plastic event,
//! 2. updates the stress scalar,
//! 3. past warm-up, injects noise when `s_g > s_noise`,
//! 4. past warm-up, deforms the tail entries and resets stress when
//!    `s_g >= s_yield`.
//!
//! Steps 3 and 4 may both fire in the same epoch, in that order.

use crate::error::Result;
use crate::optim::OptimizerState;
use crate::params::ParameterSet;
use crate::perturb::{
    inject_noise, noise_scale, plastic_deform, revert_to_yield, should_revert, EventKind,
    InterventionEvent, YieldSnapshot,
};
use crate::rng::{substream, SalRng, STREAM_NOISE, STREAM_PLASTIC};
use crate::stress::{
    classify_regime, is_first_improvement, is_improvement, EpochMetrics, Regime, SalConfig,
    StressState,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub improved: bool,
    /// Stress after the update and any plastic reset.
    pub stress: f64,
    /// Regime the updated stress fell into, before any reset.
    pub regime: Regime,
    pub events: Vec<InterventionEvent>,
}

impl EpochOutcome {
    pub fn fired(&self, kind: EventKind) -> bool {
        self.events.iter().any(|e| e.kind == kind)
    }
}

pub struct SalController {
    cfg: SalConfig,
    interventions: bool,
    stress: StressState,
    prev: Option<EpochMetrics>,
    snapshot: Option<YieldSnapshot>,
    revert_pending: bool,
    noise_rng: SalRng,
    plastic_rng: SalRng,
}

impl SalController {
    /// `interventions = false` keeps the stress bookkeeping but never touches
    /// the parameters.
    pub fn new(cfg: SalConfig, master_seed: u64, interventions: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            stress: StressState::from_config(&cfg)?,
            cfg,
            interventions,
            prev: None,
            snapshot: None,
            revert_pending: false,
            noise_rng: substream(master_seed, STREAM_NOISE),
            plastic_rng: substream(master_seed, STREAM_PLASTIC),
        })
    }

    pub fn config(&self) -> &SalConfig {
        &self.cfg
    }

    pub fn stress(&self) -> f64 {
        self.stress.stress()
    }

    pub fn state(&self) -> &StressState {
        &self.stress
    }

    pub fn snapshot(&self) -> Option<&YieldSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn end_epoch(
        &mut self,
        metrics: EpochMetrics,
        params: &mut ParameterSet,
    ) -> Result<EpochOutcome> {
        metrics.validate()?;
        let mut events = Vec::new();
        let epoch = metrics.epoch;

        if self.revert_pending {
            if let Some(snap) = &self.snapshot {
                if epoch.saturating_sub(snap.event_epoch) >= self.cfg.revert_patience {
                    self.revert_pending = false;
                    if should_revert(&metrics, snap, &self.cfg) {
                        events.push(revert_to_yield(
                            params,
                            Some(snap),
                            epoch,
                            self.stress.stress(),
                        )?);
                    }
                }
            }
        }

        let improved = match &self.prev {
            None => is_first_improvement(&metrics, &self.cfg)?,
            Some(prev) => is_improvement(&metrics, prev, &self.cfg)?,
        };
        self.stress.update(improved, &self.cfg);
        let regime = classify_regime(&self.stress, epoch, &self.cfg);
        let s_g = self.stress.stress();

        if self.interventions && regime != Regime::Warmup {
            if s_g > self.cfg.s_noise {
                let sigma = noise_scale(s_g, &self.cfg)?;
                inject_noise(params, sigma, &mut self.noise_rng)?;
                events.push(InterventionEvent {
                    epoch,
                    kind: EventKind::Noise,
                    sigma,
                    layers: params
                        .entries()
                        .iter()
                        .filter(|e| e.trainable)
                        .map(|e| e.name.clone())
                        .collect(),
                    stress_before: s_g,
                    stress_after: s_g,
                });
            }
            if regime == Regime::PlasticZone {
                let out = plastic_deform(params, &self.cfg, &mut self.plastic_rng, metrics.loss, epoch)?;
                self.stress.reset();
                events.push(InterventionEvent {
                    epoch,
                    kind: EventKind::Plastic,
                    sigma: out.noise_std,
                    layers: out.layers,
                    stress_before: s_g,
                    stress_after: self.stress.stress(),
                });
                self.snapshot = Some(out.snapshot);
                self.revert_pending = true;
            }
        }

        self.prev = Some(metrics);
        Ok(EpochOutcome {
            improved,
            stress: self.stress.stress(),
            regime,
            events,
        })
    }
}

/// A base optimizer with stress-aware control at epoch boundaries.
pub struct SalOptimizer {
    optimizer: OptimizerState,
    controller: SalController,
}

/// Wraps `optimizer`; the base update rule is never modified.
pub fn wrap_with_sal(optimizer: OptimizerState, controller: SalController) -> SalOptimizer {
    SalOptimizer {
        optimizer,
        controller,
    }
}

impl SalOptimizer {
    pub fn step(&mut self, params: &mut ParameterSet, grads: &ParameterSet) -> Result<()> {
        self.optimizer.step(params, grads)
    }

    pub fn end_epoch(
        &mut self,
        metrics: EpochMetrics,
        params: &mut ParameterSet,
    ) -> Result<EpochOutcome> {
        let outcome = self.controller.end_epoch(metrics, params)?;
        if self.controller.cfg.reset_optimizer_on_intervention
            && (outcome.fired(EventKind::Plastic) || outcome.fired(EventKind::Revert))
        {
            self.optimizer.reset_moments();
        }
        Ok(outcome)
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn controller(&self) -> &SalController {
        &self.controller
    }
}
