//! Global stress accumulation.
//!
//! The stress scalar decays by `rho` after an epoch that improved both loss and
//! accuracy by more than their thresholds, and grows by `theta` otherwise,
//! clamped to `[0, s_max]`. Its level selects the intervention regime.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SalError};

/// All stress-aware training hyperparameters.
///
/// Defaults reproduce the reference setup: `rho = 5e-4`, `theta = 5e-3`,
/// `s_noise = 5e-3`, `s_yield = 1e-2`, `delta = 1e-7`, `lambda = 1e-5`,
/// 15 warm-up epochs and plastic deformation of the last three trainable
/// entries (`w <- 0.9 w + N(0, 0.02^2)`).
///
/// Setting `s_noise` and `s_yield` to `+inf` disables every intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalConfig {
    pub rho: f64,
    pub theta: f64,
    pub eps_loss: f64,
    /// Fraction units (0.01 = one percentage point).
    pub eps_acc: f64,
    pub s_max: f64,
    pub s_noise: f64,
    pub s_yield: f64,
    pub delta: f64,
    pub lambda: f64,
    pub warmup_epochs: u64,
    pub plastic_layer_count: usize,
    pub plastic_retain: f64,
    pub plastic_noise_param: f64,
    /// When false, `plastic_noise_param` is read as a variance.
    pub plastic_noise_is_std: bool,
    pub accuracy_condition_enabled: bool,
    /// Relative loss increase over the pre-deformation loss that triggers a revert.
    pub revert_tolerance: f64,
    /// Epochs after a plastic event before the revert decision is taken.
    pub revert_patience: u64,
    /// Zero the optimizer moment estimates after plastic deformation or revert.
    pub reset_optimizer_on_intervention: bool,
}

impl Default for SalConfig {
    fn default() -> Self {
        Self {
            rho: 0.0005,
            theta: 0.005,
            eps_loss: 1e-4,
            eps_acc: 1e-4,
            s_max: 1.0,
            s_noise: 0.005,
            s_yield: 0.01,
            delta: 1e-7,
            lambda: 1e-5,
            warmup_epochs: 15,
            plastic_layer_count: 3,
            plastic_retain: 0.9,
            plastic_noise_param: 0.02,
            plastic_noise_is_std: true,
            accuracy_condition_enabled: true,
            revert_tolerance: 0.05,
            revert_patience: 1,
            reset_optimizer_on_intervention: false,
        }
    }
}

impl SalConfig {
    /// A configuration under which no intervention can ever fire.
    pub fn disabled() -> Self {
        Self {
            s_noise: f64::INFINITY,
            s_yield: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn interventions_possible(&self) -> bool {
        self.s_noise.is_finite() || self.s_yield.is_finite()
    }

    /// Standard deviation of the plastic deformation noise.
    pub fn plastic_noise_std(&self) -> f64 {
        if self.plastic_noise_is_std {
            self.plastic_noise_param
        } else {
            self.plastic_noise_param.sqrt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SalError::Config(msg));
        for (name, v) in [
            ("rho", self.rho),
            ("theta", self.theta),
            ("eps_loss", self.eps_loss),
            ("eps_acc", self.eps_acc),
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("revert_tolerance", self.revert_tolerance),
        ] {
            if v.is_nan() || v < 0.0 {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(self.s_max.is_finite() && self.s_max > 0.0) {
            return bad(format!("s_max must be finite and > 0, got {}", self.s_max));
        }
        if self.s_noise.is_nan() || self.s_yield.is_nan() {
            return bad("thresholds must not be NaN".into());
        }
        if self.s_yield <= 0.0 {
            return bad(format!("s_yield must be > 0, got {}", self.s_yield));
        }
        let both_disabled = self.s_noise.is_infinite() && self.s_yield.is_infinite();
        if !both_disabled && self.s_noise >= self.s_yield {
            return bad(format!(
                "s_noise ({}) must be below s_yield ({})",
                self.s_noise, self.s_yield
            ));
        }
        if self.s_yield.is_finite() && self.s_yield > self.s_max {
            return bad(format!(
                "s_yield ({}) must not exceed s_max ({})",
                self.s_yield, self.s_max
            ));
        }
        if self.plastic_layer_count == 0 {
            return bad("plastic_layer_count must be >= 1".into());
        }
        if !(self.plastic_retain > 0.0 && self.plastic_retain <= 1.0) {
            return bad(format!(
                "plastic_retain must lie in (0, 1], got {}",
                self.plastic_retain
            ));
        }
        if !(self.plastic_noise_param.is_finite() && self.plastic_noise_param >= 0.0) {
            return bad(format!(
                "plastic_noise_param must be finite and >= 0, got {}",
                self.plastic_noise_param
            ));
        }
        Ok(())
    }
}

/// Loss and accuracy of one epoch. Epochs count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub loss: f64,
    pub accuracy: f64,
}

impl EpochMetrics {
    pub fn new(epoch: u64, loss: f64, accuracy: f64) -> Result<Self> {
        let m = Self {
            epoch,
            loss,
            accuracy,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.loss.is_finite() {
            return Err(SalError::non_finite(format!("loss at epoch {}", self.epoch)));
        }
        if !self.accuracy.is_finite() {
            return Err(SalError::non_finite(format!(
                "accuracy at epoch {}",
                self.epoch
            )));
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(SalError::Invalid(format!(
                "accuracy {} at epoch {} outside [0, 1]",
                self.accuracy, self.epoch
            )));
        }
        Ok(())
    }
}

/// True when `curr` improves on `prev` by more than both thresholds
/// (strict inequalities). With the accuracy condition disabled only the loss
/// condition applies.
pub fn is_improvement(curr: &EpochMetrics, prev: &EpochMetrics, cfg: &SalConfig) -> Result<bool> {
    curr.validate()?;
    prev.validate()?;
    if prev.epoch >= curr.epoch {
        return Err(SalError::Invalid(format!(
            "previous epoch {} is not before current epoch {}",
            prev.epoch, curr.epoch
        )));
    }
    Ok(improvement_against(curr, prev.loss, prev.accuracy, cfg))
}

/// Improvement test for the first epoch, where the history is
/// `loss = +inf`, `accuracy = 0`.
pub fn is_first_improvement(curr: &EpochMetrics, cfg: &SalConfig) -> Result<bool> {
    curr.validate()?;
    Ok(improvement_against(curr, f64::INFINITY, 0.0, cfg))
}

fn improvement_against(curr: &EpochMetrics, prev_loss: f64, prev_acc: f64, cfg: &SalConfig) -> bool {
    let loss_ok = prev_loss - curr.loss > cfg.eps_loss;
    let acc_ok = !cfg.accuracy_condition_enabled || curr.accuracy - prev_acc > cfg.eps_acc;
    loss_ok && acc_ok
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressState {
    s_g: f64,
    s_max: f64,
    last_update_epoch: u64,
}

impl StressState {
    pub fn new(s_max: f64) -> Result<Self> {
        if !(s_max.is_finite() && s_max > 0.0) {
            return Err(SalError::Config(format!("s_max must be > 0, got {s_max}")));
        }
        Ok(Self {
            s_g: 0.0,
            s_max,
            last_update_epoch: 0,
        })
    }

    pub fn from_config(cfg: &SalConfig) -> Result<Self> {
        Self::new(cfg.s_max)
    }

    pub fn stress(&self) -> f64 {
        self.s_g
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Number of stress updates applied so far.
    pub fn last_update_epoch(&self) -> u64 {
        self.last_update_epoch
    }

    pub fn update(&mut self, improved: bool, cfg: &SalConfig) {
        *self = update_stress(*self, improved, cfg);
    }

    /// Plastic reset.
    pub fn reset(&mut self) {
        self.s_g = 0.0;
    }
}

pub fn update_stress(state: StressState, improved: bool, cfg: &SalConfig) -> StressState {
    let s_g = if improved {
        (state.s_g - cfg.rho).max(0.0)
    } else {
        (state.s_g + cfg.theta).min(state.s_max)
    };
    StressState {
        s_g,
        s_max: state.s_max,
        last_update_epoch: state.last_update_epoch + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    Warmup,
    Elastic,
    NoiseZone,
    PlasticZone,
}

pub fn classify_regime(state: &StressState, epoch: u64, cfg: &SalConfig) -> Regime {
    let s = state.stress();
    if epoch <= cfg.warmup_epochs {
        Regime::Warmup
    } else if s >= cfg.s_yield {
        Regime::PlasticZone
    } else if s > cfg.s_noise {
        Regime::NoiseZone
    } else {
        Regime::Elastic
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(epoch: u64, loss: f64, acc: f64) -> EpochMetrics {
        EpochMetrics::new(epoch, loss, acc).unwrap()
    }

    fn state_at(s_g: f64) -> StressState {
        StressState {
            s_g,
            s_max: 1.0,
            last_update_epoch: 0,
        }
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = SalConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.rho, 0.0005);
        assert_eq!(cfg.theta, 0.005);
        assert_eq!(cfg.s_noise, 0.005);
        assert_eq!(cfg.s_yield, 0.01);
        assert_eq!(cfg.delta, 1e-7);
        assert_eq!(cfg.lambda, 1e-5);
        assert_eq!(cfg.warmup_epochs, 15);
        assert_eq!(cfg.plastic_layer_count, 3);
        SalConfig::disabled().validate().unwrap();
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let cfg = SalConfig {
            s_noise: 0.02,
            ..SalConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SalConfig {
            s_yield: 2.0,
            ..SalConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn improvement_requires_both_conditions() {
        let cfg = SalConfig::default();
        assert!(is_improvement(&m(2, 0.90, 0.55), &m(1, 1.0, 0.50), &cfg).unwrap());
        assert!(!is_improvement(&m(2, 0.99, 0.50), &m(1, 1.0, 0.50), &cfg).unwrap());
        assert!(!is_improvement(&m(2, 1.0, 0.60), &m(1, 1.0, 0.50), &cfg).unwrap());
    }

    #[test]
    fn loss_only_improvement() {
        let cfg = SalConfig {
            accuracy_condition_enabled: false,
            ..SalConfig::default()
        };
        assert!(is_improvement(&m(2, 0.99, 0.50), &m(1, 1.0, 0.50), &cfg).unwrap());
        assert!(!is_improvement(&m(2, 1.0, 0.60), &m(1, 1.0, 0.50), &cfg).unwrap());
    }

    #[test]
    fn non_finite_metrics_rejected() {
        let cfg = SalConfig::default();
        let bad = EpochMetrics {
            epoch: 2,
            loss: f64::NAN,
            accuracy: 0.5,
        };
        assert!(is_improvement(&bad, &m(1, 1.0, 0.5), &cfg).is_err());
        assert!(EpochMetrics::new(1, f64::INFINITY, 0.5).is_err());
        assert!(is_improvement(&m(1, 1.0, 0.5), &m(1, 1.0, 0.5), &cfg).is_err());
    }

    #[test]
    fn first_epoch_compares_against_infinite_loss() {
        let cfg = SalConfig::default();
        assert!(is_first_improvement(&m(1, 5.0, 0.2), &cfg).unwrap());
        assert!(!is_first_improvement(&m(1, 5.0, 0.0), &cfg).unwrap());
    }

    #[test]
    fn update_examples() {
        let cfg = SalConfig::default();
        let s = update_stress(state_at(0.004), false, &cfg);
        assert!((s.stress() - 0.009).abs() < 1e-15);
        let s = update_stress(state_at(0.0003), true, &cfg);
        assert_eq!(s.stress(), 0.0);
        let s = update_stress(state_at(0.998), false, &cfg);
        assert_eq!(s.stress(), 1.0);
        assert_eq!(s.last_update_epoch(), 1);
    }

    #[test]
    fn regime_examples() {
        let cfg = SalConfig::default();
        assert_eq!(classify_regime(&state_at(0.02), 10, &cfg), Regime::Warmup);
        assert_eq!(classify_regime(&state_at(0.007), 20, &cfg), Regime::NoiseZone);
        assert_eq!(classify_regime(&state_at(0.012), 20, &cfg), Regime::PlasticZone);
        assert_eq!(classify_regime(&state_at(0.01), 20, &cfg), Regime::PlasticZone);
        assert_eq!(classify_regime(&state_at(0.005), 20, &cfg), Regime::Elastic);
        assert_eq!(classify_regime(&state_at(0.0), 16, &cfg), Regime::Elastic);
    }

    #[test]
    fn stagnation_from_zero() {
        let cfg = SalConfig::default();
        let mut s = StressState::new(1.0).unwrap();
        for k in 1..=300u32 {
            s.update(false, &cfg);
            let expected = (f64::from(k) * cfg.theta).min(1.0);
            assert!((s.stress() - expected).abs() < 1e-12, "k={k}");
        }
        assert_eq!(s.stress(), 1.0);
    }

    proptest! {
        #[test]
        fn stress_stays_clamped(flags in proptest::collection::vec(any::<bool>(), 0..500)) {
            let cfg = SalConfig::default();
            let mut s = StressState::new(cfg.s_max).unwrap();
            for f in flags {
                let before = s.stress();
                s.update(f, &cfg);
                prop_assert!((0.0..=cfg.s_max).contains(&s.stress()));
                if f && before >= cfg.rho {
                    prop_assert_eq!(s.stress(), before - cfg.rho);
                } else if !f && before + cfg.theta <= cfg.s_max {
                    prop_assert_eq!(s.stress(), before + cfg.theta);
                }
            }
        }

        #[test]
        fn regime_monotone_in_stress(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let cfg = SalConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = classify_regime(&state_at(lo), 100, &cfg);
            let r_hi = classify_regime(&state_at(hi), 100, &cfg);
            prop_assert!(r_lo <= r_hi);
        }
    }
}
