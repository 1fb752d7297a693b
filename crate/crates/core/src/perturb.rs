//! Parameter interventions driven by the stress level: Gaussian noise
//! injection, plastic deformation of the tail entries, and reverting to the
//! yield-point snapshot.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SalError};
use crate::params::ParameterSet;
use crate::stress::{EpochMetrics, SalConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Noise,
    Plastic,
    Revert,
}

/// One logged intervention. Serialized as a JSON line
/// `{epoch, kind, sigma, layers, stress_before, stress_after}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEvent {
    pub epoch: u64,
    pub kind: EventKind,
    pub sigma: f64,
    pub layers: Vec<String>,
    pub stress_before: f64,
    pub stress_after: f64,
}

/// Weights saved at the moment a plastic event fires.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldSnapshot {
    pub params: ParameterSet,
    pub pre_event_loss: f64,
    pub event_epoch: u64,
}

/// `alpha * (delta + lambda * s_g)` with `alpha = min(1, s_g / s_yield)`.
pub fn noise_scale(s_g: f64, cfg: &SalConfig) -> Result<f64> {
    if cfg.s_yield.is_nan() || cfg.s_yield <= 0.0 {
        return Err(SalError::Config(format!(
            "s_yield must be > 0, got {}",
            cfg.s_yield
        )));
    }
    if s_g.is_nan() || s_g < 0.0 {
        return Err(SalError::Invalid(format!("stress must be >= 0, got {s_g}")));
    }
    let alpha = (s_g / cfg.s_yield).min(1.0);
    Ok(alpha * (cfg.delta + cfg.lambda * s_g))
}

/// Adds `sigma * z`, `z ~ N(0, 1)`, to every trainable value. Draws follow
/// entry order, then element order. On a non-finite result the parameters are
/// left untouched.
pub fn inject_noise<R: Rng + ?Sized>(
    params: &mut ParameterSet,
    sigma: f64,
    rng: &mut R,
) -> Result<()> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(SalError::Invalid(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let mut out = params.clone();
    for entry in out.entries_mut().iter_mut().filter(|e| e.trainable) {
        for w in entry.tensor.values_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w += sigma * z;
        }
    }
    out.check_finite("noise injection (sigma misconfigured?)")?;
    *params = out;
    Ok(())
}

/// Indices of the entries plastic deformation applies to: the last
/// `count` trainable entries, or all trainable entries when fewer exist.
pub fn plastic_targets(params: &ParameterSet, count: usize) -> Vec<usize> {
    let trainable = params.trainable_indices();
    let skip = trainable.len().saturating_sub(count);
    trainable[skip..].to_vec()
}

#[derive(Debug, Clone)]
pub struct PlasticOutcome {
    pub snapshot: YieldSnapshot,
    pub layers: Vec<String>,
    pub noise_std: f64,
}

/// Snapshots the parameters, then rewrites each target entry as
/// `retain * w + N(0, std^2)`.
pub fn plastic_deform<R: Rng + ?Sized>(
    params: &mut ParameterSet,
    cfg: &SalConfig,
    rng: &mut R,
    pre_event_loss: f64,
    event_epoch: u64,
) -> Result<PlasticOutcome> {
    let snapshot = YieldSnapshot {
        params: params.clone(),
        pre_event_loss,
        event_epoch,
    };
    let targets = plastic_targets(params, cfg.plastic_layer_count);
    if targets.is_empty() {
        return Err(SalError::Invalid(
            "plastic deformation needs at least one trainable entry".into(),
        ));
    }
    if targets.len() < cfg.plastic_layer_count {
        log::debug!(
            "plastic deformation asked for {} trainable entries, only {} exist; deforming all",
            cfg.plastic_layer_count,
            targets.len()
        );
    }
    let std = cfg.plastic_noise_std();
    let mut out = params.clone();
    let mut layers = Vec::with_capacity(targets.len());
    for &i in &targets {
        let entry = &mut out.entries_mut()[i];
        layers.push(entry.name.clone());
        for w in entry.tensor.values_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = cfg.plastic_retain * *w + std * z;
        }
    }
    out.check_finite("plastic deformation")?;
    *params = out;
    Ok(PlasticOutcome {
        snapshot,
        layers,
        noise_std: std,
    })
}

/// Revert decision, taken once `revert_patience` epochs have elapsed since
/// the plastic event.
pub fn should_revert(post: &EpochMetrics, snapshot: &YieldSnapshot, cfg: &SalConfig) -> bool {
    let elapsed = post.epoch.saturating_sub(snapshot.event_epoch);
    post.epoch > snapshot.event_epoch
        && elapsed >= cfg.revert_patience
        && post.loss > snapshot.pre_event_loss * (1.0 + cfg.revert_tolerance)
}

/// Restores the snapshot weights bitwise and returns the `Revert` event.
pub fn revert_to_yield(
    params: &mut ParameterSet,
    snapshot: Option<&YieldSnapshot>,
    epoch: u64,
    stress: f64,
) -> Result<InterventionEvent> {
    let snapshot = snapshot.ok_or(SalError::NoSnapshot)?;
    if !params.same_layout(&snapshot.params) {
        return Err(SalError::Shape(
            "yield snapshot layout differs from live parameters".into(),
        ));
    }
    *params = snapshot.params.clone();
    Ok(InterventionEvent {
        epoch,
        kind: EventKind::Revert,
        sigma: 0.0,
        layers: params.entries().iter().map(|e| e.name.clone()).collect(),
        stress_before: stress,
        stress_after: stress,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Tensor;
    use crate::rng::SalRng;
    use rand::SeedableRng;

    fn layered(n_layers: usize, width: usize, value: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        for i in 0..n_layers {
            p.push(
                format!("layer{i}"),
                Tensor::new(vec![width], vec![value; width]).unwrap(),
                true,
            )
            .unwrap();
        }
        p
    }

    fn sample_std(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn noise_scale_examples() {
        let cfg = SalConfig::default();
        assert!((noise_scale(0.005, &cfg).unwrap() - 7.5e-8).abs() < 1e-22);
        assert!((noise_scale(0.01, &cfg).unwrap() - 2.0e-7).abs() < 1e-22);
        assert_eq!(noise_scale(0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn noise_scale_rejects_bad_yield() {
        let cfg = SalConfig {
            s_yield: 0.0,
            ..SalConfig::default()
        };
        assert!(noise_scale(0.1, &cfg).is_err());
    }

    #[test]
    fn noise_scale_is_exact_past_yield() {
        let cfg = SalConfig::default();
        for s in [0.01, 0.02, 0.5, 1.0] {
            assert_eq!(noise_scale(s, &cfg).unwrap(), cfg.delta + cfg.lambda * s);
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut p = layered(2, 3, -0.0);
        let before = p.clone();
        inject_noise(&mut p, 0.0, &mut SalRng::seed_from_u64(1)).unwrap();
        assert!(p.bitwise_eq(&before));
    }

    #[test]
    fn noise_skips_frozen_entries() {
        let mut p = layered(1, 4, 1.0);
        p.push("frozen", Tensor::new(vec![2], vec![3.0, 3.0]).unwrap(), false)
            .unwrap();
        inject_noise(&mut p, 0.5, &mut SalRng::seed_from_u64(2)).unwrap();
        assert_eq!(p.get("frozen").unwrap().tensor.values(), &[3.0, 3.0]);
        assert!(p.get("layer0").unwrap().tensor.values().iter().all(|&v| v != 1.0));
    }

    #[test]
    fn noise_overflow_reported() {
        let mut p = layered(1, 4, f64::MAX);
        let before = p.clone();
        let err = inject_noise(&mut p, 1e308, &mut SalRng::seed_from_u64(3));
        assert!(err.is_err());
        assert!(p.bitwise_eq(&before));
    }

    #[test]
    fn noise_sample_std() {
        let mut p = layered(1, 10_000, 0.0);
        inject_noise(&mut p, 2e-7, &mut SalRng::seed_from_u64(11)).unwrap();
        let s = sample_std(p.entries()[0].tensor.values());
        assert!((s / 2e-7 - 1.0).abs() < 0.05, "std {s}");
    }

    #[test]
    fn plastic_contraction_without_noise() {
        let cfg = SalConfig {
            plastic_noise_param: 0.0,
            ..SalConfig::default()
        };
        let mut p = layered(5, 4, 1.0);
        let out = plastic_deform(&mut p, &cfg, &mut SalRng::seed_from_u64(0), 1.0, 20).unwrap();
        assert_eq!(out.layers, vec!["layer2", "layer3", "layer4"]);
        for e in &p.entries()[2..] {
            assert!(e.tensor.values().iter().all(|&v| v == 0.9));
        }
        for e in &p.entries()[..2] {
            assert!(e.tensor.values().iter().all(|&v| v == 1.0));
        }
        assert!(out.snapshot.params.bitwise_eq(&layered(5, 4, 1.0)));
    }

    #[test]
    fn plastic_scope_leaves_head_bitwise() {
        let cfg = SalConfig::default();
        let mut p = layered(6, 8, 0.3);
        inject_noise(&mut p, 0.1, &mut SalRng::seed_from_u64(5)).unwrap();
        let before = p.clone();
        plastic_deform(&mut p, &cfg, &mut SalRng::seed_from_u64(6), 0.5, 30).unwrap();
        for i in 0..3 {
            let (a, b) = (&before.entries()[i], &p.entries()[i]);
            assert!(a.tensor.values().iter().zip(b.tensor.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        for i in 3..6 {
            assert_ne!(before.entries()[i].tensor.values(), p.entries()[i].tensor.values());
        }
    }

    #[test]
    fn plastic_with_too_few_layers_applies_to_all() {
        let cfg = SalConfig {
            plastic_noise_param: 0.0,
            ..SalConfig::default()
        };
        let mut p = layered(2, 2, 1.0);
        let out = plastic_deform(&mut p, &cfg, &mut SalRng::seed_from_u64(0), 1.0, 20).unwrap();
        assert_eq!(out.layers.len(), 2);
        assert!(p.flatten().iter().all(|&v| v == 0.9));
    }

    #[test]
    fn plastic_noise_std_matches() {
        let cfg = SalConfig {
            plastic_retain: 0.9,
            plastic_layer_count: 1,
            ..SalConfig::default()
        };
        let mut p = layered(1, 10_000, 0.0);
        plastic_deform(&mut p, &cfg, &mut SalRng::seed_from_u64(12), 0.0, 16).unwrap();
        let s = sample_std(p.entries()[0].tensor.values());
        assert!((s / 0.02 - 1.0).abs() < 0.05, "std {s}");
    }

    #[test]
    fn variance_reading_of_plastic_param() {
        let cfg = SalConfig {
            plastic_noise_is_std: false,
            ..SalConfig::default()
        };
        assert!((cfg.plastic_noise_std() - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn revert_rules() {
        let cfg = SalConfig::default();
        let snap = YieldSnapshot {
            params: layered(1, 1, 0.0),
            pre_event_loss: 1.0,
            event_epoch: 20,
        };
        let post = |epoch, loss| EpochMetrics {
            epoch,
            loss,
            accuracy: 0.5,
        };
        assert!(should_revert(&post(21, 1.10), &snap, &cfg));
        assert!(!should_revert(&post(21, 0.95), &snap, &cfg));
        assert!(!should_revert(&post(21, 1.04), &snap, &cfg));
        let patient = SalConfig {
            revert_patience: 3,
            ..SalConfig::default()
        };
        assert!(!should_revert(&post(21, 2.0), &snap, &patient));
        assert!(should_revert(&post(23, 2.0), &snap, &patient));
    }

    #[test]
    fn deform_then_revert_round_trip() {
        let cfg = SalConfig::default();
        let mut p = layered(4, 5, 0.7);
        inject_noise(&mut p, 0.3, &mut SalRng::seed_from_u64(9)).unwrap();
        let original = p.clone();
        let out = plastic_deform(&mut p, &cfg, &mut SalRng::seed_from_u64(10), 2.0, 40).unwrap();
        assert!(!p.bitwise_eq(&original));
        let ev = revert_to_yield(&mut p, Some(&out.snapshot), 41, 0.0).unwrap();
        assert_eq!(ev.kind, EventKind::Revert);
        assert!(p.bitwise_eq(&original));
        revert_to_yield(&mut p, Some(&out.snapshot), 42, 0.0).unwrap();
        assert!(p.bitwise_eq(&original));
    }

    #[test]
    fn revert_without_snapshot_errors() {
        let mut p = layered(1, 1, 0.0);
        assert!(matches!(
            revert_to_yield(&mut p, None, 3, 0.0),
            Err(SalError::NoSnapshot)
        ));
    }

    #[test]
    fn revert_shape_mismatch_errors() {
        let snap = YieldSnapshot {
            params: layered(2, 2, 0.0),
            pre_event_loss: 0.0,
            event_epoch: 1,
        };
        let mut p = layered(2, 3, 0.0);
        assert!(revert_to_yield(&mut p, Some(&snap), 2, 0.0).is_err());
    }

    #[test]
    fn interventions_are_deterministic() {
        let cfg = SalConfig::default();
        let run = || {
            let mut p = layered(4, 16, 0.1);
            let mut rng = SalRng::seed_from_u64(77);
            inject_noise(&mut p, 1e-3, &mut rng).unwrap();
            plastic_deform(&mut p, &cfg, &mut rng, 1.0, 17).unwrap();
            p
        };
        assert!(run().bitwise_eq(&run()));
    }
}
