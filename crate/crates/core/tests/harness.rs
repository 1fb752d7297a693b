use std::path::{Path, PathBuf};

use proptest::prelude::*;

use sal_core::harness::checkpoint::{decode, encode};
use sal_core::harness::config::{LandscapeConfig, LandscapeTask};
use sal_core::harness::{compare_runs, train_run, RunArtifact, RunConfig, RunStatus, TaskConfig};
use sal_core::nn::{Activation, LossKind, OutputKind};
use sal_core::harness::config::{ClassifierTask, DatasetConfig};
use sal_core::{OptimizerConfig, OptimizerKind, ParameterSet, SalConfig, Tensor};

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.ini"));
    RunConfig::load(&path).unwrap()
}

fn quadratic(epochs: u64, lr: f64) -> RunConfig {
    let mut cfg = RunConfig::new(
        "q",
        TaskConfig::Landscape(LandscapeTask {
            landscape: LandscapeConfig::Quadratic {
                curvature: vec![1.0, 2.0, 3.0],
            },
            init: vec![1.0, 1.0, 1.0],
            init_jitter: 0.0,
            steps_per_epoch: 1,
        }),
    );
    cfg.epochs = epochs;
    cfg.optimizer = OptimizerConfig::new(OptimizerKind::Sgd, lr);
    cfg
}

fn small_moons(epochs: u64) -> RunConfig {
    let mut cfg = config("two_moons");
    cfg.epochs = epochs;
    cfg
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["frozen", "quadratic", "two_moons", "double_well"] {
        let cfg = config(name);
        let back = RunConfig::parse(&cfg.to_ini(), Path::new("echo"), Path::new(".")).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "[run]\nname = x\nepochs = 3\n\n[task]\nkind = landscape\nlandscape = quadratic\ncurvature = 1\ninit = 1\nbogus = 2\n";
    match RunConfig::parse(text, Path::new("t.ini"), Path::new(".")) {
        Err(sal_core::SalError::Parse { line, .. }) => assert_eq!(line, 10),
        other => panic!("{other:?}"),
    }
    assert!(RunConfig::parse("[run]\nepochs = 0\n[task]\nkind = landscape\nlandscape = quadratic\ncurvature = 1\ninit = 1\n", Path::new("t"), Path::new(".")).is_err());
}

fn arb_sal() -> impl Strategy<Value = SalConfig> {
    (
        1e-6f64..0.1,
        1e-6f64..0.1,
        0.0f64..0.5,
        0.0f64..0.5,
        prop::option::of(0u64..100),
        1usize..5,
        0.01f64..=1.0,
        any::<bool>(),
        any::<bool>(),
        0u64..20,
    )
        .prop_map(|(rho, theta, s_noise, gap, warmup, count, retain, acc, reset, patience)| SalConfig {
            rho,
            theta,
            s_noise,
            s_yield: s_noise + gap + 1e-3,
            warmup_epochs: warmup.unwrap_or(u64::MAX),
            plastic_layer_count: count,
            plastic_retain: retain,
            accuracy_condition_enabled: acc,
            reset_optimizer_on_intervention: reset,
            revert_patience: patience,
            ..SalConfig::default()
        })
}

fn arb_task() -> impl Strategy<Value = TaskConfig> {
    let landscape = (prop::collection::vec(0.01f64..100.0, 1..6), 0.0f64..1.0, 1usize..50).prop_map(
        |(curvature, jitter, steps)| {
            let init = curvature.iter().map(|a| a - 1.0).collect();
            TaskConfig::Landscape(LandscapeTask {
                landscape: LandscapeConfig::Quadratic { curvature },
                init,
                init_jitter: jitter,
                steps_per_epoch: steps,
            })
        },
    );
    let classifier = (1usize..500, 0.0f64..1.0, prop::collection::vec(1usize..40, 2..6), any::<bool>()).prop_map(
        |(half, noise, widths, relu)| {
            TaskConfig::Classifier(ClassifierTask {
                dataset: DatasetConfig::TwoMoons {
                    samples: 2 * half,
                    noise,
                },
                widths,
                activation: if relu { Activation::Relu } else { Activation::Tanh },
                output: OutputKind::Softmax,
                loss: LossKind::CrossEntropy,
            })
        },
    );
    prop_oneof![landscape, classifier]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trips(
        task in arb_task(),
        sal in arb_sal(),
        seed in any::<u64>(),
        epochs in 1u64..10_000,
        batch in 1usize..512,
        kind in prop::sample::select(OptimizerKind::ALL.to_vec()),
        lr in 1e-6f64..1.0,
        enabled in any::<bool>(),
        trace_every in 0u64..50,
    ) {
        let mut cfg = RunConfig::new("prop", task);
        cfg.sal = sal;
        cfg.seed = seed;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.optimizer = OptimizerConfig::new(kind, lr);
        cfg.sal_enabled = enabled;
        cfg.trace_every = trace_every;
        prop_assert!(cfg.validate().is_ok());
        let back = RunConfig::parse(&cfg.to_ini(), Path::new("echo"), Path::new(".")).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn checkpoint_round_trips(
        entries in prop::collection::vec(
            ("[a-z][a-z0-9_.]{0,12}", prop::collection::vec(1usize..5, 0..3), any::<bool>(), any::<u64>()),
            0..6,
        )
    ) {
        let mut p = ParameterSet::new();
        let mut seen = std::collections::HashSet::new();
        for (name, shape, trainable, bits) in entries {
            if !seen.insert(name.clone()) {
                continue;
            }
            let n: usize = shape.iter().product();
            // Arbitrary bit patterns minus NaN, which has no bitwise identity.
            let values = (0..n as u64)
                .map(|i| f64::from_bits(bits.rotate_left(i as u32 * 7)))
                .map(|v| if v.is_nan() { -0.0 } else { v })
                .collect();
            p.push(name, Tensor::new(shape, values).unwrap(), trainable).unwrap();
        }
        let back = decode(&encode(&p)).unwrap();
        prop_assert!(back.bitwise_eq(&p));
        prop_assert_eq!(back, p);
    }
}

#[test]
fn checkpoint_rejects_corruption() {
    let p = ParameterSet::from_vector("w", vec![1.0, 2.0]);
    let bytes = encode(&p);
    assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode(&extra).is_err());
    let mut magic = bytes.clone();
    magic[0] ^= 1;
    assert!(decode(&magic).is_err());
}

#[test]
fn artifact_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    for (i, cfg) in [config("frozen"), config("double_well"), small_moons(5)].into_iter().enumerate() {
        let art = train_run(&cfg).unwrap();
        let out = dir.path().join(i.to_string());
        art.write(&out).unwrap();
        let back = RunArtifact::load(&out).unwrap();
        assert_eq!(back, art, "{}", cfg.name);
        for f in ["config.echo", "epochs.csv", "events.jsonl", "final.salckpt", "summary.json", "timing.csv"] {
            assert!(out.join(f).is_file(), "{f}");
        }
    }
}

#[test]
fn runs_are_deterministic() {
    for cfg in [config("double_well"), small_moons(20)] {
        let (a, b) = (train_run(&cfg).unwrap(), train_run(&cfg).unwrap());
        assert_eq!(a.epochs_csv(), b.epochs_csv());
        assert_eq!(a.events_jsonl().unwrap(), b.events_jsonl().unwrap());
        assert!(a.final_params.bitwise_eq(&b.final_params));
        assert_eq!(a.trajectory, b.trajectory);
    }
}

#[test]
fn seeds_change_the_run() {
    let mut cfg = small_moons(3);
    let a = train_run(&cfg).unwrap();
    cfg.seed += 1;
    let b = train_run(&cfg).unwrap();
    assert_ne!(a.epochs_csv(), b.epochs_csv());
}

#[test]
fn logged_stress_replays_exactly() {
    for cfg in [config("frozen"), config("quadratic"), config("double_well"), small_moons(40)] {
        let art = train_run(&cfg).unwrap();
        assert_eq!(art.check_stress_trace().unwrap(), None, "{}", cfg.name);
    }
}

#[test]
fn disabled_equals_infinite_thresholds() {
    for base in [config("double_well"), small_moons(30)] {
        let mut off = base.clone();
        off.sal_enabled = false;
        let mut inf = base.clone();
        inf.sal.s_noise = f64::INFINITY;
        inf.sal.s_yield = f64::INFINITY;
        let (a, b) = (train_run(&off).unwrap(), train_run(&inf).unwrap());
        assert!(a.events.is_empty() && b.events.is_empty());
        assert_eq!(a.epochs_csv(), b.epochs_csv());
        assert!(a.final_params.bitwise_eq(&b.final_params));
    }
}

#[test]
fn divergence_is_reported() {
    // lr * a = 30 on the stiffest axis: the iterate grows 29x per step.
    let cfg = quadratic(1000, 10.0);
    let art = train_run(&cfg).unwrap();
    assert_eq!(art.summary.status, RunStatus::Diverged);
    assert!((art.rows.len() as u64) < cfg.epochs);
    assert!(art.summary.failure.is_some());
    assert!(art.final_params.is_finite());
}

#[test]
fn compare_identical_runs_has_no_gaps() {
    let art = train_run(&small_moons(5)).unwrap();
    let r = compare_runs(&art, &art).unwrap();
    assert_eq!(r.epochs.len(), 5);
    assert!(r.epochs.iter().all(|g| g.accuracy_gap == 0.0 && g.loss_gap == 0.0));
    assert_eq!(r.final_loss_delta, 0.0);
    assert_eq!(r.final_accuracy_delta, 0.0);
}

#[test]
fn compare_rejects_mismatched_runs() {
    let a = train_run(&quadratic(5, 0.1)).unwrap();
    let b = train_run(&quadratic(6, 0.1)).unwrap();
    assert!(compare_runs(&a, &b).is_err());
    let c = train_run(&config("frozen")).unwrap();
    assert!(compare_runs(&a, &c).is_err());
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden")
}

/// The committed baseline/sal pair was produced by `sal train` on
/// `golden.ini`; retraining must reproduce it and the comparison must match
/// the committed report.
#[test]
fn golden_compare() {
    let dir = golden_dir();
    let cfg = RunConfig::load(&dir.join("golden.ini")).unwrap();
    let mut arts = Vec::new();
    for (arm, enabled) in [("baseline", false), ("sal", true)] {
        let stored = RunArtifact::load(&dir.join(arm)).unwrap();
        let mut c = cfg.clone();
        c.sal_enabled = enabled;
        c.output_dir = stored.config.output_dir.clone();
        let fresh = train_run(&c).unwrap();
        assert_eq!(fresh.epochs_csv(), stored.epochs_csv(), "{arm}");
        assert_eq!(fresh.events_jsonl().unwrap(), stored.events_jsonl().unwrap(), "{arm}");
        arts.push(stored);
    }
    let report = compare_runs(&arts[0], &arts[1]).unwrap();
    let text = std::fs::read_to_string(dir.join("compare.txt")).unwrap();
    let csv = std::fs::read_to_string(dir.join("compare.csv")).unwrap();
    assert_eq!(report.summary_text(), text);
    assert_eq!(report.to_csv(), csv);
}
