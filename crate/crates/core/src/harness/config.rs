//! Run configuration in a flat, sectioned key-value format.
//!
//! ```text
//! # comments start with '#' or ';'
//! [run]
//! name = two_moons
//! seed = 42
//! epochs = 100
//!
//! [task]
//! kind = classifier
//! dataset = two_moons
//! widths = 2,16,16,2
//!
//! [optimizer]
//! kind = adam
//! lr = 1e-3
//!
//! [sal]
//! warmup_epochs = 15
//! ```
//!
//! Every key is optional and falls back to the documented default, except
//! the task-specific keys noted on [`TaskConfig`]. Unknown sections or keys
//! are rejected. The echo written next to every run ([`RunConfig::to_ini`])
//! lists every resolved key and parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Result, SalError};
use crate::landscape::{make_double_well, LandscapeSpec, Well};
use crate::nn::{Activation, LossKind, OutputKind};
use crate::optim::{OptimizerConfig, OptimizerKind};
use crate::stress::SalConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitor {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LandscapeConfig {
    Quadratic {
        curvature: Vec<f64>,
    },
    Wells {
        wells: Vec<Well>,
    },
    DoubleWell {
        sharp_width: f64,
        flat_width: f64,
        separation: f64,
        sharp_depth: f64,
        flat_depth: f64,
        dim: usize,
    },
}

impl LandscapeConfig {
    pub fn build(&self) -> Result<LandscapeSpec> {
        match self {
            LandscapeConfig::Quadratic { curvature } => LandscapeSpec::quadratic(curvature.clone()),
            LandscapeConfig::Wells { wells } => LandscapeSpec::gaussian_wells(wells.clone()),
            LandscapeConfig::DoubleWell {
                sharp_width,
                flat_width,
                separation,
                sharp_depth,
                flat_depth,
                dim,
            } => make_double_well(
                *sharp_width,
                *flat_width,
                *separation,
                (*sharp_depth, *flat_depth),
                *dim,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeTask {
    pub landscape: LandscapeConfig,
    pub init: Vec<f64>,
    /// Std of the seeded Gaussian jitter added to `init`.
    pub init_jitter: f64,
    /// Gradient steps per epoch.
    pub steps_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetConfig {
    TwoMoons { samples: usize, noise: f64 },
    Csv { path: PathBuf, label_column: String, standardize: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTask {
    pub dataset: DatasetConfig,
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub output: OutputKind,
    pub loss: LossKind,
}

/// `kind = landscape` requires `landscape` plus its shape keys and `init`;
/// `kind = classifier` requires `dataset` (and `path` for CSV) and `widths`.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskConfig {
    Landscape(LandscapeTask),
    Classifier(ClassifierTask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub epochs: u64,
    pub batch_size: usize,
    pub sal_enabled: bool,
    pub output_dir: PathBuf,
    pub monitor: Monitor,
    pub validation_fraction: f64,
    /// Hutchinson trace every this many epochs (0: only at the end, if
    /// `trace_final`).
    pub trace_every: u64,
    pub trace_final: bool,
    pub trace_probes: usize,
    pub hvp_step: f64,
    pub record_trajectory: bool,
    pub task: TaskConfig,
    pub optimizer: OptimizerConfig,
    pub sal: SalConfig,
}

impl RunConfig {
    pub fn new(name: &str, task: TaskConfig) -> Self {
        let sal = match task {
            TaskConfig::Landscape(_) => SalConfig {
                accuracy_condition_enabled: false,
                ..SalConfig::default()
            },
            TaskConfig::Classifier(_) => SalConfig::default(),
        };
        Self {
            name: name.to_string(),
            seed: 0,
            epochs: 50,
            batch_size: 64,
            sal_enabled: true,
            output_dir: PathBuf::from("runs").join(name),
            monitor: Monitor::Train,
            validation_fraction: 0.0,
            trace_every: 0,
            trace_final: true,
            trace_probes: 100,
            hvp_step: 1e-4,
            record_trajectory: true,
            task,
            optimizer: OptimizerConfig::default(),
            sal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SalError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.monitor == Monitor::Validation && self.validation_fraction == 0.0 {
            return bad("monitor = validation needs validation_fraction > 0".into());
        }
        if self.trace_probes == 0 {
            return bad("trace_probes must be >= 1".into());
        }
        if !(self.hvp_step.is_finite() && self.hvp_step > 0.0) {
            return bad(format!("hvp_step must be > 0, got {}", self.hvp_step));
        }
        self.optimizer.validate()?;
        self.sal.validate()?;
        match &self.task {
            TaskConfig::Landscape(t) => {
                let spec = t.landscape.build()?;
                if t.init.len() != spec.dim() {
                    return bad(format!(
                        "init has {} coordinates, landscape has {}",
                        t.init.len(),
                        spec.dim()
                    ));
                }
                if t.steps_per_epoch == 0 {
                    return bad("steps_per_epoch must be >= 1".into());
                }
                if !(t.init_jitter.is_finite() && t.init_jitter >= 0.0) {
                    return bad("init_jitter must be >= 0".into());
                }
                if self.monitor == Monitor::Validation {
                    return bad("landscape tasks have no validation split".into());
                }
            }
            TaskConfig::Classifier(t) => {
                if t.widths.len() < 2 || t.widths.contains(&0) {
                    return bad(format!("invalid widths {:?}", t.widths));
                }
                if let DatasetConfig::TwoMoons { samples, noise } = t.dataset {
                    if samples < 2 || samples % 2 != 0 {
                        return bad(format!("two_moons samples must be even and >= 2, got {samples}"));
                    }
                    if !(noise.is_finite() && noise >= 0.0) {
                        return bad("two_moons noise must be >= 0".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SalError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, path, base)
    }

    /// Parses config text. `origin` labels errors; relative dataset paths are
    /// resolved against `base_dir`.
    pub fn parse(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let mut ini = Ini::parse(text, origin)?;
        let cfg = build_config(&mut ini, base_dir)?;
        ini.reject_leftovers()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully resolved configuration in the same format.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let o = &self.optimizer;
        let c = &self.sal;
        let _ = writeln!(s, "[run]");
        kv(&mut s, "name", &self.name);
        kv(&mut s, "seed", self.seed);
        kv(&mut s, "epochs", self.epochs);
        kv(&mut s, "batch_size", self.batch_size);
        kv(&mut s, "sal_enabled", self.sal_enabled);
        kv(&mut s, "output_dir", self.output_dir.display());
        kv(
            &mut s,
            "monitor",
            match self.monitor {
                Monitor::Train => "train",
                Monitor::Validation => "validation",
            },
        );
        kv(&mut s, "validation_fraction", self.validation_fraction);
        kv(&mut s, "trace_every", self.trace_every);
        kv(&mut s, "trace_final", self.trace_final);
        kv(&mut s, "trace_probes", self.trace_probes);
        kv(&mut s, "hvp_step", self.hvp_step);
        kv(&mut s, "record_trajectory", self.record_trajectory);
        s.push('\n');
        s.push_str(&self.task_ini());
        s.push('\n');
        let _ = writeln!(s, "[optimizer]");
        kv(&mut s, "kind", o.kind);
        kv(&mut s, "lr", o.lr);
        kv(&mut s, "beta1", o.beta1);
        kv(&mut s, "beta2", o.beta2);
        kv(&mut s, "eps", o.eps);
        kv(&mut s, "momentum", o.momentum);
        kv(&mut s, "rho", o.rho);
        s.push('\n');
        let _ = writeln!(s, "[sal]");
        kv(&mut s, "rho", c.rho);
        kv(&mut s, "theta", c.theta);
        kv(&mut s, "eps_loss", c.eps_loss);
        kv(&mut s, "eps_acc", c.eps_acc);
        kv(&mut s, "s_max", c.s_max);
        kv(&mut s, "s_noise", c.s_noise);
        kv(&mut s, "s_yield", c.s_yield);
        kv(&mut s, "delta", c.delta);
        kv(&mut s, "lambda", c.lambda);
        kv(&mut s, "warmup_epochs", c.warmup_epochs);
        kv(&mut s, "plastic_layer_count", c.plastic_layer_count);
        kv(&mut s, "plastic_retain", c.plastic_retain);
        kv(&mut s, "plastic_noise_param", c.plastic_noise_param);
        kv(&mut s, "plastic_noise_is_std", c.plastic_noise_is_std);
        kv(&mut s, "accuracy_condition_enabled", c.accuracy_condition_enabled);
        kv(&mut s, "revert_tolerance", c.revert_tolerance);
        kv(&mut s, "revert_patience", c.revert_patience);
        kv(&mut s, "reset_optimizer_on_intervention", c.reset_optimizer_on_intervention);
        s
    }

    /// The `[task]` section alone; two runs are comparable when these match.
    pub fn task_ini(&self) -> String {
        let mut s = String::from("[task]\n");
        match &self.task {
            TaskConfig::Landscape(t) => {
                kv(&mut s, "kind", "landscape");
                match &t.landscape {
                    LandscapeConfig::Quadratic { curvature } => {
                        kv(&mut s, "landscape", "quadratic");
                        kv(&mut s, "curvature", join(curvature));
                    }
                    LandscapeConfig::Wells { wells } => {
                        kv(&mut s, "landscape", "gaussian_wells");
                        kv(&mut s, "wells", wells.len());
                        for (i, w) in wells.iter().enumerate() {
                            kv(&mut s, &format!("well{i}.center"), join(&w.center));
                            kv(&mut s, &format!("well{i}.depth"), w.depth);
                            kv(&mut s, &format!("well{i}.width"), w.width);
                        }
                    }
                    LandscapeConfig::DoubleWell {
                        sharp_width,
                        flat_width,
                        separation,
                        sharp_depth,
                        flat_depth,
                        dim,
                    } => {
                        kv(&mut s, "landscape", "double_well");
                        kv(&mut s, "sharp_width", sharp_width);
                        kv(&mut s, "flat_width", flat_width);
                        kv(&mut s, "separation", separation);
                        kv(&mut s, "sharp_depth", sharp_depth);
                        kv(&mut s, "flat_depth", flat_depth);
                        kv(&mut s, "dim", dim);
                    }
                }
                kv(&mut s, "init", join(&t.init));
                kv(&mut s, "init_jitter", t.init_jitter);
                kv(&mut s, "steps_per_epoch", t.steps_per_epoch);
            }
            TaskConfig::Classifier(t) => {
                kv(&mut s, "kind", "classifier");
                match &t.dataset {
                    DatasetConfig::TwoMoons { samples, noise } => {
                        kv(&mut s, "dataset", "two_moons");
                        kv(&mut s, "samples", samples);
                        kv(&mut s, "noise", noise);
                    }
                    DatasetConfig::Csv {
                        path,
                        label_column,
                        standardize,
                    } => {
                        kv(&mut s, "dataset", "csv");
                        kv(&mut s, "path", path.display());
                        kv(&mut s, "label_column", label_column);
                        kv(&mut s, "standardize", standardize);
                    }
                }
                kv(&mut s, "widths", join(&t.widths));
                kv(
                    &mut s,
                    "activation",
                    match t.activation {
                        Activation::Relu => "relu",
                        Activation::Tanh => "tanh",
                    },
                );
                kv(
                    &mut s,
                    "output",
                    match t.output {
                        OutputKind::Softmax => "softmax",
                        OutputKind::Identity => "identity",
                    },
                );
                kv(
                    &mut s,
                    "loss",
                    match t.loss {
                        LossKind::CrossEntropy => "cross_entropy",
                        LossKind::Mse => "mse",
                    },
                );
            }
        }
        s
    }
}

fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{key} = {value}");
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

struct Entry {
    value: String,
    line: usize,
}

/// Parsed sections, consumed key by key.
struct Ini {
    origin: PathBuf,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Ini {
    fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| SalError::Parse {
            path: origin.into(),
            line,
            message,
        };
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw
                .split(['#', ';'])
                .next()
                .unwrap_or("")
                .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, format!("malformed section header {line:?}")))?
                    .trim()
                    .to_ascii_lowercase();
                if !matches!(name.as_str(), "run" | "task" | "optimizer" | "sal") {
                    return Err(err(line_no, format!("unknown section [{name}]")));
                }
                if sections.contains_key(&name) {
                    return Err(err(line_no, format!("section [{name}] appears twice")));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected key = value, got {line:?}")))?;
            let section = current
                .as_ref()
                .ok_or_else(|| err(line_no, "key outside of any section".into()))?;
            let key = key.trim().to_ascii_lowercase();
            let map = sections.get_mut(section).unwrap();
            if map.contains_key(&key) {
                return Err(err(line_no, format!("duplicate key {key:?} in [{section}]")));
            }
            map.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
        }
        Ok(Self {
            origin: origin.into(),
            sections,
        })
    }

    fn take_raw(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.sections.get_mut(section).and_then(|m| m.remove(key))
    }

    fn take<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.take_raw(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| SalError::Parse {
                path: self.origin.clone(),
                line: e.line,
                message: format!("invalid value {:?} for {section}.{key}", e.value),
            }),
        }
    }

    fn get_or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.take(section, key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T> {
        self.take(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    fn take_list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.take_raw(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|p| p.trim().parse::<T>())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| SalError::Parse {
                    path: self.origin.clone(),
                    line: e.line,
                    message: format!("invalid list {:?} for {section}.{key}", e.value),
                }),
        }
    }

    fn require_list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Vec<T>> {
        self.take_list(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    fn missing(&self, section: &str, key: &str) -> SalError {
        SalError::Config(format!(
            "{}: missing required key {section}.{key}",
            self.origin.display()
        ))
    }

    /// Case-insensitive choice among `options`, `default` when absent.
    fn choice_or<T: Copy>(&mut self, section: &str, key: &str, default: T, options: &[(&str, T)]) -> Result<T> {
        let Some(e) = self.take_raw(section, key) else {
            return Ok(default);
        };
        options
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(&e.value))
            .map(|(_, v)| *v)
            .ok_or_else(|| SalError::Parse {
                path: self.origin.clone(),
                line: e.line,
                message: format!(
                    "{section}.{key} must be one of {}, got {:?}",
                    options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join("|"),
                    e.value
                ),
            })
    }

    fn reject_leftovers(&self) -> Result<()> {
        for (section, keys) in &self.sections {
            if let Some((key, e)) = keys.iter().next() {
                return Err(SalError::Parse {
                    path: self.origin.clone(),
                    line: e.line,
                    message: format!("unknown key {key:?} in [{section}]"),
                });
            }
        }
        Ok(())
    }
}

/// Accepts `inf` for an unbounded warm-up.
struct Epochs(u64);

impl FromStr for Epochs {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Epochs(u64::MAX));
        }
        s.parse().map(Epochs).map_err(|_| ())
    }
}

fn build_task(ini: &mut Ini, base_dir: &Path) -> Result<TaskConfig> {
    let kind: String = ini.require("task", "kind")?;
    match kind.as_str() {
        "landscape" => {
            let which: String = ini.require("task", "landscape")?;
            let landscape = match which.as_str() {
                "quadratic" => LandscapeConfig::Quadratic {
                    curvature: ini.require_list("task", "curvature")?,
                },
                "gaussian_wells" => {
                    let count: usize = ini.require("task", "wells")?;
                    let mut wells = Vec::with_capacity(count);
                    for i in 0..count {
                        wells.push(Well {
                            center: ini.require_list("task", &format!("well{i}.center"))?,
                            depth: ini.require("task", &format!("well{i}.depth"))?,
                            width: ini.require("task", &format!("well{i}.width"))?,
                        });
                    }
                    LandscapeConfig::Wells { wells }
                }
                "double_well" => LandscapeConfig::DoubleWell {
                    sharp_width: ini.get_or("task", "sharp_width", 0.1)?,
                    flat_width: ini.get_or("task", "flat_width", 1.0)?,
                    separation: ini.get_or("task", "separation", 2.0)?,
                    sharp_depth: ini.get_or("task", "sharp_depth", 1.0)?,
                    flat_depth: ini.get_or("task", "flat_depth", 1.0)?,
                    dim: ini.get_or("task", "dim", 2)?,
                },
                other => {
                    return Err(SalError::Config(format!(
                        "task.landscape must be quadratic|gaussian_wells|double_well, got {other:?}"
                    )))
                }
            };
            Ok(TaskConfig::Landscape(LandscapeTask {
                landscape,
                init: ini.require_list("task", "init")?,
                init_jitter: ini.get_or("task", "init_jitter", 0.0)?,
                steps_per_epoch: ini.get_or("task", "steps_per_epoch", 1)?,
            }))
        }
        "classifier" => {
            let which: String = ini.require("task", "dataset")?;
            let dataset = match which.as_str() {
                "two_moons" => DatasetConfig::TwoMoons {
                    samples: ini.get_or("task", "samples", 400)?,
                    noise: ini.get_or("task", "noise", 0.1)?,
                },
                "csv" => {
                    let p: String = ini.require("task", "path")?;
                    let p = PathBuf::from(p);
                    DatasetConfig::Csv {
                        path: if p.is_absolute() { p } else { base_dir.join(p) },
                        label_column: ini.get_or("task", "label_column", "label".to_string())?,
                        standardize: ini.get_or("task", "standardize", true)?,
                    }
                }
                other => {
                    return Err(SalError::Config(format!(
                        "task.dataset must be two_moons|csv, got {other:?}"
                    )))
                }
            };
            Ok(TaskConfig::Classifier(ClassifierTask {
                dataset,
                widths: ini.require_list("task", "widths")?,
                activation: ini.choice_or(
                    "task",
                    "activation",
                    Activation::Relu,
                    &[("relu", Activation::Relu), ("tanh", Activation::Tanh)],
                )?,
                output: ini.choice_or(
                    "task",
                    "output",
                    OutputKind::Softmax,
                    &[("softmax", OutputKind::Softmax), ("identity", OutputKind::Identity)],
                )?,
                loss: ini.choice_or(
                    "task",
                    "loss",
                    LossKind::CrossEntropy,
                    &[("cross_entropy", LossKind::CrossEntropy), ("mse", LossKind::Mse)],
                )?,
            }))
        }
        other => Err(SalError::Config(format!(
            "task.kind must be landscape|classifier, got {other:?}"
        ))),
    }
}

fn build_config(ini: &mut Ini, base_dir: &Path) -> Result<RunConfig> {
    let task = build_task(ini, base_dir)?;
    let name: String = ini.get_or("run", "name", "run".to_string())?;
    let mut cfg = RunConfig::new(&name, task);
    cfg.seed = ini.get_or("run", "seed", cfg.seed)?;
    cfg.epochs = ini.get_or("run", "epochs", cfg.epochs)?;
    cfg.batch_size = ini.get_or("run", "batch_size", cfg.batch_size)?;
    cfg.sal_enabled = ini.get_or("run", "sal_enabled", cfg.sal_enabled)?;
    if let Some(dir) = ini.take::<String>("run", "output_dir")? {
        cfg.output_dir = PathBuf::from(dir);
    }
    cfg.monitor = ini.choice_or(
        "run",
        "monitor",
        Monitor::Train,
        &[("train", Monitor::Train), ("validation", Monitor::Validation)],
    )?;
    cfg.validation_fraction = ini.get_or("run", "validation_fraction", cfg.validation_fraction)?;
    cfg.trace_every = ini.get_or("run", "trace_every", cfg.trace_every)?;
    cfg.trace_final = ini.get_or("run", "trace_final", cfg.trace_final)?;
    cfg.trace_probes = ini.get_or("run", "trace_probes", cfg.trace_probes)?;
    cfg.hvp_step = ini.get_or("run", "hvp_step", cfg.hvp_step)?;
    cfg.record_trajectory = ini.get_or("run", "record_trajectory", cfg.record_trajectory)?;

    let kind: String = ini.get_or("optimizer", "kind", "adam".to_string())?;
    let kind: OptimizerKind = kind.parse()?;
    let lr = ini.get_or("optimizer", "lr", cfg.optimizer.lr)?;
    let mut o = OptimizerConfig::new(kind, lr);
    o.beta1 = ini.get_or("optimizer", "beta1", o.beta1)?;
    o.beta2 = ini.get_or("optimizer", "beta2", o.beta2)?;
    o.eps = ini.get_or("optimizer", "eps", o.eps)?;
    o.momentum = ini.get_or("optimizer", "momentum", o.momentum)?;
    o.rho = ini.get_or("optimizer", "rho", o.rho)?;
    cfg.optimizer = o;

    let c = &mut cfg.sal;
    c.rho = ini.get_or("sal", "rho", c.rho)?;
    c.theta = ini.get_or("sal", "theta", c.theta)?;
    c.eps_loss = ini.get_or("sal", "eps_loss", c.eps_loss)?;
    c.eps_acc = ini.get_or("sal", "eps_acc", c.eps_acc)?;
    c.s_max = ini.get_or("sal", "s_max", c.s_max)?;
    c.s_noise = ini.get_or("sal", "s_noise", c.s_noise)?;
    c.s_yield = ini.get_or("sal", "s_yield", c.s_yield)?;
    c.delta = ini.get_or("sal", "delta", c.delta)?;
    c.lambda = ini.get_or("sal", "lambda", c.lambda)?;
    c.warmup_epochs = ini.get_or("sal", "warmup_epochs", Epochs(c.warmup_epochs))?.0;
    c.plastic_layer_count = ini.get_or("sal", "plastic_layer_count", c.plastic_layer_count)?;
    c.plastic_retain = ini.get_or("sal", "plastic_retain", c.plastic_retain)?;
    c.plastic_noise_param = ini.get_or("sal", "plastic_noise_param", c.plastic_noise_param)?;
    c.plastic_noise_is_std = ini.get_or("sal", "plastic_noise_is_std", c.plastic_noise_is_std)?;
    c.accuracy_condition_enabled =
        ini.get_or("sal", "accuracy_condition_enabled", c.accuracy_condition_enabled)?;
    c.revert_tolerance = ini.get_or("sal", "revert_tolerance", c.revert_tolerance)?;
    c.revert_patience = ini.get_or("sal", "revert_patience", c.revert_patience)?;
    c.reset_optimizer_on_intervention = ini.get_or(
        "sal",
        "reset_optimizer_on_intervention",
        c.reset_optimizer_on_intervention,
    )?;
    Ok(cfg)
}
