//! First-order optimizers: SGD with momentum, Adam, Adamax, Nadam, RMSProp.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SalError};
use crate::params::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Adamax,
    Nadam,
    RmsProp,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Sgd,
        OptimizerKind::Adam,
        OptimizerKind::Adamax,
        OptimizerKind::Nadam,
        OptimizerKind::RmsProp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Adamax => "adamax",
            OptimizerKind::Nadam => "nadam",
            OptimizerKind::RmsProp => "rmsprop",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = SalError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            "adamax" => Ok(OptimizerKind::Adamax),
            "nadam" => Ok(OptimizerKind::Nadam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            other => Err(SalError::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// SGD only.
    pub momentum: f64,
    /// RMSProp decay.
    pub rho: f64,
}

impl OptimizerConfig {
    /// Defaults from the optimizers' original publications.
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.0,
            rho: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(SalError::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        for (name, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("momentum", self.momentum),
            ("rho", self.rho),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(SalError::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(SalError::Config(format!("eps must be >= 0, got {}", self.eps)));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::new(OptimizerKind::Adam, 1e-5)
    }
}

/// Step counter plus per-parameter moment buffers aligned with the entries of
/// the parameter set. `first` holds momentum / first moments, `second` holds
/// second moments (or the infinity norm for Adamax).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &ParameterSet) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Vec<f64>> = params
            .entries()
            .iter()
            .map(|e| vec![0.0; e.tensor.len()])
            .collect();
        Ok(Self {
            config,
            t: 0,
            first: zeros.clone(),
            second: zeros,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Zero all moment buffers and the step counter.
    pub fn reset_moments(&mut self) {
        self.t = 0;
        for buf in self.first.iter_mut().chain(self.second.iter_mut()) {
            buf.fill(0.0);
        }
    }

    /// One update of every trainable entry.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &ParameterSet) -> Result<()> {
        if !params.same_layout(grads) || params.len() != self.first.len() {
            return Err(SalError::Shape(
                "gradients, parameters and optimizer state are not aligned".into(),
            ));
        }
        grads.check_finite("optimizer gradient")?;
        self.t += 1;
        let c = &self.config;
        let t = self.t as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let bc1_next = 1.0 - c.beta1.powi(t + 1);

        for (i, entry) in params.entries_mut().iter_mut().enumerate() {
            if !entry.trainable {
                continue;
            }
            let g = grads.entries()[i].tensor.values();
            let w = entry.tensor.values_mut();
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            match c.kind {
                OptimizerKind::Sgd => {
                    if c.momentum == 0.0 {
                        for (wj, &gj) in w.iter_mut().zip(g) {
                            *wj -= c.lr * gj;
                        }
                    } else {
                        for ((wj, &gj), mj) in w.iter_mut().zip(g).zip(m.iter_mut()) {
                            *mj = c.momentum * *mj + gj;
                            *wj -= c.lr * *mj;
                        }
                    }
                }
                OptimizerKind::Adam => {
                    for j in 0..w.len() {
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        w[j] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                    }
                }
                OptimizerKind::Adamax => {
                    for j in 0..w.len() {
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                        v[j] = (c.beta2 * v[j]).max(g[j].abs());
                        w[j] -= (c.lr / bc1) * m[j] / (v[j] + c.eps);
                    }
                }
                OptimizerKind::Nadam => {
                    for j in 0..w.len() {
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                        let m_hat = c.beta1 * m[j] / bc1_next + (1.0 - c.beta1) * g[j] / bc1;
                        let v_hat = v[j] / bc2;
                        w[j] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                    }
                }
                OptimizerKind::RmsProp => {
                    for j in 0..w.len() {
                        v[j] = c.rho * v[j] + (1.0 - c.rho) * g[j] * g[j];
                        w[j] -= c.lr * g[j] / (v[j].sqrt() + c.eps);
                    }
                }
            }
        }
        params.check_finite("optimizer step")
    }
}
