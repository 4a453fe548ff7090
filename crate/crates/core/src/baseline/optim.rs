//! AdamW with a linear warmup schedule.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moment estimates, one pair per parameter.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, n_params: usize) -> Self {
        AdamW {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One update at 1-based step `t` with learning rate `lr`.
    ///
    /// Weight decay shrinks every parameter by `lr * weight_decay` directly;
    /// it never enters the moment estimates.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, t: usize) -> Result<()> {
        assert!(t >= 1, "steps are 1-based");
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                update: t,
                index,
                value: grad[index],
            });
        }
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let c1 = 1.0 - beta1.powi(t as i32);
        let c2 = 1.0 - beta2.powi(t as i32);
        let decay = 1.0 - lr * weight_decay;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AfterWarmup {
    #[default]
    Constant,
    LinearDecay,
}

/// Learning rate at 1-based update `t` of `total`: rises linearly from 0 to
/// `peak` over the first `warmup_fraction * total` updates, then stays
/// constant or decays linearly to 0.
pub fn learning_rate(
    peak: f64,
    warmup_fraction: f64,
    after: AfterWarmup,
    t: usize,
    total: usize,
) -> f64 {
    let warmup = warmup_fraction * total as f64;
    let t = t as f64;
    if t <= warmup {
        peak * t / warmup
    } else {
        match after {
            AfterWarmup::Constant => peak,
            AfterWarmup::LinearDecay => peak * (total as f64 - t).max(0.0) / (total as f64 - warmup),
        }
    }
}
