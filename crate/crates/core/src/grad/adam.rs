use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(invalid(format!("bad Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Adam with bias correction over the trainable entries of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Result<Self> {
        config.validate()?;
        let zeros = |s: &ParamStore| {
            s.iter()
                .map(|p| vec![0.0; p.value.len()])
                .collect::<Vec<_>>()
        };
        Ok(Adam {
            config,
            m: zeros(store),
            v: zeros(store),
            step: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            if !store.is_trainable(id) {
                continue;
            }
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let p = store.param_mut(id);
            let grad = p.grad.data().to_vec();
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
