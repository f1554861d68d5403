use serde::{Deserialize, Serialize};

use crate::layers::{Layer, ParamKind};
use crate::Scalar;

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
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam. Moment buffers are created on the first step and
/// matched to parameters by visiting order.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    /// `(name prefix, lr multiplier)`; the first matching prefix wins.
    groups: Vec<(String, f64)>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, groups: Vec::new(), m: Vec::new(), v: Vec::new() }
    }

    /// Scales the learning rate of every parameter whose name starts with
    /// `prefix`.
    pub fn with_group(mut self, prefix: &str, lr_multiplier: f64) -> Self {
        self.groups.push((prefix.to_string(), lr_multiplier));
        self
    }

    /// Applies one update from the accumulated gradients, then clears them.
    pub fn step(&mut self, model: &mut dyn Layer<T>) {
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = T::of(1.0 - c.beta1.powi(t));
        let bc2 = T::of(1.0 - c.beta2.powi(t));
        let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
        let (m_all, v_all, groups) = (&mut self.m, &mut self.v, &self.groups);
        let mut idx = 0;
        model.visit_mut(&mut |name, p, kind| {
            if kind != ParamKind::Trainable {
                return;
            }
            let scale = groups.iter().find(|(g, _)| name.starts_with(g.as_str())).map_or(1.0, |g| g.1);
            let lr = T::of(c.lr * scale);
            if idx == m_all.len() {
                m_all.push(vec![T::zero(); p.numel()]);
                v_all.push(vec![T::zero(); p.numel()]);
            }
            let (m, v) = (&mut m_all[idx], &mut v_all[idx]);
            assert_eq!(m.len(), p.numel(), "parameter layout changed between steps");
            for i in 0..p.numel() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p.data[i] -= lr * mh / (vh.sqrt() + eps);
                p.grad[i] = T::zero();
            }
            idx += 1;
        });
    }
}
