//! Adam optimizer keyed by parameter tensor name.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::ParamRef;

#[derive(Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    state: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            t: 0,
            state: BTreeMap::new(),
        }
    }

    /// Advance the step counter; call once per batch before `update`.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Apply one Adam update to a single tensor. Skipped tensors (frozen
    /// parameters) must simply not be passed in; their moments stay intact.
    pub fn update(&mut self, p: ParamRef<'_>) {
        let (m, v) = self
            .state
            .entry(p.name.clone())
            .or_insert_with(|| (vec![0.0; p.w.len()], vec![0.0; p.w.len()]));
        debug_assert_eq!(m.len(), p.w.len());
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..p.w.len() {
            let mut g = p.g[i];
            if self.weight_decay != 0.0 {
                g += self.weight_decay * p.w[i];
            }
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p.w[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
