use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Adam {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        Adam {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update. `grads` must follow the store's parameter order.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), self.m.len(), "gradient list does not match parameter count");
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for (k, id) in ids.into_iter().enumerate() {
            let value = store.value_mut(id).data_mut();
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            assert_eq!(g.len(), value.len(), "gradient shape mismatch");
            for i in 0..value.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                value[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn store() -> ParamStore {
        let mut s = ParamStore::new("p");
        s.add("w", Tensor::matrix(1, 3, vec![1.0, -2.0, 0.5]).unwrap());
        s
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = store();
        let before = s.clone();
        let mut adam = Adam::new(&s, AdamConfig::default());
        adam.step(&mut s, &[vec![0.0; 3]]);
        assert_eq!(s, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut s = store();
        let mut adam = Adam::new(&s, AdamConfig::default());
        adam.step(&mut s, &[vec![3.0, -0.01, 100.0]]);
        let after = s.value(crate::ParamId(0)).data().to_vec();
        let expected = [1.0 - 2e-4, -2.0 + 2e-4, 0.5 - 2e-4];
        for (a, e) in after.iter().zip(expected) {
            assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut s = store();
            let mut adam = Adam::new(&s, AdamConfig::default());
            for k in 0..10 {
                let g = vec![k as f64 * 0.3 - 1.0, 0.2, -0.7];
                adam.step(&mut s, &[g]);
            }
            s
        };
        assert_eq!(run(), run());
    }
}
