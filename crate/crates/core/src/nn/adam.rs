use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Gradients, Mlp};
use crate::error::{check_dim, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
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

/// Bias-corrected Adam update on one parameter group. `step` is the 1-based
/// step index after incrementing.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for (((p, &g), mi), vi) in params
        .iter_mut()
        .zip(grads)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Adam moments for every layer of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Dense>,
    pub second: Vec<Dense>,
}

impl AdamState {
    pub fn new(model: &Mlp, config: AdamConfig) -> Self {
        let zeros: Vec<Dense> = model
            .layers()
            .iter()
            .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
            .collect();
        AdamState {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<()> {
        check_dim("adam layers", self.first.len(), grads.layers.len())?;
        check_dim("adam model", self.first.len(), model.layers().len())?;
        self.step += 1;
        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            check_dim("adam layer size", layer.weight.len(), g.weight.len())?;
            // Products such as `aᵀ·b` may come back column-major.
            let gw = g.weight.as_standard_layout();
            adam_update(
                layer.weight.as_slice_mut().expect("standard layout"),
                gw.as_slice().expect("standard layout"),
                m.weight.as_slice_mut().expect("standard layout"),
                v.weight.as_slice_mut().expect("standard layout"),
                self.step,
                &self.config,
            );
            adam_update(
                layer.bias.as_slice_mut().expect("standard layout"),
                g.bias.as_slice().expect("standard layout"),
                m.bias.as_slice_mut().expect("standard layout"),
                v.bias.as_slice_mut().expect("standard layout"),
                self.step,
                &self.config,
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model =
            Mlp::new(&[3, 4, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let before = model.clone();
        let mut adam = AdamState::new(&model, AdamConfig::default());
        let g = Gradients::zeros_like(&model);
        for _ in 0..5 {
            adam.step(&mut model, &g).unwrap();
        }
        assert_eq!(model, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g|+ε).
        let cfg = AdamConfig::with_lr(0.01);
        for g in [0.5, -3.0, 1e-3] {
            let mut p = [1.0];
            let (mut m, mut v) = ([0.0], [0.0]);
            adam_update(&mut p, &[g], &mut m, &mut v, 1, &cfg);
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!(
                (p[0] - expected).abs() < 1e-15,
                "{g}: {} vs {expected}",
                p[0]
            );
        }
    }

    #[test]
    fn parameter_groups_are_separable() {
        let cfg = AdamConfig::default();
        let mut joint = [0.3, -0.2];
        let (mut mj, mut vj) = ([0.0; 2], [0.0; 2]);
        let mut a = [0.3];
        let mut b = [-0.2];
        let (mut ma, mut va, mut mb, mut vb) = ([0.0], [0.0], [0.0], [0.0]);
        for step in 1..=10 {
            let g = [0.1 * step as f64, -0.7];
            adam_update(&mut joint, &g, &mut mj, &mut vj, step, &cfg);
            adam_update(&mut a, &g[..1], &mut ma, &mut va, step, &cfg);
            adam_update(&mut b, &g[1..], &mut mb, &mut vb, step, &cfg);
        }
        assert_eq!(joint, [a[0], b[0]]);
    }
}
