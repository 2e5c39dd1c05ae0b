//! Central finite differences over model parameters and inputs.

use super::mlp::{Gradients, Mlp};

/// Central-difference estimate of ∂loss/∂θ for every parameter.
pub fn parameter_gradient<F>(model: &Mlp, h: f64, mut loss: F) -> Gradients
where
    F: FnMut(&Mlp) -> f64,
{
    let flat = model.flatten();
    let mut probe = model.clone();
    let mut estimate = Vec::with_capacity(flat.len());
    let mut shifted = flat.clone();
    for i in 0..flat.len() {
        shifted[i] = flat[i] + h;
        probe.set_flat(&shifted).expect("same shape");
        let up = loss(&probe);
        shifted[i] = flat[i] - h;
        probe.set_flat(&shifted).expect("same shape");
        let down = loss(&probe);
        shifted[i] = flat[i];
        estimate.push((up - down) / (2.0 * h));
    }
    let mut grads = Gradients::zeros_like(model);
    let mut it = estimate.into_iter();
    for l in &mut grads.layers {
        for w in l.weight.iter_mut() {
            *w = it.next().unwrap_or_default();
        }
        for b in l.bias.iter_mut() {
            *b = it.next().unwrap_or_default();
        }
    }
    grads
}

/// Central-difference estimate of ∂f/∂x for a scalar function of one input row.
pub fn input_gradient<F>(x: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a−b| / max(|a|, |b|, floor)`, maximised over entries.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
