//! Dense multilayer perceptron with batch-major evaluation.
//!
//! Inputs are `batch × features` matrices. Weights are stored `out × in` so a
//! layer computes `Z = X·Wᵀ + b`. Besides the usual parameter backward pass the
//! model exposes the input gradient of a scalar output and the parameter
//! gradient of a directional derivative along the input (double backprop),
//! which is what denoising score matching needs.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Softplus,
    /// `z²`. Smooth; lets a one-hidden-layer net represent quadratic energies exactly.
    Quadratic,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Quadratic => z * z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Softplus => sigmoid(z),
            Activation::Quadratic => 2.0 * z,
        }
    }

    /// Second derivative, `None` where it does not exist (ReLU kink).
    #[inline]
    pub fn second_derivative(self, z: f64) -> Option<f64> {
        match self {
            Activation::Identity => Some(0.0),
            Activation::Relu => None,
            Activation::Tanh => {
                let t = z.tanh();
                Some(-2.0 * t * (1.0 - t * t))
            }
            Activation::Softplus => {
                let s = sigmoid(z);
                Some(s * (1.0 - s))
            }
            Activation::Quadratic => Some(2.0),
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
            Activation::Quadratic => "quadratic",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "identity" | "linear" => Activation::Identity,
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "softplus" => Activation::Softplus,
            "quadratic" => Activation::Quadratic,
            other => return Err(Error::Parse(format!("unknown activation `{other}`"))),
        })
    }
}

/// One affine layer; `weight` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.input_dim(), self.output_dim())
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            layers: model.layers.iter().map(Dense::zeros_like).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weight
                    .iter()
                    .chain(l.bias.iter())
                    .map(|g| g * g)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight.mapv_inplace(|g| g * factor);
            l.bias.mapv_inplace(|g| g * factor);
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(factor, &b.weight);
            a.bias.scaled_add(factor, &b.bias);
        }
    }

    /// Rescales to `max_norm` when the global norm exceeds it. Returns the pre-clip norm.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|g| g.is_finite()))
    }
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

impl Mlp {
    /// Uniform fan-in initialisation `U(−1/√in, 1/√in)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Mlp::zeros(widths, hidden, output)?;
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.input_dim() as f64).sqrt();
            layer
                .weight
                .mapv_inplace(|_| rng.random_range(-bound..bound));
            layer.bias.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(model)
    }

    pub fn zeros(widths: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output widths, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!("zero-width layer in {widths:?}")));
        }
        let layers = widths
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(Mlp {
            layers,
            hidden,
            output,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            check_dim("layer bias", l.output_dim(), l.bias.len())?;
            if i > 0 {
                check_dim("layer chaining", layers[i - 1].output_dim(), l.input_dim())?;
            }
        }
        Ok(Mlp {
            layers,
            hidden,
            output,
        })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(Dense::output_dim));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|p| p.is_finite()))
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        check_dim("mlp input", self.input_dim(), x.ncols())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight.t());
            z += &layer.bias;
            let act = self.activation(l);
            if act != Activation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        Ok(h)
    }

    /// Single-sample convenience wrapper around [`Mlp::forward`].
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view =
            ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight.t());
            z += &layer.bias;
            let act = self.activation(l);
            let out = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok((h, ForwardCache { inputs, pre }))
    }

    /// Backpropagates `output_grad` (∂loss/∂output, `batch × out`) and returns the
    /// parameter gradients together with ∂loss/∂input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        check_dim("cache depth", self.layers.len(), cache.pre.len())?;
        check_dim(
            "output gradient width",
            self.output_dim(),
            output_grad.ncols(),
        )?;
        check_dim(
            "output gradient batch",
            cache.pre[0].nrows(),
            output_grad.nrows(),
        )?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_owned();
        for l in (0..self.layers.len()).rev() {
            let act = self.activation(l);
            let mut dz = upstream;
            if act != Activation::Identity {
                Zip::from(&mut dz)
                    .and(&cache.pre[l])
                    .for_each(|g, &z| *g *= act.derivative(z));
            }
            let weight = dz.t().dot(&cache.inputs[l]);
            let bias = dz.sum_axis(Axis(0));
            upstream = dz.dot(&self.layers[l].weight);
            grads.push(Dense { weight, bias });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    pub fn backward_params(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<Gradients> {
        Ok(self.backward(cache, output_grad)?.0)
    }

    fn require_scalar(&self) -> Result<()> {
        if self.output_dim() != 1 {
            return Err(Error::Unsupported(format!(
                "input gradient needs a scalar-output model, this one has {} outputs",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// ∇ₓ f(x) for every row of `x` (scalar-output models only).
    pub fn input_gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.require_scalar()?;
        let (_, cache) = self.forward_cached(x)?;
        let ones = Array2::ones((x.nrows(), 1));
        Ok(self.backward(&cache, ones.view())?.1)
    }

    /// Parameter gradient of `Σ_b ⟨v_b, ∇ₓ f(x_b)⟩` with `v` held fixed.
    ///
    /// Any loss that depends on the parameters only through the input gradient
    /// reduces to this: pass `v = ∂loss/∂(∇ₓ f)`. Computed by pushing the tangent
    /// `v` forward through the network and reverse-differentiating the resulting
    /// directional derivative.
    pub fn grad_through_input_gradient(
        &self,
        x: ArrayView2<f64>,
        v: ArrayView2<f64>,
    ) -> Result<Gradients> {
        self.require_scalar()?;
        if !self.hidden.is_smooth() {
            return Err(Error::Config(format!(
                "double backprop needs smooth hidden activations, got {}",
                self.hidden.name()
            )));
        }
        if self.output != Activation::Identity {
            return Err(Error::Config(format!(
                "double backprop supports a linear output only, got {}",
                self.output.name()
            )));
        }
        self.check_input(&x)?;
        check_dim("tangent width", x.ncols(), v.ncols())?;
        check_dim("tangent batch", x.nrows(), v.nrows())?;

        let n = self.layers.len();
        let act = self.hidden;
        // Forward primal (h, z) and tangent (ḣ, p = W ḣ_prev) passes.
        let mut h_in = Vec::with_capacity(n);
        let mut t_in = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n - 1);
        let mut ps = Vec::with_capacity(n - 1);
        let mut h = x.to_owned();
        let mut t = v.to_owned();
        for layer in &self.layers[..n - 1] {
            let mut z = h.dot(&layer.weight.t());
            z += &layer.bias;
            let p = t.dot(&layer.weight.t());
            let h_next = z.mapv(|v| act.apply(v));
            let mut t_next = p.clone();
            Zip::from(&mut t_next)
                .and(&z)
                .for_each(|tv, &zv| *tv *= act.derivative(zv));
            h_in.push(h);
            t_in.push(t);
            zs.push(z);
            ps.push(p);
            h = h_next;
            t = t_next;
        }
        h_in.push(h);
        t_in.push(t);

        let batch = x.nrows();
        let mut grads: Vec<Dense> = self.layers.iter().map(Dense::zeros_like).collect();
        // Output layer: D = ḣ_{L-1}·w_L, summed over the batch.
        let last = &self.layers[n - 1];
        grads[n - 1].weight = t_in[n - 1].sum_axis(Axis(0)).insert_axis(Axis(0));
        let w_last = last.weight.row(0);
        let mut t_bar = Array2::from_shape_fn((batch, last.input_dim()), |(_, j)| w_last[j]);
        let mut h_bar: Array2<f64> = Array2::zeros((batch, last.input_dim()));

        for l in (0..n - 1).rev() {
            let z = &zs[l];
            let p = &ps[l];
            let mut p_bar = t_bar.clone();
            let mut z_bar = Array2::zeros(z.raw_dim());
            Zip::from(&mut p_bar)
                .and(&mut z_bar)
                .and(&t_bar)
                .and(&h_bar)
                .and(z)
                .and(p)
                .for_each(|pb, zb, &tb, &hb, &zv, &pv| {
                    let d1 = act.derivative(zv);
                    let d2 = act.second_derivative(zv).unwrap_or(0.0);
                    *pb = tb * d1;
                    *zb = tb * pv * d2 + hb * d1;
                });
            let layer = &self.layers[l];
            let mut gw = p_bar.t().dot(&t_in[l]);
            gw += &z_bar.t().dot(&h_in[l]);
            grads[l].weight = gw;
            grads[l].bias = z_bar.sum_axis(Axis(0));
            if l > 0 {
                t_bar = p_bar.dot(&layer.weight);
                h_bar = z_bar.dot(&layer.weight);
            }
        }
        Ok(Gradients { layers: grads })
    }

    /// `self ← τ·source + (1−τ)·self`, parameter-wise.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        check_dim("soft update depth", self.layers.len(), source.layers.len())?;
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            if dst.weight.dim() != src.weight.dim() {
                return Err(Error::Dimension {
                    context: "soft update layer",
                    expected: dst.weight.len(),
                    got: src.weight.len(),
                });
            }
            Zip::from(&mut dst.weight)
                .and(&src.weight)
                .for_each(|d, &s| *d = tau * s + (1.0 - tau) * *d);
            Zip::from(&mut dst.bias)
                .and(&src.bias)
                .for_each(|d, &s| *d = tau * s + (1.0 - tau) * *d);
        }
        Ok(())
    }

    /// Euclidean distance between the parameter vectors of two equally shaped models.
    pub fn param_distance(&self, other: &Mlp) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| {
                a.weight
                    .iter()
                    .zip(b.weight.iter())
                    .chain(a.bias.iter().zip(b.bias.iter()))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Overwrites parameters from a flat vector in [`Mlp::flatten`] order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("flat parameters", self.n_params(), flat.len())?;
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = it.next().unwrap_or_default();
            }
            for b in l.bias.iter_mut() {
                *b = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_forward(model: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (l, layer) in model.layers().iter().enumerate() {
            let act = if l + 1 == model.layers().len() {
                model.output_activation()
            } else {
                model.hidden_activation()
            };
            let mut next = Vec::with_capacity(layer.output_dim());
            for o in 0..layer.output_dim() {
                let mut acc = layer.bias[o];
                for (i, hv) in h.iter().enumerate() {
                    acc += layer.weight[[o, i]] * hv;
                }
                next.push(act.apply(acc));
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = Mlp::zeros(&[3, 4, 2], Activation::Relu, Activation::Identity).unwrap();
        let y = m.forward(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_is_passthrough() {
        let layer = Dense {
            weight: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let m = Mlp::from_layers(vec![layer], Activation::Relu, Activation::Identity).unwrap();
        let x = array![[0.5, -1.5, 2.0]];
        assert_eq!(m.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn batched_forward_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for hidden in [Activation::Relu, Activation::Tanh, Activation::Softplus] {
            let m = Mlp::new(&[5, 8, 6, 3], hidden, Activation::Tanh, &mut rng).unwrap();
            let x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-2.0..2.0));
            let y = m.forward(x.view()).unwrap();
            for b in 0..4 {
                let naive = naive_forward(&m, x.row(b).as_slice().unwrap());
                for (o, v) in naive.iter().enumerate() {
                    assert!((y[[b, o]] - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = Mlp::zeros(&[3, 2], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(
            m.forward(array![[1.0, 2.0]].view()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(&[3, 5, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let x = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let (_, cache) = m.forward_cached(x.view()).unwrap();
        let g = m
            .backward_params(&cache, Array2::zeros((2, 2)).view())
            .unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn linear_scalar_model_input_gradient_is_weight() {
        let layer = Dense {
            weight: array![[0.5, -2.0, 3.0]],
            bias: array![1.0],
        };
        let m = Mlp::from_layers(vec![layer], Activation::Relu, Activation::Identity).unwrap();
        let g = m
            .input_gradient(array![[1.0, 1.0, 1.0], [4.0, 0.0, -3.0]].view())
            .unwrap();
        assert_eq!(g, array![[0.5, -2.0, 3.0], [0.5, -2.0, 3.0]]);
    }

    #[test]
    fn input_gradient_rejects_vector_output() {
        let m = Mlp::zeros(&[3, 2], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(
            m.input_gradient(array![[1.0, 2.0, 3.0]].view()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn constant_model_has_zero_input_gradient() {
        let mut m = Mlp::zeros(&[2, 4, 1], Activation::Softplus, Activation::Identity).unwrap();
        m.layers_mut()[1].bias[0] = 3.0;
        let g = m.input_gradient(array![[0.3, -0.7]].view()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn double_backprop_rejects_relu() {
        let m = Mlp::zeros(&[2, 4, 1], Activation::Relu, Activation::Identity).unwrap();
        let x = array![[0.1, 0.2]];
        assert!(matches!(
            m.grad_through_input_gradient(x.view(), x.view()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_tangent_gives_zero_double_backprop_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::new(
            &[3, 6, 1],
            Activation::Softplus,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let g = m
            .grad_through_input_gradient(x.view(), Array2::zeros((4, 3)).view())
            .unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn soft_update_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let b = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let mut t = b.clone();
        t.soft_update_from(&a, 0.0).unwrap();
        assert_eq!(t, b);
        t.soft_update_from(&a, 1.0).unwrap();
        assert_eq!(t, a);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Mlp::new(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let mut b = Mlp::zeros(&[3, 4, 2], Activation::Tanh, Activation::Identity).unwrap();
        b.set_flat(&a.flatten()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        assert_eq!(Activation::Softplus.apply(800.0), 800.0);
        assert!(Activation::Softplus.apply(-800.0) >= 0.0);
        assert!((Activation::Softplus.apply(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
