//! Energy-based density surrogate over (state, action) pairs, trained by
//! denoising score matching, and the reward penalty built on it.

use std::fs;
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::checkpoint::{adam_from_str, adam_to_string, mlp_from_str, mlp_to_string};
use crate::nn::{Activation, AdamConfig, AdamState, Gradients, Mlp};
use crate::td3::ActionPenalty;

/// How raw energies are shifted and scaled before entering the penalty,
/// using statistics of the data the model was fitted on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyNormalization {
    None,
    /// Subtract the data mean; energies stay in nats.
    Center,
    /// Subtract the data mean and divide by the data standard deviation.
    Standardize,
}

/// Where the energy penalty enters training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyMode {
    /// Only in the sampled rewards: `r′ = r − α·E(s, a)` at dataset actions.
    Reward,
    /// As a known term of the value: the critic learns the unpenalized part and
    /// `α·E` is subtracted at every action the agent scores itself.
    Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    /// Noise scale of the denoising objective.
    pub sigma: f64,
    /// Weight of the energy penalty in the regularized reward.
    pub alpha: f64,
    pub lr: f64,
    /// Refresh the energy model every this many online steps.
    pub refresh_period: u64,
    /// Minibatches per refresh.
    pub refresh_batches: usize,
    /// Minibatches for the initial fit on the offline data.
    pub pretrain_batches: usize,
    pub normalization: EnergyNormalization,
    pub grad_clip: f64,
    pub penalty: PenaltyMode,
    /// Pair every noise draw `ε` with `−ε`. Same expected loss, lower
    /// gradient variance at small `sigma` on low-dimensional inputs.
    pub antithetic: bool,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            hidden: vec![256, 64, 32],
            batch_size: 32,
            sigma: 0.1,
            alpha: 0.1,
            lr: 1e-3,
            refresh_period: 100,
            refresh_batches: 200,
            pretrain_batches: 2000,
            normalization: EnergyNormalization::Center,
            grad_clip: 10.0,
            penalty: PenaltyMode::Value,
            antithetic: false,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "energy noise scale must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.batch_size == 0 || self.refresh_period == 0 {
            return Err(Error::Config(
                "energy batch size and refresh period must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `r − α·E`.
pub fn regularize_reward(reward: f64, energy: f64, alpha: f64) -> f64 {
    reward - alpha * energy
}

/// Statistics of the energies of the fitted data. Penalties use energies
/// floored at `floor` (the data mean: pairs more typical than average are
/// not rewarded), then normalized with `mean` and `std` as configured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub mean: f64,
    pub std: f64,
    pub floor: f64,
}

impl Default for EnergyStats {
    fn default() -> Self {
        EnergyStats {
            mean: 0.0,
            std: 1.0,
            floor: f64::NEG_INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnergyNet {
    pub net: Mlp,
    opt: AdamState,
    config: EnergyConfig,
    stats: EnergyStats,
    batches_trained: u64,
}

/// Loss value and parameter gradient of one denoising score-matching batch.
#[derive(Clone, Debug)]
pub struct DeenLoss {
    pub loss: f64,
    pub grads: Gradients,
}

impl EnergyNet {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        config: EnergyConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![input_dim];
        widths.extend_from_slice(&config.hidden);
        widths.push(1);
        let net = Mlp::new(&widths, Activation::Softplus, Activation::Identity, rng)?;
        Self::from_model(net, config)
    }

    /// Wraps an existing scalar-output model.
    pub fn from_model(net: Mlp, config: EnergyConfig) -> Result<Self> {
        config.validate()?;
        check_dim("energy output", 1, net.output_dim())?;
        let opt = AdamState::new(&net, AdamConfig::with_lr(config.lr));
        Ok(EnergyNet {
            net,
            opt,
            config,
            stats: EnergyStats::default(),
            batches_trained: 0,
        })
    }

    pub fn config(&self) -> &EnergyConfig {
        &self.config
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.config.alpha = alpha;
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn stats(&self) -> EnergyStats {
        self.stats
    }

    pub fn batches_trained(&self) -> u64 {
        self.batches_trained
    }

    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward_one(x)?[0])
    }

    pub fn energies(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.net.forward(x)?.column(0).to_owned())
    }

    /// ∇ₓE for each row.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.input_gradient(x)
    }

    /// Denoising score-matching loss `mean ‖σ²∇E(x + ε) − ε‖²` for given noise
    /// draws, with its exact parameter gradient.
    pub fn deen_loss_with_noise(
        &self,
        x: ArrayView2<f64>,
        noise: ArrayView2<f64>,
    ) -> Result<DeenLoss> {
        if x.nrows() == 0 {
            return Err(Error::Empty("energy batch"));
        }
        check_dim("noise rows", x.nrows(), noise.nrows())?;
        check_dim("noise width", x.ncols(), noise.ncols())?;
        let s2 = self.config.sigma * self.config.sigma;
        let y = &x + &noise;
        let g = self.net.input_gradient(y.view())?;
        let residual = g * s2 - &noise;
        let n = x.nrows() as f64;
        let loss = residual.mapv(|r| r * r).sum() / n;
        let v = residual * (2.0 * s2 / n);
        let grads = self.net.grad_through_input_gradient(y.view(), v.view())?;
        Ok(DeenLoss { loss, grads })
    }

    pub fn deen_loss<R: Rng + ?Sized>(&self, x: ArrayView2<f64>, rng: &mut R) -> Result<DeenLoss> {
        let noise = self.draw_noise(x.nrows(), x.ncols(), rng)?;
        if self.config.antithetic {
            let xx = concatenate(Axis(0), &[x, x]).expect("equal widths");
            let nn = concatenate(Axis(0), &[noise.view(), (-&noise).view()]).expect("equal widths");
            self.deen_loss_with_noise(xx.view(), nn.view())
        } else {
            self.deen_loss_with_noise(x, noise.view())
        }
    }

    fn draw_noise<R: Rng + ?Sized>(
        &self,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        let normal =
            Normal::new(0.0, self.config.sigma).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Array2::from_shape_simple_fn((rows, cols), || {
            normal.sample(rng)
        }))
    }

    /// One Adam step on a minibatch; returns the loss before the step.
    pub fn train_batch<R: Rng + ?Sized>(&mut self, x: ArrayView2<f64>, rng: &mut R) -> Result<f64> {
        let DeenLoss { loss, mut grads } = self.deen_loss(x, rng)?;
        grads.clip_norm(self.config.grad_clip);
        self.opt.step(&mut self.net, &grads)?;
        self.batches_trained += 1;
        Ok(loss)
    }

    /// `n_batches` minibatches drawn uniformly with replacement from `data`,
    /// then recomputes the standardization statistics on `data`. Returns the
    /// mean loss.
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        data: ArrayView2<f64>,
        n_batches: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if data.nrows() == 0 {
            return Err(Error::Empty("energy training data"));
        }
        let mut total = 0.0;
        for _ in 0..n_batches {
            let idx: Vec<usize> = (0..self.config.batch_size)
                .map(|_| rng.random_range(0..data.nrows()))
                .collect();
            let batch = data.select(Axis(0), &idx);
            total += self.train_batch(batch.view(), rng)?;
        }
        self.calibrate(data)?;
        Ok(if n_batches == 0 {
            0.0
        } else {
            total / n_batches as f64
        })
    }

    /// Sets the standardization statistics from the energies of `data`.
    pub fn calibrate(&mut self, data: ArrayView2<f64>) -> Result<()> {
        let e = self.energies(data)?;
        let mean = e.mean().unwrap_or(0.0);
        let std = e.std(0.0);
        self.stats = EnergyStats {
            mean,
            std: if std > 1e-12 { std } else { 1.0 },
            floor: mean,
        };
        Ok(())
    }

    /// Energy as used in the penalty: floored, then normalized as configured.
    pub fn penalty_energies(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let floor = self.stats.floor;
        let (shift, scale) = self.affine();
        Ok(self.energies(x)?.mapv(|v| (v.max(floor) - shift) * scale))
    }

    fn affine(&self) -> (f64, f64) {
        let EnergyStats { mean, std, .. } = self.stats;
        match self.config.normalization {
            EnergyNormalization::None => (0.0, 1.0),
            EnergyNormalization::Center => (mean, 1.0),
            EnergyNormalization::Standardize => (mean, 1.0 / std),
        }
    }

    /// Standardized energies times α, with their gradient with respect to the
    /// trailing `action_dim` input columns.
    pub fn weighted_penalty(
        &self,
        x: ArrayView2<f64>,
        action_dim: usize,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        check_dim("energy input width", self.input_dim(), x.ncols())?;
        let alpha = self.config.alpha;
        let floor = self.stats.floor;
        let raw = self.energies(x)?;
        let e = self.penalty_energies(x)?.mapv(|v| alpha * v);
        let scale = alpha * self.affine().1;
        let split = x.ncols() - action_dim;
        let mut grad = self
            .score(x)?
            .slice(ndarray::s![.., split..])
            .mapv(|g| scale * g);
        for (mut row, &r) in grad.rows_mut().into_iter().zip(&raw) {
            if r < floor {
                row.fill(0.0);
            }
        }
        Ok((e, grad))
    }

    /// `r′ = r − α·E` for a batch; `x` rows are state ⊕ action in network units.
    pub fn regularize(&self, rewards: &Array1<f64>, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_dim("reward rows", x.nrows(), rewards.len())?;
        if self.config.alpha == 0.0 {
            return Ok(rewards.clone());
        }
        let e = self.penalty_energies(x)?;
        let alpha = self.config.alpha;
        Ok(Array1::from_shape_fn(rewards.len(), |i| {
            regularize_reward(rewards[i], e[i], alpha)
        }))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("energy.mlp"), mlp_to_string(&self.net))?;
        fs::write(dir.join("energy.adam"), adam_to_string(&self.opt))?;
        let cfg = toml::to_string(&self.config).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("energy.toml"), cfg)?;
        fs::write(
            dir.join("energy.stats"),
            format!(
                "{:?} {:?} {:?} {}\n",
                self.stats.mean, self.stats.std, self.stats.floor, self.batches_trained
            ),
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let model_path = dir.join("energy.mlp");
        if !model_path.exists() {
            return Err(Error::MissingArtifact {
                stage: "train-offline",
                what: "energy model",
                path: dir.display().to_string(),
            });
        }
        let net = mlp_from_str(&fs::read_to_string(model_path)?)?;
        let opt = adam_from_str(&fs::read_to_string(dir.join("energy.adam"))?)?;
        let config: EnergyConfig = toml::from_str(&fs::read_to_string(dir.join("energy.toml"))?)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let stats_text = fs::read_to_string(dir.join("energy.stats"))?;
        let fields: Vec<&str> = stats_text.split_whitespace().collect();
        let bad = || Error::Parse("malformed energy.stats".into());
        if fields.len() != 4 {
            return Err(bad());
        }
        Ok(EnergyNet {
            net,
            opt,
            config,
            stats: EnergyStats {
                mean: fields[0].parse().map_err(|_| bad())?,
                std: fields[1].parse().map_err(|_| bad())?,
                floor: fields[2].parse().map_err(|_| bad())?,
            },
            batches_trained: fields[3].parse().map_err(|_| bad())?,
        })
    }
}

impl ActionPenalty for EnergyNet {
    fn penalty(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        let x = ndarray::concatenate(Axis(1), &[states, actions])
            .map_err(|e| Error::Domain(e.to_string()))?;
        self.weighted_penalty(x.view(), actions.ncols())
    }
}
