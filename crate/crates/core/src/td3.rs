//! Twin-delayed deterministic policy gradient over the normalized action box.
//!
//! All networks see actions in `[-1, 1]^d`; mapping to physical handover
//! parameters is the caller's job (see [`crate::action::ActionGrid::normalize`]).

use std::fs;
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::checkpoint::{adam_from_str, adam_to_string, mlp_from_str, mlp_to_string};
use crate::nn::{Activation, AdamConfig, AdamState, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub exploration_noise: f64,
    /// Actor and target networks update every this many critic updates.
    pub actor_period: u64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub grad_clip: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.1,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 2e-3,
            batch_size: 64,
            target_noise: 0.2,
            noise_clip: 0.5,
            exploration_noise: 0.1,
            actor_period: 3,
            actor_hidden: vec![128, 64, 32],
            critic_hidden: vec![64, 16, 4],
            grad_clip: 10.0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.batch_size == 0 || self.actor_period == 0 {
            return Err(Error::Config(
                "batch size and actor period must be positive".into(),
            ));
        }
        if !(self.target_noise >= 0.0 && self.noise_clip >= 0.0 && self.exploration_noise >= 0.0) {
            return Err(Error::Config("noise scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// A minibatch in network units: scaled states, normalized actions.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticLosses {
    pub critic1: f64,
    pub critic2: f64,
    /// Largest TD target in the batch.
    pub max_target: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStats {
    pub critic: CriticLosses,
    /// Present on steps where the actor was updated.
    pub actor: Option<ActorStats>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorStats {
    /// `−mean [Q₁(s, π(s)) − P(s, π(s))]` before the step.
    pub loss: f64,
    /// `mean Q₁(s, π(s))` before the step: the critic's own estimate.
    pub q: f64,
}

/// A known term `P(s, a)` subtracted from the learned value wherever the agent
/// scores an action it chooses itself: the smoothed target action and the
/// actor's own output.
pub trait ActionPenalty {
    /// Penalties per row and their gradients with respect to the action columns.
    fn penalty(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)>;
}

#[derive(Clone, Debug)]
pub struct Td3Agent {
    config: Td3Config,
    state_dim: usize,
    action_dim: usize,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    critic_updates: u64,
    actor_updates: u64,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        config: Td3Config,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let actor = Mlp::new(
            &widths(state_dim, &config.actor_hidden, action_dim),
            Activation::Relu,
            Activation::Tanh,
            rng,
        )?;
        let critic_widths = widths(state_dim + action_dim, &config.critic_hidden, 1);
        let critic1 = Mlp::new(&critic_widths, Activation::Relu, Activation::Identity, rng)?;
        let critic2 = Mlp::new(&critic_widths, Activation::Relu, Activation::Identity, rng)?;
        let actor_opt = AdamState::new(&actor, AdamConfig::with_lr(config.actor_lr));
        let critic1_opt = AdamState::new(&critic1, AdamConfig::with_lr(config.critic_lr));
        let critic2_opt = AdamState::new(&critic2, AdamConfig::with_lr(config.critic_lr));
        Ok(Td3Agent {
            state_dim,
            action_dim,
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            actor_opt,
            critic1_opt,
            critic2_opt,
            critic_updates: 0,
            actor_updates: 0,
            config,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Shifts the actor's output bias so that a zero pre-activation maps to
    /// `action` (normalized units) instead of the centre of the box.
    pub fn center_actor(&mut self, action: &[f64]) -> Result<()> {
        check_dim("actor centre", self.action_dim, action.len())?;
        for net in [&mut self.actor, &mut self.actor_target] {
            let last = net
                .layers_mut()
                .last_mut()
                .expect("actor has an output layer");
            for (b, &a) in last.bias.iter_mut().zip(action) {
                *b = a.clamp(-0.95, 0.95).atanh();
            }
        }
        Ok(())
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// Deterministic policy output π(s).
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_dim("state", self.state_dim, state.len())?;
        self.actor.forward_one(state)
    }

    /// `clip(π(s) + ε, −1, 1)` with `ε ~ N(0, σ²)` per dimension.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        sigma: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let mut a = self.act(state)?;
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            for x in &mut a {
                *x = (*x + noise.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    /// Smoothed target action `clip(π′(s′) + clip(ε, −c, c), −1, 1)`.
    pub fn target_action<R: Rng + ?Sized>(
        &self,
        next_states: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        let mut a = self.actor_target.forward(next_states)?;
        let (sigma, c) = (self.config.target_noise, self.config.noise_clip);
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            a.mapv_inplace(|x| (x + noise.sample(rng).clamp(-c, c)).clamp(-1.0, 1.0));
        } else {
            a.mapv_inplace(|x| x.clamp(-1.0, 1.0));
        }
        Ok(a)
    }

    fn critic_input(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array2<f64>> {
        concatenate(Axis(1), &[states, actions]).map_err(|e| Error::Domain(e.to_string()))
    }

    /// Q₁ estimates for a batch of (state, normalized action) rows.
    pub fn q1(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let x = Self::critic_input(states, actions)?;
        Ok(self.critic1.forward(x.view())?.column(0).to_owned())
    }

    /// Q₁ of one state against several normalized actions.
    pub fn q1_many(&self, state: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_dim("state", self.state_dim, state.len())?;
        let n = actions.len();
        let mut x = Array2::zeros((n, self.state_dim + self.action_dim));
        for (i, a) in actions.iter().enumerate() {
            check_dim("action", self.action_dim, a.len())?;
            let mut row = x.row_mut(i);
            for (j, v) in state.iter().chain(a).enumerate() {
                row[j] = *v;
            }
        }
        Ok(self.critic1.forward(x.view())?.column(0).to_vec())
    }

    /// TD targets `r + γ·min(Q₁′, Q₂′)(s′, a′)`.
    pub fn td_targets<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Array1<f64>> {
        self.td_targets_with(batch, rng, None)
    }

    /// TD targets `r + γ·[min(Q₁′, Q₂′)(s′, a′) − P(s′, a′)]`.
    pub fn td_targets_with<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        rng: &mut R,
        penalty: Option<&dyn ActionPenalty>,
    ) -> Result<Array1<f64>> {
        if self.config.gamma == 0.0 {
            return Ok(batch.rewards.clone());
        }
        let a_next = self.target_action(batch.next_states.view(), rng)?;
        let x = Self::critic_input(batch.next_states.view(), a_next.view())?;
        let q1 = self.critic1_target.forward(x.view())?;
        let q2 = self.critic2_target.forward(x.view())?;
        let p = match penalty {
            Some(p) => p.penalty(batch.next_states.view(), a_next.view())?.0,
            None => Array1::zeros(batch.len()),
        };
        let gamma = self.config.gamma;
        Ok(Array1::from_shape_fn(batch.len(), |i| {
            batch.rewards[i] + gamma * (q1[[i, 0]].min(q2[[i, 0]]) - p[i])
        }))
    }

    /// One gradient step on both critics toward the TD targets.
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<CriticLosses> {
        self.critic_update_with(batch, rng, None)
    }

    pub fn critic_update_with<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
        penalty: Option<&dyn ActionPenalty>,
    ) -> Result<CriticLosses> {
        self.check_batch(batch)?;
        let y = self.td_targets_with(batch, rng, penalty)?;
        let x = Self::critic_input(batch.states.view(), batch.actions.view())?;
        let clip = self.config.grad_clip;
        let m = batch.len() as f64;
        let mut losses = [0.0; 2];
        for (i, (critic, opt)) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ]
        .into_iter()
        .enumerate()
        {
            let (q, cache) = critic.forward_cached(x.view())?;
            let diff = &q.column(0) - &y;
            losses[i] = diff.mapv(|d| d * d).sum() / m;
            let grad_out = (diff * (2.0 / m)).insert_axis(Axis(1));
            let mut grads = critic.backward_params(&cache, grad_out.view())?;
            grads.clip_norm(clip);
            opt.step(critic, &grads)?;
        }
        self.critic_updates += 1;
        Ok(CriticLosses {
            critic1: losses[0],
            critic2: losses[1],
            max_target: y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// One gradient step on the actor maximizing `mean Q₁(s, π(s))`; returns
    /// the loss `−mean Q₁` measured before the step.
    pub fn actor_update(&mut self, states: ArrayView2<f64>) -> Result<f64> {
        Ok(self.actor_update_with(states, None)?.loss)
    }

    /// Actor step on `mean [Q₁(s, π(s)) − P(s, π(s))]`.
    pub fn actor_update_with(
        &mut self,
        states: ArrayView2<f64>,
        penalty: Option<&dyn ActionPenalty>,
    ) -> Result<ActorStats> {
        check_dim("state width", self.state_dim, states.ncols())?;
        if states.nrows() == 0 {
            return Err(Error::Empty("actor batch"));
        }
        let m = states.nrows() as f64;
        let (a, actor_cache) = self.actor.forward_cached(states)?;
        let x = Self::critic_input(states, a.view())?;
        let (q, critic_cache) = self.critic1.forward_cached(x.view())?;
        let q_mean = q.sum() / m;
        let mut loss = -q_mean;
        let grad_q = Array2::from_elem((states.nrows(), 1), -1.0 / m);
        let (_, grad_x) = self.critic1.backward(&critic_cache, grad_q.view())?;
        let mut grad_a = grad_x.slice(s![.., self.state_dim..]).to_owned();
        if let Some(p) = penalty {
            let (values, grad) = p.penalty(states, a.view())?;
            check_dim("penalty gradient rows", states.nrows(), grad.nrows())?;
            check_dim("penalty gradient width", self.action_dim, grad.ncols())?;
            loss += values.sum() / m;
            grad_a.scaled_add(1.0 / m, &grad);
        }
        let mut grads = self.actor.backward_params(&actor_cache, grad_a.view())?;
        grads.clip_norm(self.config.grad_clip);
        self.actor_opt.step(&mut self.actor, &grads)?;
        self.actor_updates += 1;
        Ok(ActorStats { loss, q: q_mean })
    }

    /// `θ′ ← τθ + (1−τ)θ′` for all three target networks.
    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.actor_target.soft_update_from(&self.actor, tau)?;
        self.critic1_target.soft_update_from(&self.critic1, tau)?;
        self.critic2_target.soft_update_from(&self.critic2, tau)?;
        Ok(())
    }

    /// Critic update, then every `actor_period` critic updates an actor update
    /// followed by a soft target update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<TrainStats> {
        self.train_step_with(batch, rng, None)
    }

    pub fn train_step_with<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
        penalty: Option<&dyn ActionPenalty>,
    ) -> Result<TrainStats> {
        let critic = self.critic_update_with(batch, rng, penalty)?;
        let actor = if self.critic_updates % self.config.actor_period == 0 {
            let stats = self.actor_update_with(batch.states.view(), penalty)?;
            self.soft_update(self.config.tau)?;
            Some(stats)
        } else {
            None
        };
        Ok(TrainStats { critic, actor })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Empty("minibatch"));
        }
        let n = batch.len();
        check_dim("state width", self.state_dim, batch.states.ncols())?;
        check_dim(
            "next-state width",
            self.state_dim,
            batch.next_states.ncols(),
        )?;
        check_dim("action width", self.action_dim, batch.actions.ncols())?;
        check_dim("action rows", n, batch.actions.nrows())?;
        check_dim("reward rows", n, batch.rewards.len())?;
        check_dim("next-state rows", n, batch.next_states.nrows())
    }

    pub fn networks(&self) -> [(&'static str, &Mlp); 6] {
        [
            ("actor", &self.actor),
            ("actor_target", &self.actor_target),
            ("critic1", &self.critic1),
            ("critic2", &self.critic2),
            ("critic1_target", &self.critic1_target),
            ("critic2_target", &self.critic2_target),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.networks().iter().all(|(_, m)| m.is_finite())
    }

    /// Writes the six networks, the three optimizer states, the configuration
    /// and a manifest listing every file's role.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = String::from("samro-td3 1\n");
        manifest.push_str(&format!(
            "state_dim {}\naction_dim {}\n",
            self.state_dim, self.action_dim
        ));
        manifest.push_str(&format!(
            "critic_updates {}\nactor_updates {}\n",
            self.critic_updates, self.actor_updates
        ));
        for (role, net) in self.networks() {
            let file = format!("{role}.mlp");
            fs::write(dir.join(&file), mlp_to_string(net))?;
            manifest.push_str(&format!("network {role} {file}\n"));
        }
        for (role, opt) in [
            ("actor", &self.actor_opt),
            ("critic1", &self.critic1_opt),
            ("critic2", &self.critic2_opt),
        ] {
            let file = format!("{role}.adam");
            fs::write(dir.join(&file), adam_to_string(opt))?;
            manifest.push_str(&format!("optimizer {role} {file}\n"));
        }
        let cfg = toml::to_string(&self.config).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("td3.toml"), cfg)?;
        manifest.push_str("config td3.toml\n");
        fs::write(dir.join("MANIFEST"), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("MANIFEST");
        if !manifest_path.exists() {
            return Err(Error::MissingArtifact {
                stage: "train-offline",
                what: "agent checkpoint",
                path: dir.display().to_string(),
            });
        }
        let manifest = fs::read_to_string(&manifest_path)?;
        let mut lines = manifest.lines();
        if lines.next() != Some("samro-td3 1") {
            return Err(Error::Parse("not a TD3 checkpoint manifest".into()));
        }
        let mut state_dim = None;
        let mut action_dim = None;
        let mut counters = (0, 0);
        let mut nets = std::collections::BTreeMap::new();
        let mut opts = std::collections::BTreeMap::new();
        let mut config = None;
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |v: &str| {
                v.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("{line}: {e}")))
            };
            match parts.as_slice() {
                ["state_dim", v] => state_dim = Some(parse(v)? as usize),
                ["action_dim", v] => action_dim = Some(parse(v)? as usize),
                ["critic_updates", v] => counters.0 = parse(v)?,
                ["actor_updates", v] => counters.1 = parse(v)?,
                ["network", role, file] => {
                    nets.insert(
                        role.to_string(),
                        mlp_from_str(&fs::read_to_string(dir.join(file))?)?,
                    );
                }
                ["optimizer", role, file] => {
                    opts.insert(
                        role.to_string(),
                        adam_from_str(&fs::read_to_string(dir.join(file))?)?,
                    );
                }
                ["config", file] => {
                    let text = fs::read_to_string(dir.join(file))?;
                    config = Some(
                        toml::from_str::<Td3Config>(&text)
                            .map_err(|e| Error::Parse(e.to_string()))?,
                    );
                }
                _ => return Err(Error::Parse(format!("unexpected manifest line `{line}`"))),
            }
        }
        let missing = |what: &str| Error::Parse(format!("checkpoint manifest lacks {what}"));
        let mut take_net = |role: &str| nets.remove(role).ok_or_else(|| missing(role));
        let actor = take_net("actor")?;
        let actor_target = take_net("actor_target")?;
        let critic1 = take_net("critic1")?;
        let critic2 = take_net("critic2")?;
        let critic1_target = take_net("critic1_target")?;
        let critic2_target = take_net("critic2_target")?;
        let mut take_opt = |role: &str| opts.remove(role).ok_or_else(|| missing(role));
        let agent = Td3Agent {
            config: config.ok_or_else(|| missing("config"))?,
            state_dim: state_dim.ok_or_else(|| missing("state_dim"))?,
            action_dim: action_dim.ok_or_else(|| missing("action_dim"))?,
            actor_opt: take_opt("actor")?,
            critic1_opt: take_opt("critic1")?,
            critic2_opt: take_opt("critic2")?,
            actor,
            actor_target,
            critic1,
            critic2,
            critic1_target,
            critic2_target,
            critic_updates: counters.0,
            actor_updates: counters.1,
        };
        check_dim("actor input", agent.state_dim, agent.actor.input_dim())?;
        check_dim("actor output", agent.action_dim, agent.actor.output_dim())?;
        check_dim(
            "critic input",
            agent.state_dim + agent.action_dim,
            agent.critic1.input_dim(),
        )?;
        Ok(agent)
    }
}
