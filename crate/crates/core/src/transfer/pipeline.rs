use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffers::{BetaSchedule, ReplayBuffers};
use super::record::{action_columns, Dataset, TransitionRecord};
use crate::action::{ActionGrid, ParamKind, QEvaluator};
use crate::energy::{EnergyNet, PenaltyMode};
use crate::env::{Awareness, Env};
use crate::error::{check_dim, Error, Result};
use crate::mdp::{FeatureScaling, SliceMetrics, StateLayout};
use crate::td3::{Batch, Td3Agent, TrainStats};

/// Conversion between physical records and network units.
#[derive(Clone, Debug, PartialEq)]
pub struct Units {
    pub layout: StateLayout,
    pub scaling: FeatureScaling,
    pub grid: ActionGrid,
}

impl Units {
    pub fn for_env(env: &Env, scaling: FeatureScaling) -> Self {
        Units {
            layout: env.layout(),
            scaling,
            grid: env.grid().clone(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn state(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.scaling.apply(&self.layout, raw)
    }

    pub fn action(&self, physical: &[f64]) -> Result<Vec<f64>> {
        self.grid.normalize(physical)
    }

    pub fn batch(&self, records: &[&TransitionRecord]) -> Result<Batch> {
        let (sd, ad, n) = (self.state_dim(), self.action_dim(), records.len());
        let mut states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        let mut next_states = Array2::zeros((n, sd));
        let mut rewards = Array1::zeros(n);
        for (i, r) in records.iter().enumerate() {
            states
                .row_mut(i)
                .assign(&Array1::from(self.state(&r.state)?));
            actions
                .row_mut(i)
                .assign(&Array1::from(self.action(&r.action)?));
            next_states
                .row_mut(i)
                .assign(&Array1::from(self.state(&r.next_state)?));
            rewards[i] = r.reward;
        }
        Ok(Batch {
            states,
            actions,
            rewards,
            next_states,
        })
    }

    /// Rows of `state ⊕ action` in network units, the energy model's input.
    pub fn energy_inputs<'a>(
        &self,
        records: impl IntoIterator<Item = &'a TransitionRecord>,
    ) -> Result<Array2<f64>> {
        let mut rows = Vec::new();
        let mut n = 0;
        for r in records {
            rows.extend(self.state(&r.state)?);
            rows.extend(self.action(&r.action)?);
            n += 1;
        }
        Array2::from_shape_vec((n, self.state_dim() + self.action_dim()), rows)
            .map_err(|e| Error::Domain(e.to_string()))
    }
}

/// One TD3 step with the energy penalty applied as configured.
fn penalized_step<R: Rng + ?Sized>(
    agent: &mut Td3Agent,
    energy: &EnergyNet,
    mut batch: Batch,
    rng: &mut R,
) -> Result<TrainStats> {
    if energy.config().alpha == 0.0 {
        return agent.train_step(&batch, rng);
    }
    match energy.config().penalty {
        PenaltyMode::Reward => {
            batch.rewards = energy.regularize(&batch.rewards, joint(&batch)?.view())?;
            agent.train_step(&batch, rng)
        }
        PenaltyMode::Value => agent.train_step_with(&batch, rng, Some(energy)),
    }
}

fn joint(batch: &Batch) -> Result<Array2<f64>> {
    concatenate(Axis(1), &[batch.states.view(), batch.actions.view()])
        .map_err(|e| Error::Domain(e.to_string()))
}

/// Scores operating actions with the agent's first critic.
pub struct CriticEvaluator<'a> {
    pub agent: &'a Td3Agent,
    pub units: &'a Units,
}

impl QEvaluator for CriticEvaluator<'_> {
    fn q_values(&self, state: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        let s = self.units.state(state)?;
        let a: Vec<Vec<f64>> = actions
            .iter()
            .map(|a| self.units.action(a))
            .collect::<Result<_>>()?;
        self.agent.q1_many(&s, &a)
    }
}

/// Spread of the biased behavior policy used for offline collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectionConfig {
    pub n_samples: usize,
    pub hom_mean_db: f64,
    pub hom_std_db: f64,
    pub ttt_mean_ms: f64,
    pub ttt_std_ms: f64,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        CollectionConfig {
            n_samples: 20_000,
            hom_mean_db: 0.0,
            hom_std_db: 3.0,
            ttt_mean_ms: 512.0,
            ttt_std_ms: 300.0,
        }
    }
}

/// Draws one biased proto action (before snapping).
pub fn draw_behavior_action<R: Rng + ?Sized>(
    grid: &ActionGrid,
    cfg: &CollectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let hom =
        Normal::new(cfg.hom_mean_db, cfg.hom_std_db).map_err(|e| Error::Config(e.to_string()))?;
    let ttt =
        Normal::new(cfg.ttt_mean_ms, cfg.ttt_std_ms).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..grid.dim())
        .map(|j| match grid.kind(j) {
            ParamKind::Margin => hom.sample(rng),
            ParamKind::TimeToTrigger => ttt.sample(rng),
        })
        .collect())
}

pub fn dataset_for(env: &Env) -> Dataset {
    let boundaries = env.world().boundaries();
    let layout = env.layout();
    let state_columns = layout
        .column_names(boundaries.pairs(), "")
        .expect("layout matches its own boundary set");
    let slices = match env.awareness() {
        Awareness::Slice => env.world().config().n_slices,
        Awareness::Agnostic => 1,
    };
    Dataset::new(state_columns, action_columns(boundaries.directed(), slices))
}

/// Runs the biased behavior policy for `n_samples` agent steps. Stored actions
/// are the snapped (grid) values.
pub fn collect_offline<R: Rng + ?Sized>(
    env: &mut Env,
    cfg: &CollectionConfig,
    rng: &mut R,
) -> Result<Dataset> {
    let mut data = dataset_for(env);
    for _ in 0..cfg.n_samples {
        let proto = draw_behavior_action(env.grid(), cfg, rng)?;
        let action = env.grid().snap_nearest(&proto)?;
        let state = env.state().to_vec();
        let out = env.step(&action)?;
        data.push(TransitionRecord {
            state,
            action,
            next_state: out.next_state,
            reward: out.reward,
        })?;
    }
    Ok(data)
}

/// Each record spawns `k` copies whose actions are drawn from the snapping
/// cells of the original grid action.
pub fn augment_dataset<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    grid: &ActionGrid,
    rng: &mut R,
) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Config(
            "augmentation factor must be at least 1".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    check_dim("dataset actions", grid.dim(), data.action_dim())?;
    let mut out = Dataset::new(data.state_columns.clone(), data.action_columns.clone());
    out.records.reserve(k * data.len());
    for r in &data.records {
        for action in grid.augment_continuous(&r.action, k, rng)? {
            out.records.push(TransitionRecord {
                state: r.state.clone(),
                action,
                next_state: r.next_state.clone(),
                reward: r.reward,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfflineConfig {
    pub epochs: usize,
    /// Overrides `epochs` with an exact number of minibatches when set.
    pub batches: Option<usize>,
    /// Start the actor at the dataset's mean action rather than the box centre.
    pub center_actor: bool,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            epochs: 20,
            batches: None,
            center_actor: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OfflineLog {
    pub energy_loss: f64,
    pub critic_loss: Vec<f64>,
    /// `(minibatch index, actor loss)` for every actor update.
    pub actor_loss: Vec<(usize, f64)>,
    /// `(minibatch index, mean critic estimate at the actor's actions)`.
    pub actor_q: Vec<(usize, f64)>,
    pub batches: usize,
}

/// Fits the energy model on the dataset's (s, a) pairs, then runs TD3 on
/// minibatches of the dataset with energy-regularized rewards. `observe` sees
/// the agent after every minibatch.
pub fn train_offline<R, F>(
    data: &Dataset,
    units: &Units,
    agent: &mut Td3Agent,
    energy: &mut EnergyNet,
    cfg: &OfflineConfig,
    rng: &mut R,
    mut observe: F,
) -> Result<OfflineLog>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &Td3Agent),
{
    if data.is_empty() {
        return Err(Error::Empty("offline dataset"));
    }
    let m = agent.config().batch_size;
    let mut log = OfflineLog::default();
    if cfg.center_actor {
        let actions = units
            .batch(&data.records.iter().collect::<Vec<_>>())?
            .actions;
        let mean = actions
            .mean_axis(Axis(0))
            .ok_or(Error::Empty("offline dataset"))?;
        agent.center_actor(mean.as_slice().expect("contiguous mean"))?;
    }
    if energy.config().alpha > 0.0 {
        let x = units.energy_inputs(&data.records)?;
        let pretrain = energy.config().pretrain_batches;
        log.energy_loss = energy.fit(x.view(), pretrain, rng)?;
    }
    let n_batches = cfg
        .batches
        .unwrap_or_else(|| cfg.epochs * data.len().div_ceil(m));
    for i in 0..n_batches {
        let picks: Vec<&TransitionRecord> = (0..m)
            .map(|_| &data.records[rng.random_range(0..data.len())])
            .collect();
        let batch = units.batch(&picks)?;
        let stats = penalized_step(agent, energy, batch, rng)?;
        log.critic_loss
            .push(0.5 * (stats.critic.critic1 + stats.critic.critic2));
        if let Some(a) = stats.actor {
            log.actor_loss.push((i, a.loss));
            log.actor_q.push((i, a.q));
        }
        observe(i, agent);
    }
    log.batches = n_batches;
    Ok(log)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineConfig {
    pub steps: usize,
    pub projection_k: usize,
    pub online_capacity: usize,
    pub beta: BetaSchedule,
    /// Refresh the energy model on offline ∪ online data (otherwise online only).
    pub refresh_on_union: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            steps: 1344,
            projection_k: 8,
            online_capacity: 100_000,
            beta: BetaSchedule::default(),
            refresh_on_union: true,
        }
    }
}

/// Per-step outcome recorded during fine-tuning and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLog {
    pub reward: f64,
    pub slice_reward: f64,
    pub metrics: Vec<SliceMetrics>,
    pub action: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OnlineLog {
    pub steps: Vec<StepLog>,
    /// β in force at each step.
    pub betas: Vec<f64>,
    /// Steps (1-based) after which the energy model was refreshed.
    pub refreshes: Vec<usize>,
    pub actor_updates: u64,
    pub critic_updates: u64,
    pub actor_loss: Vec<f64>,
}

/// Online fine-tuning with mixed replay.
pub fn finetune_online<R: Rng + ?Sized>(
    env: &mut Env,
    agent: &mut Td3Agent,
    energy: &mut EnergyNet,
    buffers: &mut ReplayBuffers,
    units: &Units,
    cfg: &OnlineConfig,
    rng: &mut R,
) -> Result<OnlineLog> {
    if buffers.offline().is_empty() {
        return Err(Error::Empty("offline replay buffer"));
    }
    let m = agent.config().batch_size;
    let sigma = agent.config().exploration_noise;
    let refresh_period = energy.config().refresh_period;
    let mut log = OnlineLog::default();
    let (actor0, critic0) = (agent.actor_updates(), agent.critic_updates());
    let mut periods = 0u64;
    buffers.beta = cfg.beta.beta(periods);
    for t in 1..=cfg.steps {
        let state = env.state().to_vec();
        let noisy = agent.select_action(&units.state(&state)?, sigma, rng)?;
        let proto = units.grid.denormalize(&noisy)?;
        let projection = units.grid.project(
            &state,
            &proto,
            cfg.projection_k,
            rng,
            &CriticEvaluator { agent, units },
        )?;
        let out = env.step(&projection.action)?;
        buffers.push_online(TransitionRecord {
            state,
            action: proto,
            next_state: out.next_state.clone(),
            reward: out.reward,
        });
        log.betas.push(buffers.beta);
        log.steps.push(StepLog {
            reward: out.reward,
            slice_reward: out.slice_reward,
            metrics: out.report.metrics.clone(),
            action: projection.action,
        });

        let (_, picks) = buffers.mixed_sample(m, rng)?;
        let batch = units.batch(&picks)?;
        let stats = penalized_step(agent, energy, batch, rng)?;
        if let Some(a) = stats.actor {
            log.actor_loss.push(a.loss);
        }

        if t as u64 % refresh_period == 0 {
            if energy.config().alpha > 0.0 {
                let x = if cfg.refresh_on_union {
                    units.energy_inputs(buffers.offline().iter().chain(buffers.online()))?
                } else {
                    units.energy_inputs(buffers.online())?
                };
                energy.fit(x.view(), energy.config().refresh_batches, rng)?;
            }
            periods += 1;
            buffers.beta = cfg.beta.beta(periods);
            log.refreshes.push(t);
        }
    }
    log.actor_updates = agent.actor_updates() - actor0;
    log.critic_updates = agent.critic_updates() - critic0;
    Ok(log)
}

/// What drives the network during evaluation.
pub enum Policy<'a> {
    /// The same grid action every step.
    Fixed(Vec<f64>),
    /// Frozen actor followed by projection onto the grid.
    Agent {
        agent: &'a Td3Agent,
        units: &'a Units,
        k: usize,
    },
}

pub fn evaluate<R: Rng + ?Sized>(
    env: &mut Env,
    policy: &Policy<'_>,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<StepLog>> {
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let action = match policy {
            Policy::Fixed(a) => a.clone(),
            Policy::Agent { agent, units, k } => {
                let state = env.state().to_vec();
                let proto = units.grid.denormalize(&agent.act(&units.state(&state)?)?)?;
                units
                    .grid
                    .project(&state, &proto, *k, rng, &CriticEvaluator { agent, units })?
                    .action
            }
        };
        let o = env.step(&action)?;
        out.push(StepLog {
            reward: o.reward,
            slice_reward: o.slice_reward,
            metrics: o.report.metrics,
            action,
        });
    }
    Ok(out)
}
