//! Agent-facing wrapper around the simulator: applies grid actions, runs one
//! agent step and returns the state and reward in the agent's own layout.

use crate::action::ActionGrid;
use crate::error::{check_dim, Result};
use crate::handover::HoParamTable;
use crate::mdp::{reward, RewardConfig, StateLayout};
use crate::sim::{ScenarioConfig, StepReport, World};

/// Whether the agent controls per-slice parameters or one set shared by all slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Awareness {
    /// Parameters, state and reward per slice.
    Slice,
    /// One parameter pair per boundary; slice-merged state and reward.
    Agnostic,
}

/// One environment transition as seen by the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Raw state in the agent's layout.
    pub next_state: Vec<f64>,
    /// Reward in the agent's layout.
    pub reward: f64,
    /// Per-slice reward, comparable across awareness modes.
    pub slice_reward: f64,
    pub report: StepReport,
}

pub struct Env {
    world: World,
    awareness: Awareness,
    grid: ActionGrid,
    slice_reward_cfg: RewardConfig,
    agent_reward_cfg: RewardConfig,
    state: Vec<f64>,
    last_report: StepReport,
    interactions: u64,
}

impl Env {
    /// Builds the world and runs one warm-up step under the default parameters
    /// so that an initial state exists. The warm-up is not counted as an interaction.
    pub fn new(
        scenario: ScenarioConfig,
        awareness: Awareness,
        reward_cfg: RewardConfig,
    ) -> Result<Self> {
        reward_cfg.validate()?;
        check_dim("reward slices", scenario.n_slices, reward_cfg.n_slices())?;
        let mut world = World::build(scenario)?;
        let n_boundaries = world.boundaries().len();
        let n_slices = world.config().n_slices;
        let g = &world.config().grid;
        let full = ActionGrid::new(g.hom_db.clone(), g.ttt_ms.clone(), n_boundaries, n_slices)?;
        let (grid, agent_reward_cfg) = match awareness {
            Awareness::Slice => (full, reward_cfg.clone()),
            Awareness::Agnostic => {
                let mut merged = RewardConfig::uniform(
                    1,
                    [
                        reward_cfg.w_throughput[0],
                        reward_cfg.w_latency[0],
                        reward_cfg.w_failure[0],
                        reward_cfg.w_ping_pong[0],
                    ],
                    reward_cfg.scale,
                );
                merged.normalize_by_slices = reward_cfg.normalize_by_slices;
                (full.with_layout(n_boundaries, 1)?, merged)
            }
        };
        let d = &world.config().grid;
        let default = grid.uniform(d.default_hom_db, d.default_ttt_ms);
        let params = expand_action(&world, awareness, &default)?;
        let report = world.run_agent_step(&params);
        let state = view_state(awareness, &report);
        Ok(Env {
            world,
            awareness,
            grid,
            slice_reward_cfg: reward_cfg,
            agent_reward_cfg,
            state,
            last_report: report,
            interactions: 0,
        })
    }

    pub fn awareness(&self) -> Awareness {
        self.awareness
    }

    /// Grid in the agent's layout.
    pub fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    pub fn layout(&self) -> StateLayout {
        match self.awareness {
            Awareness::Slice => self.world.layout(),
            Awareness::Agnostic => self.world.layout().aggregated(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.layout().dim()
    }

    pub fn action_dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn last_report(&self) -> &StepReport {
        &self.last_report
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.agent_reward_cfg
    }

    /// Number of agent steps taken since construction.
    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    /// Every entry at the configured default margin and time-to-trigger.
    pub fn default_action(&self) -> Vec<f64> {
        let g = &self.world.config().grid;
        self.grid.uniform(g.default_hom_db, g.default_ttt_ms)
    }

    /// Expands an agent-layout action to the full per-slice parameter table.
    pub fn param_table(&self, action: &[f64]) -> Result<HoParamTable> {
        check_dim("action", self.grid.dim(), action.len())?;
        expand_action(&self.world, self.awareness, action)
    }

    /// Applies an operating action for one agent step.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if !self.grid.is_operating(action) {
            return Err(crate::error::Error::Domain(
                "action is not on the grid".into(),
            ));
        }
        let params = self.param_table(action)?;
        let report = self.world.run_agent_step(&params);
        self.interactions += 1;
        let slice_reward = reward(&report.metrics, &self.slice_reward_cfg)?;
        let agent_reward = match self.awareness {
            Awareness::Slice => slice_reward,
            Awareness::Agnostic => reward(&[report.aggregated_metrics()], &self.agent_reward_cfg)?,
        };
        let next_state = view_state(self.awareness, &report);
        self.state = next_state.clone();
        self.last_report = report.clone();
        Ok(StepOutcome {
            next_state,
            reward: agent_reward,
            slice_reward,
            report,
        })
    }
}

fn expand_action(world: &World, awareness: Awareness, action: &[f64]) -> Result<HoParamTable> {
    let b = world.boundaries().len();
    let s = world.config().n_slices;
    let values = match awareness {
        Awareness::Slice => action.to_vec(),
        Awareness::Agnostic => {
            let mut v = Vec::with_capacity(2 * b * s);
            for pair in action.chunks_exact(2) {
                for _ in 0..s {
                    v.extend_from_slice(pair);
                }
            }
            v
        }
    };
    HoParamTable::new(values, b, s)
}

fn view_state(awareness: Awareness, report: &StepReport) -> Vec<f64> {
    match awareness {
        Awareness::Slice => report.state(),
        Awareness::Agnostic => crate::mdp::assemble_state(&report.kpi.aggregate_slices())
            .expect("aggregated layout is consistent"),
    }
}
