//! Experiment orchestration: presets, the three compared methods, staged
//! pipelines with on-disk artifacts, run reports and CSV export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyConfig, EnergyNet};
use crate::env::{Awareness, Env};
use crate::error::{Error, Result};
use crate::mdp::{FeatureScaling, RewardConfig};
use crate::sim::ScenarioConfig;
use crate::td3::{Td3Agent, Td3Config};
use crate::transfer::{
    augment_dataset, collect_offline, evaluate, finetune_online, train_offline, CollectionConfig,
    Dataset, OfflineConfig, OfflineLog, OnlineConfig, OnlineLog, Policy, ReplayBuffers, StepLog,
    Units,
};

/// Which controller drives the handover parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Fixed default margin and time-to-trigger.
    Default,
    /// Learned, one parameter pair per boundary shared by all slices.
    Mro,
    /// Learned, per-slice parameters.
    Samro,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Default, Baseline::Mro, Baseline::Samro];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Default => "default",
            Baseline::Mro => "mro",
            Baseline::Samro => "samro",
        }
    }

    pub fn awareness(self) -> Awareness {
        match self {
            Baseline::Mro => Awareness::Agnostic,
            Baseline::Default | Baseline::Samro => Awareness::Slice,
        }
    }

    pub fn is_learned(self) -> bool {
        self != Baseline::Default
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown baseline `{s}` (expected default, mro or samro)"
                ))
            })
    }
}

/// Phases of a run. Each draws its environment and its learner randomness
/// from its own seed so that stages can run in separate processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Collect,
    Augment,
    Offline,
    Finetune,
    Test,
}

impl Stage {
    fn salt(self) -> u64 {
        match self {
            Stage::Collect => 1,
            Stage::Augment => 2,
            Stage::Offline => 3,
            Stage::Finetune => 4,
            Stage::Test => 5,
        }
    }
}

pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stage.salt())
}

pub fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, stage));
    rng.set_stream(1);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub baseline: Baseline,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Scenario file; relative paths resolve against the experiment file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub reward: RewardConfig,
    pub scaling: FeatureScaling,
    pub td3: Td3Config,
    pub energy: EnergyConfig,
    pub collection: CollectionConfig,
    pub augment_k: usize,
    pub offline: OfflineConfig,
    pub online: OnlineConfig,
    pub test_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk()
    }
}

impl ExperimentConfig {
    /// 60 s agent steps, 500 offline samples, 300 online and 100 test steps.
    pub fn desk() -> Self {
        ExperimentConfig {
            baseline: Baseline::Samro,
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: PathBuf::from("runs"),
            scenario_file: None,
            scenario: ScenarioConfig::desk(),
            reward: RewardConfig::standard(2),
            scaling: FeatureScaling::default(),
            td3: Td3Config::default(),
            energy: EnergyConfig {
                alpha: 1.0,
                ..EnergyConfig::default()
            },
            collection: CollectionConfig {
                n_samples: 500,
                ..CollectionConfig::default()
            },
            augment_k: 8,
            offline: OfflineConfig::default(),
            online: OnlineConfig {
                steps: 300,
                ..OnlineConfig::default()
            },
            test_steps: 100,
        }
    }

    /// 900 s agent steps, 20 000 offline samples, 1344 online and 192 test steps.
    pub fn paper() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::paper(),
            collection: CollectionConfig::default(),
            online: OnlineConfig::default(),
            test_steps: 192,
            ..ExperimentConfig::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected desk or paper)"
            ))),
        }
    }

    /// Parses a configuration; keys that are absent keep their desk defaults.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(file) = cfg.scenario_file.clone() {
            let path = match base_dir {
                Some(dir) if file.is_relative() => dir.join(&file),
                _ => file,
            };
            if !path.exists() {
                return Err(Error::Config(format!(
                    "scenario file {} does not exist",
                    path.display()
                )));
            }
            cfg.scenario = ScenarioConfig::load(&path)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::Config(format!(
                "config file {} does not exist",
                path.display()
            )));
        }
        Self::from_toml_str(&fs::read_to_string(path)?, path.parent())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.reward.validate()?;
        self.td3.validate()?;
        self.energy.validate()?;
        if self.reward.n_slices() != self.scenario.n_slices {
            return Err(Error::Config(format!(
                "reward has {} slices but the scenario has {}",
                self.reward.n_slices(),
                self.scenario.n_slices
            )));
        }
        if self.augment_k == 0 {
            return Err(Error::Config("augment_k must be at least 1".into()));
        }
        if !(self.scaling.count_cap > 0.0) {
            return Err(Error::Config("count_cap must be positive".into()));
        }
        if self.online.projection_k == 0 {
            return Err(Error::Config("projection_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_baseline(&self, baseline: Baseline) -> Self {
        ExperimentConfig {
            baseline,
            ..self.clone()
        }
    }

    /// Environment for one stage of the run with experiment seed `seed`.
    pub fn env(&self, seed: u64, stage: Stage) -> Result<Env> {
        let scenario = ScenarioConfig {
            rng_seed: stage_seed(seed, stage),
            ..self.scenario.clone()
        };
        Env::new(scenario, self.baseline.awareness(), self.reward.clone())
    }

    pub fn units(&self, env: &Env) -> Units {
        Units::for_env(env, self.scaling)
    }
}

/// `key = value` lines for every leaf where the two configurations differ.
pub fn config_diff(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<Vec<String>> {
    fn flatten(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, String>) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    flatten(&key, v, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other.to_string());
            }
        }
    }
    let value =
        |c: &ExperimentConfig| toml::Value::try_from(c).map_err(|e| Error::Parse(e.to_string()));
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", &value(a)?, &mut fa);
    flatten("", &value(b)?, &mut fb);
    let keys: std::collections::BTreeSet<&String> = fa.keys().chain(fb.keys()).collect();
    let missing = "<unset>".to_string();
    Ok(keys
        .into_iter()
        .filter(|k| fa.get(*k) != fb.get(*k))
        .map(|k| {
            format!(
                "{k}: {} -> {}",
                fa.get(k).unwrap_or(&missing),
                fb.get(k).unwrap_or(&missing)
            )
        })
        .collect())
}

/// File layout of one run directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn offline_agent(&self) -> PathBuf {
        self.root.join("offline").join("agent")
    }

    pub fn offline_energy(&self) -> PathBuf {
        self.root.join("offline").join("energy")
    }

    pub fn finetuned_agent(&self) -> PathBuf {
        self.root.join("finetuned").join("agent")
    }

    pub fn finetuned_energy(&self) -> PathBuf {
        self.root.join("finetuned").join("energy")
    }

    pub fn test_trace(&self) -> PathBuf {
        self.root.join("test.csv")
    }

    pub fn cdf_dir(&self) -> PathBuf {
        self.root.join("cdf")
    }
}

fn remap_stage(err: Error, stage: &'static str) -> Error {
    match err {
        Error::MissingArtifact { what, path, .. } => Error::MissingArtifact { stage, what, path },
        other => other,
    }
}

pub fn load_dataset(paths: &RunPaths) -> Result<Dataset> {
    Dataset::load(&paths.dataset())
}

pub fn load_offline(paths: &RunPaths) -> Result<(Td3Agent, EnergyNet)> {
    Ok((
        Td3Agent::load(&paths.offline_agent())?,
        EnergyNet::load(&paths.offline_energy())?,
    ))
}

pub fn load_finetuned(paths: &RunPaths) -> Result<(Td3Agent, EnergyNet)> {
    let agent = Td3Agent::load(&paths.finetuned_agent()).map_err(|e| remap_stage(e, "finetune"))?;
    let energy =
        EnergyNet::load(&paths.finetuned_energy()).map_err(|e| remap_stage(e, "finetune"))?;
    Ok((agent, energy))
}

fn require_learned(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.baseline.is_learned() {
        Ok(())
    } else {
        Err(Error::Config(
            "the default baseline has no learning stages".into(),
        ))
    }
}

/// Runs the biased behavior policy on the collection environment.
pub fn collect_stage(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    require_learned(cfg)?;
    let mut env = cfg.env(seed, Stage::Collect)?;
    let mut rng = stage_rng(seed, Stage::Collect);
    info!(
        "collect: {} samples, {} baseline",
        cfg.collection.n_samples, cfg.baseline
    );
    collect_offline(&mut env, &cfg.collection, &mut rng)
}

/// The augmented dataset; regenerated deterministically wherever it is needed.
pub fn augmented(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Dataset,
    units: &Units,
) -> Result<Dataset> {
    let mut rng = stage_rng(seed, Stage::Augment);
    augment_dataset(data, cfg.augment_k, &units.grid, &mut rng)
}

fn check_dataset(units: &Units, data: &Dataset) -> Result<()> {
    if data.state_dim() != units.state_dim() || data.action_dim() != units.action_dim() {
        return Err(Error::Config(format!(
            "dataset has state/action dims {}/{} but the {} controller needs {}/{}",
            data.state_dim(),
            data.action_dim(),
            "configured",
            units.state_dim(),
            units.action_dim()
        )));
    }
    Ok(())
}

pub struct OfflineResult {
    pub agent: Td3Agent,
    pub energy: EnergyNet,
    pub log: OfflineLog,
}

/// Augments the dataset and trains the agent and energy model on it.
pub fn offline_stage(cfg: &ExperimentConfig, seed: u64, data: &Dataset) -> Result<OfflineResult> {
    require_learned(cfg)?;
    let env = cfg.env(seed, Stage::Offline)?;
    let units = cfg.units(&env);
    check_dataset(&units, data)?;
    let aug = augmented(cfg, seed, data, &units)?;
    let mut rng = stage_rng(seed, Stage::Offline);
    let mut agent = Td3Agent::new(
        units.state_dim(),
        units.action_dim(),
        cfg.td3.clone(),
        &mut rng,
    )?;
    let mut energy = EnergyNet::new(
        units.state_dim() + units.action_dim(),
        cfg.energy.clone(),
        &mut rng,
    )?;
    info!("train-offline: {} augmented records", aug.len());
    let log = train_offline(
        &aug,
        &units,
        &mut agent,
        &mut energy,
        &cfg.offline,
        &mut rng,
        |_, _| {},
    )?;
    Ok(OfflineResult { agent, energy, log })
}

/// Alg. 3 on the fine-tuning environment, starting from the offline models.
pub fn finetune_stage(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Dataset,
    agent: &mut Td3Agent,
    energy: &mut EnergyNet,
) -> Result<OnlineLog> {
    require_learned(cfg)?;
    let mut env = cfg.env(seed, Stage::Finetune)?;
    let units = cfg.units(&env);
    check_dataset(&units, data)?;
    let aug = augmented(cfg, seed, data, &units)?;
    let mut buffers = ReplayBuffers::new(
        aug.records,
        cfg.online.online_capacity,
        cfg.online.beta.beta(0),
    )?;
    let mut rng = stage_rng(seed, Stage::Finetune);
    info!("finetune: {} online steps", cfg.online.steps);
    finetune_online(
        &mut env,
        agent,
        energy,
        &mut buffers,
        &units,
        &cfg.online,
        &mut rng,
    )
}

/// Runs the frozen controller on the test environment. `agent` is ignored by
/// the default baseline.
pub fn test_stage(
    cfg: &ExperimentConfig,
    seed: u64,
    agent: Option<&Td3Agent>,
) -> Result<Vec<StepLog>> {
    let mut env = cfg.env(seed, Stage::Test)?;
    let units = cfg.units(&env);
    let mut rng = stage_rng(seed, Stage::Test);
    let policy = match (cfg.baseline, agent) {
        (Baseline::Default, _) => Policy::Fixed(env.default_action()),
        (_, Some(agent)) => Policy::Agent {
            agent,
            units: &units,
            k: cfg.online.projection_k,
        },
        (_, None) => {
            return Err(Error::MissingArtifact {
                stage: "finetune",
                what: "trained agent",
                path: String::new(),
            })
        }
    };
    info!(
        "evaluate: {} test steps, {} baseline",
        cfg.test_steps, cfg.baseline
    );
    evaluate(&mut env, &policy, cfg.test_steps, &mut rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub baseline: Baseline,
    pub seed: u64,
    pub boundaries: Vec<(usize, usize)>,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Differences from the slice-aware configuration, adapters included.
    pub config_diff: Vec<String>,
    pub offline: Option<OfflineLog>,
    pub online: Option<OnlineLog>,
    pub test: Vec<StepLog>,
    pub env_steps: u64,
    pub wall_clock_s: f64,
}

impl RunReport {
    /// Mean per-slice reward over the test steps.
    pub fn mean_test_reward(&self) -> f64 {
        mean(self.test.iter().map(|s| s.slice_reward))
    }

    pub fn test_metric(&self, metric: Metric, slice: usize) -> Vec<f64> {
        self.test
            .iter()
            .map(|s| metric.of(&s.metrics[slice]))
            .collect()
    }

    pub fn n_slices(&self) -> usize {
        self.test.first().map_or(0, |s| s.metrics.len())
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Hfr,
    Ppr,
    Tsl,
    Lsl,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Hfr, Metric::Ppr, Metric::Tsl, Metric::Lsl];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hfr => "hfr",
            Metric::Ppr => "ppr",
            Metric::Tsl => "tsl",
            Metric::Lsl => "lsl",
        }
    }

    pub fn of(self, m: &crate::mdp::SliceMetrics) -> f64 {
        match self {
            Metric::Hfr => m.hfr,
            Metric::Ppr => m.ppr,
            Metric::Tsl => m.tsl,
            Metric::Lsl => m.lsl,
        }
    }
}

fn adapter_diff(
    cfg: &ExperimentConfig,
    state_dim: usize,
    action_dim: usize,
    seed: u64,
) -> Result<Vec<String>> {
    let reference = cfg.with_baseline(Baseline::Samro);
    let mut diff = config_diff(&reference, cfg)?;
    if cfg.baseline == Baseline::Mro {
        let env = reference.env(seed, Stage::Test)?;
        diff.push("awareness: slice -> agnostic".to_string());
        diff.push(format!("state_dim: {} -> {state_dim}", env.state_dim()));
        diff.push(format!("action_dim: {} -> {action_dim}", env.action_dim()));
    }
    Ok(diff)
}

/// An empty report carrying the run's identity: boundaries, dimensions and
/// the configuration diff against the slice-aware setup.
pub fn skeleton(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let env = cfg.env(seed, Stage::Test)?;
    Ok(RunReport {
        baseline: cfg.baseline,
        seed,
        boundaries: env.world().boundaries().directed().to_vec(),
        state_dim: env.state_dim(),
        action_dim: env.action_dim(),
        config_diff: adapter_diff(cfg, env.state_dim(), env.action_dim(), seed)?,
        offline: None,
        online: None,
        test: Vec::new(),
        env_steps: 0,
        wall_clock_s: 0.0,
    })
}

/// Fixed default parameters on the test environment.
pub fn run_baseline_default(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let cfg = cfg.with_baseline(Baseline::Default);
    let start = Instant::now();
    let mut report = skeleton(&cfg, seed)?;
    report.test = test_stage(&cfg, seed, None)?;
    report.env_steps = report.test.len() as u64;
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// The transfer pipeline without slice awareness.
pub fn run_baseline_mro(
    cfg: &ExperimentConfig,
    seed: u64,
    paths: Option<&RunPaths>,
) -> Result<RunReport> {
    run_learned(&cfg.with_baseline(Baseline::Mro), seed, paths)
}

/// The slice-aware transfer pipeline.
pub fn run_samro(cfg: &ExperimentConfig, seed: u64, paths: Option<&RunPaths>) -> Result<RunReport> {
    run_learned(&cfg.with_baseline(Baseline::Samro), seed, paths)
}

pub fn run(cfg: &ExperimentConfig, seed: u64, paths: Option<&RunPaths>) -> Result<RunReport> {
    match cfg.baseline {
        Baseline::Default => run_baseline_default(cfg, seed),
        Baseline::Mro => run_baseline_mro(cfg, seed, paths),
        Baseline::Samro => run_samro(cfg, seed, paths),
    }
}

/// collect → augment → train offline → fine-tune → test. When `paths` is given
/// every intermediate artifact is written there as it is produced.
fn run_learned(cfg: &ExperimentConfig, seed: u64, paths: Option<&RunPaths>) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = skeleton(cfg, seed)?;
    let data = collect_stage(cfg, seed)?;
    if let Some(p) = paths {
        fs::create_dir_all(&p.root)?;
        data.save(&p.dataset())?;
    }
    let OfflineResult {
        mut agent,
        mut energy,
        log,
    } = offline_stage(cfg, seed, &data)?;
    if let Some(p) = paths {
        agent.save(&p.offline_agent())?;
        energy.save(&p.offline_energy())?;
    }
    let online = finetune_stage(cfg, seed, &data, &mut agent, &mut energy)?;
    if let Some(p) = paths {
        agent.save(&p.finetuned_agent())?;
        energy.save(&p.finetuned_energy())?;
    }
    report.test = test_stage(cfg, seed, Some(&agent))?;
    report.env_steps = (data.len() + online.steps.len() + report.test.len()) as u64;
    report.offline = Some(log);
    report.online = Some(online);
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Empirical CDF with ties merged: sorted distinct values and the fraction of
/// observations at or below each.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty("metric trace"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("metric trace contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

/// Fraction of `values` at or below `x`.
pub fn cdf_at(values: &[f64], x: f64) -> f64 {
    values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
}

/// Median, taking the lower middle element for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// One `cdf_<metric>_s<slice>.csv` per metric and slice, over the test steps.
pub fn export_cdf(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    export_trace_cdf(&report.test, dir)
}

pub fn export_trace_cdf(steps: &[StepLog], dir: &Path) -> Result<Vec<PathBuf>> {
    let Some(first) = steps.first() else {
        return Err(Error::Empty("test trace"));
    };
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in 0..first.metrics.len() {
        for metric in Metric::ALL {
            let path = dir.join(format!("cdf_{}_s{}.csv", metric.name(), s + 1));
            let values: Vec<f64> = steps.iter().map(|l| metric.of(&l.metrics[s])).collect();
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["value", "fraction"])?;
            for (v, f) in empirical_cdf(&values)? {
                w.write_record([v.to_string(), f.to_string()])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

fn trace_header(n_slices: usize) -> Vec<String> {
    let mut h = vec![
        "step".to_string(),
        "reward".to_string(),
        "slice_reward".to_string(),
    ];
    for s in 0..n_slices {
        for m in Metric::ALL {
            h.push(format!("s{}_{}", s + 1, m.name()));
        }
    }
    h
}

pub fn write_step_trace(path: &Path, steps: &[StepLog]) -> Result<()> {
    let n_slices = steps.first().map_or(0, |s| s.metrics.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(n_slices))?;
    for (i, s) in steps.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            s.reward.to_string(),
            s.slice_reward.to_string(),
        ];
        for m in &s.metrics {
            for metric in Metric::ALL {
                row.push(metric.of(m).to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_step_trace`]; actions are not stored there
/// and come back empty.
pub fn read_step_trace(path: &Path) -> Result<Vec<StepLog>> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            stage: "evaluate",
            what: "test trace",
            path: path.display().to_string(),
        });
    }
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 3 || (width - 3) % 4 != 0 {
        return Err(Error::Parse(format!(
            "{}: unexpected trace width {width}",
            path.display()
        )));
    }
    let n_slices = (width - 3) / 4;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{x}: {e}")))
            })
            .collect::<Result<_>>()?;
        let metrics = (0..n_slices)
            .map(|s| {
                let b = 3 + 4 * s;
                crate::mdp::SliceMetrics {
                    hfr: v[b],
                    ppr: v[b + 1],
                    tsl: v[b + 2],
                    lsl: v[b + 3],
                }
            })
            .collect();
        out.push(StepLog {
            reward: v[1],
            slice_reward: v[2],
            metrics,
            action: Vec::new(),
        });
    }
    Ok(out)
}

fn write_actions(path: &Path, steps: &[StepLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in steps {
        w.write_record(s.action.iter().map(|a| a.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every CSV artifact of a report plus a plain-text summary. The CSV
/// files depend only on (config, seed); the summary also carries timing.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("boundaries.csv"))?;
    w.write_record(["index", "source", "target"])?;
    for (i, (a, b)) in report.boundaries.iter().enumerate() {
        w.write_record([i.to_string(), a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    write_step_trace(&dir.join("test.csv"), &report.test)?;
    write_actions(&dir.join("test_actions.csv"), &report.test)?;
    if let Some(online) = &report.online {
        write_online_log(online, dir)?;
    }
    if let Some(offline) = &report.offline {
        write_offline_log(offline, dir)?;
    }
    export_cdf(report, &dir.join("cdf"))?;
    fs::write(
        dir.join("config_diff.txt"),
        report.config_diff.join("\n") + "\n",
    )?;
    fs::write(dir.join("summary.txt"), summary_text(report))?;
    Ok(())
}

/// `online.csv` and `online_schedule.csv`.
pub fn write_online_log(online: &OnlineLog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_step_trace(&dir.join("online.csv"), &online.steps)?;
    let mut w = csv::Writer::from_path(dir.join("online_schedule.csv"))?;
    w.write_record(["step", "beta", "refreshed"])?;
    for (i, beta) in online.betas.iter().enumerate() {
        let refreshed = online.refreshes.contains(&(i + 1));
        w.write_record([(i + 1).to_string(), beta.to_string(), refreshed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `offline.csv`: critic loss per minibatch, actor loss and critic estimate
/// on the rows where the actor was updated.
pub fn write_offline_log(offline: &OfflineLog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("offline.csv"))?;
    w.write_record(["batch", "critic_loss", "actor_loss", "actor_q"])?;
    let mut actor = offline.actor_loss.iter().zip(&offline.actor_q).peekable();
    for (i, c) in offline.critic_loss.iter().enumerate() {
        let (a, q) = match actor.peek() {
            Some(&(&(j, a), &(_, q))) if j == i => {
                actor.next();
                (a.to_string(), q.to_string())
            }
            _ => (String::new(), String::new()),
        };
        w.write_record([i.to_string(), c.to_string(), a, q])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_text(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "baseline {}\nseed {}\n",
        report.baseline, report.seed
    ));
    s.push_str(&format!(
        "state_dim {}\naction_dim {}\n",
        report.state_dim, report.action_dim
    ));
    s.push_str(&format!("env_steps {}\n", report.env_steps));
    s.push_str(&format!(
        "mean_test_reward {:.6}\n",
        report.mean_test_reward()
    ));
    for slice in 0..report.n_slices() {
        for m in Metric::ALL {
            let v = report.test_metric(m, slice);
            s.push_str(&format!(
                "slice{}_{}_mean {:.6}\n",
                slice + 1,
                m.name(),
                mean(v.iter().copied())
            ));
        }
    }
    if let Some(online) = &report.online {
        s.push_str(&format!(
            "online_actor_updates {}\nonline_critic_updates {}\nenergy_refreshes {}\n",
            online.actor_updates,
            online.critic_updates,
            online.refreshes.len()
        ));
    }
    s.push_str(&format!("wall_clock_s {:.3}\n", report.wall_clock_s));
    s.push_str("boundaries");
    for (a, b) in &report.boundaries {
        s.push_str(&format!(" {a}->{b}"));
    }
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert!("td3".parse::<Baseline>().is_err());
    }

    #[test]
    fn stage_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..20u64)
            .flat_map(|s| {
                [
                    Stage::Collect,
                    Stage::Augment,
                    Stage::Offline,
                    Stage::Finetune,
                    Stage::Test,
                ]
                .map(|st| stage_seed(s, st))
            })
            .collect();
        assert_eq!(seeds.len(), 100);
    }

    #[test]
    fn presets_validate_and_differ_in_budgets() {
        let desk = ExperimentConfig::desk();
        let paper = ExperimentConfig::paper();
        desk.validate().unwrap();
        paper.validate().unwrap();
        assert_eq!((desk.online.steps, desk.test_steps), (300, 100));
        assert_eq!((paper.online.steps, paper.test_steps), (1344, 192));
        assert_eq!(paper.collection.n_samples, 20_000);
        assert_eq!(paper.scenario.ticks_per_agent_step, 9000);
        assert_eq!(desk.scenario.ticks_per_agent_step, 600);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::paper();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, None).unwrap(), cfg);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str("test_steps = 7\n[energy]\nalpha = 0.0\n", None)
            .unwrap();
        assert_eq!(cfg.test_steps, 7);
        assert_eq!(cfg.energy.alpha, 0.0);
        assert_eq!(cfg.online.steps, 300);
    }

    #[test]
    fn mismatched_reward_slices_are_rejected() {
        let mut cfg = ExperimentConfig::desk();
        cfg.reward = RewardConfig::standard(3);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_scenario_file_is_reported() {
        let err =
            ExperimentConfig::from_toml_str("scenario_file = \"nope.toml\"\n", None).unwrap_err();
        assert!(err.to_string().contains("nope.toml"));
    }

    #[test]
    fn diff_of_mro_and_samro_is_only_the_selector() {
        let a = ExperimentConfig::desk();
        let b = a.with_baseline(Baseline::Mro);
        assert_eq!(
            config_diff(&a, &b).unwrap(),
            vec!["baseline: \"samro\" -> \"mro\"".to_string()]
        );
        assert!(config_diff(&a, &a).unwrap().is_empty());
    }

    #[test]
    fn cdf_of_single_value() {
        assert_eq!(empirical_cdf(&[0.4]).unwrap(), vec![(0.4, 1.0)]);
    }

    #[test]
    fn cdf_of_constant_is_one_step() {
        assert_eq!(empirical_cdf(&[2.0; 5]).unwrap(), vec![(2.0, 1.0)]);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let cdf = empirical_cdf(&[0.3, 0.1, 0.3, 0.9, 0.5]).unwrap();
        assert_eq!(cdf, vec![(0.1, 0.2), (0.3, 0.6), (0.5, 0.8), (0.9, 1.0)]);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn median_and_cdf_at() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.0);
        assert_eq!(cdf_at(&[1.0, 2.0, 3.0, 4.0], 2.5), 0.5);
    }
}
