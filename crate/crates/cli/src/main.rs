use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use samro_core::experiment::{
    collect_stage, export_trace_cdf, finetune_stage, load_dataset, load_finetuned, load_offline,
    offline_stage, read_step_trace, run, skeleton, summary_text, test_stage, write_offline_log,
    write_online_log, write_report, Baseline, ExperimentConfig, RunPaths,
};

#[derive(Parser, Debug)]
#[command(
    name = "samro",
    version,
    about = "Slice-aware mobility robustness optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the biased behavior policy and store the offline dataset.
    Collect(Common),
    /// Train the agent and energy model on the augmented offline dataset.
    TrainOffline(Common),
    /// Fine-tune the offline models online with mixed replay.
    Finetune(Common),
    /// Run the frozen controller on the test environment.
    Evaluate(Common),
    /// Run every stage of one baseline end to end.
    Baseline(Common),
    /// Run `baseline` for every configured seed and baseline in child processes.
    Sweep(SweepArgs),
    /// Rebuild the metric CDFs from a stored test trace.
    Export(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment configuration; replaces the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["desk", "paper"], default_value = "desk")]
    preset: String,
    /// Defaults to the first seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Root output directory; runs go to `<out>/<baseline>/seed<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<Baseline>,
    /// Energy regularization weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Neighbor count for augmentation and action projection.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated baselines; all three when omitted.
    #[arg(long, value_delimiter = ',')]
    baselines: Vec<Baseline>,
    /// Comma-separated seeds; the configured seed list when omitted.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Child processes allowed to run at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::preset(&self.preset)?,
        };
        if let Some(b) = self.baseline {
            cfg.baseline = b;
        }
        if let Some(a) = self.alpha {
            cfg.energy.alpha = a;
        }
        if let Some(k) = self.k {
            cfg.augment_k = k;
            cfg.online.projection_k = k;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&self) -> Result<(ExperimentConfig, u64, RunPaths)> {
        let cfg = self.config()?;
        let seed = match self.seed {
            Some(s) => s,
            None => *cfg
                .seeds
                .first()
                .context("the configuration lists no seeds")?,
        };
        let paths = run_paths(&cfg, seed);
        fs::create_dir_all(&paths.root)
            .with_context(|| format!("creating {}", paths.root.display()))?;
        fs::write(paths.root.join("config.toml"), cfg.to_toml_string()?)?;
        Ok((cfg, seed, paths))
    }

    /// Flags to hand to a child process, minus seed and baseline.
    fn forwarded(&self) -> Vec<String> {
        let mut args = vec!["--preset".to_string(), self.preset.clone()];
        if let Some(c) = &self.config {
            args.extend(["--config".to_string(), c.display().to_string()]);
        }
        if let Some(o) = &self.out {
            args.extend(["--out".to_string(), o.display().to_string()]);
        }
        if let Some(a) = self.alpha {
            args.extend(["--alpha".to_string(), a.to_string()]);
        }
        if let Some(k) = self.k {
            args.extend(["--k".to_string(), k.to_string()]);
        }
        args
    }
}

fn run_paths(cfg: &ExperimentConfig, seed: u64) -> RunPaths {
    RunPaths::new(
        cfg.out_dir
            .join(cfg.baseline.name())
            .join(format!("seed{seed}")),
    )
}

fn collect(args: &Common) -> Result<()> {
    let (cfg, seed, paths) = args.resolve()?;
    let data = collect_stage(&cfg, seed)?;
    data.save(&paths.dataset())?;
    println!(
        "wrote {} records to {}",
        data.len(),
        paths.dataset().display()
    );
    Ok(())
}

fn train_offline(args: &Common) -> Result<()> {
    let (cfg, seed, paths) = args.resolve()?;
    let data = load_dataset(&paths)?;
    let result = offline_stage(&cfg, seed, &data)?;
    result.agent.save(&paths.offline_agent())?;
    result.energy.save(&paths.offline_energy())?;
    write_offline_log(&result.log, &paths.root)?;
    println!(
        "trained on {} minibatches; checkpoints in {}",
        result.log.batches,
        paths.root.join("offline").display()
    );
    Ok(())
}

fn finetune(args: &Common) -> Result<()> {
    let (cfg, seed, paths) = args.resolve()?;
    let data = load_dataset(&paths)?;
    let (mut agent, mut energy) = load_offline(&paths)?;
    let log = finetune_stage(&cfg, seed, &data, &mut agent, &mut energy)?;
    agent.save(&paths.finetuned_agent())?;
    energy.save(&paths.finetuned_energy())?;
    write_online_log(&log, &paths.root)?;
    println!(
        "{} online steps, {} actor updates, {} energy refreshes",
        log.steps.len(),
        log.actor_updates,
        log.refreshes.len()
    );
    Ok(())
}

fn evaluate(args: &Common) -> Result<()> {
    let (cfg, seed, paths) = args.resolve()?;
    let agent = if cfg.baseline.is_learned() {
        Some(load_finetuned(&paths)?.0)
    } else {
        None
    };
    let mut report = skeleton(&cfg, seed)?;
    report.test = test_stage(&cfg, seed, agent.as_ref())?;
    report.env_steps = report.test.len() as u64;
    write_report(&report, &paths.root)?;
    print!("{}", summary_text(&report));
    Ok(())
}

fn baseline(args: &Common) -> Result<()> {
    let (cfg, seed, paths) = args.resolve()?;
    let report = run(&cfg, seed, Some(&paths))?;
    write_report(&report, &paths.root)?;
    print!("{}", summary_text(&report));
    Ok(())
}

fn export(args: &Common) -> Result<()> {
    let (_, _, paths) = args.resolve()?;
    let steps = read_step_trace(&paths.test_trace())?;
    let written = export_trace_cdf(&steps, &paths.cdf_dir())?;
    println!(
        "wrote {} CDF files to {}",
        written.len(),
        paths.cdf_dir().display()
    );
    Ok(())
}

fn mean_test_reward(dir: &Path) -> Result<f64> {
    let steps = read_step_trace(&dir.join("test.csv"))?;
    if steps.is_empty() {
        bail!("empty test trace in {}", dir.display());
    }
    Ok(steps.iter().map(|s| s.slice_reward).sum::<f64>() / steps.len() as f64)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let baselines = if args.baselines.is_empty() {
        Baseline::ALL.to_vec()
    } else {
        args.baselines.clone()
    };
    let seeds = if args.seeds.is_empty() {
        cfg.seeds.clone()
    } else {
        args.seeds.clone()
    };
    if args.jobs == 0 {
        bail!("--jobs must be positive");
    }
    let exe = std::env::current_exe().context("locating the samro executable")?;
    let jobs: Vec<(Baseline, u64)> = baselines
        .iter()
        .flat_map(|&b| seeds.iter().map(move |&s| (b, s)))
        .collect();
    fs::create_dir_all(&cfg.out_dir)?;
    let mut failures = Vec::new();
    let mut running: Vec<((Baseline, u64), Child)> = Vec::new();
    let mut pending = jobs.iter().copied();
    loop {
        while running.len() < args.jobs {
            let Some((b, s)) = pending.next() else { break };
            let log_path = cfg.out_dir.join(format!("{b}_seed{s}.log"));
            let log = fs::File::create(&log_path)?;
            let child = Command::new(&exe)
                .arg("baseline")
                .args(args.common.forwarded())
                .args(["--baseline", b.name(), "--seed", &s.to_string()])
                .stdout(log.try_clone()?)
                .stderr(log)
                .spawn()
                .with_context(|| format!("spawning {b} seed {s}"))?;
            info!("started {b} seed {s}");
            running.push(((b, s), child));
        }
        if running.is_empty() {
            break;
        }
        let ((b, s), mut child) = running.remove(0);
        let status = child.wait()?;
        if status.success() {
            info!("finished {b} seed {s}");
        } else {
            eprintln!(
                "{b} seed {s} failed ({status}); see {}",
                cfg.out_dir.join(format!("{b}_seed{s}.log")).display()
            );
            failures.push((b, s));
        }
    }
    let mut w = fs::File::create(cfg.out_dir.join("sweep.csv"))?;
    use std::io::Write;
    writeln!(w, "baseline,seed,mean_test_reward")?;
    for &(b, s) in &jobs {
        if failures.contains(&(b, s)) {
            continue;
        }
        let dir = cfg.out_dir.join(b.name()).join(format!("seed{s}"));
        let r = mean_test_reward(&dir)?;
        writeln!(w, "{b},{s},{r}")?;
        println!("{b:>8} seed {s}: {r:.4}");
    }
    if !failures.is_empty() {
        bail!("{} of {} runs failed", failures.len(), jobs.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (stage, result) = match &cli.command {
        Cmd::Collect(a) => ("collect", collect(a)),
        Cmd::TrainOffline(a) => ("train-offline", train_offline(a)),
        Cmd::Finetune(a) => ("finetune", finetune(a)),
        Cmd::Evaluate(a) => ("evaluate", evaluate(a)),
        Cmd::Baseline(a) => ("baseline", baseline(a)),
        Cmd::Sweep(a) => ("sweep", sweep(a)),
        Cmd::Export(a) => ("export", export(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error in stage `{stage}`: {e:#}");
            ExitCode::FAILURE
        }
    }
}
