use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use samro_core::energy::{EnergyConfig, EnergyNet};
use samro_core::env::{Awareness, Env};
use samro_core::mdp::{FeatureScaling, RewardConfig};
use samro_core::sim::ScenarioConfig;
use samro_core::td3::{Td3Agent, Td3Config};
use samro_core::transfer::*;

fn env(seed: u64) -> Env {
    let scenario = ScenarioConfig {
        ticks_per_agent_step: 20,
        rng_seed: seed,
        ..ScenarioConfig::desk()
    };
    Env::new(scenario, Awareness::Slice, RewardConfig::standard(2)).unwrap()
}

fn small_energy() -> EnergyConfig {
    EnergyConfig {
        hidden: vec![16, 8],
        pretrain_batches: 20,
        refresh_period: 5,
        refresh_batches: 4,
        ..EnergyConfig::default()
    }
}

fn small_td3() -> Td3Config {
    Td3Config {
        batch_size: 8,
        actor_hidden: vec![16],
        critic_hidden: vec![16],
        ..Td3Config::default()
    }
}

struct Setup {
    env: Env,
    units: Units,
    data: Dataset,
    rng: ChaCha8Rng,
}

fn setup(n: usize) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut env = env(1);
    let units = Units::for_env(&env, FeatureScaling::default());
    let cfg = CollectionConfig {
        n_samples: n,
        ..CollectionConfig::default()
    };
    let data = collect_offline(&mut env, &cfg, &mut rng).unwrap();
    Setup {
        env,
        units,
        data,
        rng,
    }
}

#[test]
fn collected_records_are_on_grid_and_chained() {
    let s = setup(6);
    assert_eq!(s.data.len(), 6);
    assert_eq!(s.data.state_dim(), 208);
    assert_eq!(s.data.action_dim(), 136);
    for r in &s.data.records {
        assert!(s.env.grid().is_operating(&r.action));
        assert!((-6.5..=10.0).contains(&r.reward));
    }
    for w in s.data.records.windows(2) {
        assert_eq!(w[0].next_state, w[1].state);
    }
    assert_eq!(s.env.interactions(), 6);
}

#[test]
fn dataset_survives_a_csv_round_trip() {
    let s = setup(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    s.data.save(&path).unwrap();
    assert_eq!(Dataset::load(&path).unwrap(), s.data);
}

#[test]
fn augmentation_keeps_outcomes_and_snaps_back() {
    let mut s = setup(4);
    let aug = augment_dataset(&s.data, 5, &s.units.grid, &mut s.rng).unwrap();
    assert_eq!(aug.len(), 20);
    for (i, r) in aug.records.iter().enumerate() {
        let src = &s.data.records[i / 5];
        assert_eq!(r.state, src.state);
        assert_eq!(r.next_state, src.next_state);
        assert_eq!(r.reward, src.reward);
        assert_eq!(s.units.grid.snap_nearest(&r.action).unwrap(), src.action);
    }
    assert!(augment_dataset(&s.data, 0, &s.units.grid, &mut s.rng).is_err());
}

#[test]
fn offline_training_counts_minibatches() {
    let mut s = setup(8);
    let mut agent = Td3Agent::new(208, 136, small_td3(), &mut s.rng).unwrap();
    let mut energy = EnergyNet::new(344, small_energy(), &mut s.rng).unwrap();
    let cfg = OfflineConfig {
        batches: Some(30),
        ..OfflineConfig::default()
    };
    let mut seen = 0;
    let log = train_offline(
        &s.data,
        &s.units,
        &mut agent,
        &mut energy,
        &cfg,
        &mut s.rng,
        |_, _| seen += 1,
    )
    .unwrap();
    assert_eq!(seen, 30);
    assert_eq!(log.batches, 30);
    assert_eq!(log.critic_loss.len(), 30);
    assert_eq!(log.actor_loss.len(), 10);
    assert_eq!(log.actor_q.len(), 10);
    assert!(log.actor_q.iter().all(|&(i, _)| (i + 1) % 3 == 0));
    assert_eq!(agent.critic_updates(), 30);
    assert_eq!(energy.batches_trained(), 20);
    assert!(agent.is_finite());
}

#[test]
fn centred_actor_starts_at_the_data_mean() {
    let mut s = setup(8);
    let mut agent = Td3Agent::new(208, 136, small_td3(), &mut s.rng).unwrap();
    let mut energy = EnergyNet::new(
        344,
        EnergyConfig {
            alpha: 0.0,
            ..small_energy()
        },
        &mut s.rng,
    )
    .unwrap();
    let cfg = OfflineConfig {
        batches: Some(0),
        ..OfflineConfig::default()
    };
    train_offline(
        &s.data,
        &s.units,
        &mut agent,
        &mut energy,
        &cfg,
        &mut s.rng,
        |_, _| {},
    )
    .unwrap();
    let recs: Vec<_> = s.data.records.iter().collect();
    let batch = s.units.batch(&recs).unwrap();
    let mean = batch.actions.mean_axis(ndarray::Axis(0)).unwrap();
    let bias = &agent.actor.layers().last().unwrap().bias;
    for (b, m) in bias.iter().zip(mean.iter()) {
        assert!((b.tanh() - m.clamp(-0.95, 0.95)).abs() < 1e-12);
    }
}

#[test]
fn finetuning_bookkeeping() {
    let mut s = setup(8);
    let mut agent = Td3Agent::new(208, 136, small_td3(), &mut s.rng).unwrap();
    let mut energy = EnergyNet::new(344, small_energy(), &mut s.rng).unwrap();
    energy
        .fit(
            s.units.energy_inputs(&s.data.records).unwrap().view(),
            5,
            &mut s.rng,
        )
        .unwrap();
    let mut buffers = ReplayBuffers::new(s.data.records.clone(), 1000, 0.2).unwrap();
    let cfg = OnlineConfig {
        steps: 12,
        ..OnlineConfig::default()
    };
    let before = energy.batches_trained();
    let log = finetune_online(
        &mut s.env,
        &mut agent,
        &mut energy,
        &mut buffers,
        &s.units,
        &cfg,
        &mut s.rng,
    )
    .unwrap();
    assert_eq!(log.steps.len(), 12);
    assert_eq!(log.critic_updates, 12);
    assert_eq!(log.actor_updates, 4);
    assert_eq!(log.refreshes, vec![5, 10]);
    assert_eq!(energy.batches_trained() - before, 8);
    let expected: Vec<f64> = (0..12).map(|t| cfg.beta.beta(t as u64 / 5)).collect();
    assert_eq!(log.betas, expected);
    assert_eq!(buffers.online_len(), 12);
    assert_eq!(buffers.offline().len(), 8);
    for (rec, step) in buffers.online().zip(&log.steps) {
        assert!(s.units.grid.is_operating(&step.action));
        let lo_hi: Vec<(f64, f64)> = (0..136).map(|j| s.units.grid.bounds(j)).collect();
        assert!(rec
            .action
            .iter()
            .zip(&lo_hi)
            .all(|(a, (lo, hi))| a >= lo && a <= hi));
        assert_eq!(rec.reward, step.reward);
    }
    assert_eq!(s.env.interactions(), 8 + 12);
}

#[test]
fn evaluation_leaves_the_agent_untouched() {
    let mut s = setup(2);
    let agent = Td3Agent::new(208, 136, small_td3(), &mut s.rng).unwrap();
    let snapshot = agent.clone();
    let policy = Policy::Agent {
        agent: &agent,
        units: &s.units,
        k: 4,
    };
    let logs = evaluate(&mut s.env, &policy, 3, &mut s.rng).unwrap();
    assert_eq!(logs.len(), 3);
    for (name, net) in agent.networks() {
        let orig = snapshot
            .networks()
            .into_iter()
            .find(|(n, _)| *n == name)
            .unwrap()
            .1;
        assert_eq!(net, orig, "{name} changed");
    }
    assert!(logs.iter().all(|l| s.units.grid.is_operating(&l.action)));
}

#[test]
fn fixed_policy_repeats_its_action() {
    let mut s = setup(1);
    let a = s.env.default_action();
    let logs = evaluate(&mut s.env, &Policy::Fixed(a.clone()), 4, &mut s.rng).unwrap();
    assert!(logs.iter().all(|l| l.action == a));
}
