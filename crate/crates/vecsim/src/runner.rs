//! Seeded experiment runner: evaluates (training first when needed) a policy
//! over a seed list and writes deterministic CSV/JSON artifacts.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vecsim_core::baselines::{evaluate_baseline, evaluate_learner, PolicyKind, PolicyMetrics};
use vecsim_core::env::VecEnv;
use vecsim_core::learn::{train_maddpg, AgentArrangement, EpisodeLog, Maddpg};

use crate::checkpoint;
use crate::config_io::RunConfig;

/// Stable fleet-metrics schema; pinned by a golden-file test.
pub const METRICS_HEADER: [&str; 12] = [
    "policy",
    "seed",
    "episodes",
    "vehicle_count",
    "vec_cpu",
    "mean_delay_ms",
    "mean_utility",
    "mean_energy_j",
    "deadline_hit_rate",
    "mean_reward",
    "config_hash",
    "version",
];

pub const VEHICLE_HEADER: [&str; 7] = [
    "policy",
    "seed",
    "vehicle",
    "mean_delay_ms",
    "mean_energy_j",
    "deadline_hit_rate",
    "mean_reward",
];

pub const REWARDS_HEADER: [&str; 4] = ["policy", "seed", "episode", "mean_reward"];

pub const TRAINING_HEADER: [&str; 6] =
    ["seed", "episode", "noise_sigma", "mean_reward", "critic_loss", "actor_objective"];

/// Inclusive seed range `a..b`, or a single seed.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range {spec}"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range {spec}"))?;
        if a > b {
            bail!("empty seed range {spec}");
        }
        Ok((a..=b).collect())
    } else {
        Ok(vec![spec.trim().parse().with_context(|| format!("bad seed {spec}"))?])
    }
}

pub fn parse_policy(s: &str) -> Result<PolicyKind> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "al" => PolicyKind::Al,
        "av" => PolicyKind::Av,
        "rd" => PolicyKind::Rd,
        "edg" => PolicyKind::Edg,
        "ddpg" => PolicyKind::Ddpg,
        "maddpg" => PolicyKind::Maddpg,
        other => bail!("unknown policy {other} (expected AL, AV, RD, EDG, DDPG or MADDPG)"),
    })
}

pub fn policy_name(kind: PolicyKind) -> &'static str {
    match kind {
        PolicyKind::Al => "AL",
        PolicyKind::Av => "AV",
        PolicyKind::Rd => "RD",
        PolicyKind::Edg => "EDG",
        PolicyKind::Ddpg => "DDPG",
        PolicyKind::Maddpg => "MADDPG",
    }
}

pub fn arrangement_for(kind: PolicyKind) -> AgentArrangement {
    match kind {
        PolicyKind::Ddpg => AgentArrangement::SingleAgent,
        _ => AgentArrangement::PerVehicle,
    }
}

/// FNV-1a over the resolved config JSON, hex encoded.
pub fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Worker cap: `VECSIM_THREADS` if set, else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var("VECSIM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

struct SeedOutput {
    seed: u64,
    metrics: PolicyMetrics,
    training: Option<Vec<EpisodeLog>>,
    learner: Option<Maddpg>,
}

fn evaluate_seed(
    cfg: &RunConfig,
    policy: PolicyKind,
    seed: u64,
    eval_episodes: u64,
    pretrained: Option<&Maddpg>,
    arrangement: AgentArrangement,
) -> Result<SeedOutput> {
    if !policy.is_learned() {
        let metrics = evaluate_baseline(policy, &cfg.scenario, eval_episodes, seed)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        return Ok(SeedOutput { seed, metrics, training: None, learner: None });
    }
    if let Some(learner) = pretrained {
        let metrics = evaluate_learner(learner, arrangement, &cfg.scenario, eval_episodes, seed)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        return Ok(SeedOutput { seed, metrics, training: None, learner: None });
    }
    let mut scenario = cfg.scenario.clone();
    scenario.seed = seed;
    let mut env = VecEnv::new(scenario).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (learner, logs) =
        train_maddpg(&mut env, &cfg.learn, arrangement).map_err(|e| anyhow::anyhow!("{e}"))?;
    let metrics = evaluate_learner(&learner, arrangement, &cfg.scenario, eval_episodes, seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(SeedOutput { seed, metrics, training: Some(logs), learner: Some(learner) })
}

/// Runs `policy` over every seed (training first for learned policies
/// without a checkpoint) and writes `metrics.csv`, `metrics_vehicles.csv`,
/// `rewards.csv`, `run.json`, plus `training_log.csv` and per-seed
/// checkpoints when training happened. Seeds run on a worker pool; outputs
/// are merged in seed order so reruns are byte-identical.
pub fn run_experiment(
    cfg: &RunConfig,
    policy: PolicyKind,
    seeds: &[u64],
    out: &Path,
    pretrained: Option<&(Maddpg, AgentArrangement)>,
    eval_episodes: u64,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let arrangement =
        pretrained.map(|(_, a)| *a).unwrap_or_else(|| arrangement_for(policy));
    let results = Mutex::new(Vec::<SeedOutput>::new());
    let errors = Mutex::new(Vec::<anyhow::Error>::new());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = worker_count().min(seeds.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                match evaluate_seed(
                    cfg,
                    policy,
                    seed,
                    eval_episodes,
                    pretrained.map(|(l, _)| l),
                    arrangement,
                ) {
                    Ok(out) => results.lock().expect("poisoned").push(out),
                    Err(e) => errors.lock().expect("poisoned").push(e),
                }
            });
        }
    });
    if let Some(e) = errors.into_inner().expect("poisoned").into_iter().next() {
        return Err(e);
    }
    let mut results = results.into_inner().expect("poisoned");
    results.sort_by_key(|r| r.seed);

    let hash = config_hash(cfg);
    let version = env!("CARGO_PKG_VERSION");
    let name = policy_name(policy);

    let metrics_path = out.join("metrics.csv");
    let mut w = csv::Writer::from_path(&metrics_path)?;
    w.write_record(METRICS_HEADER)?;
    for r in &results {
        w.write_record([
            name.to_string(),
            r.seed.to_string(),
            eval_episodes.to_string(),
            cfg.scenario.vehicle_count.to_string(),
            format!("{}", cfg.scenario.vec_cpu),
            format!("{}", r.metrics.mean_delay_ms),
            format!("{}", r.metrics.mean_utility),
            format!("{}", r.metrics.mean_energy_j),
            format!("{}", r.metrics.deadline_hit_rate),
            format!("{}", r.metrics.mean_reward),
            hash.clone(),
            version.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("metrics_vehicles.csv"))?;
    w.write_record(VEHICLE_HEADER)?;
    for r in &results {
        for (k, v) in r.metrics.per_vehicle.iter().enumerate() {
            w.write_record([
                name.to_string(),
                r.seed.to_string(),
                k.to_string(),
                format!("{}", v.mean_delay_ms),
                format!("{}", v.mean_energy_j),
                format!("{}", v.deadline_hit_rate),
                format!("{}", v.mean_reward),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("rewards.csv"))?;
    w.write_record(REWARDS_HEADER)?;
    for r in &results {
        for (episode, reward) in r.metrics.episode_rewards.iter().enumerate() {
            w.write_record([
                name.to_string(),
                r.seed.to_string(),
                episode.to_string(),
                format!("{reward}"),
            ])?;
        }
    }
    w.flush()?;

    if results.iter().any(|r| r.training.is_some()) {
        let mut w = csv::Writer::from_path(out.join("training_log.csv"))?;
        w.write_record(TRAINING_HEADER)?;
        for r in &results {
            for log in r.training.as_deref().unwrap_or(&[]) {
                let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
                w.write_record([
                    r.seed.to_string(),
                    log.episode.to_string(),
                    format!("{}", log.noise_sigma),
                    format!("{}", mean(&log.mean_reward)),
                    format!("{}", mean(&log.critic_loss)),
                    format!("{}", mean(&log.actor_objective)),
                ])?;
            }
        }
        w.flush()?;
        for r in &results {
            if let Some(learner) = &r.learner {
                checkpoint::save(
                    &out.join(format!("checkpoint_seed{}.ck", r.seed)),
                    learner,
                    arrangement,
                    r.seed,
                )?;
            }
        }
    }

    #[derive(Serialize)]
    struct RunRecord<'a> {
        policy: &'a str,
        seeds: &'a [u64],
        eval_episodes: u64,
        config_hash: &'a str,
        version: &'a str,
        config: &'a RunConfig,
    }
    let record = RunRecord {
        policy: name,
        seeds,
        eval_episodes,
        config_hash: &hash,
        version,
        config: cfg,
    };
    std::fs::write(out.join("run.json"), serde_json::to_string_pretty(&record)?)?;
    Ok(metrics_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs_parse_inclusively() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("7..7").unwrap(), vec![7]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in [
            PolicyKind::Al,
            PolicyKind::Av,
            PolicyKind::Rd,
            PolicyKind::Edg,
            PolicyKind::Ddpg,
            PolicyKind::Maddpg,
        ] {
            assert_eq!(parse_policy(policy_name(kind)).unwrap(), kind);
        }
        assert!(parse_policy("sarsa").is_err());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.scenario.vehicle_count = 9;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn runs_are_byte_identical() {
        let mut cfg = RunConfig::default();
        cfg.scenario.arrival_probability = 0.3;
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_experiment(&cfg, PolicyKind::Rd, &[1, 2, 3], d1.path(), None, 2).unwrap();
        run_experiment(&cfg, PolicyKind::Rd, &[1, 2, 3], d2.path(), None, 2).unwrap();
        for file in ["metrics.csv", "metrics_vehicles.csv", "rewards.csv"] {
            let a = std::fs::read(d1.path().join(file)).unwrap();
            let b = std::fs::read(d2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn golden_metrics_header() {
        let cfg = RunConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let path = run_experiment(&cfg, PolicyKind::Al, &[0], dir.path(), None, 1).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "policy,seed,episodes,vehicle_count,vec_cpu,mean_delay_ms,mean_utility,\
             mean_energy_j,deadline_hit_rate,mean_reward,config_hash,version"
        );
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2, "one fleet row per seed");
        assert!(rows[1].starts_with("AL,0,1,3,8000000000,"));
    }

    #[test]
    fn training_run_writes_log_and_checkpoint() {
        let mut cfg = RunConfig::default();
        cfg.scenario.vehicle_count = 2;
        cfg.scenario.episode_length = 10;
        cfg.learn.episodes = 3;
        cfg.learn.batch_size = 8;
        cfg.learn.buffer_capacity = 64;
        cfg.learn.critic_hidden = vec![8];
        cfg.learn.actor_hidden = vec![8];
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&cfg, PolicyKind::Maddpg, &[4], dir.path(), None, 2).unwrap();
        let log = std::fs::read_to_string(dir.path().join("training_log.csv")).unwrap();
        assert_eq!(
            log.lines().next().unwrap(),
            "seed,episode,noise_sigma,mean_reward,critic_loss,actor_objective"
        );
        assert_eq!(log.lines().count(), 4, "header plus one row per episode");
        let ck = dir.path().join("checkpoint_seed4.ck");
        let (learner, arr) = checkpoint::load(&ck).unwrap();
        assert_eq!(arr, AgentArrangement::PerVehicle);
        assert_eq!(learner.agents.len(), 2);
        // run.json carries the fully resolved config
        let run: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap())
                .unwrap();
        assert_eq!(run["config"]["vehicle_count"], 2);
        assert_eq!(run["config"]["learn"]["episodes"], 3);
        assert_eq!(run["policy"], "MADDPG");
    }
}
