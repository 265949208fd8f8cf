//! Comparison policies: pure decision functions over a one-slot snapshot,
//! plus a shared evaluation loop that drives them through the environment.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::decision::{self, Decision, MicroInstance, Pattern};
use crate::env::{EnvError, StepOutcome, VecEnv};
use crate::learn::{AgentArrangement, Maddpg};
use crate::rng;
use crate::scenario::TaskType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// All tasks execute locally.
    Al,
    /// All offloadable tasks go to the VEC server.
    Av,
    /// Uniform random target.
    Rd,
    /// Greedy single-vehicle utility maximizer.
    Edg,
    Ddpg,
    Maddpg,
}

impl PolicyKind {
    pub fn is_learned(self) -> bool {
        matches!(self, PolicyKind::Ddpg | PolicyKind::Maddpg)
    }
}

fn free_indices(pool: &[bool]) -> Vec<usize> {
    pool.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect()
}

/// Compute load of a snapshot task, cycles.
fn load(inst: &MicroInstance, k: usize) -> f64 {
    inst.vehicles[k].task.as_ref().map_or(0.0, |t| t.size_bits * t.density)
}

/// This vehicle's share of a contended resource, proportional to compute
/// load over the contending set, snapped up to the quantized request grid so
/// heuristic decisions stay inside the enumeration's option set.
fn proportional_share(inst: &MicroInstance, k: usize, contenders: &[usize]) -> f64 {
    let total: f64 = contenders.iter().map(|j| load(inst, *j)).sum();
    let share = if total <= 0.0 { 1.0 } else { load(inst, k) / total };
    if share <= 0.5 {
        0.5
    } else {
        1.0
    }
}

/// Quantizes a capacity request onto the half/full grid shared with the
/// exhaustive search, so heuristic decisions stay inside its option set.
fn grid_request(x: f64) -> f64 {
    if x <= 0.5 {
        0.5
    } else {
        1.0
    }
}

/// One classical baseline decision for vehicle `k` under the frozen snapshot.
///
/// Learned kinds act through their networks, not through this function.
pub fn baseline_decision(
    kind: PolicyKind,
    inst: &MicroInstance,
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Decision {
    let k_count = inst.vehicles.len();
    let pools = inst.pool_sizes();
    let Some(task) = inst.vehicles[k].task.clone() else {
        return Decision::hold(k_count, pools);
    };
    match kind {
        PolicyKind::Al => {
            let mut d = Decision::hold(k_count, pools);
            d.hold = false;
            d.local = true;
            d.b_local = grid_request(inst.vehicles[k].local_free);
            d
        }
        PolicyKind::Av => {
            let mut d = Decision::hold(k_count, pools);
            d.hold = false;
            if task.task_type == TaskType::Ca {
                d.local = true;
                d.b_local = grid_request(inst.vehicles[k].local_free);
                return d;
            }
            d.vec_server = true;
            // every offloadable task contends for the server
            let bound: Vec<usize> = (0..k_count)
                .filter(|j| {
                    inst.vehicles[*j]
                        .task
                        .as_ref()
                        .is_some_and(|t| t.task_type != TaskType::Ca)
                })
                .collect();
            d.b_vec = grid_request(proportional_share(inst, k, &bound) * inst.vec_free);
            // channels in index order from the free pool, one per contender,
            // so concurrent offloaders never collide
            let rank = bound.iter().position(|j| *j == k).expect("k is offloadable");
            let up = free_indices(&inst.pool_free[0]);
            if let Some(ch) = up.get(rank) {
                d.z_v2i_up[*ch] = true;
            }
            if task.output_ratio > 0.0 {
                let needs_down: Vec<usize> = bound
                    .iter()
                    .copied()
                    .filter(|j| {
                        inst.vehicles[*j].task.as_ref().is_some_and(|t| t.output_ratio > 0.0)
                    })
                    .collect();
                let drank = needs_down.iter().position(|j| *j == k).expect("k needs downlink");
                let down = free_indices(&inst.pool_free[1]);
                if let Some(ch) = down.get(drank) {
                    d.z_v2i_down[*ch] = true;
                }
            }
            d
        }
        PolicyKind::Rd => {
            // support: local, VEC (if idle capacity), each neighbor with a
            // free CPU; hold is never drawn and CA tasks never leave the
            // vehicle
            let mut support: Vec<Pattern> = alloc::vec![Pattern::Local];
            if task.task_type != TaskType::Ca {
                if inst.vec_free > 0.0 {
                    support.push(Pattern::VecServer);
                }
                for j in &inst.vehicles[k].neighbors {
                    if inst.vehicles[*j].local_free > 0.0 {
                        support.push(Pattern::Vehicle(*j));
                    }
                }
            }
            let pick = support[rng.random_range(0..support.len())];
            let tasked: Vec<usize> =
                (0..k_count).filter(|j| inst.vehicles[*j].task.is_some()).collect();
            let share = proportional_share(inst, k, &tasked);
            let mut d = Decision::hold(k_count, pools);
            d.hold = false;
            let mut pick_channel = |row: &mut Vec<bool>, pool: &[bool]| {
                let free = free_indices(pool);
                if !free.is_empty() {
                    row[free[rng.random_range(0..free.len())]] = true;
                }
            };
            match pick {
                Pattern::Local => {
                    d.local = true;
                    d.b_local = grid_request(inst.vehicles[k].local_free);
                }
                Pattern::VecServer => {
                    d.vec_server = true;
                    d.b_vec = grid_request(share * inst.vec_free);
                    let mut up = core::mem::take(&mut d.z_v2i_up);
                    pick_channel(&mut up, &inst.pool_free[0]);
                    d.z_v2i_up = up;
                    if task.output_ratio > 0.0 {
                        let mut down = core::mem::take(&mut d.z_v2i_down);
                        pick_channel(&mut down, &inst.pool_free[1]);
                        d.z_v2i_down = down;
                    }
                }
                Pattern::Vehicle(j) => {
                    d.v2v[j] = true;
                    d.b_remote = grid_request(share * inst.vehicles[j].local_free);
                    let mut up = core::mem::take(&mut d.z_v2v_up);
                    pick_channel(&mut up, &inst.pool_free[2]);
                    d.z_v2v_up = up;
                    if task.output_ratio > 0.0 {
                        let mut down = core::mem::take(&mut d.z_v2v_down);
                        pick_channel(&mut down, &inst.pool_free[3]);
                        d.z_v2v_down = down;
                    }
                }
                Pattern::Hold => unreachable!("hold is outside RD's support"),
            }
            d
        }
        PolicyKind::Edg => edg_decision(inst, k),
        PolicyKind::Ddpg | PolicyKind::Maddpg => {
            panic!("learned policies act through their networks")
        }
    }
}

/// Greedy: scores every quantized executing option for the vehicle with
/// everyone else holding and keeps the feasible utility maximizer; holding is
/// only the fallback when no executing option passes the constraints. The
/// fleet-side utility is used so the peer payment of a V2V handoff washes
/// out; ties break toward lower energy, then lower predicted delay.
fn edg_decision(inst: &MicroInstance, k: usize) -> Decision {
    let k_count = inst.vehicles.len();
    let pools = inst.pool_sizes();
    let mut best: Option<(f64, f64, f64, Decision)> = None;
    for opt in decision::vehicle_options(inst, k) {
        if opt.hold {
            continue;
        }
        let mut joint: Vec<Decision> =
            (0..k_count).map(|_| Decision::hold(k_count, pools)).collect();
        joint[k] = opt.clone();
        let Ok(eval) = decision::evaluate_joint(inst, &joint) else { continue };
        if !eval.reports.iter().all(|r| r.feasible()) || !eval.reports[k].deadline_met() {
            continue;
        }
        let u = eval.utility;
        let e = eval.energies_j[k];
        let d = eval.delays_ms[k].unwrap_or(f64::INFINITY);
        let better = match &best {
            None => true,
            Some((bu, be, bd, _)) => {
                u > *bu || (u == *bu && (e < *be || (e == *be && d < *bd)))
            }
        };
        if better {
            best = Some((u, e, d, opt));
        }
    }
    best.map(|(_, _, _, d)| d).unwrap_or_else(|| Decision::hold(k_count, pools))
}

/// Per-vehicle evaluation aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    /// Mean delay over this vehicle's completed tasks, ms (0 if none).
    pub mean_delay_ms: f64,
    /// Mean committed energy per episode, J.
    pub mean_energy_j: f64,
    /// Completed tasks finishing inside their threshold (1 if none completed).
    pub deadline_hit_rate: f64,
    pub mean_reward: f64,
}

/// Fleet evaluation aggregates plus the per-episode reward series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub mean_delay_ms: f64,
    /// Mean committed fleet utility per slot.
    pub mean_utility: f64,
    /// Mean committed fleet energy per episode, J.
    pub mean_energy_j: f64,
    /// Completions inside their threshold over completions plus expiries.
    pub deadline_hit_rate: f64,
    pub mean_reward: f64,
    /// Fleet-mean reward per episode; one entry per episode.
    pub episode_rewards: Vec<f64>,
    pub per_vehicle: Vec<VehicleMetrics>,
}

fn run_eval<F>(
    config: &ScenarioConfig,
    episodes: u64,
    seed: u64,
    mut act: F,
) -> Result<PolicyMetrics, EnvError>
where
    F: FnMut(&mut VecEnv, u64, &[Vec<f64>]) -> Result<StepOutcome, EnvError>,
{
    let mut cfg = config.clone();
    cfg.seed = seed;
    let kk = cfg.vehicle_count;
    let mut env = VecEnv::new(cfg).map_err(EnvError::Config)?;
    let mut episode_rewards = Vec::with_capacity(episodes as usize);
    let mut delay_sum = 0.0;
    let mut completions = 0u64;
    let mut hits = 0u64;
    let mut expired = 0u64;
    let mut utility_sum = 0.0;
    let mut energy_sum = 0.0;
    let mut reward_sum = 0.0;
    let mut slots = 0u64;
    let mut v_delay = alloc::vec![0.0; kk];
    let mut v_done = alloc::vec![0u64; kk];
    let mut v_hits = alloc::vec![0u64; kk];
    let mut v_energy = alloc::vec![0.0; kk];
    let mut v_reward = alloc::vec![0.0; kk];
    for episode in 0..episodes {
        let mut states = env.reset(episode);
        let mut ep_reward = 0.0;
        let mut ep_slots = 0u64;
        while !env.done() {
            let out = act(&mut env, episode, &states)?;
            for c in &out.info.completions {
                delay_sum += c.d_ms;
                completions += 1;
                hits += u64::from(c.deadline_met);
                v_delay[c.owner] += c.d_ms;
                v_done[c.owner] += 1;
                v_hits[c.owner] += u64::from(c.deadline_met);
                v_energy[c.owner] += c.energy_j;
            }
            expired += out.info.expired as u64;
            utility_sum += out.info.utility;
            energy_sum += out.info.energy_j;
            for (k, r) in out.rewards.iter().enumerate() {
                v_reward[k] += r;
                reward_sum += r;
                ep_reward += r;
            }
            slots += 1;
            ep_slots += 1;
            states = out.states;
        }
        episode_rewards.push(ep_reward / (ep_slots.max(1) * kk as u64) as f64);
    }
    let safe = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let attempted = completions + expired;
    let per_vehicle = (0..kk)
        .map(|k| VehicleMetrics {
            mean_delay_ms: safe(v_delay[k], v_done[k] as f64),
            mean_energy_j: v_energy[k] / episodes as f64,
            deadline_hit_rate: if v_done[k] > 0 { v_hits[k] as f64 / v_done[k] as f64 } else { 1.0 },
            mean_reward: safe(v_reward[k], slots as f64),
        })
        .collect();
    Ok(PolicyMetrics {
        mean_delay_ms: safe(delay_sum, completions as f64),
        mean_utility: safe(utility_sum, slots as f64),
        mean_energy_j: energy_sum / episodes as f64,
        deadline_hit_rate: if attempted > 0 { hits as f64 / attempted as f64 } else { 1.0 },
        mean_reward: safe(reward_sum, (slots * kk as u64) as f64),
        episode_rewards,
        per_vehicle,
    })
}

/// Rolls a classical baseline through `episodes` episodes; deterministic for
/// a given seed.
pub fn evaluate_baseline(
    kind: PolicyKind,
    config: &ScenarioConfig,
    episodes: u64,
    seed: u64,
) -> Result<PolicyMetrics, EnvError> {
    assert!(!kind.is_learned(), "learned policies evaluate via evaluate_learner");
    let mut draw = rng::stream(seed, "policy");
    run_eval(config, episodes, seed, move |env, _episode, _states| {
        let inst = env.expected_snapshot();
        let joint: Vec<Decision> = (0..inst.vehicles.len())
            .map(|k| baseline_decision(kind, &inst, k, &mut draw))
            .collect();
        env.step_decided(joint)
    })
}

/// Greedy rollout of trained actors (no exploration noise).
pub fn evaluate_learner(
    learner: &Maddpg,
    arrangement: AgentArrangement,
    config: &ScenarioConfig,
    episodes: u64,
    seed: u64,
) -> Result<PolicyMetrics, EnvError> {
    run_eval(config, episodes, seed, move |env, _episode, states| {
        let raw = match arrangement {
            AgentArrangement::PerVehicle => learner.act_greedy(states),
            AgentArrangement::SingleAgent => {
                let flat: Vec<f64> = states.iter().flatten().copied().collect();
                let joint = learner.act_greedy(&[flat]);
                crate::learn::split_action(&joint[0], env.config().vehicle_count)
            }
        };
        env.step_raw(&raw)
    })
}
