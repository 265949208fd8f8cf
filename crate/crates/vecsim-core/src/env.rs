//! The slot-by-slot MDP: state assembly, joint action application, in-flight
//! resource bookkeeping and the three-regime reward.
//!
//! A committed task freezes its channel rates and compute fractions for its
//! whole lifetime, so its completion delay is known at commitment and the
//! reward is granted immediately. Resources stay occupied until the final TTI
//! has elapsed.

use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, LinkKind, LinkSpec};
use crate::config::{ConfigError, RewardParams, ScenarioConfig};
use crate::cost::{self, ComputeTarget, PhaseTtis};
use crate::decision::{
    decode_action, evaluate_joint, ActionLayout, ConstraintReport, Decision, DecisionError,
    MicroInstance, MicroTask, MicroVehicle, Pattern, RateTable,
};
use crate::rng;
use crate::scenario::{self, Scenario, Task, TaskStatus, TaskType};

pub const MBIT: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvError {
    Config(ConfigError),
    /// A raw action vector with the wrong shape, identifying the vehicle.
    BadAction { vehicle: usize, source: DecisionError },
    WrongActionCount { expected: usize, got: usize },
    EpisodeDone,
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::Config(e) => write!(f, "{e}"),
            EnvError::BadAction { vehicle, source } => {
                write!(f, "vehicle {vehicle}: bad action: {source}")
            }
            EnvError::WrongActionCount { expected, got } => {
                write!(f, "expected {expected} actions, got {got}")
            }
            EnvError::EpisodeDone => write!(f, "episode is done; call reset"),
        }
    }
}

impl From<ConfigError> for EnvError {
    fn from(e: ConfigError) -> Self {
        EnvError::Config(e)
    }
}

/// Which reward regime fired for a vehicle this slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardRegime {
    /// Some of c1-c7 violated: penalty.
    Penalty,
    /// Feasible but the deadline is (or would be) missed, or nothing executed.
    DeadlineMiss,
    /// Feasible execution within the deadline, or an idle vehicle.
    Utility,
}

/// Per-vehicle reward.
///
/// Regime precedence: any c1-c7 violation is penalized; otherwise the utility
/// regime fires exactly when the caller supplies `utility` (present iff
/// c1-c8 all hold for a committed execution, or the vehicle is idle with
/// `U = 0`); otherwise the deadline regime scores the slack `threshold - d`.
pub fn compute_reward(
    p: &RewardParams,
    report: &ConstraintReport,
    d_ms: f64,
    threshold_ms: f64,
    utility: Option<f64>,
) -> (f64, RewardRegime) {
    if !report.feasible() {
        let mut r = p.l1;
        for (j, flag) in report.c[..7].iter().enumerate() {
            if !flag.satisfied {
                r -= p.gamma[j] * flag.magnitude;
            }
        }
        return (r, RewardRegime::Penalty);
    }
    match utility {
        Some(u) => (p.l3 + p.gamma[7] * libm::exp(u), RewardRegime::Utility),
        None => {
            let slack = (threshold_ms - d_ms) / p.t_norm_ms;
            (p.l2 + libm::exp(slack), RewardRegime::DeadlineMiss)
        }
    }
}

/// A task that finished this slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub owner: usize,
    pub task_id: u64,
    pub target: ComputeTarget,
    pub d_ms: f64,
    pub threshold_ms: f64,
    pub deadline_met: bool,
    pub energy_j: f64,
    pub size_bits: f64,
}

/// Everything observable about one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub slot: u64,
    pub rewards: Vec<f64>,
    pub regimes: Vec<RewardRegime>,
    /// Predicted total delay per vehicle with a decided task, ms.
    pub delays_ms: Vec<Option<f64>>,
    pub thresholds_ms: Vec<Option<f64>>,
    pub completions: Vec<Completion>,
    /// Energy committed this slot, J.
    pub energy_j: f64,
    /// Net fleet revenue committed this slot.
    pub revenue: f64,
    /// beta1 * revenue - beta2 * energy over this slot's commitments.
    pub utility: f64,
    pub expired: usize,
    pub dropped: usize,
}

#[derive(Debug)]
pub struct StepOutcome {
    pub states: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
struct InFlight {
    task: Task,
    target: ComputeTarget,
    fraction: f64,
    /// Occupied channel rows per pool (all-false for unused pools).
    channels: [Vec<bool>; 4],
    phases: PhaseTtis,
    remaining_ttis: u64,
    d_ms: f64,
    energy_j: f64,
}

/// The environment. Single-writer; all randomness comes from seed-derived
/// streams so replays are bitwise identical.
pub struct VecEnv {
    config: ScenarioConfig,
    scenario: Scenario,
    slot: u64,
    next_task_id: u64,
    in_flight: Vec<InFlight>,
    rng_tasks: ChaCha12Rng,
    rng_fading: ChaCha12Rng,
    done: bool,
}

impl VecEnv {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut env = Self {
            scenario: Scenario { vehicles: Vec::new(), alignment_loss: Vec::new() },
            slot: 0,
            next_task_id: 0,
            in_flight: Vec::new(),
            rng_tasks: rng::substream(config.seed, "tasks", 0),
            rng_fading: rng::substream(config.seed, "fading", 0),
            config,
            done: false,
        };
        env.reset(0);
        Ok(env)
    }

    /// Starts episode `episode`: fresh fleet, all resources free, slot-0
    /// arrivals drawn. Returns the joint state.
    pub fn reset(&mut self, episode: u64) -> Vec<Vec<f64>> {
        let seed = self.config.seed;
        let mut scenario_rng = rng::substream(seed, "scenario", episode);
        self.scenario = scenario::spawn_with_rng(&self.config, &mut scenario_rng)
            .expect("config validated in new()");
        self.rng_tasks = rng::substream(seed, "tasks", episode);
        self.rng_fading = rng::substream(seed, "fading", episode);
        self.slot = 0;
        self.next_task_id = 0;
        self.in_flight.clear();
        self.done = false;
        self.generate_arrivals();
        self.observe_all()
    }

    pub fn config(&self) -> &ScenarioConfig {
        self.config_ref()
    }

    fn config_ref(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn layout(&self) -> ActionLayout {
        let cc = self.config.channel_counts;
        ActionLayout {
            vehicle_count: self.config.vehicle_count,
            pools: [cc.v2i_up, cc.v2i_down, cc.v2v_up, cc.v2v_down],
        }
    }

    pub fn state_dim(&self) -> usize {
        let k = self.config.vehicle_count;
        5 * k + 6 + self.layout().pools.iter().sum::<usize>()
    }

    pub fn action_dim(&self) -> usize {
        self.layout().action_dim()
    }

    /// Energy of tasks still executing, J (for end-of-episode accounting).
    pub fn in_flight_energy_j(&self) -> f64 {
        self.in_flight.iter().map(|f| f.energy_j).sum()
    }

    fn vec_free(&self) -> f64 {
        let used: f64 = self
            .in_flight
            .iter()
            .filter(|f| f.target == ComputeTarget::VecServer)
            .map(|f| f.fraction)
            .sum();
        (1.0 - used).max(0.0)
    }

    fn local_free(&self, k: usize) -> f64 {
        let used: f64 = self
            .in_flight
            .iter()
            .filter(|f| match f.target {
                ComputeTarget::Local => f.task.owner == k,
                ComputeTarget::Vehicle(j) => j == k,
                ComputeTarget::VecServer => false,
            })
            .map(|f| f.fraction)
            .sum();
        (1.0 - used).max(0.0)
    }

    fn pool_free(&self) -> [Vec<bool>; 4] {
        let pools = self.layout().pools;
        let mut free: [Vec<bool>; 4] = core::array::from_fn(|p| alloc::vec![true; pools[p]]);
        for f in &self.in_flight {
            for (pool, row) in f.channels.iter().enumerate() {
                for (n, z) in row.iter().enumerate() {
                    if *z {
                        free[pool][n] = false;
                    }
                }
            }
        }
        free
    }

    /// Head task awaiting a decision this slot, if any.
    fn decidable(&self, k: usize) -> Option<&Task> {
        self.scenario.vehicles[k]
            .head()
            .filter(|t| t.status == TaskStatus::Queued)
    }

    /// Assembles vehicle `k`'s observation: fleet speeds, positions and head
    /// sizes (normalized), remaining VEC and own compute, own task-status
    /// flags, own granted fractions, then global channel availability.
    pub fn observe(&self, k: usize) -> Vec<f64> {
        let cfg = &self.config;
        let kk = cfg.vehicle_count;
        let mut s = Vec::with_capacity(self.state_dim());
        for v in &self.scenario.vehicles {
            s.push(v.speed / cfg.v_max());
        }
        for v in &self.scenario.vehicles {
            s.push(v.position / cfg.rsu_coverage);
        }
        for v in &self.scenario.vehicles {
            s.push(v.head().map_or(0.0, |t| t.size_bits / MBIT));
        }
        s.push(self.vec_free());
        s.push(self.local_free(k));
        // status flags: holding, on the VEC, on each vehicle (own index = local)
        let holding = self.scenario.vehicles[k]
            .head()
            .is_some_and(|t| matches!(t.status, TaskStatus::Holding { .. }));
        s.push(f64::from(u8::from(holding)));
        let mine = |f: &&InFlight| f.task.owner == k;
        let on_vec = self.in_flight.iter().filter(mine).any(|f| f.target == ComputeTarget::VecServer);
        s.push(f64::from(u8::from(on_vec)));
        for j in 0..kk {
            let on_j = self.in_flight.iter().filter(mine).any(|f| match f.target {
                ComputeTarget::Vehicle(t) => t == j,
                ComputeTarget::Local => j == k,
                ComputeTarget::VecServer => false,
            });
            s.push(f64::from(u8::from(on_j)));
        }
        // granted fractions, same order
        let frac = |pred: &dyn Fn(&InFlight) -> bool| -> f64 {
            self.in_flight
                .iter()
                .filter(|f| f.task.owner == k && pred(f))
                .map(|f| f.fraction)
                .sum()
        };
        s.push(frac(&|f| f.target == ComputeTarget::VecServer));
        s.push(frac(&|f| f.target == ComputeTarget::Local));
        for j in 0..kk {
            s.push(frac(&|f| match f.target {
                ComputeTarget::Vehicle(t) => t == j,
                ComputeTarget::Local => j == k,
                ComputeTarget::VecServer => false,
            }));
        }
        for pool in self.pool_free() {
            for free in pool {
                s.push(f64::from(u8::from(free)));
            }
        }
        debug_assert_eq!(s.len(), self.state_dim());
        s
    }

    pub fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.config.vehicle_count).map(|k| self.observe(k)).collect()
    }

    fn link_rate(
        &self,
        kind: LinkKind,
        bandwidth_hz: f64,
        tx_power_w: f64,
        alignment_loss: f64,
        distance_m: f64,
        rng: Option<&mut ChaCha12Rng>,
    ) -> f64 {
        let ch = &self.config.channel;
        let spec = LinkSpec {
            kind,
            bandwidth_hz,
            tx_power_w,
            noise_w: channel::noise_power_w(ch, bandwidth_hz),
            interference_w: ch.interference_w,
            alignment_loss,
        };
        let gain = channel::channel_gain(ch, distance_m.max(1.0), rng)
            .expect("distance clamped positive");
        channel::per_channel_rate(&spec, gain).expect("spec built from validated config")
    }

    /// Per-channel rates for every vehicle and pair. With `faded` the gains
    /// include fresh fading draws in a fixed (vehicle, pool, channel) order.
    fn build_rates(&mut self, faded: bool) -> RateTable {
        let cfg = self.config.clone();
        let kk = cfg.vehicle_count;
        let bw = cfg.per_channel_bandwidth();
        let rsu = cfg.rsu_coverage / 2.0;
        let pools = self.layout().pools;
        let positions: Vec<f64> = self.scenario.vehicles.iter().map(|v| v.position).collect();
        let draw = |this: &mut Self,
                        kind: LinkKind,
                        bwi: f64,
                        p: f64,
                        loss: f64,
                        d: f64|
         -> f64 {
            if faded {
                // split borrow: rates need &self fields other than the RNG
                let mut rng = this.rng_fading.clone();
                let r = this.link_rate(kind, bwi, p, loss, d, Some(&mut rng));
                this.rng_fading = rng;
                r
            } else {
                this.link_rate(kind, bwi, p, loss, d, None)
            }
        };
        let mut v2i_up = Vec::with_capacity(kk);
        let mut v2i_down = Vec::with_capacity(kk);
        for k in 0..kk {
            let d = (positions[k] - rsu).abs();
            v2i_up.push(
                (0..pools[0])
                    .map(|_| draw(self, LinkKind::V2iUp, bw[0], cfg.tx_power_v2i, 0.0, d))
                    .collect::<Vec<f64>>(),
            );
            v2i_down.push(
                (0..pools[1])
                    .map(|_| draw(self, LinkKind::V2iDown, bw[1], cfg.tx_power_v2i, 0.0, d))
                    .collect::<Vec<f64>>(),
            );
        }
        let mut v2v_up = Vec::with_capacity(kk);
        let mut v2v_down = Vec::with_capacity(kk);
        for k in 0..kk {
            let mut up_k = Vec::with_capacity(kk);
            let mut down_k = Vec::with_capacity(kk);
            for j in 0..kk {
                if j == k {
                    up_k.push(alloc::vec![0.0; pools[2]]);
                    down_k.push(alloc::vec![0.0; pools[3]]);
                    continue;
                }
                let d = (positions[k] - positions[j]).abs();
                let loss = self.scenario.alignment_loss[k][j];
                up_k.push(
                    (0..pools[2])
                        .map(|_| draw(self, LinkKind::V2vUp, bw[2], cfg.tx_power_v2v, loss, d))
                        .collect(),
                );
                down_k.push(
                    (0..pools[3])
                        .map(|_| draw(self, LinkKind::V2vDown, bw[3], cfg.tx_power_v2v, loss, d))
                        .collect(),
                );
            }
            v2v_up.push(up_k);
            v2v_down.push(down_k);
        }
        RateTable { v2i_up, v2i_down, v2v_up, v2v_down }
    }

    fn snapshot_with(&mut self, faded: bool) -> MicroInstance {
        let rates = self.build_rates(faded);
        let cfg = &self.config;
        let neighbors = scenario::neighbor_sets(&self.scenario.vehicles);
        let vehicles = self
            .scenario
            .vehicles
            .iter()
            .enumerate()
            .map(|(k, v)| MicroVehicle {
                speed: v.speed,
                cpu: v.cpu,
                local_free: self.local_free(k),
                neighbors: neighbors[k].clone(),
                task: self.decidable(k).map(|t| MicroTask {
                    task_type: t.task_type,
                    size_bits: t.size_bits,
                    density: t.density,
                    output_ratio: t.output_ratio,
                    energy_density: t.energy_density,
                    age_ms: t.age_ms(self.slot, cfg.tti),
                    threshold_ms: t.threshold_ms,
                }),
            })
            .collect();
        MicroInstance {
            vehicles,
            vec_cpu: cfg.vec_cpu,
            vec_free: self.vec_free(),
            pool_free: self.pool_free(),
            rates,
            prices: cfg.prices,
            utility_weights: cfg.utility_weights,
            tx_power_v2i: cfg.tx_power_v2i,
            tx_power_v2v: cfg.tx_power_v2v,
            tti_ms: cfg.tti,
            hold_wait_ms: cfg.hold_wait,
            v2v_upload_kappa: cfg.v2v_upload_kappa,
        }
    }

    /// Fading-free snapshot of the current slot (what a heuristic policy may
    /// plan against without consuming randomness).
    pub fn expected_snapshot(&mut self) -> MicroInstance {
        self.snapshot_with(false)
    }

    /// Replaces any non-local choice on a critical (CA) head task by local
    /// execution, keeping the decoded fraction when one was given.
    fn override_ca(&self, k: usize, d: &mut Decision) {
        let Some(task) = self.decidable(k) else { return };
        if task.task_type != TaskType::Ca {
            return;
        }
        let b = if d.b_local > 0.0 { d.b_local } else { self.local_free(k) };
        let pools = self.layout().pools;
        *d = Decision::hold(self.config.vehicle_count, pools);
        d.hold = false;
        d.local = true;
        d.b_local = b;
    }

    pub fn step_raw(&mut self, raw: &[Vec<f64>]) -> Result<StepOutcome, EnvError> {
        if raw.len() != self.config.vehicle_count {
            return Err(EnvError::WrongActionCount {
                expected: self.config.vehicle_count,
                got: raw.len(),
            });
        }
        let layout = self.layout();
        let neighbors = scenario::neighbor_sets(&self.scenario.vehicles);
        let mut joint = Vec::with_capacity(raw.len());
        for (k, r) in raw.iter().enumerate() {
            joint.push(
                decode_action(r, &layout, k, &neighbors[k])
                    .map_err(|source| EnvError::BadAction { vehicle: k, source })?,
            );
        }
        self.step_decided(joint)
    }

    pub fn step_decided(&mut self, mut joint: Vec<Decision>) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let kk = self.config.vehicle_count;
        if joint.len() != kk {
            return Err(EnvError::WrongActionCount { expected: kk, got: joint.len() });
        }
        for (k, d) in joint.iter_mut().enumerate() {
            self.override_ca(k, d);
        }
        let inst = self.snapshot_with(true);
        let eval = evaluate_joint(&inst, &joint).expect("snapshot shapes are consistent");

        // commitment pass: c1-c7-feasible vehicles with a decidable task act;
        // a V2V grant additionally requires the target CPU not oversubscribed
        #[derive(Clone, Copy, PartialEq)]
        enum Outcome {
            Idle,
            Hold,
            Execute,
            NoCommit, // feasible flags but empty allocation: nothing to run
            Penalized,
        }
        let mut outcomes = alloc::vec![Outcome::Idle; kk];
        for k in 0..kk {
            if !eval.reports[k].feasible() {
                outcomes[k] = Outcome::Penalized;
                continue;
            }
            if self.decidable(k).is_none() {
                continue;
            }
            match joint[k].pattern() {
                None | Some(Pattern::Hold) => outcomes[k] = Outcome::Hold,
                Some(p) => {
                    let target_ok = match p {
                        Pattern::Vehicle(j) => eval.reports[j].c[1].satisfied,
                        _ => true,
                    };
                    let d_finite = eval.delays_ms[k].is_some_and(f64::is_finite);
                    outcomes[k] = if !target_ok {
                        Outcome::Penalized
                    } else if d_finite {
                        Outcome::Execute
                    } else {
                        Outcome::NoCommit
                    };
                }
            }
        }

        // committed revenue is computed over the committed set only
        let executed: Vec<cost::ExecutedTask> = (0..kk)
            .filter(|k| outcomes[*k] == Outcome::Execute)
            .map(|k| {
                let target = match joint[k].pattern().expect("execute implies a pattern") {
                    Pattern::VecServer => ComputeTarget::VecServer,
                    Pattern::Vehicle(j) => ComputeTarget::Vehicle(j),
                    Pattern::Local => ComputeTarget::Local,
                    Pattern::Hold => unreachable!(),
                };
                cost::ExecutedTask {
                    owner: k,
                    target,
                    size_bits: inst.vehicles[k].task.as_ref().expect("decidable").size_bits,
                }
            })
            .collect();
        let mut revenues = alloc::vec![0.0; kk];
        let mut energies = alloc::vec![0.0; kk];
        for k in 0..kk {
            revenues[k] = cost::vehicle_revenue(k, &executed, &self.config.prices);
            if outcomes[k] == Outcome::Execute {
                energies[k] = eval.energies_j[k];
            }
        }
        let w = self.config.utility_weights;
        let (slot_utility, slot_revenue, slot_energy) =
            cost::fleet_utility(&revenues, &energies, &w);

        // rewards
        let params = self.config.reward_params.clone();
        let mut rewards = Vec::with_capacity(kk);
        let mut regimes = Vec::with_capacity(kk);
        let mut thresholds_ms = alloc::vec![None; kk];
        for k in 0..kk {
            let thr = inst.vehicles[k].task.as_ref().map(|t| t.threshold_ms);
            thresholds_ms[k] = thr;
            let (r, regime) = match outcomes[k] {
                Outcome::Penalized => {
                    // the V2V-target case borrows the target's c2 violation
                    let mut report = eval.reports[k].clone();
                    if report.feasible() {
                        if let Some(Pattern::Vehicle(j)) = joint[k].pattern() {
                            report.c[1] = eval.reports[j].c[1];
                        }
                    }
                    compute_reward(&params, &report, 0.0, 0.0, None)
                }
                Outcome::Idle => {
                    compute_reward(&params, &eval.reports[k], 0.0, 0.0, Some(0.0))
                }
                Outcome::Hold | Outcome::NoCommit => {
                    let d = eval.delays_ms[k].unwrap_or(f64::INFINITY);
                    compute_reward(&params, &eval.reports[k], d, thr.unwrap_or(0.0), None)
                }
                Outcome::Execute => {
                    let d = eval.delays_ms[k].expect("execute implies a delay");
                    let t = thr.expect("execute implies a task");
                    let u = if d <= t {
                        Some(w.beta1 * revenues[k] - w.beta2 * energies[k])
                    } else {
                        None
                    };
                    compute_reward(&params, &eval.reports[k], d, t, u)
                }
            };
            rewards.push(r);
            regimes.push(regime);
        }

        // apply commitments
        let tti = self.config.tti;
        for k in 0..kk {
            match outcomes[k] {
                Outcome::Hold => {
                    if let Some(t) = self.scenario.vehicles[k].queue.first_mut() {
                        if t.status == TaskStatus::Queued {
                            t.status = TaskStatus::Holding { remaining_ms: self.config.hold_wait };
                        }
                    }
                }
                Outcome::Execute => {
                    let mut task = self.scenario.vehicles[k].queue.remove(0);
                    let d = &joint[k];
                    let pattern = d.pattern().expect("execute implies a pattern");
                    let has_out = task.output_ratio * task.size_bits > 0.0;
                    let pools = self.layout().pools;
                    let mut channels: [Vec<bool>; 4] =
                        core::array::from_fn(|p| alloc::vec![false; pools[p]]);
                    let (target, fraction) = match pattern {
                        Pattern::VecServer => {
                            channels[0] = d.z_v2i_up.clone();
                            if has_out {
                                channels[1] = d.z_v2i_down.clone();
                            }
                            (ComputeTarget::VecServer, d.b_vec)
                        }
                        Pattern::Vehicle(j) => {
                            channels[2] = d.z_v2v_up.clone();
                            if has_out {
                                channels[3] = d.z_v2v_down.clone();
                            }
                            (ComputeTarget::Vehicle(j), d.b_remote)
                        }
                        Pattern::Local => (ComputeTarget::Local, d.b_local),
                        Pattern::Hold => unreachable!(),
                    };
                    let mt = inst.vehicles[k].task.as_ref().expect("decidable");
                    let alloc_spec = cost::ComputeAllocation {
                        target,
                        fraction,
                        target_cpu: match target {
                            ComputeTarget::VecServer => self.config.vec_cpu,
                            ComputeTarget::Vehicle(j) => self.scenario.vehicles[j].cpu,
                            ComputeTarget::Local => self.scenario.vehicles[k].cpu,
                        },
                        uplink_bps: 0.0,
                        downlink_bps: 0.0,
                    };
                    let _ = alloc_spec;
                    let phases = committed_phases(&inst, k, d, pattern);
                    task.status = if phases.upload > 0 {
                        TaskStatus::Uploading
                    } else {
                        TaskStatus::Processing
                    };
                    self.in_flight.push(InFlight {
                        task,
                        target,
                        fraction,
                        channels,
                        phases,
                        remaining_ttis: phases.total(),
                        d_ms: mt.age_ms + phases.total() as f64 * tti,
                        energy_j: energies[k],
                    });
                }
                _ => {}
            }
        }

        // advance in-flight work and release finished resources
        let mut completions = Vec::new();
        let mut still = Vec::with_capacity(self.in_flight.len());
        for mut f in core::mem::take(&mut self.in_flight) {
            f.remaining_ttis -= 1;
            if f.remaining_ttis == 0 {
                f.task.status = TaskStatus::Done;
                completions.push(Completion {
                    owner: f.task.owner,
                    task_id: f.task.id,
                    target: f.target,
                    d_ms: f.d_ms,
                    threshold_ms: f.task.threshold_ms,
                    deadline_met: f.d_ms <= f.task.threshold_ms,
                    energy_j: f.energy_j,
                    size_bits: f.task.size_bits,
                });
            } else {
                let elapsed = f.phases.total() - f.remaining_ttis;
                f.task.status = if elapsed < f.phases.upload {
                    TaskStatus::Uploading
                } else if elapsed < f.phases.upload + f.phases.process {
                    TaskStatus::Processing
                } else {
                    TaskStatus::Downloading
                };
                still.push(f);
            }
        }
        self.in_flight = still;

        // holding tasks wait out their timer, then rejoin the decidable queue
        for v in &mut self.scenario.vehicles {
            if let Some(t) = v.queue.first_mut() {
                if let TaskStatus::Holding { remaining_ms } = t.status {
                    let left = remaining_ms - tti;
                    t.status = if left <= 0.0 {
                        TaskStatus::Queued
                    } else {
                        TaskStatus::Holding { remaining_ms: left }
                    };
                }
            }
        }

        // expiry sweep over queued tasks
        let next_slot = self.slot + 1;
        let mut expired = 0;
        for v in &mut self.scenario.vehicles {
            let before = v.queue.len();
            v.queue.retain(|t| {
                t.status != TaskStatus::Queued || t.age_ms(next_slot, tti) <= t.threshold_ms
            });
            expired += before - v.queue.len();
        }

        self.slot = next_slot;
        let dropped = self.generate_arrivals();

        for v in &mut self.scenario.vehicles {
            scenario::advance_mobility(v, self.config.rsu_coverage, tti);
        }
        let exited = self.scenario.vehicles.iter().any(|v| v.exited);
        self.done = exited || self.slot >= self.config.episode_length;

        let info = StepInfo {
            slot: next_slot - 1,
            rewards: rewards.clone(),
            regimes,
            delays_ms: eval.delays_ms,
            thresholds_ms,
            completions,
            energy_j: slot_energy,
            revenue: slot_revenue,
            utility: slot_utility,
            expired,
            dropped,
        };
        Ok(StepOutcome { states: self.observe_all(), rewards, done: self.done, info })
    }

    /// Draws per-vehicle Bernoulli arrivals for the current slot; returns the
    /// number dropped on full queues.
    fn generate_arrivals(&mut self) -> usize {
        let cfg = self.config.clone();
        let mut dropped = 0;
        for k in 0..cfg.vehicle_count {
            let (speed, len) = {
                let v = &self.scenario.vehicles[k];
                (v.speed, v.queue.len())
            };
            // one draw per vehicle per slot regardless of queue state keeps
            // the stream alignment independent of decisions
            let full_queue_probe = len >= cfg.queue_capacity;
            match scenario::generate_task(
                &mut self.rng_tasks,
                &cfg,
                k,
                speed,
                len,
                self.next_task_id,
                self.slot,
            ) {
                Some(task) => {
                    self.next_task_id += 1;
                    self.scenario.vehicles[k].queue.push(task);
                }
                None => {
                    if full_queue_probe {
                        dropped += 1;
                    }
                }
            }
        }
        dropped
    }
}

/// Phase durations of a committed execution, re-derived from the same frozen
/// snapshot the reward used.
fn committed_phases(inst: &MicroInstance, k: usize, d: &Decision, pattern: Pattern) -> PhaseTtis {
    let joint_eval_delay = crate::decision::evaluate_joint(inst, &single_joint(inst, k, d))
        .expect("snapshot is well-formed")
        .delays_ms[k]
        .expect("executing decision has a delay");
    let mt = inst.vehicles[k].task.as_ref().expect("decidable");
    let _ = pattern;
    // recover the phase split for status reporting
    let t = Task {
        id: 0,
        owner: k,
        task_type: mt.task_type,
        size_bits: mt.size_bits,
        density: mt.density,
        output_ratio: mt.output_ratio,
        energy_density: mt.energy_density,
        generated_at: 0,
        threshold_ms: mt.threshold_ms,
        status: TaskStatus::Queued,
    };
    let alloc_spec = match pattern {
        Pattern::VecServer => cost::ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: d.b_vec,
            target_cpu: inst.vec_cpu,
            uplink_bps: row_rate(&d.z_v2i_up, &inst.rates.v2i_up[k]),
            downlink_bps: row_rate(&d.z_v2i_down, &inst.rates.v2i_down[k]),
        },
        Pattern::Vehicle(j) => cost::ComputeAllocation {
            target: ComputeTarget::Vehicle(j),
            fraction: d.b_remote,
            target_cpu: inst.vehicles[j].cpu,
            uplink_bps: row_rate(&d.z_v2v_up, &inst.rates.v2v_up[k][j]),
            downlink_bps: row_rate(&d.z_v2v_down, &inst.rates.v2v_down[k][j]),
        },
        Pattern::Local => cost::ComputeAllocation {
            target: ComputeTarget::Local,
            fraction: d.b_local,
            target_cpu: inst.vehicles[k].cpu,
            uplink_bps: 0.0,
            downlink_bps: 0.0,
        },
        Pattern::Hold => unreachable!(),
    };
    let phases = cost::completion_time(&t, &alloc_spec, inst.tti_ms)
        .expect("commitment implies a finite delay");
    // compare in f64: a starved allocation can run for ~1e17 TTIs, where the
    // u64 round trip through the delay loses the low bits
    let rebuilt = mt.age_ms + phases.total() as f64 * inst.tti_ms;
    debug_assert!(
        (rebuilt - joint_eval_delay).abs() <= 1e-9 * joint_eval_delay.abs().max(1.0),
        "phase split disagrees with the committed delay: {rebuilt} vs {joint_eval_delay}"
    );
    phases
}

fn row_rate(row: &[bool], rates: &[f64]) -> f64 {
    row.iter().zip(rates).filter(|(z, _)| **z).map(|(_, r)| *r).sum()
}

fn single_joint(inst: &MicroInstance, k: usize, d: &Decision) -> Vec<Decision> {
    let kk = inst.vehicles.len();
    let pools = inst.pool_sizes();
    (0..kk)
        .map(|i| if i == k { d.clone() } else { Decision::hold(kk, pools) })
        .collect()
}
