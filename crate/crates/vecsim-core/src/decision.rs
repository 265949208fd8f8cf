//! Action decoding, constraint verification (c1-c8) and an exhaustive-search
//! oracle over quantized micro-instances.
//!
//! Constraint violations are data, not errors: the checker reports per-vehicle
//! flags and violation magnitudes and the caller decides what to do (the
//! environment converts them into penalty rewards, the oracle filters on them).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Prices, Thresholds, UtilityWeights};
use crate::cost::{self, ComputeAllocation, ComputeTarget, ExecutedTask};
use crate::scenario::{Task, TaskStatus, TaskType};

/// Upper bound on joint decisions the oracle will enumerate.
pub const ORACLE_BUDGET: u128 = 10_000_000;

/// Oracle compute-fraction grid.
pub const FRACTION_GRID: [f64; 2] = [0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub enum DecisionError {
    DimensionMismatch { expected: usize, got: usize },
    MalformedInstance(String),
    BudgetExceeded { size: u128 },
}

impl fmt::Display for DecisionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionError::DimensionMismatch { expected, got } => {
                write!(f, "expected vector of length {expected}, got {got}")
            }
            DecisionError::MalformedInstance(why) => write!(f, "malformed instance: {why}"),
            DecisionError::BudgetExceeded { size } => {
                write!(f, "enumeration size {size} exceeds budget {ORACLE_BUDGET}")
            }
        }
    }
}

/// Structured per-vehicle decision: offload-pattern flags, compute fractions
/// and one channel row per pool. Fractions and rows are carried even when the
/// matching flag is clear; usage is gated by the flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub hold: bool,
    pub vec_server: bool,
    /// V2V target flags, indexed by vehicle.
    pub v2v: Vec<bool>,
    pub local: bool,
    /// Fraction of the VEC server CPU.
    pub b_vec: f64,
    /// Fraction of the own CPU.
    pub b_local: f64,
    /// Fraction of the V2V target's CPU.
    pub b_remote: f64,
    pub z_v2i_up: Vec<bool>,
    pub z_v2i_down: Vec<bool>,
    pub z_v2v_up: Vec<bool>,
    pub z_v2v_down: Vec<bool>,
}

/// The offload pattern a decision selects when exactly one flag is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Hold,
    VecServer,
    Vehicle(usize),
    Local,
}

impl Decision {
    fn blank(vehicle_count: usize, pools: [usize; 4]) -> Self {
        Self {
            hold: false,
            vec_server: false,
            v2v: alloc::vec![false; vehicle_count],
            local: false,
            b_vec: 0.0,
            b_local: 0.0,
            b_remote: 0.0,
            z_v2i_up: alloc::vec![false; pools[0]],
            z_v2i_down: alloc::vec![false; pools[1]],
            z_v2v_up: alloc::vec![false; pools[2]],
            z_v2v_down: alloc::vec![false; pools[3]],
        }
    }

    /// The no-op decision.
    pub fn hold(vehicle_count: usize, pools: [usize; 4]) -> Self {
        let mut d = Self::blank(vehicle_count, pools);
        d.hold = true;
        d
    }

    pub fn flag_count(&self) -> usize {
        usize::from(self.hold)
            + usize::from(self.vec_server)
            + usize::from(self.local)
            + self.v2v.iter().filter(|b| **b).count()
    }

    /// Selected pattern iff exactly one flag is set (constraint c1).
    pub fn pattern(&self) -> Option<Pattern> {
        if self.flag_count() != 1 {
            return None;
        }
        if self.hold {
            Some(Pattern::Hold)
        } else if self.vec_server {
            Some(Pattern::VecServer)
        } else if self.local {
            Some(Pattern::Local)
        } else {
            self.v2v.iter().position(|b| *b).map(Pattern::Vehicle)
        }
    }
}

/// Shape of the flat raw action vector:
/// `[hold, vec, v2v_0..K-1, local | b_vec, b_local, b_remote | pool rows]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLayout {
    pub vehicle_count: usize,
    /// Channels per pool: v2i up, v2i down, v2v up, v2v down.
    pub pools: [usize; 4],
}

impl ActionLayout {
    pub fn action_dim(&self) -> usize {
        self.vehicle_count + 6 + self.pools.iter().sum::<usize>()
    }
}

/// Decodes one agent's raw output in [-1,1]^dim into a [`Decision`].
///
/// Offload choice is the argmax of the leading block with self and
/// non-neighbor targets masked out (ties go to the lowest index, hold first);
/// fractions map affinely from [-1,1] to [0,1]; channel bits are set on
/// strictly positive components.
pub fn decode_action(
    raw: &[f64],
    layout: &ActionLayout,
    vehicle: usize,
    neighbors: &[usize],
) -> Result<Decision, DecisionError> {
    let dim = layout.action_dim();
    if raw.len() != dim {
        return Err(DecisionError::DimensionMismatch { expected: dim, got: raw.len() });
    }
    let k = layout.vehicle_count;
    let block = &raw[..k + 3];
    let mut best = 0usize;
    for (i, x) in block.iter().enumerate().skip(1) {
        if (2..2 + k).contains(&i) {
            let j = i - 2;
            if j == vehicle || !neighbors.contains(&j) {
                continue;
            }
        }
        if *x > block[best] {
            best = i;
        }
    }
    let mut d = Decision::blank(k, layout.pools);
    match best {
        0 => d.hold = true,
        1 => d.vec_server = true,
        i if i == k + 2 => d.local = true,
        i => d.v2v[i - 2] = true,
    }
    let unit = |x: f64| ((x + 1.0) / 2.0).clamp(0.0, 1.0);
    d.b_vec = unit(raw[k + 3]);
    d.b_local = unit(raw[k + 4]);
    d.b_remote = unit(raw[k + 5]);
    let mut at = k + 6;
    for row in [&mut d.z_v2i_up, &mut d.z_v2i_down, &mut d.z_v2v_up, &mut d.z_v2v_down] {
        for bit in row.iter_mut() {
            *bit = raw[at] > 0.0;
            at += 1;
        }
    }
    Ok(d)
}

/// One constraint's outcome: `magnitude` is the excess over the bound, 0 when
/// satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFlag {
    pub satisfied: bool,
    pub magnitude: f64,
}

impl ConstraintFlag {
    fn from_excess(excess: f64) -> Self {
        Self { satisfied: excess <= 0.0, magnitude: excess.max(0.0) }
    }
}

/// Per-vehicle report over c1-c8. Global constraints (c3-c7) are replicated
/// into every vehicle's report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub c: [ConstraintFlag; 8],
}

impl ConstraintReport {
    /// c1-c7 all satisfied.
    pub fn feasible(&self) -> bool {
        self.c[..7].iter().all(|f| f.satisfied)
    }

    /// c8: completion within the delay threshold.
    pub fn deadline_met(&self) -> bool {
        self.c[7].satisfied
    }
}

/// Head-of-queue task snapshot inside a micro-instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroTask {
    pub task_type: TaskType,
    pub size_bits: f64,
    /// Cycles per bit.
    pub density: f64,
    pub output_ratio: f64,
    pub energy_density: f64,
    pub age_ms: f64,
    pub threshold_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroVehicle {
    pub speed: f64,
    /// CPU frequency, cycles/s.
    pub cpu: f64,
    /// Free fraction of the own CPU.
    pub local_free: f64,
    pub neighbors: Vec<usize>,
    pub task: Option<MicroTask>,
}

/// Frozen per-channel rates, bits/s. V2V tables are indexed
/// `[owner][target][channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub v2i_up: Vec<Vec<f64>>,
    pub v2i_down: Vec<Vec<f64>>,
    pub v2v_up: Vec<Vec<Vec<f64>>>,
    pub v2v_down: Vec<Vec<Vec<f64>>>,
}

/// A self-contained one-slot snapshot: everything needed to score a joint
/// decision. Doubles as the oracle's JSON fixture schema and the
/// environment's per-slot view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroInstance {
    pub vehicles: Vec<MicroVehicle>,
    pub vec_cpu: f64,
    /// Free fraction of the VEC server CPU.
    pub vec_free: f64,
    /// Free channels per pool (false = occupied by an in-flight task).
    pub pool_free: [Vec<bool>; 4],
    pub rates: RateTable,
    pub prices: Prices,
    pub utility_weights: UtilityWeights,
    pub tx_power_v2i: f64,
    pub tx_power_v2v: f64,
    pub tti_ms: f64,
    pub hold_wait_ms: f64,
    #[serde(default)]
    pub v2v_upload_kappa: bool,
}

impl MicroInstance {
    pub fn pool_sizes(&self) -> [usize; 4] {
        [
            self.pool_free[0].len(),
            self.pool_free[1].len(),
            self.pool_free[2].len(),
            self.pool_free[3].len(),
        ]
    }

    pub fn layout(&self) -> ActionLayout {
        ActionLayout { vehicle_count: self.vehicles.len(), pools: self.pool_sizes() }
    }

    pub fn validate(&self) -> Result<(), DecisionError> {
        let k = self.vehicles.len();
        let bad = |why: &str| Err(DecisionError::MalformedInstance(why.into()));
        if k == 0 {
            return bad("no vehicles");
        }
        if !(0.0..=1.0).contains(&self.vec_free) || !(self.vec_cpu > 0.0) {
            return bad("vec_cpu/vec_free out of range");
        }
        if !(self.tti_ms > 0.0) || !(self.hold_wait_ms > 0.0) {
            return bad("tti_ms and hold_wait_ms must be > 0");
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if !(v.cpu > 0.0) || !(0.0..=1.0).contains(&v.local_free) {
                return bad("vehicle cpu/local_free out of range");
            }
            if v.neighbors.iter().any(|j| *j >= k || *j == i) {
                return bad("neighbor index out of range or self");
            }
        }
        let pools = self.pool_sizes();
        let shape2 = |t: &Vec<Vec<f64>>, n: usize| t.len() == k && t.iter().all(|r| r.len() == n);
        let shape3 = |t: &Vec<Vec<Vec<f64>>>, n: usize| {
            t.len() == k && t.iter().all(|m| m.len() == k && m.iter().all(|r| r.len() == n))
        };
        if !shape2(&self.rates.v2i_up, pools[0])
            || !shape2(&self.rates.v2i_down, pools[1])
            || !shape3(&self.rates.v2v_up, pools[2])
            || !shape3(&self.rates.v2v_down, pools[3])
        {
            return bad("rate table shape does not match vehicles/pools");
        }
        Ok(())
    }
}

/// Outcome of scoring one joint decision on a micro-instance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEval {
    pub reports: Vec<ConstraintReport>,
    /// Predicted total delay per vehicle, ms; None without a task or a
    /// well-defined pattern.
    pub delays_ms: Vec<Option<f64>>,
    /// Per-vehicle energy spent this slot, J (0 for holds).
    pub energies_j: Vec<f64>,
    pub revenues: Vec<f64>,
    pub utility: f64,
    pub revenue: f64,
    pub energy: f64,
}

fn as_task(mt: &MicroTask) -> Task {
    Task {
        id: 0,
        owner: 0,
        task_type: mt.task_type,
        size_bits: mt.size_bits,
        density: mt.density,
        output_ratio: mt.output_ratio,
        energy_density: mt.energy_density,
        generated_at: 0,
        threshold_ms: mt.threshold_ms,
        status: TaskStatus::Queued,
    }
}

fn rate_sum(row: &[bool], rates: &[f64]) -> f64 {
    row.iter().zip(rates).filter(|(z, _)| **z).map(|(_, r)| *r).sum()
}

fn alloc_for(inst: &MicroInstance, k: usize, pattern: Pattern, d: &Decision) -> ComputeAllocation {
    match pattern {
        Pattern::Local => ComputeAllocation {
            target: ComputeTarget::Local,
            fraction: d.b_local,
            target_cpu: inst.vehicles[k].cpu,
            uplink_bps: 0.0,
            downlink_bps: 0.0,
        },
        Pattern::VecServer => ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: d.b_vec,
            target_cpu: inst.vec_cpu,
            uplink_bps: rate_sum(&d.z_v2i_up, &inst.rates.v2i_up[k]),
            downlink_bps: rate_sum(&d.z_v2i_down, &inst.rates.v2i_down[k]),
        },
        Pattern::Vehicle(j) => ComputeAllocation {
            target: ComputeTarget::Vehicle(j),
            fraction: d.b_remote,
            target_cpu: inst.vehicles[j].cpu,
            uplink_bps: rate_sum(&d.z_v2v_up, &inst.rates.v2v_up[k][j]),
            downlink_bps: rate_sum(&d.z_v2v_down, &inst.rates.v2v_down[k][j]),
        },
        Pattern::Hold => unreachable!("holds never allocate"),
    }
}

struct Exec {
    target: ComputeTarget,
    size_bits: f64,
    d_ms: f64,
    energy_j: f64,
}

/// Execution outcome for vehicles committing a non-hold pattern; infeasible
/// allocations (zero capacity on a required phase) yield infinite delay and
/// energy, which c8 then flags.
fn exec_for(inst: &MicroInstance, k: usize, d: &Decision) -> Option<Exec> {
    let task = inst.vehicles[k].task.as_ref()?;
    let pattern = d.pattern()?;
    if pattern == Pattern::Hold {
        return None;
    }
    let alloc = alloc_for(inst, k, pattern, d);
    let t = as_task(task);
    let (d_ms, energy_j) = match cost::completion_time(&t, &alloc, inst.tti_ms) {
        Ok(phases) => {
            let tx = match pattern {
                Pattern::VecServer => inst.tx_power_v2i,
                _ => inst.tx_power_v2v,
            };
            let e = cost::offload_energy(&t, &alloc, tx, inst.v2v_upload_kappa)
                .unwrap_or(f64::INFINITY);
            (task.age_ms + phases.total() as f64 * inst.tti_ms, e)
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    Some(Exec { target: alloc.target, size_bits: task.size_bits, d_ms, energy_j })
}

fn eval_refs(inst: &MicroInstance, joint: &[&Decision]) -> JointEval {
    let k_count = inst.vehicles.len();
    let pools = inst.pool_sizes();

    // flag-gated resource usage (c2-c7); a set flag uses its resources even
    // when c1 is violated, mirroring the indicator products of the objective
    let mut vec_frac = 1.0 - inst.vec_free;
    let mut cpu_frac: Vec<f64> = inst.vehicles.iter().map(|v| 1.0 - v.local_free).collect();
    let mut cols: [Vec<f64>; 4] = core::array::from_fn(|p| {
        inst.pool_free[p].iter().map(|free| if *free { 0.0 } else { 1.0 }).collect()
    });
    let add_row = |col: &mut Vec<f64>, row: &[bool]| {
        for (c, z) in col.iter_mut().zip(row) {
            *c += f64::from(u8::from(*z));
        }
    };
    for (k, d) in joint.iter().enumerate() {
        let Some(task) = &inst.vehicles[k].task else { continue };
        let has_out = task.output_ratio * task.size_bits > 0.0;
        if d.vec_server {
            vec_frac += d.b_vec;
            add_row(&mut cols[0], &d.z_v2i_up);
            if has_out {
                add_row(&mut cols[1], &d.z_v2i_down);
            }
        }
        if d.v2v.iter().any(|b| *b) {
            add_row(&mut cols[2], &d.z_v2v_up);
            if has_out {
                add_row(&mut cols[3], &d.z_v2v_down);
            }
            for (j, f) in d.v2v.iter().enumerate() {
                if *f {
                    cpu_frac[j] += d.b_remote;
                }
            }
        }
        if d.local {
            cpu_frac[k] += d.b_local;
        }
    }
    let c3 = ConstraintFlag::from_excess(vec_frac - 1.0);
    let col_flag = |p: usize| {
        ConstraintFlag::from_excess(cols[p].iter().map(|c| (c - 1.0).max(0.0)).sum::<f64>())
    };
    let (c4, c5, c6, c7) = (col_flag(0), col_flag(1), col_flag(2), col_flag(3));
    let _ = pools;

    let mut reports = Vec::with_capacity(k_count);
    let mut delays_ms = alloc::vec![None; k_count];
    let mut energies_j = alloc::vec![0.0; k_count];
    let mut executed: Vec<ExecutedTask> = Vec::new();
    for (k, d) in joint.iter().enumerate() {
        let c1 = ConstraintFlag::from_excess(d.flag_count() as f64 - 1.0);
        let c2 = ConstraintFlag::from_excess(cpu_frac[k] - 1.0);
        let c8 = match (&inst.vehicles[k].task, d.pattern()) {
            (Some(task), Some(Pattern::Hold)) => {
                let d_ms = task.age_ms + inst.hold_wait_ms;
                delays_ms[k] = Some(d_ms);
                ConstraintFlag::from_excess(d_ms - task.threshold_ms)
            }
            (Some(task), Some(_)) => {
                let exec = exec_for(inst, k, d).expect("pattern checked above");
                delays_ms[k] = Some(exec.d_ms);
                energies_j[k] = exec.energy_j;
                executed.push(ExecutedTask {
                    owner: k,
                    target: exec.target,
                    size_bits: exec.size_bits,
                });
                ConstraintFlag::from_excess(exec.d_ms - task.threshold_ms)
            }
            // no task or no well-defined pattern: nothing to deadline-check
            _ => ConstraintFlag::from_excess(0.0),
        };
        reports.push(ConstraintReport { c: [c1, c2, c3, c4, c5, c6, c7, c8] });
    }

    let mut revenues = alloc::vec![0.0; k_count];
    for (k, r) in revenues.iter_mut().enumerate() {
        *r = cost::vehicle_revenue(k, &executed, &inst.prices);
    }
    let (utility, revenue, energy) =
        cost::fleet_utility(&revenues, &energies_j, &inst.utility_weights);
    JointEval { reports, delays_ms, energies_j, revenues, utility, revenue, energy }
}

fn check_joint_len(inst: &MicroInstance, len: usize) -> Result<(), DecisionError> {
    if len != inst.vehicles.len() {
        return Err(DecisionError::DimensionMismatch { expected: inst.vehicles.len(), got: len });
    }
    Ok(())
}

/// Scores a joint decision: constraint reports, predicted delays, energies,
/// revenues and the fleet utility.
pub fn evaluate_joint(inst: &MicroInstance, joint: &[Decision]) -> Result<JointEval, DecisionError> {
    inst.validate()?;
    check_joint_len(inst, joint.len())?;
    let refs: Vec<&Decision> = joint.iter().collect();
    Ok(eval_refs(inst, &refs))
}

/// Constraint reports only; see [`evaluate_joint`] for the full outcome.
pub fn check_constraints(
    inst: &MicroInstance,
    joint: &[Decision],
) -> Result<Vec<ConstraintReport>, DecisionError> {
    Ok(evaluate_joint(inst, joint)?.reports)
}

fn row_from_mask(total: usize, free: &[usize], mask: u32) -> Vec<bool> {
    let mut row = alloc::vec![false; total];
    for (bit, ch) in free.iter().enumerate() {
        if mask >> bit & 1 == 1 {
            row[*ch] = true;
        }
    }
    row
}

fn free_channels(inst: &MicroInstance, pool: usize) -> Vec<usize> {
    inst.pool_free[pool]
        .iter()
        .enumerate()
        .filter(|(_, free)| **free)
        .map(|(i, _)| i)
        .collect()
}

/// Quantized option set for one vehicle, holds first, deterministic order.
pub(crate) fn vehicle_options(inst: &MicroInstance, k: usize) -> Vec<Decision> {
    let k_count = inst.vehicles.len();
    let pools = inst.pool_sizes();
    let mut opts = alloc::vec![Decision::hold(k_count, pools)];
    let Some(task) = &inst.vehicles[k].task else { return opts };
    for b in FRACTION_GRID {
        let mut d = Decision::blank(k_count, pools);
        d.local = true;
        d.b_local = b;
        opts.push(d);
    }
    if task.task_type == TaskType::Ca {
        // CA never leaves the vehicle
        return opts;
    }
    let has_out = task.output_ratio * task.size_bits > 0.0;
    let transfer_rows = |up_pool: usize, down_pool: usize| -> Vec<(Vec<bool>, Vec<bool>)> {
        let up_free = free_channels(inst, up_pool);
        let down_free = free_channels(inst, down_pool);
        let mut rows = Vec::new();
        for up_mask in 1u32..1 << up_free.len() {
            let up = row_from_mask(pools[up_pool], &up_free, up_mask);
            if has_out {
                for down_mask in 1u32..1 << down_free.len() {
                    rows.push((up.clone(), row_from_mask(pools[down_pool], &down_free, down_mask)));
                }
            } else {
                rows.push((up.clone(), alloc::vec![false; pools[down_pool]]));
            }
        }
        rows
    };
    for b in FRACTION_GRID {
        for (up, down) in transfer_rows(0, 1) {
            let mut d = Decision::blank(k_count, pools);
            d.vec_server = true;
            d.b_vec = b;
            d.z_v2i_up = up;
            d.z_v2i_down = down;
            opts.push(d);
        }
    }
    let mut neighbors = inst.vehicles[k].neighbors.clone();
    neighbors.sort_unstable();
    for j in neighbors {
        for b in FRACTION_GRID {
            for (up, down) in transfer_rows(2, 3) {
                let mut d = Decision::blank(k_count, pools);
                d.v2v[j] = true;
                d.b_remote = b;
                d.z_v2v_up = up;
                d.z_v2v_down = down;
                opts.push(d);
            }
        }
    }
    opts
}

/// Exhaustive search over the quantized joint decision space.
///
/// Keeps the first strict utility maximizer among joints where every vehicle
/// satisfies c1-c8; since options are enumerated in a fixed total order with
/// hold first, ties resolve to the lexicographically smallest joint. When
/// nothing passes the filter the all-hold joint is returned with utility 0.
pub fn brute_force_best(inst: &MicroInstance) -> Result<(Vec<Decision>, f64), DecisionError> {
    inst.validate()?;
    let k_count = inst.vehicles.len();
    let options: Vec<Vec<Decision>> = (0..k_count).map(|k| vehicle_options(inst, k)).collect();
    let mut size: u128 = 1;
    for o in &options {
        size = size.saturating_mul(o.len() as u128);
    }
    if size > ORACLE_BUDGET {
        return Err(DecisionError::BudgetExceeded { size });
    }
    let mut idx = alloc::vec![0usize; k_count];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut joint: Vec<&Decision> = Vec::with_capacity(k_count);
    'joint: loop {
        joint.clear();
        joint.extend(idx.iter().enumerate().map(|(i, j)| &options[i][*j]));
        let eval = eval_refs(inst, &joint);
        if eval.reports.iter().all(|r| r.feasible() && r.deadline_met())
            && best.as_ref().is_none_or(|(_, u)| eval.utility > *u)
        {
            best = Some((idx.clone(), eval.utility));
        }
        // odometer: last vehicle's index moves fastest
        let mut p = k_count;
        loop {
            if p == 0 {
                break 'joint;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < options[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
    Ok(match best {
        Some((idx, u)) => {
            (idx.into_iter().enumerate().map(|(i, j)| options[i][j].clone()).collect(), u)
        }
        None => {
            ((0..k_count).map(|_| Decision::hold(k_count, inst.pool_sizes())).collect(), 0.0)
        }
    })
}

/// Knobs for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct InstanceParams {
    pub vehicle_count: usize,
    pub channels_per_pool: usize,
    /// Make head tasks old enough that holding busts the deadline.
    pub aged_tasks: bool,
    /// Pre-occupy some channels and compute fractions.
    pub occupied: bool,
    /// Probability that a vehicle has a head task.
    pub arrival_probability: f64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            vehicle_count: 2,
            channels_per_pool: 2,
            aged_tasks: false,
            occupied: false,
            arrival_probability: 1.0,
        }
    }
}

/// Draws a random but well-formed micro-instance (shared by fixtures and the
/// constraint-checker cross-validation tests).
pub fn random_instance(rng: &mut ChaCha12Rng, p: &InstanceParams) -> MicroInstance {
    let k = p.vehicle_count;
    let n = p.channels_per_pool;
    let v_max = 80.0 / 3.6;
    let thr = Thresholds::default();
    let mut vehicles = Vec::with_capacity(k);
    for i in 0..k {
        let speed = rng.random_range(30.0 / 3.6..v_max);
        let task = if rng.random_range(0.0..1.0) < p.arrival_probability {
            let u: f64 = rng.random_range(0.0..1.0);
            let task_type = if u < 0.2 {
                TaskType::Ca
            } else if u < 0.6 {
                TaskType::Hpa
            } else {
                TaskType::Lpa
            };
            let threshold_ms = cost::delay_threshold(task_type, speed, v_max, &thr)
                .expect("speed sampled within the limit");
            let age_ms = if p.aged_tasks {
                // slack below the hold wait, so holding always busts c8
                let slack = rng.random_range(1.0..10.0);
                (threshold_ms - slack).max(0.0)
            } else {
                rng.random_range(0.0..0.5 * threshold_ms)
            };
            Some(MicroTask {
                task_type,
                size_bits: rng.random_range(0.2e6..1.0e6),
                density: rng.random_range(20.0..50.0),
                output_ratio: if task_type == TaskType::Lpa { 0.05 } else { 0.0 },
                energy_density: 1.25e-26,
                age_ms,
                threshold_ms,
            })
        } else {
            None
        };
        vehicles.push(MicroVehicle {
            speed,
            cpu: rng.random_range(1.8e9..3.6e9),
            local_free: if p.occupied { rng.random_range(0.5..1.0) } else { 1.0 },
            neighbors: (0..k).filter(|j| *j != i).collect(),
            task,
        });
    }
    let mut rates2 = |lo: f64, hi: f64| -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..n).map(|_| rng.random_range(lo..hi)).collect()).collect()
    };
    let v2i_up = rates2(2.0e7, 2.0e8);
    let v2i_down = rates2(2.0e7, 2.0e8);
    let mut rates3 = |lo: f64, hi: f64| -> Vec<Vec<Vec<f64>>> {
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        (0..n)
                            .map(|_| if i == j { 0.0 } else { rng.random_range(lo..hi) })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    let v2v_up = rates3(1.0e8, 1.0e9);
    let v2v_down = rates3(1.0e8, 1.0e9);
    let pool_free: [Vec<bool>; 4] = core::array::from_fn(|_| {
        (0..n).map(|_| !p.occupied || rng.random_range(0.0..1.0) < 0.8).collect()
    });
    MicroInstance {
        vehicles,
        vec_cpu: 8.0e9,
        vec_free: if p.occupied { rng.random_range(0.5..1.0) } else { 1.0 },
        pool_free,
        rates: RateTable { v2i_up, v2i_down, v2v_up, v2v_down },
        prices: Prices::default(),
        utility_weights: UtilityWeights::default(),
        tx_power_v2i: 0.5,
        tx_power_v2v: 1.0,
        tti_ms: 1.0,
        hold_wait_ms: 10.0,
        v2v_upload_kappa: false,
    }
}

/// Draws an unconstrained random decision (may violate any of c1-c7); used to
/// stress the constraint checker.
pub fn random_decision(rng: &mut ChaCha12Rng, layout: &ActionLayout) -> Decision {
    let mut d = Decision::blank(layout.vehicle_count, layout.pools);
    d.hold = rng.random_range(0.0..1.0) < 0.3;
    d.vec_server = rng.random_range(0.0..1.0) < 0.3;
    d.local = rng.random_range(0.0..1.0) < 0.3;
    for f in d.v2v.iter_mut() {
        *f = rng.random_range(0.0..1.0) < 0.2;
    }
    d.b_vec = rng.random_range(0.0..1.0);
    d.b_local = rng.random_range(0.0..1.0);
    d.b_remote = rng.random_range(0.0..1.0);
    for row in [&mut d.z_v2i_up, &mut d.z_v2i_down, &mut d.z_v2v_up, &mut d.z_v2v_down] {
        for bit in row.iter_mut() {
            *bit = rng.random_range(0.0..1.0) < 0.5;
        }
    }
    d
}
