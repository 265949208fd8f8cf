//! Scenario construction, task generation and vehicle mobility.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ScenarioConfig};
use crate::cost;
use crate::rng;

/// V2V communication range, meters.
pub const V2V_RANGE_M: f64 = 200.0;

/// Task classes by delay tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskType {
    /// Critical application: local-only, tight fixed deadline.
    Ca,
    /// High-priority application: speed-dependent deadline.
    Hpa,
    /// Low-priority application: loose fixed deadline, has output download.
    Lpa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TaskStatus {
    Queued,
    Holding { remaining_ms: f64 },
    Uploading,
    Processing,
    Downloading,
    Done,
    Expired,
}

/// One computing job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    pub owner: usize,
    pub task_type: TaskType,
    /// Input size, bits.
    pub size_bits: f64,
    /// Compute density, cycles/bit.
    pub density: f64,
    /// Output size / input size ratio (0 except for LPA).
    pub output_ratio: f64,
    /// Energy density of local processing, J/cycle^2.
    pub energy_density: f64,
    /// Slot index of generation.
    pub generated_at: u64,
    /// Delay threshold at the owner's (episode-fixed) speed, ms.
    pub threshold_ms: f64,
    pub status: TaskStatus,
}

impl Task {
    /// Age in ms at slot `now`.
    pub fn age_ms(&self, now: u64, tti_ms: f64) -> f64 {
        (now - self.generated_at) as f64 * tti_ms
    }
}

/// Kinematics and local resources of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub index: usize,
    /// Position along the road segment, meters.
    pub position: f64,
    /// Speed, m/s, fixed for the episode.
    pub speed: f64,
    /// CPU frequency, cycles/s.
    pub cpu: f64,
    pub queue: Vec<Task>,
    /// Free fraction of the local CPU.
    pub local_free: f64,
    /// Set when the vehicle crosses the coverage boundary.
    pub exited: bool,
}

impl VehicleState {
    /// First task still awaiting a decision, if any.
    pub fn head(&self) -> Option<&Task> {
        self.queue.first()
    }
}

/// One episode's worth of vehicles plus episode-scoped V2V alignment losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub vehicles: Vec<VehicleState>,
    /// Beam alignment loss per ordered vehicle pair, sampled once per episode.
    pub alignment_loss: Vec<Vec<f64>>,
}

/// Builds the initial vehicle fleet; deterministic given `config.seed`.
pub fn spawn_scenario(config: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, "scenario");
    spawn_with_rng(config, &mut rng)
}

/// As [`spawn_scenario`] but with a caller-owned stream (per-episode resets).
pub fn spawn_with_rng(
    config: &ScenarioConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Scenario, ConfigError> {
    config.validate()?;
    let k = config.vehicle_count;
    let mut vehicles = Vec::with_capacity(k);
    for index in 0..k {
        vehicles.push(VehicleState {
            index,
            position: rng.random_range(0.0..=config.rsu_coverage),
            speed: sample_range(rng, config.speed_range),
            cpu: sample_range(rng, config.vehicle_cpu_range),
            queue: Vec::new(),
            local_free: 1.0,
            exited: false,
        });
    }
    let [lo, hi] = config.channel.alignment_loss_range;
    let mut alignment_loss = alloc::vec![alloc::vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let l = if hi > lo { rng.random_range(lo..hi) } else { lo };
            alignment_loss[i][j] = l;
            alignment_loss[j][i] = l;
        }
    }
    Ok(Scenario { vehicles, alignment_loss })
}

fn sample_range(rng: &mut ChaCha12Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Draws at most one new task for `vehicle_index` this slot. A full queue
/// yields `None` (the caller counts the drop).
pub fn generate_task(
    rng: &mut ChaCha12Rng,
    config: &ScenarioConfig,
    vehicle_index: usize,
    speed: f64,
    queue_len: usize,
    next_id: u64,
    slot: u64,
) -> Option<Task> {
    if rng.random_range(0.0..1.0) >= config.arrival_probability {
        return None;
    }
    if queue_len >= config.queue_capacity {
        return None;
    }
    let size_bits = sample_range(rng, config.task_size_range);
    let density = sample_range(rng, config.density_range);
    let mix = config.mix_for(vehicle_index);
    let u: f64 = rng.random_range(0.0..1.0);
    let task_type = if u < mix[0] {
        TaskType::Ca
    } else if u < mix[0] + mix[1] {
        TaskType::Hpa
    } else {
        TaskType::Lpa
    };
    let output_ratio = if task_type == TaskType::Lpa { config.output_ratio } else { 0.0 };
    let threshold_ms = cost::delay_threshold(task_type, speed, config.v_max(), &config.thresholds)
        .expect("episode speed within the configured limit");
    Some(Task {
        id: next_id,
        owner: vehicle_index,
        task_type,
        size_bits,
        density,
        output_ratio,
        energy_density: config.energy_density,
        generated_at: slot,
        threshold_ms,
        status: TaskStatus::Queued,
    })
}

/// Advances one vehicle by `dt_ms`; sets the exit flag past the coverage edge.
pub fn advance_mobility(state: &mut VehicleState, coverage_m: f64, dt_ms: f64) {
    debug_assert!(dt_ms > 0.0);
    state.position += state.speed * dt_ms / 1000.0;
    if state.position > coverage_m {
        state.exited = true;
    }
}

/// Neighbor sets: vehicles within [`V2V_RANGE_M`] of each other.
pub fn neighbor_sets(vehicles: &[VehicleState]) -> Vec<Vec<usize>> {
    let k = vehicles.len();
    let mut sets = alloc::vec![Vec::new(); k];
    for i in 0..k {
        for j in (i + 1)..k {
            if (vehicles[i].position - vehicles[j].position).abs() <= V2V_RANGE_M {
                sets[i].push(j);
                sets[j].push(i);
            }
        }
    }
    sets
}
