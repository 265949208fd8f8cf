//! Scenario configuration.
//!
//! The JSON document consumed by the harness maps 1:1 onto [`ScenarioConfig`];
//! every field has a desk-scale default so a run is reproducible from the
//! resolved config alone. Validation collects every violation instead of
//! stopping at the first.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Number of channels in each of the four pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCounts {
    pub v2i_up: usize,
    pub v2i_down: usize,
    pub v2v_up: usize,
    pub v2v_down: usize,
}

impl Default for ChannelCounts {
    fn default() -> Self {
        Self { v2i_up: 2, v2i_down: 2, v2v_up: 2, v2v_down: 2 }
    }
}

/// Unit prices, per Mbit of task input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    /// Paid to the VEC operator per Mbit offloaded to the server.
    pub p_v: f64,
    /// Paid to (earned by) a vehicle per Mbit processed over V2V.
    pub p_v2v: f64,
    /// Cost of processing one Mbit on the local terminal.
    pub p_0: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Self { p_v: 0.06, p_v2v: 0.06, p_0: 0.01 }
    }
}

/// Delay thresholds per task type, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub thr1: f64,
    pub thr2: f64,
    pub thr3: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { thr1: 10.0, thr2: 40.0, thr3: 100.0 }
    }
}

/// Weights of revenue and energy in the fleet utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self { beta1: 0.8, beta2: 0.4 }
    }
}

/// Reward shaping parameters.
///
/// `gamma[0..7]` scale the per-constraint violation magnitudes, `gamma[7]`
/// scales the utility bonus. `t_norm_ms` normalizes the deadline slack before
/// exponentiation so the miss reward stays O(1) at millisecond scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub gamma: [f64; 8],
    pub t_norm_ms: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            l1: -0.4,
            l2: -0.2,
            l3: 0.5,
            gamma: [0.8, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.9],
            t_norm_ms: 1000.0,
        }
    }
}

/// Radio propagation parameters, exposed under the `channel` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModelConfig {
    /// Fixed term of the log-distance path loss, dB at 1 km.
    pub pathloss_fixed_db: f64,
    /// Slope per decade of distance (km), dB.
    pub pathloss_exp_db: f64,
    /// Thermal noise density, dBm/Hz.
    pub noise_density_dbm_hz: f64,
    /// Constant co-channel interference, W.
    pub interference_w: f64,
    /// Beam alignment loss range for V2V pairs, sampled once per episode.
    pub alignment_loss_range: [f64; 2],
    /// Rayleigh-power (unit-mean exponential) fading on channel gains.
    pub fading: bool,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        Self {
            pathloss_fixed_db: 128.1,
            pathloss_exp_db: 37.6,
            noise_density_dbm_hz: -174.0,
            interference_w: 0.0,
            alignment_loss_range: [0.05, 0.2],
            fading: true,
        }
    }
}

/// Categorical mix over (CA, HPA, LPA).
pub type TaskMix = [f64; 3];

/// Full scenario configuration. All units are SI unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Number of vehicles served by the VEC server.
    pub vehicle_count: usize,
    /// Per-vehicle task queue capacity.
    pub queue_capacity: usize,
    /// Task input size range, bits.
    pub task_size_range: [f64; 2],
    /// Compute density range, cycles/bit.
    pub density_range: [f64; 2],
    /// Vehicle speed range, m/s. The upper bound is the road speed limit.
    pub speed_range: [f64; 2],
    /// RSU coverage, meters.
    pub rsu_coverage: f64,
    /// VEC server CPU, cycles/s.
    pub vec_cpu: f64,
    /// Vehicle CPU range, cycles/s.
    pub vehicle_cpu_range: [f64; 2],
    /// Total V2I uplink bandwidth, Hz (split evenly over `channel_counts.v2i_up`).
    pub bandwidth_v2i_up: f64,
    pub bandwidth_v2i_down: f64,
    pub bandwidth_v2v_up: f64,
    pub bandwidth_v2v_down: f64,
    pub channel_counts: ChannelCounts,
    /// Vehicle transmit power towards the RSU, W.
    pub tx_power_v2i: f64,
    /// Vehicle transmit power towards other vehicles, W.
    pub tx_power_v2v: f64,
    /// Output size / input size ratio for LPA tasks.
    pub output_ratio: f64,
    /// Energy density of local processing, J/cycle^2.
    pub energy_density: f64,
    pub prices: Prices,
    /// Hold-on waiting time, ms.
    pub hold_wait: f64,
    pub thresholds: Thresholds,
    pub utility_weights: UtilityWeights,
    pub reward_params: RewardParams,
    /// Transport time interval, ms.
    pub tti: f64,
    /// Episode horizon in slots.
    pub episode_length: u64,
    pub seed: u64,
    /// Per-slot per-vehicle Bernoulli task arrival probability.
    pub arrival_probability: f64,
    /// Fleet-default mix over (CA, HPA, LPA).
    pub task_mix: TaskMix,
    /// Optional per-vehicle mix overrides, indexed by vehicle.
    pub task_mix_overrides: Vec<Option<TaskMix>>,
    pub channel: ChannelModelConfig,
    /// Keep the compute-density factor in the V2V upload energy term.
    pub v2v_upload_kappa: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            vehicle_count: 3,
            queue_capacity: 10,
            task_size_range: [0.2e6, 1.0e6],
            density_range: [20.0, 50.0],
            // [30, 80] km/h
            speed_range: [30.0 / 3.6, 80.0 / 3.6],
            rsu_coverage: 500.0,
            vec_cpu: 8.0e9,
            vehicle_cpu_range: [1.8e9, 3.6e9],
            bandwidth_v2i_up: 50.0e6,
            bandwidth_v2i_down: 50.0e6,
            bandwidth_v2v_up: 500.0e6,
            bandwidth_v2v_down: 500.0e6,
            channel_counts: ChannelCounts::default(),
            tx_power_v2i: 0.5,
            tx_power_v2v: 1.0,
            output_ratio: 0.05,
            energy_density: 1.25e-26,
            prices: Prices::default(),
            hold_wait: 10.0,
            thresholds: Thresholds::default(),
            utility_weights: UtilityWeights::default(),
            reward_params: RewardParams::default(),
            tti: 1.0,
            episode_length: 40,
            seed: 0,
            arrival_probability: 0.05,
            task_mix: [0.2, 0.4, 0.4],
            task_mix_overrides: Vec::new(),
            channel: ChannelModelConfig::default(),
            v2v_upload_kappa: false,
        }
    }
}

/// All violations found while validating a config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} violations):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

fn check_range(errs: &mut Vec<String>, name: &str, r: [f64; 2], positive: bool) {
    if !(r[0] <= r[1]) {
        errs.push(format!("{name}: range [{}, {}] is empty", r[0], r[1]));
    }
    if positive && !(r[0] > 0.0) {
        errs.push(format!("{name}: lower bound {} must be > 0", r[0]));
    }
}

impl ScenarioConfig {
    /// Road speed limit used by the HPA delay-constraint curve.
    pub fn v_max(&self) -> f64 {
        self.speed_range[1]
    }

    /// Checks every invariant, returning all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.vehicle_count == 0 {
            errs.push("vehicle_count: must be >= 1".into());
        }
        if self.queue_capacity == 0 {
            errs.push("queue_capacity: must be >= 1".into());
        }
        check_range(&mut errs, "task_size_range", self.task_size_range, true);
        check_range(&mut errs, "density_range", self.density_range, true);
        check_range(&mut errs, "speed_range", self.speed_range, true);
        check_range(&mut errs, "vehicle_cpu_range", self.vehicle_cpu_range, true);
        if !(self.rsu_coverage > 0.0) {
            errs.push("rsu_coverage: must be > 0".into());
        }
        if !(self.vec_cpu > 0.0) {
            errs.push("vec_cpu: must be > 0".into());
        }
        for (name, bw) in [
            ("bandwidth_v2i_up", self.bandwidth_v2i_up),
            ("bandwidth_v2i_down", self.bandwidth_v2i_down),
            ("bandwidth_v2v_up", self.bandwidth_v2v_up),
            ("bandwidth_v2v_down", self.bandwidth_v2v_down),
        ] {
            if !(bw > 0.0) {
                errs.push(format!("{name}: must be > 0"));
            }
        }
        let cc = self.channel_counts;
        for (name, n) in [
            ("channel_counts.v2i_up", cc.v2i_up),
            ("channel_counts.v2i_down", cc.v2i_down),
            ("channel_counts.v2v_up", cc.v2v_up),
            ("channel_counts.v2v_down", cc.v2v_down),
        ] {
            if n == 0 {
                errs.push(format!("{name}: every pool needs at least one channel"));
            }
        }
        if !(self.tx_power_v2i >= 0.0) {
            errs.push("tx_power_v2i: must be >= 0".into());
        }
        if !(self.tx_power_v2v >= 0.0) {
            errs.push("tx_power_v2v: must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.output_ratio) {
            errs.push(format!("output_ratio: {} not in [0, 1]", self.output_ratio));
        }
        if !(self.energy_density >= 0.0) {
            errs.push("energy_density: must be >= 0".into());
        }
        if !(self.utility_weights.beta1 > 0.0) || !(self.utility_weights.beta2 > 0.0) {
            errs.push("utility_weights: beta1 and beta2 must be > 0".into());
        }
        if !(self.hold_wait > 0.0) {
            errs.push("hold_wait: must be > 0".into());
        }
        if !(self.tti > 0.0) {
            errs.push("tti: must be > 0".into());
        }
        if self.episode_length == 0 {
            errs.push("episode_length: must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.arrival_probability) {
            errs.push(format!("arrival_probability: {} not in [0, 1]", self.arrival_probability));
        }
        let mix_ok = |m: &TaskMix| m.iter().all(|p| *p >= 0.0) && (m.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !mix_ok(&self.task_mix) {
            errs.push("task_mix: probabilities must be nonnegative and sum to 1".into());
        }
        for (k, m) in self.task_mix_overrides.iter().enumerate() {
            if let Some(m) = m {
                if !mix_ok(m) {
                    errs.push(format!("task_mix_overrides[{k}]: probabilities must be nonnegative and sum to 1"));
                }
            }
        }
        if !(self.reward_params.t_norm_ms > 0.0) {
            errs.push("reward_params.t_norm_ms: must be > 0".into());
        }
        let [lo, hi] = self.channel.alignment_loss_range;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            errs.push(format!("channel.alignment_loss_range: [{lo}, {hi}] not within [0, 1)"));
        }
        if !(self.channel.interference_w >= 0.0) {
            errs.push("channel.interference_w: must be >= 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: errs })
        }
    }

    /// Per-channel bandwidths for the four pools, Hz.
    pub fn per_channel_bandwidth(&self) -> [f64; 4] {
        [
            self.bandwidth_v2i_up / self.channel_counts.v2i_up as f64,
            self.bandwidth_v2i_down / self.channel_counts.v2i_down as f64,
            self.bandwidth_v2v_up / self.channel_counts.v2v_up as f64,
            self.bandwidth_v2v_down / self.channel_counts.v2v_down as f64,
        ]
    }

    /// Mix for a given vehicle, falling back to the fleet default.
    pub fn mix_for(&self, k: usize) -> TaskMix {
        self.task_mix_overrides.get(k).copied().flatten().unwrap_or(self.task_mix)
    }
}
