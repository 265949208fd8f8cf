//! Delay thresholds, completion times, energy, revenue and utility.
//!
//! All phase durations are ceilinged to whole transport time intervals (TTIs)
//! because upload, processing and download cannot share a TTI. Energy uses the
//! unquantized transfer times.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{Prices, Thresholds, UtilityWeights};
use crate::scenario::{Task, TaskType};

pub const BITS_PER_MBIT: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    /// Speed above the road limit; the HPA curve is undefined there.
    SpeedOutOfRange { v: f64, v_max: f64 },
    /// A required capacity or compute share is zero.
    InfeasibleAllocation,
    /// Not exactly one offloading-pattern flag set (constraint c1 upstream).
    BadPatternFlags,
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::SpeedOutOfRange { v, v_max } => {
                write!(f, "speed {v} outside [0, {v_max}]")
            }
            CostError::InfeasibleAllocation => {
                write!(f, "allocation has zero capacity or compute share for a required phase")
            }
            CostError::BadPatternFlags => write!(f, "exactly one offloading flag must be set"),
        }
    }
}

/// Speed- and type-aware delay threshold, ms.
///
/// HPA thresholds follow a one-tailed normal curve in the vehicle speed,
/// normalized so the threshold equals `thr2` at the road speed limit; CA and
/// LPA thresholds are fixed.
pub fn delay_threshold(
    task_type: TaskType,
    v: f64,
    v_max: f64,
    thr: &Thresholds,
) -> Result<f64, CostError> {
    if !(0.0..=v_max).contains(&v) {
        return Err(CostError::SpeedOutOfRange { v, v_max });
    }
    Ok(match task_type {
        TaskType::Ca => thr.thr1,
        TaskType::Hpa => {
            let alpha = v_max / 1.96;
            libm::exp(-(v * v - v_max * v_max) / (2.0 * alpha * alpha)) * thr.thr2
        }
        TaskType::Lpa => thr.thr3,
    })
}

/// Where a task runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComputeTarget {
    VecServer,
    Vehicle(usize),
    Local,
}

/// Resources granted to one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeAllocation {
    pub target: ComputeTarget,
    /// Fraction of the target CPU.
    pub fraction: f64,
    /// Target CPU frequency, cycles/s.
    pub target_cpu: f64,
    /// Aggregate uplink capacity, bits/s (unused for local execution).
    pub uplink_bps: f64,
    /// Aggregate downlink capacity, bits/s (used only when output bits > 0).
    pub downlink_bps: f64,
}

/// Whole-TTI durations of the three phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTtis {
    pub upload: u64,
    pub process: u64,
    pub download: u64,
}

impl PhaseTtis {
    pub fn total(&self) -> u64 {
        self.upload + self.process + self.download
    }
}

fn ceil_ttis(amount: f64, per_tti: f64) -> Result<u64, CostError> {
    if amount <= 0.0 {
        return Ok(0);
    }
    if per_tti <= 0.0 {
        return Err(CostError::InfeasibleAllocation);
    }
    Ok(libm::ceil(amount / per_tti) as u64)
}

/// Completion time of `task` under `alloc`, in whole TTIs per phase.
///
/// Local runs skip both transfers; the download phase exists only when the
/// task produces output bits (LPA).
pub fn completion_time(
    task: &Task,
    alloc: &ComputeAllocation,
    tti_ms: f64,
) -> Result<PhaseTtis, CostError> {
    let tti_s = tti_ms / 1000.0;
    let cycles = task.density * task.size_bits;
    let cycles_per_tti = alloc.fraction * alloc.target_cpu * tti_s;
    let process = ceil_ttis(cycles, cycles_per_tti)?;
    if alloc.target == ComputeTarget::Local {
        return Ok(PhaseTtis { upload: 0, process, download: 0 });
    }
    let upload = ceil_ttis(task.size_bits, alloc.uplink_bps * tti_s)?;
    let download = ceil_ttis(task.output_ratio * task.size_bits, alloc.downlink_bps * tti_s)?;
    Ok(PhaseTtis { upload, process, download })
}

/// Offloading-pattern indicator flags for one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternFlags {
    pub hold: bool,
    pub vec_server: bool,
    pub v2v: bool,
    pub local: bool,
}

impl PatternFlags {
    fn count(&self) -> usize {
        usize::from(self.hold)
            + usize::from(self.vec_server)
            + usize::from(self.v2v)
            + usize::from(self.local)
    }
}

/// Execution delays of each executing pattern, ms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PatternDelays {
    pub vec_server_ms: f64,
    pub v2v_ms: f64,
    pub local_ms: f64,
}

/// Total delay from generation to completion, ms: the task's age plus either
/// the hold wait or the selected pattern's execution delay.
pub fn total_task_delay(
    task: &Task,
    now: u64,
    tti_ms: f64,
    flags: PatternFlags,
    delays: PatternDelays,
    hold_wait_ms: f64,
) -> Result<f64, CostError> {
    if flags.count() != 1 {
        return Err(CostError::BadPatternFlags);
    }
    let age = task.age_ms(now, tti_ms);
    let tail = if flags.hold {
        hold_wait_ms
    } else if flags.vec_server {
        delays.vec_server_ms
    } else if flags.v2v {
        delays.v2v_ms
    } else {
        delays.local_ms
    };
    Ok(age + tail)
}

/// Vehicle-side energy of executing `task` under `alloc`, J.
///
/// Offloaded tasks pay transmit power times the unquantized transfer times;
/// local runs pay the quadratic processing cost. `v2v_upload_kappa` preserves
/// the compute-density factor in the V2V upload term for fidelity runs.
pub fn offload_energy(
    task: &Task,
    alloc: &ComputeAllocation,
    tx_power_w: f64,
    v2v_upload_kappa: bool,
) -> Result<f64, CostError> {
    if task.size_bits <= 0.0 {
        return Ok(0.0);
    }
    match alloc.target {
        ComputeTarget::Local => {
            let bf = alloc.fraction * alloc.target_cpu;
            if bf <= 0.0 {
                return Err(CostError::InfeasibleAllocation);
            }
            Ok(task.energy_density * task.density * task.size_bits * bf * bf)
        }
        ComputeTarget::VecServer | ComputeTarget::Vehicle(_) => {
            if alloc.uplink_bps <= 0.0 {
                return Err(CostError::InfeasibleAllocation);
            }
            let upload_bits = if v2v_upload_kappa && matches!(alloc.target, ComputeTarget::Vehicle(_))
            {
                task.density * task.size_bits
            } else {
                task.size_bits
            };
            let mut energy = tx_power_w * upload_bits / alloc.uplink_bps;
            let out_bits = task.output_ratio * task.size_bits;
            if out_bits > 0.0 {
                if alloc.downlink_bps <= 0.0 {
                    return Err(CostError::InfeasibleAllocation);
                }
                energy += tx_power_w * out_bits / alloc.downlink_bps;
            }
            Ok(energy)
        }
    }
}

/// Fleet energy for one slot: executed entries only, held tasks contribute 0.
pub fn fleet_energy(entries: &[(f64, bool)]) -> f64 {
    entries.iter().filter(|(_, held)| !held).map(|(e, _)| *e).sum()
}

/// An executed (non-held) task as seen by the revenue model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutedTask {
    pub owner: usize,
    pub target: ComputeTarget,
    pub size_bits: f64,
}

/// Net revenue of vehicle `k` for one slot: V2V processing receipts minus
/// payments for VEC offloads, V2V offloads and local processing.
pub fn vehicle_revenue(k: usize, executed: &[ExecutedTask], prices: &Prices) -> f64 {
    let mut revenue = 0.0;
    for t in executed {
        let mbits = t.size_bits / BITS_PER_MBIT;
        if t.owner == k {
            match t.target {
                ComputeTarget::VecServer => revenue -= prices.p_v * mbits,
                ComputeTarget::Vehicle(_) => revenue -= prices.p_v2v * mbits,
                ComputeTarget::Local => revenue -= prices.p_0 * mbits,
            }
        } else if t.target == ComputeTarget::Vehicle(k) {
            revenue += prices.p_v2v * mbits;
        }
    }
    revenue
}

/// Fleet utility for one slot: `(U_t, TR_t, E_t)`.
pub fn fleet_utility(revenues: &[f64], energies: &[f64], w: &UtilityWeights) -> (f64, f64, f64) {
    let tr: f64 = revenues.iter().sum();
    let e: f64 = energies.iter().sum();
    (w.beta1 * tr - w.beta2 * e, tr, e)
}

/// Revenues and energies of every vehicle for a set of executed tasks.
pub fn per_vehicle_outcome(
    vehicle_count: usize,
    executed: &[ExecutedTask],
    energies_by_owner: &[(usize, f64)],
    prices: &Prices,
) -> (Vec<f64>, Vec<f64>) {
    let mut revenues = alloc::vec![0.0; vehicle_count];
    let mut energies = alloc::vec![0.0; vehicle_count];
    for k in 0..vehicle_count {
        revenues[k] = vehicle_revenue(k, executed, prices);
    }
    for (owner, e) in energies_by_owner {
        energies[*owner] += e;
    }
    (revenues, energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::TaskStatus;
    use approx::assert_relative_eq;

    fn thr() -> Thresholds {
        Thresholds::default()
    }

    fn task(ty: TaskType, size_bits: f64, density: f64, output_ratio: f64) -> Task {
        Task {
            id: 0,
            owner: 0,
            task_type: ty,
            size_bits,
            density,
            output_ratio,
            energy_density: 1.25e-26,
            generated_at: 0,
            threshold_ms: 100.0,
            status: TaskStatus::Queued,
        }
    }

    #[test]
    fn ca_and_lpa_thresholds_are_fixed() {
        for v in [0.0, 5.0, 20.0] {
            assert_eq!(delay_threshold(TaskType::Ca, v, 22.0, &thr()).unwrap(), 10.0);
            assert_eq!(delay_threshold(TaskType::Lpa, v, 22.0, &thr()).unwrap(), 100.0);
        }
    }

    #[test]
    fn hpa_threshold_at_limit_is_thr2_exactly() {
        let v_max = 80.0 / 3.6;
        assert_relative_eq!(
            delay_threshold(TaskType::Hpa, v_max, v_max, &thr()).unwrap(),
            40.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn hpa_threshold_at_standstill() {
        // exp(1.96^2 / 2) * 40 ms, independent of the actual v_max value
        let v_max = 80.0 / 3.6;
        let expected = libm::exp(1.96 * 1.96 / 2.0) * 40.0;
        let got = delay_threshold(TaskType::Hpa, 0.0, v_max, &thr()).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!((got - 273.1).abs() < 0.05, "got {got}");
    }

    #[test]
    fn hpa_threshold_strictly_decreasing_with_inflection_at_alpha() {
        let v_max = 30.0;
        let alpha = v_max / 1.96;
        let g = |v: f64| delay_threshold(TaskType::Hpa, v, v_max, &thr()).unwrap();
        let mut prev = g(0.0);
        for i in 1..=300 {
            let v = v_max * i as f64 / 300.0;
            let cur = g(v);
            assert!(cur < prev, "not strictly decreasing at v={v}");
            prev = cur;
        }
        // second derivative changes sign exactly once, at v = alpha
        let h = 1e-4;
        let second = |v: f64| (g(v + h) - 2.0 * g(v) + g(v - h)) / (h * h);
        let mut changes = 0;
        let mut last_sign = second(0.1).signum();
        let mut change_at = 0.0;
        let mut v = 0.1;
        while v < v_max - 0.1 {
            let s = second(v).signum();
            if s != last_sign {
                changes += 1;
                change_at = v;
                last_sign = s;
            }
            v += 0.01;
        }
        assert_eq!(changes, 1);
        assert!((change_at - alpha).abs() < 0.05, "inflection at {change_at}, alpha {alpha}");
    }

    #[test]
    fn speed_above_limit_is_rejected() {
        assert!(delay_threshold(TaskType::Hpa, 23.0, 22.0, &thr()).is_err());
        assert!(delay_threshold(TaskType::Hpa, -1.0, 22.0, &thr()).is_err());
    }

    #[test]
    fn vec_completion_time_hand_check() {
        // c = 1 Mbit at 0.5 Mbit/TTI, kappa*c = 2e7 cycles at 1e7 cycles/TTI
        let t = task(TaskType::Hpa, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: 1.0,
            target_cpu: 1.0e10,
            uplink_bps: 0.5e9,
            downlink_bps: 0.0,
        };
        let p = completion_time(&t, &alloc, 1.0).unwrap();
        assert_eq!((p.upload, p.process, p.download), (2, 2, 0));
        assert_eq!(p.total(), 4);
    }

    #[test]
    fn zero_output_ratio_drops_the_download_phase() {
        let t2 = task(TaskType::Hpa, 1.0e6, 20.0, 0.0);
        let t3 = task(TaskType::Lpa, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: 1.0,
            target_cpu: 1.0e10,
            uplink_bps: 0.5e9,
            downlink_bps: 0.0,
        };
        assert_eq!(completion_time(&t3, &alloc, 1.0).unwrap(), completion_time(&t2, &alloc, 1.0).unwrap());
    }

    #[test]
    fn local_completion_time_hand_check() {
        // kappa*c = 2e7 cycles, b*f = 2e6 cycles/ms
        let t = task(TaskType::Ca, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::Local,
            fraction: 1.0,
            target_cpu: 2.0e9,
            uplink_bps: 0.0,
            downlink_bps: 0.0,
        };
        let p = completion_time(&t, &alloc, 1.0).unwrap();
        assert_eq!(p.total(), 10);
        assert_eq!((p.upload, p.download), (0, 0));
    }

    #[test]
    fn lpa_total_at_least_hpa_total() {
        let t2 = task(TaskType::Hpa, 0.7e6, 33.0, 0.0);
        let t3 = task(TaskType::Lpa, 0.7e6, 33.0, 0.05);
        let alloc = ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: 0.5,
            target_cpu: 8.0e9,
            uplink_bps: 20.0e6,
            downlink_bps: 20.0e6,
        };
        let a = completion_time(&t2, &alloc, 1.0).unwrap().total();
        let b = completion_time(&t3, &alloc, 1.0).unwrap().total();
        assert!(b >= a);
    }

    #[test]
    fn infeasible_allocations_error() {
        let t = task(TaskType::Hpa, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: 0.0,
            target_cpu: 1.0e10,
            uplink_bps: 0.5e9,
            downlink_bps: 0.0,
        };
        assert_eq!(completion_time(&t, &alloc, 1.0), Err(CostError::InfeasibleAllocation));
        let alloc2 = ComputeAllocation { fraction: 1.0, uplink_bps: 0.0, ..alloc };
        assert_eq!(completion_time(&t, &alloc2, 1.0), Err(CostError::InfeasibleAllocation));
    }

    #[test]
    fn total_delay_compositions() {
        let mut t = task(TaskType::Hpa, 1.0e6, 20.0, 0.0);
        t.generated_at = 0;
        let local = PatternFlags { hold: false, vec_server: false, v2v: false, local: true };
        let d = total_task_delay(&t, 0, 1.0, local, PatternDelays { local_ms: 10.0, ..Default::default() }, 10.0).unwrap();
        assert_relative_eq!(d, 10.0);

        let hold = PatternFlags { hold: true, vec_server: false, v2v: false, local: false };
        let d = total_task_delay(&t, 5, 1.0, hold, PatternDelays::default(), 10.0).unwrap();
        assert_relative_eq!(d, 15.0);

        let d = total_task_delay(&t, 0, 1.0, local, PatternDelays::default(), 10.0).unwrap();
        assert_relative_eq!(d, 0.0);

        let none = PatternFlags { hold: false, vec_server: false, v2v: false, local: false };
        assert_eq!(
            total_task_delay(&t, 0, 1.0, none, PatternDelays::default(), 10.0),
            Err(CostError::BadPatternFlags)
        );
        let two = PatternFlags { hold: true, vec_server: true, v2v: false, local: false };
        assert!(total_task_delay(&t, 0, 1.0, two, PatternDelays::default(), 10.0).is_err());
    }

    #[test]
    fn vec_offload_energy_hand_check() {
        // upload time c/up = 2 ms at P = 0.5 W -> 1 mJ
        let t = task(TaskType::Hpa, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::VecServer,
            fraction: 1.0,
            target_cpu: 1.0e10,
            uplink_bps: 0.5e9,
            downlink_bps: 0.0,
        };
        let e = offload_energy(&t, &alloc, 0.5, false).unwrap();
        assert_relative_eq!(e, 1.0e-3, max_relative = 1e-12);
    }

    #[test]
    fn local_energy_hand_check() {
        // 1.25e-26 * 20 * 1e6 * (2e9)^2 = 1.0 J
        let t = task(TaskType::Ca, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::Local,
            fraction: 1.0,
            target_cpu: 2.0e9,
            uplink_bps: 0.0,
            downlink_bps: 0.0,
        };
        assert_relative_eq!(offload_energy(&t, &alloc, 0.5, false).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_task_costs_nothing() {
        let t = task(TaskType::Hpa, 0.0, 20.0, 0.0);
        for target in [ComputeTarget::Local, ComputeTarget::VecServer, ComputeTarget::Vehicle(1)] {
            let alloc = ComputeAllocation {
                target,
                fraction: 0.5,
                target_cpu: 2.0e9,
                uplink_bps: 1.0e6,
                downlink_bps: 1.0e6,
            };
            assert_eq!(offload_energy(&t, &alloc, 1.0, false).unwrap(), 0.0);
        }
    }

    #[test]
    fn v2v_upload_kappa_flag_scales_the_upload_term() {
        let t = task(TaskType::Hpa, 1.0e6, 20.0, 0.0);
        let alloc = ComputeAllocation {
            target: ComputeTarget::Vehicle(1),
            fraction: 1.0,
            target_cpu: 2.0e9,
            uplink_bps: 0.5e9,
            downlink_bps: 0.0,
        };
        let plain = offload_energy(&t, &alloc, 1.0, false).unwrap();
        let kappa = offload_energy(&t, &alloc, 1.0, true).unwrap();
        assert_relative_eq!(kappa, 20.0 * plain, max_relative = 1e-12);
    }

    #[test]
    fn fleet_energy_skips_held_tasks() {
        assert_eq!(fleet_energy(&[]), 0.0);
        assert_eq!(fleet_energy(&[(1.0e-3, true), (2.0e-3, true)]), 0.0);
        assert_relative_eq!(fleet_energy(&[(1.0e-3, false), (2.0e-3, false)]), 3.0e-3);
        assert_relative_eq!(fleet_energy(&[(1.0e-3, false), (2.0e-3, true)]), 1.0e-3);
    }

    #[test]
    fn revenue_hand_check() {
        let prices = Prices::default();
        // vehicle 0 processes 1 Mbit for vehicle 1, offloads 0.5 Mbit to the VEC
        let executed = [
            ExecutedTask { owner: 1, target: ComputeTarget::Vehicle(0), size_bits: 1.0e6 },
            ExecutedTask { owner: 0, target: ComputeTarget::VecServer, size_bits: 0.5e6 },
        ];
        assert_relative_eq!(vehicle_revenue(0, &executed, &prices), 0.03, max_relative = 1e-12);
        assert_eq!(vehicle_revenue(2, &executed, &prices), 0.0);
        let local = [ExecutedTask { owner: 0, target: ComputeTarget::Local, size_bits: 1.0e6 }];
        assert_relative_eq!(vehicle_revenue(0, &local, &prices), -0.01, max_relative = 1e-12);
    }

    #[test]
    fn v2v_payments_are_zero_sum() {
        let prices = Prices::default();
        let executed = [
            ExecutedTask { owner: 0, target: ComputeTarget::Vehicle(1), size_bits: 0.8e6 },
            ExecutedTask { owner: 1, target: ComputeTarget::Vehicle(2), size_bits: 0.4e6 },
            ExecutedTask { owner: 2, target: ComputeTarget::VecServer, size_bits: 1.0e6 },
            ExecutedTask { owner: 3, target: ComputeTarget::Local, size_bits: 0.5e6 },
        ];
        let total: f64 = (0..4).map(|k| vehicle_revenue(k, &executed, &prices)).sum();
        let expected = -prices.p_v * 1.0 - prices.p_0 * 0.5;
        assert_relative_eq!(total, expected, max_relative = 1e-12);
    }

    #[test]
    fn utility_arithmetic_and_linearity() {
        let w = UtilityWeights::default();
        let (u, tr, e) = fleet_utility(&[10.0], &[5.0], &w);
        assert_relative_eq!(u, 6.0, max_relative = 1e-12);
        assert_eq!((tr, e), (10.0, 5.0));
        let (u0, ..) = fleet_utility(&[], &[], &w);
        assert_eq!(u0, 0.0);
        let (u2, tr2, _) = fleet_utility(&[20.0], &[5.0], &w);
        assert_relative_eq!(tr2, 2.0 * tr);
        assert_relative_eq!(u2, u + 0.8 * 10.0);
    }

    #[test]
    fn fleet_quantities_are_permutation_invariant() {
        let w = UtilityWeights::default();
        let a = fleet_utility(&[1.0, -2.0, 0.5], &[0.1, 0.2, 0.3], &w);
        let b = fleet_utility(&[0.5, 1.0, -2.0], &[0.3, 0.1, 0.2], &w);
        assert_eq!(a, b);
    }
}
