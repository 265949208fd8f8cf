//! Per-slot trace rows for `StepInfo`.
//!
//! The column order is stable across versions:
//! `slot`, `reward_<k>` for each vehicle, `regime_<k>` for each vehicle,
//! `completions`, `delay_ms_<k>`, `threshold_ms_<k>`, `energy_j`, `revenue`.
//! Delay and threshold cells are empty for vehicles that decided nothing
//! that slot.

use vecsim_core::env::{RewardRegime, StepInfo};

pub fn slot_header(vehicle_count: usize) -> Vec<String> {
    let mut h = vec!["slot".to_string()];
    h.extend((0..vehicle_count).map(|k| format!("reward_{k}")));
    h.extend((0..vehicle_count).map(|k| format!("regime_{k}")));
    h.push("completions".to_string());
    h.extend((0..vehicle_count).map(|k| format!("delay_ms_{k}")));
    h.extend((0..vehicle_count).map(|k| format!("threshold_ms_{k}")));
    h.push("energy_j".to_string());
    h.push("revenue".to_string());
    h
}

fn regime_tag(r: RewardRegime) -> &'static str {
    match r {
        RewardRegime::Penalty => "penalty",
        RewardRegime::DeadlineMiss => "miss",
        RewardRegime::Utility => "utility",
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn slot_row(info: &StepInfo) -> Vec<String> {
    let mut row = vec![info.slot.to_string()];
    row.extend(info.rewards.iter().map(|r| r.to_string()));
    row.extend(info.regimes.iter().map(|r| regime_tag(*r).to_string()));
    row.push(info.completions.len().to_string());
    row.extend(info.delays_ms.iter().map(|d| opt_cell(*d)));
    row.extend(info.thresholds_ms.iter().map(|t| opt_cell(*t)));
    row.push(info.energy_j.to_string());
    row.push(info.revenue.to_string());
    row
}
