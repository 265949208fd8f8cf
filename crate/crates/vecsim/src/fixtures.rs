//! Exhaustively solved micro-instances, stored as JSON with the optimal
//! joint decision and utility embedded as expected values.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use vecsim_core::decision::{brute_force_best, random_instance, InstanceParams};
use vecsim_core::{Decision, MicroInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub instance: MicroInstance,
    /// The enumeration's optimal joint decision.
    pub decisions: Vec<Decision>,
    pub utility: f64,
}

pub const MAX_FIXTURES: usize = 10_000;

/// Generates `count` solved fixtures under `out`, returning the paths in
/// index order. Instances stay small (1-2 vehicles, 1-2 channels per pool)
/// so the enumeration stays well inside its budget.
pub fn make_fixtures(count: usize, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    ensure!(count <= MAX_FIXTURES, "fixture count {count} exceeds {MAX_FIXTURES}");
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))?;
    let mut rng = vecsim_core::rng::stream(seed, "fixtures");
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let p = InstanceParams {
            vehicle_count: 1 + i % 2,
            channels_per_pool: 1 + (i / 2) % 2,
            aged_tasks: i % 3 == 0,
            occupied: i % 5 == 0,
            arrival_probability: 1.0,
        };
        let instance = random_instance(&mut rng, &p);
        let (decisions, utility) =
            brute_force_best(&instance).map_err(|e| anyhow::anyhow!("{e}"))?;
        let fixture = Fixture { instance, decisions, utility };
        let path = out.join(format!("fixture_{i:05}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&fixture)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn load_fixture(path: &Path) -> Result<Fixture> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read fixture {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed fixture {}", path.display()))
}
