//! Per-channel transmission rates and aggregate link capacities.
//!
//! V2I links use plain Shannon capacity over the per-channel bandwidth; mmWave
//! V2V links additionally lose a fraction `alignment_loss` of their rate to
//! beamforming alignment.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ChannelModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    V2iUp,
    V2iDown,
    V2vUp,
    V2vDown,
}

impl LinkKind {
    pub fn is_v2v(self) -> bool {
        matches!(self, LinkKind::V2vUp | LinkKind::V2vDown)
    }
}

/// Parameters of one channel of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub kind: LinkKind,
    /// Per-channel bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Transmit power, W.
    pub tx_power_w: f64,
    /// Noise power over the channel bandwidth, W.
    pub noise_w: f64,
    /// Co-channel interference, W.
    pub interference_w: f64,
    /// Beam alignment loss, fraction of the rate lost; 0 for V2I kinds.
    pub alignment_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    NonPositiveDistance(f64),
    InvalidLinkSpec,
    LengthMismatch { assignment: usize, rates: usize },
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::NonPositiveDistance(d) => write!(f, "distance {d} must be > 0"),
            ChannelError::InvalidLinkSpec => write!(f, "link spec violates its invariants"),
            ChannelError::LengthMismatch { assignment, rates } => {
                write!(f, "assignment length {assignment} != rates length {rates}")
            }
        }
    }
}

impl LinkSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let ok = self.bandwidth_hz > 0.0
            && self.tx_power_w >= 0.0
            && self.noise_w > 0.0
            && self.interference_w >= 0.0
            && (0.0..1.0).contains(&self.alignment_loss)
            && (self.kind.is_v2v() || self.alignment_loss == 0.0);
        if ok {
            Ok(())
        } else {
            Err(ChannelError::InvalidLinkSpec)
        }
    }
}

/// Noise power over `bandwidth_hz` from the configured thermal density.
pub fn noise_power_w(cfg: &ChannelModelConfig, bandwidth_hz: f64) -> f64 {
    libm::pow(10.0, (cfg.noise_density_dbm_hz - 30.0) / 10.0) * bandwidth_hz
}

/// Log-distance path loss in dB at `distance_m`.
pub fn path_loss_db(cfg: &ChannelModelConfig, distance_m: f64) -> f64 {
    cfg.pathloss_fixed_db + cfg.pathloss_exp_db * libm::log10(distance_m / 1000.0)
}

/// Linear power gain at `distance_m`, optionally with unit-mean exponential
/// (Rayleigh-power) fading drawn from `rng`.
pub fn channel_gain<R: Rng + ?Sized>(
    cfg: &ChannelModelConfig,
    distance_m: f64,
    rng: Option<&mut R>,
) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    let mut gain = libm::pow(10.0, -path_loss_db(cfg, distance_m) / 10.0);
    if let Some(rng) = rng {
        if cfg.fading {
            // inverse-CDF sample of Exp(1), mean 1
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            gain *= -libm::log(u);
        }
    }
    Ok(gain)
}

/// Shannon rate of one channel, bits/s: `(1 - l) * w * log2(1 + P*g / (n + I))`.
pub fn per_channel_rate(link: &LinkSpec, gain: f64) -> Result<f64, ChannelError> {
    link.validate()?;
    let snr = link.tx_power_w * gain / (link.noise_w + link.interference_w);
    Ok((1.0 - link.alignment_loss) * link.bandwidth_hz * libm::log2(1.0 + snr))
}

/// Aggregate capacity of the channels assigned to one vehicle.
pub fn link_capacity(assignment_row: &[bool], rates: &[f64]) -> Result<f64, ChannelError> {
    if assignment_row.len() != rates.len() {
        return Err(ChannelError::LengthMismatch {
            assignment: assignment_row.len(),
            rates: rates.len(),
        });
    }
    Ok(assignment_row
        .iter()
        .zip(rates)
        .filter(|(z, _)| **z)
        .map(|(_, r)| *r)
        .sum())
}

/// A 0/1 channel assignment matrix `z[k][n]` for one pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAssignment {
    pub rows: Vec<Vec<bool>>,
}

impl ChannelAssignment {
    pub fn new(vehicles: usize, channels: usize) -> Self {
        Self { rows: alloc::vec![alloc::vec![false; channels]; vehicles] }
    }

    /// Per-channel column sums across vehicles.
    pub fn column_sums(&self) -> Vec<usize> {
        let n = self.rows.first().map_or(0, Vec::len);
        let mut sums = alloc::vec![0usize; n];
        for row in &self.rows {
            for (s, z) in sums.iter_mut().zip(row) {
                *s += usize::from(*z);
            }
        }
        sums
    }

    /// Column-exclusivity (constraints c4-c7): every channel used by at most
    /// one vehicle.
    pub fn is_column_exclusive(&self) -> bool {
        self.column_sums().iter().all(|s| *s <= 1)
    }
}
