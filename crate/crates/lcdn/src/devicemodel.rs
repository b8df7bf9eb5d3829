//! Device parameter registry: measured switch profiles and the end-host
//! token-bucket deviation table.
//!
//! The built-in [`SwitchProfile::fs_s2805s`] profile carries the measured
//! values for the FS S2805S-8TF: 1 Gbps links, 4.15 us worst-case packet
//! processing, 8 strict-priority queues with 3.5 us arbitration overhead,
//! and a 4 Mbit shared packet buffer. Other switches can be described in a
//! JSON profile file and selected per node.
//!
//! End hosts shape flows with a kernel token-bucket filter whose measured
//! output rate runs slightly above the configured rate. The deviation
//! depends almost entirely on the burst size; [`TbfDeviationTable`] holds
//! the measured (burst, deviation) points and [`compensate_rate`] inflates
//! a flow's nominal rate accordingly before any bound is computed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcalc::{self, ServiceCurve};

#[derive(Debug, Error)]
pub enum DeviceModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown switch profile {0:?}")]
    UnknownProfile(String),
    #[error("profile file: {0}")]
    Io(#[from] std::io::Error),
    #[error("profile file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Static parameters of one switch model, in canonical units
/// (bits, seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchProfile {
    pub name: String,
    pub link_rate_bps: f64,
    pub t_proc_s: f64,
    pub num_queues: u8,
    pub t_spq_s: f64,
    pub total_buffer_bits: f64,
    pub max_frame_bytes: u32,
    pub max_bridge_priorities: u8,
    pub port_count: u8,
}

impl SwitchProfile {
    /// The measured default profile.
    pub fn fs_s2805s() -> SwitchProfile {
        SwitchProfile {
            name: "FS-S2805S".to_string(),
            link_rate_bps: 1e9,
            t_proc_s: 4.15e-6,
            num_queues: 8,
            t_spq_s: 3.5e-6,
            total_buffer_bits: 4e6,
            max_frame_bytes: 1516,
            max_bridge_priorities: 16,
            port_count: 8,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceModelError> {
        if !(1..=8).contains(&self.num_queues) {
            return Err(DeviceModelError::InvalidParameter(format!(
                "num_queues must be in 1..=8, got {}",
                self.num_queues
            )));
        }
        if self.total_buffer_bits <= 0.0 {
            return Err(DeviceModelError::InvalidParameter(
                "total_buffer_bits must be positive".into(),
            ));
        }
        if self.link_rate_bps <= 0.0 {
            return Err(DeviceModelError::InvalidParameter(
                "link_rate_bps must be positive".into(),
            ));
        }
        if self.port_count == 0 {
            return Err(DeviceModelError::InvalidParameter(
                "port_count must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Service curve of one egress port of this switch.
    pub fn port_service(&self) -> ServiceCurve {
        netcalc::port_service(self.link_rate_bps, self.t_proc_s, self.t_spq_s)
            .expect("validated profile")
    }
}

impl Default for SwitchProfile {
    fn default() -> Self {
        SwitchProfile::fs_s2805s()
    }
}

/// Buffer bytes available to a single queue when `active_ports` ports
/// carry traffic. The shared packet buffer is split evenly across active
/// ports; the per-port share is the budget the backlog bound of each of
/// its queues is checked against.
pub fn per_queue_buffer(
    profile: &SwitchProfile,
    active_ports: u8,
) -> Result<u64, DeviceModelError> {
    if active_ports == 0 || active_ports > profile.port_count {
        return Err(DeviceModelError::InvalidParameter(format!(
            "active_ports must be in 1..={}, got {active_ports}",
            profile.port_count
        )));
    }
    let total_bytes = profile.total_buffer_bits / 8.0;
    Ok((total_bytes / f64::from(active_ports)).floor() as u64)
}

/// Measured token-bucket filter rate deviation as a function of the
/// configured burst size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TbfDeviationTable {
    /// (burst_bytes, deviation_percent), strictly increasing in burst.
    pub points: Vec<(u32, f64)>,
}

impl TbfDeviationTable {
    /// The nine measured points at a constant 3 Mbps rate.
    pub fn measured() -> TbfDeviationTable {
        TbfDeviationTable {
            points: vec![
                (84, 50.00649981552046),
                (242, 13.08895590624894),
                (442, 6.7677969950345),
                (642, 4.56462923611565),
                (842, 3.44413241871526),
                (1042, 2.76546023423554),
                (1242, 2.31063597897005),
                (1442, 1.984468595702),
                (1542, 1.85364426772192),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), DeviceModelError> {
        if self.points.is_empty() {
            return Err(DeviceModelError::InvalidParameter(
                "deviation table must not be empty".into(),
            ));
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(DeviceModelError::InvalidParameter(
                    "deviation table bursts must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

impl Default for TbfDeviationTable {
    fn default() -> Self {
        TbfDeviationTable::measured()
    }
}

/// Deviation in percent for the given burst: exact at measured points,
/// linearly interpolated between them, clamped to the nearest endpoint
/// outside the measured range.
pub fn tbf_deviation(table: &TbfDeviationTable, burst_bytes: u32) -> f64 {
    let points = &table.points;
    if burst_bytes <= points[0].0 {
        return points[0].1;
    }
    if burst_bytes >= points[points.len() - 1].0 {
        return points[points.len() - 1].1;
    }
    for w in points.windows(2) {
        let (b0, d0) = w[0];
        let (b1, d1) = w[1];
        if burst_bytes == b0 {
            return d0;
        }
        if burst_bytes < b1 {
            let frac = f64::from(burst_bytes - b0) / f64::from(b1 - b0);
            return d0 + frac * (d1 - d0);
        }
    }
    unreachable!("burst below last point handled in loop");
}

/// Nominal rate inflated by the measured filter leakiness. The result is
/// what the admitted arrival curve must carry so the real shaped traffic
/// stays inside it.
pub fn compensate_rate(table: &TbfDeviationTable, rate_bps: f64, burst_bytes: u32) -> f64 {
    rate_bps * (1.0 + tbf_deviation(table, burst_bytes) / 100.0)
}

/// Named switch profiles, seeded with the built-in default and optionally
/// extended from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRegistry {
    profiles: BTreeMap<String, SwitchProfile>,
}

impl ProfileRegistry {
    pub fn builtin() -> ProfileRegistry {
        let default = SwitchProfile::fs_s2805s();
        let mut profiles = BTreeMap::new();
        profiles.insert(default.name.clone(), default);
        ProfileRegistry { profiles }
    }

    /// Loads profiles from a JSON array and merges them over the built-ins.
    pub fn load_file(&mut self, path: &Path) -> Result<(), DeviceModelError> {
        let text = std::fs::read_to_string(path)?;
        let loaded: Vec<SwitchProfile> = serde_json::from_str(&text)?;
        for profile in loaded {
            profile.validate()?;
            self.profiles.insert(profile.name.clone(), profile);
        }
        Ok(())
    }

    pub fn insert(&mut self, profile: SwitchProfile) {
        self.profiles.insert(profile.name.clone(), profile);
    }

    pub fn get(&self, name: &str) -> Result<&SwitchProfile, DeviceModelError> {
        self.profiles
            .get(name)
            .ok_or_else(|| DeviceModelError::UnknownProfile(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        ProfileRegistry::builtin()
    }
}
