//! Simulation configuration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ChannelModel};
use crate::cluster_opt::{optimal_cluster_size, ClusterOptInput};
use crate::error::{Error, Result};
use crate::fbl::LinkQuality;
use crate::schedulers::{urllc_cluster_size, Policy, UrllcSizing};

/// A count that is either given or derived (`"auto"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "AutoRepr", into = "AutoRepr")]
pub enum AutoOr {
    #[default]
    Auto,
    Value(u64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AutoRepr {
    Number(u64),
    Text(String),
}

impl TryFrom<AutoRepr> for AutoOr {
    type Error = String;

    fn try_from(r: AutoRepr) -> std::result::Result<Self, String> {
        match r {
            AutoRepr::Number(v) => Ok(AutoOr::Value(v)),
            AutoRepr::Text(s) if s == "auto" => Ok(AutoOr::Auto),
            AutoRepr::Text(s) => {
                s.parse().map(AutoOr::Value).map_err(|_| format!("expected \"auto\" or an integer, got {s:?}"))
            }
        }
    }
}

impl From<AutoOr> for AutoRepr {
    fn from(v: AutoOr) -> Self {
        match v {
            AutoOr::Auto => AutoRepr::Text("auto".into()),
            AutoOr::Value(v) => AutoRepr::Number(v),
        }
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// I
    pub ues: u32,
    /// M
    pub carriers: u32,
    /// n
    pub blocklength: u32,
    /// tau
    pub payload_bits: u32,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { ues: 100, carriers: 100, blocklength: 1, payload_bits: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub policy: Policy,
    pub cluster_size: AutoOr,
    /// seconds
    pub urllc_max_delay: f64,
    pub urllc_target_per: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self { policy: Policy::ClusteredRr, cluster_size: AutoOr::Auto, urllc_max_delay: 1e-3, urllc_target_per: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    #[default]
    UniformBlind,
    RecursiveCsi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentConfig {
    pub mode: AssignmentMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// measured slots per replication, after warm-up
    pub slots: u64,
    pub replications: u32,
    pub master_seed: u64,
    /// `auto` is `10 * ceil(I / l)`
    pub warmup: AutoOr,
    /// worker threads; `auto` uses every core
    pub parallelism: AutoOr,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { slots: 20_000, replications: 200, master_seed: 1, warmup: AutoOr::Auto, parallelism: AutoOr::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub assignment: AssignmentConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// Cluster size in force for a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedClusterSize {
    pub cluster_size: u32,
    /// set for the URLLC baseline
    pub urllc: Option<UrllcSizing>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.ues == 0 || s.carriers == 0 || s.blocklength == 0 || s.payload_bits == 0 {
            return Err(Error::Config("system.ues, carriers, blocklength and payload_bits must be positive".into()));
        }
        self.channel.validate()?;
        if self.run.slots == 0 || self.run.replications == 0 {
            return Err(Error::Config("run.slots and run.replications must be positive".into()));
        }
        if self.run.parallelism == AutoOr::Value(0) {
            return Err(Error::Config("run.parallelism must be positive".into()));
        }
        let sc = &self.scheduler;
        if !(sc.urllc_target_per > 0.0 && sc.urllc_target_per < 1.0) {
            return Err(Error::Config("scheduler.urllc_target_per must lie in (0, 1)".into()));
        }
        if sc.urllc_max_delay.is_nan() || sc.urllc_max_delay < self.slot_duration() {
            return Err(Error::Config("scheduler.urllc_max_delay is shorter than one slot".into()));
        }
        self.resolve_cluster_size().map(|_| ())
    }

    /// n symbols, in seconds
    pub fn slot_duration(&self) -> f64 {
        self.system.blocklength as f64 * self.channel.symbol_duration
    }

    /// Flat-channel view at the reference SNR.
    pub fn cluster_opt_input(&self) -> Result<ClusterOptInput> {
        ClusterOptInput::from_link(
            self.system.carriers,
            self.system.blocklength,
            LinkQuality::from_snr(self.channel.reference_snr())?,
            self.system.payload_bits,
        )
    }

    pub fn resolve_cluster_size(&self) -> Result<ResolvedClusterSize> {
        let max_l = self.system.ues.min(self.system.carriers);
        let resolved = match (self.scheduler.policy, self.scheduler.cluster_size) {
            (Policy::NoClustering, AutoOr::Value(l)) if l != 1 => {
                return Err(Error::Config("the no_clustering policy needs cluster_size = 1".into()));
            }
            (Policy::NoClustering, _) => ResolvedClusterSize { cluster_size: 1, urllc: None },
            (Policy::UrllcBaseline, _) => {
                let sizing = urllc_cluster_size(
                    &self.cluster_opt_input()?,
                    self.system.ues,
                    self.slot_duration(),
                    self.scheduler.urllc_max_delay,
                    self.scheduler.urllc_target_per,
                )?;
                ResolvedClusterSize { cluster_size: sizing.cluster_size, urllc: Some(sizing) }
            }
            (_, AutoOr::Value(l)) => ResolvedClusterSize { cluster_size: l as u32, urllc: None },
            (_, AutoOr::Auto) => {
                let l = optimal_cluster_size(&self.cluster_opt_input()?)?.l_int.min(max_l);
                ResolvedClusterSize { cluster_size: l, urllc: None }
            }
        };
        if resolved.cluster_size == 0 || resolved.cluster_size > max_l {
            return Err(Error::Config(format!(
                "cluster size {} must lie in [1, min(I, M) = {max_l}]",
                resolved.cluster_size
            )));
        }
        Ok(resolved)
    }

    pub fn warmup_slots(&self, cluster_size: u32) -> u64 {
        match self.run.warmup {
            AutoOr::Auto => 10 * self.system.ues.div_ceil(cluster_size) as u64,
            AutoOr::Value(w) => w,
        }
    }

    /// The model in force; `fixed_per` overrides the SNR-derived error rate.
    pub fn channel_model(&self) -> ChannelModel {
        self.channel.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_or_conversions() {
        assert_eq!(AutoOr::try_from(AutoRepr::Text("auto".into())), Ok(AutoOr::Auto));
        assert_eq!(AutoOr::try_from(AutoRepr::Number(4)), Ok(AutoOr::Value(4)));
        assert!(AutoOr::try_from(AutoRepr::Text("big".into())).is_err());
        assert_eq!(AutoOr::Value(3).to_string(), "3");
    }

    #[test]
    fn default_config_resolves_to_the_analytic_cluster_size() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.resolve_cluster_size().unwrap().cluster_size, 5);
        assert_eq!(cfg.warmup_slots(5), 200);
    }

    #[test]
    fn oversized_cluster_is_rejected() {
        let mut cfg = SimConfig::default();
        cfg.scheduler.cluster_size = AutoOr::Value(101);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.scheduler.policy = Policy::NoClustering;
        cfg.scheduler.cluster_size = AutoOr::Value(2);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn urllc_baseline_resolution() {
        let mut cfg = SimConfig::default();
        cfg.scheduler.policy = Policy::UrllcBaseline;
        let r = cfg.resolve_cluster_size().unwrap();
        let sizing = r.urllc.unwrap();
        assert!(!sizing.feasible);
        assert_eq!(sizing.cluster_size, r.cluster_size);
    }
}
