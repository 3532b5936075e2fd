//! Experiment files: a simulation config plus an optional one-parameter sweep.

use std::path::Path;

use anyhow::Context;
use aoi_core::{AssignmentConfig, AutoOr, ChannelConfig, RunConfig, SchedulerConfig, SimConfig, SystemConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ConfigError;

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Ues,
    Carriers,
    Blocklength,
    PayloadBits,
    ClusterSize,
    ReferenceSnrDb,
    ShadowingSigmaDb,
    FixedPer,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ues => "ues",
            Self::Carriers => "carriers",
            Self::Blocklength => "blocklength",
            Self::PayloadBits => "payload_bits",
            Self::ClusterSize => "cluster_size",
            Self::ReferenceSnrDb => "reference_snr_db",
            Self::ShadowingSigmaDb => "shadowing_sigma_db",
            Self::FixedPer => "fixed_per",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Self::Ues | Self::Carriers | Self::Blocklength | Self::PayloadBits | Self::ClusterSize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
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
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn base(&self) -> SimConfig {
        SimConfig {
            system: self.system,
            channel: self.channel,
            scheduler: self.scheduler,
            assignment: self.assignment,
            run: self.run,
        }
    }

    pub fn from_sim(cfg: SimConfig) -> Self {
        Self {
            system: cfg.system,
            channel: cfg.channel,
            scheduler: cfg.scheduler,
            assignment: cfg.assignment,
            run: cfg.run,
            sweep: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    /// SHA-256 of the canonical serialization.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// One simulation config per sweep value, or the base alone.
    pub fn expand(&self) -> Result<Vec<(Option<f64>, SimConfig)>, ConfigError> {
        let base = self.base();
        let Some(sweep) = &self.sweep else {
            validate(&base)?;
            return Ok(vec![(None, base)]);
        };
        if sweep.values.is_empty() {
            validate(&base)?;
            return Ok(vec![(None, base)]);
        }
        sweep
            .values
            .iter()
            .map(|&v| {
                let cfg = apply(base, sweep.parameter, v)?;
                validate(&cfg)?;
                Ok((Some(v), cfg))
            })
            .collect()
    }
}

fn validate(cfg: &SimConfig) -> Result<(), ConfigError> {
    cfg.validate().map_err(|e| ConfigError(e.to_string()))
}

fn apply(mut cfg: SimConfig, p: SweepParameter, v: f64) -> Result<SimConfig, ConfigError> {
    if p.integral() && !(v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
        return Err(ConfigError(format!("sweep value {v} for {} must be a positive integer", p.name())));
    }
    match p {
        SweepParameter::Ues => cfg.system.ues = v as u32,
        SweepParameter::Carriers => cfg.system.carriers = v as u32,
        SweepParameter::Blocklength => cfg.system.blocklength = v as u32,
        SweepParameter::PayloadBits => cfg.system.payload_bits = v as u32,
        SweepParameter::ClusterSize => cfg.scheduler.cluster_size = AutoOr::Value(v as u64),
        SweepParameter::ReferenceSnrDb => cfg.channel.reference_snr_db = v,
        SweepParameter::ShadowingSigmaDb => cfg.channel.shadowing_sigma_db = v,
        SweepParameter::FixedPer => cfg.channel.fixed_per = v,
    }
    Ok(cfg)
}
