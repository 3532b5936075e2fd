//! Per-slot SNR of every (sub-carrier, UE) pair.
//!
//! The faded model multiplies a reference SNR by a per-UE log-normal
//! shadowing factor, drawn once per replication, and by an exponential fading
//! power that is constant over a frequency bin of one coherence bandwidth and
//! over a block of slots with geometric length. Carriers map to bins
//! contiguously.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Same SNR on every carrier, UE and slot.
    Flat,
    /// Shadowing plus Rayleigh block fading.
    Faded,
    /// Flat SNR, but every transmission fails with probability `fixed_per`.
    FixedPer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    pub reference_snr_db: f64,
    pub shadowing_sigma_db: f64,
    /// mean fading block duration, seconds
    pub rayleigh_mean_duration: f64,
    /// Hz
    pub coherence_bandwidth: f64,
    /// mean fading power
    pub rayleigh_scale: f64,
    /// Hz
    pub subcarrier_bandwidth: f64,
    /// seconds
    pub symbol_duration: f64,
    /// used by the `fixed_per` model only
    pub fixed_per: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::Faded,
            reference_snr_db: 5.0,
            shadowing_sigma_db: 3.0,
            rayleigh_mean_duration: 5e-3,
            coherence_bandwidth: 900e3,
            rayleigh_scale: 1.0,
            subcarrier_bandwidth: 15e3,
            symbol_duration: 71.3e-6,
            fixed_per: 0.0,
        }
    }
}

impl ChannelConfig {
    pub fn flat(reference_snr_db: f64) -> Self {
        Self { model: ChannelModel::Flat, reference_snr_db, ..Self::default() }
    }

    pub fn fixed_per(per: f64) -> Self {
        Self { model: ChannelModel::FixedPer, fixed_per: per, ..Self::default() }
    }

    pub fn faded(shadowing_sigma_db: f64) -> Self {
        Self { shadowing_sigma_db, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rayleigh_mean_duration", self.rayleigh_mean_duration),
            ("coherence_bandwidth", self.coherence_bandwidth),
            ("rayleigh_scale", self.rayleigh_scale),
            ("subcarrier_bandwidth", self.subcarrier_bandwidth),
            ("symbol_duration", self.symbol_duration),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("channel.{key} must be positive, got {v}")));
            }
        }
        if !self.reference_snr_db.is_finite() {
            return Err(Error::Config("channel.reference_snr_db must be finite".into()));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config("channel.shadowing_sigma_db must be non-negative".into()));
        }
        if self.coherence_bandwidth < self.subcarrier_bandwidth {
            return Err(Error::Config("coherence bandwidth is narrower than one sub-carrier".into()));
        }
        if !(0.0..1.0).contains(&self.fixed_per) {
            return Err(Error::Config(format!("channel.fixed_per must lie in [0, 1), got {}", self.fixed_per)));
        }
        Ok(())
    }

    pub fn reference_snr(&self) -> f64 {
        db_to_linear(self.reference_snr_db)
    }

    /// Carriers sharing one fading bin.
    pub fn carriers_per_bin(&self) -> usize {
        ((self.coherence_bandwidth / self.subcarrier_bandwidth).floor() as usize).max(1)
    }

    pub fn bins(&self, carriers: usize) -> usize {
        carriers.div_ceil(self.carriers_per_bin())
    }

    /// Mean fading block length in slots of `n` symbols, at least one.
    pub fn mean_block_slots(&self, blocklength: u32) -> f64 {
        (self.rayleigh_mean_duration / (blocklength as f64 * self.symbol_duration)).max(1.0)
    }
}

/// SNR table of one slot, `snr[m * I + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub carriers: usize,
    pub ues: usize,
    pub snr: Vec<f64>,
}

impl ChannelRealization {
    pub fn snr(&self, carrier: usize, ue: usize) -> f64 {
        self.snr[carrier * self.ues + ue]
    }
}

/// Time-invariant, frequency-flat channel.
pub fn flat_awgn(gamma_db: f64, carriers: usize, ues: usize) -> ChannelRealization {
    ChannelRealization { carriers, ues, snr: vec![db_to_linear(gamma_db); carriers * ues] }
}

/// Evolving channel of one replication.
#[derive(Debug, Clone)]
pub struct ChannelState {
    model: ChannelModel,
    carriers: usize,
    ues: usize,
    carriers_per_bin: usize,
    bins: usize,
    reference: f64,
    shadow: Vec<f64>,
    /// `fade[bin * I + i]`
    fade: Vec<f64>,
    /// slots left in the current block
    dwell: Vec<u64>,
    /// UEs with a fade redrawn since the last `clear_changed`
    changed: Vec<bool>,
    power: Exp<f64>,
    block: Geometric,
    scale: f64,
}

impl ChannelState {
    /// Draws shadowing and the first fading blocks.
    pub fn new<R: Rng + ?Sized>(
        config: &ChannelConfig,
        carriers: usize,
        ues: usize,
        blocklength: u32,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if carriers == 0 || ues == 0 || blocklength == 0 {
            return Err(Error::Config("carriers, UEs and blocklength must be positive".into()));
        }
        let faded = config.model == ChannelModel::Faded;
        let bins = if faded { config.bins(carriers) } else { 1 };
        let shadow = if faded && config.shadowing_sigma_db > 0.0 {
            let normal = Normal::new(0.0, config.shadowing_sigma_db).map_err(|e| Error::Config(e.to_string()))?;
            (0..ues).map(|_| db_to_linear(normal.sample(rng))).collect()
        } else {
            vec![1.0; ues]
        };
        let power = Exp::new(1.0 / config.rayleigh_scale).map_err(|e| Error::Config(e.to_string()))?;
        let block =
            Geometric::new(1.0 / config.mean_block_slots(blocklength)).map_err(|e| Error::Config(e.to_string()))?;
        let mut state = Self {
            model: config.model,
            carriers,
            ues,
            carriers_per_bin: config.carriers_per_bin(),
            bins,
            reference: config.reference_snr(),
            shadow,
            fade: vec![1.0; bins * ues],
            dwell: vec![0; bins * ues],
            changed: vec![true; ues],
            power,
            block,
            scale: config.rayleigh_scale,
        };
        if faded {
            for j in 0..state.fade.len() {
                state.redraw(j, rng);
            }
        }
        Ok(state)
    }

    fn redraw<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        self.fade[j] = self.power.sample(rng).max(f64::MIN_POSITIVE);
        self.dwell[j] = 1 + self.block.sample(rng);
        self.changed[j % self.ues] = true;
    }

    /// Advances one slot: blocks whose dwell time ran out get a fresh fade.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.model != ChannelModel::Faded {
            return;
        }
        for j in 0..self.dwell.len() {
            self.dwell[j] -= 1;
            if self.dwell[j] == 0 {
                self.redraw(j, rng);
            }
        }
    }

    pub fn carriers(&self) -> usize {
        self.carriers
    }

    pub fn ues(&self) -> usize {
        self.ues
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn bin_of(&self, carrier: usize) -> usize {
        if self.bins == 1 {
            0
        } else {
            carrier / self.carriers_per_bin
        }
    }

    #[inline]
    pub fn bin_snr(&self, bin: usize, ue: usize) -> f64 {
        self.reference * self.shadow[ue] * self.fade[bin * self.ues + ue]
    }

    #[inline]
    pub fn snr(&self, carrier: usize, ue: usize) -> f64 {
        self.bin_snr(self.bin_of(carrier), ue)
    }

    /// Carrier-averaged SNR of `ue` in the current slot, the quantity a
    /// wideband RSSI measurement reports.
    pub fn wideband_snr(&self, ue: usize) -> f64 {
        if self.bins == 1 {
            return self.bin_snr(0, ue);
        }
        let mut acc = 0.0;
        for bin in 0..self.bins {
            let lo = bin * self.carriers_per_bin;
            let hi = (lo + self.carriers_per_bin).min(self.carriers);
            acc += (hi - lo) as f64 * self.bin_snr(bin, ue);
        }
        acc / self.carriers as f64
    }

    /// Per-UE flags raised whenever one of the UE's fades is redrawn.
    pub fn changed(&self) -> &[bool] {
        &self.changed
    }

    pub fn clear_changed(&mut self) {
        self.changed.iter_mut().for_each(|c| *c = false);
    }

    pub fn shadow(&self, ue: usize) -> f64 {
        self.shadow[ue]
    }

    /// Long-run mean SNR of `ue`.
    pub fn mean_snr(&self, ue: usize) -> f64 {
        let fade_mean = if self.model == ChannelModel::Faded { self.scale } else { 1.0 };
        self.reference * self.shadow[ue] * fade_mean
    }

    pub fn realization(&self) -> ChannelRealization {
        let snr =
            (0..self.carriers).flat_map(|m| (0..self.ues).map(move |i| (m, i))).map(|(m, i)| self.snr(m, i)).collect();
        ChannelRealization { carriers: self.carriers, ues: self.ues, snr }
    }
}
