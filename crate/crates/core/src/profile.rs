//! Behavioral parameters for one memory technology.
//!
//! All currents are in arbitrary units (a.u.); latencies are in interface
//! clock cycles. The six default profiles ship as JSON files under
//! `data/profiles/` and are compiled into the library.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;
pub const PAGE_SIZE: usize = 64;
/// SPI clock used for every chip on the bench.
pub const DEFAULT_CLOCK_HZ: f64 = 1.5625e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    ToggleMram,
    Feram,
    Cbram,
    Reram,
    Flash,
    Sram,
}

impl Technology {
    pub const ALL: [Technology; 6] = [
        Technology::ToggleMram,
        Technology::Feram,
        Technology::Cbram,
        Technology::Reram,
        Technology::Flash,
        Technology::Sram,
    ];

    /// Identifier used in file names and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            Technology::ToggleMram => "toggle_mram",
            Technology::Feram => "feram",
            Technology::Cbram => "cbram",
            Technology::Reram => "reram",
            Technology::Flash => "flash",
            Technology::Sram => "sram",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Technology::ToggleMram => "Toggle MRAM",
            Technology::Feram => "FeRAM",
            Technology::Cbram => "CBRAM",
            Technology::Reram => "ReRAM",
            Technology::Flash => "Flash",
            Technology::Sram => "SRAM",
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "toggle_mram" | "mram" => Ok(Technology::ToggleMram),
            "feram" => Ok(Technology::Feram),
            "cbram" => Ok(Technology::Cbram),
            "reram" => Ok(Technology::Reram),
            "flash" => Ok(Technology::Flash),
            "sram" => Ok(Technology::Sram),
            other => Err(Error::config(format!("unknown technology `{other}`"))),
        }
    }
}

/// Per-write current signature of a technology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurrentModel {
    /// Toggle MRAM: toggling a bit that starts at one costs more than one
    /// that starts at zero. The premium shrinks by `deviation_decay` for
    /// every additional toggled bit.
    Mram {
        base: f64,
        cost_toggle_from_one: f64,
        cost_toggle_from_zero: f64,
        deviation_decay: f64,
        noise_sigma: f64,
    },
    /// Affine in the number of toggled bits.
    Cbram {
        base: f64,
        slope_per_bit: f64,
        noise_sigma: f64,
    },
    /// Pattern independent.
    Feram { constant: f64, noise_sigma: f64 },
    /// Uniform draw in `[mean - spread, mean + spread]`, one draw per page write.
    Reram { mean: f64, spread: f64 },
    /// Fixed cost per byte (Flash program, SRAM store).
    Fixed { byte_write: f64 },
}

impl CurrentModel {
    /// Noise-free expected current of one byte write.
    pub fn expected(&self, previous: u8, value: u8) -> f64 {
        let toggled = previous ^ value;
        let k = toggled.count_ones();
        match *self {
            CurrentModel::Mram {
                base,
                cost_toggle_from_one,
                cost_toggle_from_zero,
                deviation_decay,
                ..
            } => {
                if k == 0 {
                    return base;
                }
                let from_one = (toggled & previous).count_ones() as f64;
                let premium = (cost_toggle_from_one - cost_toggle_from_zero)
                    * (from_one / k as f64)
                    * deviation_decay.powi(k as i32 - 1);
                base + k as f64 * cost_toggle_from_zero + premium
            }
            CurrentModel::Cbram {
                base,
                slope_per_bit,
                ..
            } => base + slope_per_bit * k as f64,
            CurrentModel::Feram { constant, .. } => constant,
            CurrentModel::Reram { mean, .. } => mean,
            CurrentModel::Fixed { byte_write } => byte_write,
        }
    }

    fn check(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "current parameter `{name}` must be finite and >= 0, got {v}"
                )))
            }
        };
        match *self {
            CurrentModel::Mram {
                base,
                cost_toggle_from_one,
                cost_toggle_from_zero,
                deviation_decay,
                noise_sigma,
            } => {
                nonneg("base", base)?;
                nonneg("cost_toggle_from_one", cost_toggle_from_one)?;
                nonneg("cost_toggle_from_zero", cost_toggle_from_zero)?;
                nonneg("noise_sigma", noise_sigma)?;
                if cost_toggle_from_one <= cost_toggle_from_zero {
                    return Err(Error::config(
                        "MRAM cost_toggle_from_one must exceed cost_toggle_from_zero",
                    ));
                }
                if !(deviation_decay > 0.0 && deviation_decay <= 1.0) {
                    return Err(Error::config("MRAM deviation_decay must lie in (0, 1]"));
                }
            }
            CurrentModel::Cbram {
                base,
                slope_per_bit,
                noise_sigma,
            } => {
                nonneg("base", base)?;
                nonneg("slope_per_bit", slope_per_bit)?;
                nonneg("noise_sigma", noise_sigma)?;
            }
            CurrentModel::Feram {
                constant,
                noise_sigma,
            } => {
                nonneg("constant", constant)?;
                nonneg("noise_sigma", noise_sigma)?;
            }
            CurrentModel::Reram { mean, spread } => {
                nonneg("mean", mean)?;
                nonneg("spread", spread)?;
                if spread > mean {
                    return Err(Error::config("ReRAM spread must not exceed mean"));
                }
            }
            CurrentModel::Fixed { byte_write } => nonneg("byte_write", byte_write)?,
        }
        Ok(())
    }
}

/// `p_max / (1 + exp(-steepness * (wear - midpoint_wear)))`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Logistic {
    pub p_max: f64,
    pub steepness: f64,
    pub midpoint_wear: f64,
}

impl Logistic {
    pub const ZERO: Logistic = Logistic {
        p_max: 0.0,
        steepness: 1.0,
        midpoint_wear: 0.0,
    };

    pub fn eval(&self, wear: f64) -> f64 {
        if self.p_max == 0.0 {
            return 0.0;
        }
        self.p_max / (1.0 + (-self.steepness * (wear - self.midpoint_wear)).exp())
    }

    /// Largest wear at which the curve is guaranteed below `p`.
    pub fn wear_below(&self, p: f64) -> f64 {
        if self.p_max <= p {
            return f64::INFINITY;
        }
        // p_max * s(x) < p  <=>  x < ln(p / (p_max - p))
        self.midpoint_wear + (p / (self.p_max - p)).ln() / self.steepness
    }

    fn check(&self, what: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_max) {
            return Err(Error::config(format!("{what}.p_max must lie in [0, 1]")));
        }
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(Error::config(format!("{what}.steepness must be > 0")));
        }
        if !self.midpoint_wear.is_finite() {
            return Err(Error::config(format!(
                "{what}.midpoint_wear must be finite"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub base_write_cycles: u64,
    pub read_cycles: u64,
    /// Current drawn by one byte read.
    pub read_current: f64,
    pub wvw_enabled: bool,
    /// Probability that a verify fails, as a function of the worst bit wear
    /// of the target byte.
    pub wvw_retry: Logistic,
    pub wvw_attempt_cycles: u64,
    /// Extra current charged for every attempt after the first.
    pub wvw_attempt_current: f64,
    pub max_attempts: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnduranceModel {
    /// Datasheet write-cycle rating.
    pub rated_cycles: u64,
    /// Raw per-bit flip probability over the bit's toggle count.
    pub raw_flip: Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EraseModel {
    pub erase_before_write: bool,
    pub erase_current: f64,
    pub erase_latency_cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EccModel {
    /// Single-error correction over each stored byte (data bits plus the
    /// spare bit).
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyProfile {
    pub schema_version: u32,
    pub technology: Technology,
    pub page_size_bytes: usize,
    pub clock_hz: f64,
    pub current_model: CurrentModel,
    pub latency_model: LatencyModel,
    pub endurance_model: EnduranceModel,
    pub erase_model: EraseModel,
    pub ecc: EccModel,
}

const DEFAULT_JSON: [(Technology, &str); 6] = [
    (
        Technology::ToggleMram,
        include_str!("../data/profiles/toggle_mram.json"),
    ),
    (
        Technology::Feram,
        include_str!("../data/profiles/feram.json"),
    ),
    (
        Technology::Cbram,
        include_str!("../data/profiles/cbram.json"),
    ),
    (
        Technology::Reram,
        include_str!("../data/profiles/reram.json"),
    ),
    (
        Technology::Flash,
        include_str!("../data/profiles/flash.json"),
    ),
    (Technology::Sram, include_str!("../data/profiles/sram.json")),
];

impl TechnologyProfile {
    /// Bundled calibrated profile for `technology`.
    pub fn default_for(technology: Technology) -> TechnologyProfile {
        let (_, json) = DEFAULT_JSON
            .iter()
            .find(|(t, _)| *t == technology)
            .expect("every technology has a bundled profile");
        let profile = Self::from_json(json).expect("bundled profile is valid");
        debug_assert_eq!(profile.technology, technology);
        profile
    }

    /// All six bundled profiles in table order.
    pub fn defaults() -> Vec<TechnologyProfile> {
        Technology::ALL
            .iter()
            .map(|&t| Self::default_for(t))
            .collect()
    }

    pub fn from_json(json: &str) -> Result<TechnologyProfile> {
        let profile: TechnologyProfile = serde_json::from_str(json)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TechnologyProfile> {
        Self::from_json(&crate::error::read_to_string(path.as_ref())?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported profile schema_version {} (expected {PROFILE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.page_size_bytes != PAGE_SIZE {
            return Err(Error::config(format!(
                "page_size_bytes must be {PAGE_SIZE}, got {}",
                self.page_size_bytes
            )));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::config("clock_hz must be > 0"));
        }
        self.current_model.check()?;

        let expected_kind = match self.technology {
            Technology::ToggleMram => matches!(self.current_model, CurrentModel::Mram { .. }),
            Technology::Feram => matches!(self.current_model, CurrentModel::Feram { .. }),
            Technology::Cbram => matches!(self.current_model, CurrentModel::Cbram { .. }),
            Technology::Reram => matches!(self.current_model, CurrentModel::Reram { .. }),
            Technology::Flash | Technology::Sram => {
                matches!(self.current_model, CurrentModel::Fixed { .. })
            }
        };
        if !expected_kind {
            return Err(Error::config(format!(
                "current_model kind does not match technology {}",
                self.technology
            )));
        }

        let lat = &self.latency_model;
        if lat.max_attempts == 0 {
            return Err(Error::config("max_attempts must be >= 1"));
        }
        if !(lat.read_current.is_finite() && lat.read_current >= 0.0)
            || !(lat.wvw_attempt_current.is_finite() && lat.wvw_attempt_current >= 0.0)
        {
            return Err(Error::config(
                "latency-model currents must be finite and >= 0",
            ));
        }
        lat.wvw_retry.check("wvw_retry")?;
        self.endurance_model.raw_flip.check("raw_flip")?;
        // Random data toggles a bit on half of all writes, so the rated
        // write-cycle count corresponds to rated_cycles / 2 bit wear.
        let rated_wear = self.endurance_model.rated_cycles as f64 / 2.0;
        if self.endurance_model.raw_flip.eval(rated_wear) >= 1e-9 {
            return Err(Error::config(
                "raw_flip probability must stay below 1e-9 up to the rated write-cycle count",
            ));
        }

        let erase = &self.erase_model;
        if !(erase.erase_current.is_finite() && erase.erase_current >= 0.0) {
            return Err(Error::config("erase_current must be finite and >= 0"));
        }
        if erase.erase_before_write != (self.technology == Technology::Flash) {
            return Err(Error::config(
                "erase_before_write is only valid (and required) for Flash",
            ));
        }
        Ok(())
    }

    pub fn cycles_to_seconds(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_hz
    }
}
