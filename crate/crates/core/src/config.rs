//! Versioned JSON configurations, one per experiment. Missing keys take the
//! documented defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::characterization::{
    SweepConfig, DEFAULT_AGING_CYCLES, DEFAULT_ENDURANCE_CYCLES, DEFAULT_SWEEP_CYCLES,
};
use crate::de::{DEConfig, SyntheticSpec};
use crate::encoding::{default_comparison_seeds, DEFAULT_FNW_CYCLES};
use crate::error::{Error, Result};
use crate::nn::NnEngine;
use crate::profile::{Technology, TechnologyProfile};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 1;

/// Common behavior of experiment configurations.
pub trait Experiment: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;

    fn schema_version(&self) -> u32;

    fn check(&self) -> Result<()>;

    fn validate(&self) -> Result<()> {
        if self.schema_version() != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "{} config: unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                Self::NAME,
                self.schema_version()
            )));
        }
        self.check().map_err(|e| match e {
            Error::Argument(msg) => Error::Config(format!("{}: {msg}", Self::NAME)),
            other => other,
        })
    }

    fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::config(format!("{} config: {e}", Self::NAME)))
    }

    fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::error::read_to_string(path)?)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs serialize");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Default profile for `technology`, or the profile file when given.
pub fn resolve_profile(technology: Technology, path: Option<&Path>) -> Result<TechnologyProfile> {
    match path {
        None => Ok(TechnologyProfile::default_for(technology)),
        Some(p) => {
            let profile = TechnologyProfile::load(p)?;
            if profile.technology != technology {
                return Err(Error::config(format!(
                    "profile {} describes {}, not {}",
                    p.display(),
                    profile.technology,
                    technology
                )));
            }
            Ok(profile)
        }
    }
}

fn positive(name: &str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(Error::config(format!("{name} must be positive")));
    }
    Ok(())
}

macro_rules! experiment {
    ($ty:ty, $name:literal, |$s:ident| $check:block) => {
        impl Experiment for $ty {
            const NAME: &'static str = $name;

            fn schema_version(&self) -> u32 {
                self.schema_version
            }

            fn check(&self) -> Result<()> {
                let $s = self;
                $check
            }
        }
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepExperiment {
    pub schema_version: u32,
    pub technology: Technology,
    pub profile: Option<PathBuf>,
    pub seed: u64,
    pub cycles: u32,
    pub k_values: Vec<u8>,
}

impl Default for SweepExperiment {
    fn default() -> Self {
        SweepExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            technology: Technology::Cbram,
            profile: None,
            seed: DEFAULT_SEED,
            cycles: DEFAULT_SWEEP_CYCLES,
            k_values: (1..=8).collect(),
        }
    }
}

impl SweepExperiment {
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            k_values: self.k_values.clone(),
            cycles: self.cycles,
            ..SweepConfig::default()
        }
    }
}

experiment!(SweepExperiment, "sweep", |s| {
    s.sweep_config().validate()
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgingExperiment {
    pub schema_version: u32,
    pub technology: Technology,
    pub profile: Option<PathBuf>,
    pub seed: u64,
    pub cycles: u64,
    /// Keep every n-th page write.
    pub sample_every: u64,
}

impl Default for AgingExperiment {
    fn default() -> Self {
        AgingExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            technology: Technology::Cbram,
            profile: None,
            seed: DEFAULT_SEED,
            cycles: DEFAULT_AGING_CYCLES,
            sample_every: 100,
        }
    }
}

experiment!(AgingExperiment, "aging", |s| {
    positive("cycles", s.cycles)?;
    positive("sample_every", s.sample_every)
});

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderChoice {
    #[default]
    None,
    Fnw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnduranceExperiment {
    pub schema_version: u32,
    pub technology: Technology,
    pub profile: Option<PathBuf>,
    pub seed: u64,
    pub cycles: u64,
    pub encoder: EncoderChoice,
}

impl Default for EnduranceExperiment {
    fn default() -> Self {
        EnduranceExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            technology: Technology::Cbram,
            profile: None,
            seed: DEFAULT_SEED,
            cycles: DEFAULT_ENDURANCE_CYCLES,
            encoder: EncoderChoice::None,
        }
    }
}

experiment!(EnduranceExperiment, "endurance", |s| {
    positive("cycles", s.cycles)
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FnwCompareExperiment {
    pub schema_version: u32,
    pub technology: Technology,
    pub profile: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub cycles: u64,
}

impl Default for FnwCompareExperiment {
    fn default() -> Self {
        FnwCompareExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            technology: Technology::Cbram,
            profile: None,
            seeds: default_comparison_seeds(),
            cycles: DEFAULT_FNW_CYCLES,
        }
    }
}

experiment!(FnwCompareExperiment, "fnw-compare", |s| {
    if s.seeds.is_empty() {
        return Err(Error::config("seeds must not be empty"));
    }
    positive("cycles", s.cycles)
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainExperiment {
    pub schema_version: u32,
    pub de: DEConfig,
    pub dataset: SyntheticSpec,
}

impl Default for TrainExperiment {
    fn default() -> Self {
        TrainExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            de: DEConfig::default(),
            dataset: SyntheticSpec::default(),
        }
    }
}

experiment!(TrainExperiment, "train", |s| {
    s.de.validate()?;
    if s.dataset.count < 2 {
        return Err(Error::config("dataset.count must be >= 2"));
    }
    Ok(())
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferExperiment {
    pub schema_version: u32,
    pub technology: Technology,
    pub profile: Option<PathBuf>,
    pub seed: u64,
    /// Raw 5391-byte parameter file.
    pub params: Option<PathBuf>,
    /// Raw 768-byte image or PNG.
    pub image: Option<PathBuf>,
    pub cycles_per_mac: u64,
}

impl Default for InferExperiment {
    fn default() -> Self {
        InferExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            technology: Technology::ToggleMram,
            profile: None,
            seed: DEFAULT_SEED,
            params: None,
            image: None,
            cycles_per_mac: NnEngine::DEFAULT_CYCLES_PER_MAC,
        }
    }
}

experiment!(InferExperiment, "infer", |s| {
    if s.params.is_none() {
        return Err(Error::config("infer requires a parameter file"));
    }
    if s.image.is_none() {
        return Err(Error::config("infer requires an image file"));
    }
    positive("cycles_per_mac", s.cycles_per_mac)
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchExperiment {
    pub schema_version: u32,
    /// `"default"` for the six built-in profiles, a technology name for its
    /// built-in profile, or a path to a profile file.
    pub profiles: Vec<String>,
    pub seed: u64,
    /// Parameter file; random parameters drawn from `seed` when absent.
    pub params: Option<PathBuf>,
    /// Image file; a fixed gradient image when absent.
    pub image: Option<PathBuf>,
    pub cycles_per_mac: u64,
}

impl Default for BenchExperiment {
    fn default() -> Self {
        BenchExperiment {
            schema_version: CONFIG_SCHEMA_VERSION,
            profiles: vec!["default".into()],
            seed: DEFAULT_SEED,
            params: None,
            image: None,
            cycles_per_mac: NnEngine::DEFAULT_CYCLES_PER_MAC,
        }
    }
}

impl BenchExperiment {
    pub fn resolve_profiles(&self) -> Result<Vec<TechnologyProfile>> {
        let mut out = Vec::new();
        for entry in &self.profiles {
            if entry == "default" {
                out.extend(TechnologyProfile::defaults());
            } else if let Ok(t) = entry.parse::<Technology>() {
                out.push(TechnologyProfile::default_for(t));
            } else {
                out.push(TechnologyProfile::load(entry)?);
            }
        }
        if out.is_empty() {
            return Err(Error::config("profiles must not be empty"));
        }
        Ok(out)
    }
}

experiment!(BenchExperiment, "bench", |s| {
    if s.profiles.is_empty() {
        return Err(Error::config("profiles must not be empty"));
    }
    positive("cycles_per_mac", s.cycles_per_mac)
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_yields_defaults() {
        assert_eq!(
            SweepExperiment::from_json("{}").unwrap(),
            SweepExperiment::default()
        );
        assert_eq!(
            TrainExperiment::from_json("{}").unwrap(),
            TrainExperiment::default()
        );
        assert_eq!(
            BenchExperiment::from_json("{}").unwrap(),
            BenchExperiment::default()
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = SweepExperiment::from_json(r#"{"cycels": 5}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(TrainExperiment::from_json(r#"{"de": {"popsize": 5}}"#).is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let c = SweepExperiment::from_json(r#"{"k_values": [9]}"#).unwrap();
        assert!(c.validate().is_err());
        let c = AgingExperiment::from_json(r#"{"sample_every": 0}"#).unwrap();
        assert!(c.validate().is_err());
        let c = FnwCompareExperiment::from_json(r#"{"seeds": []}"#).unwrap();
        assert!(c.validate().is_err());
        let c = SweepExperiment::from_json(r#"{"schema_version": 2}"#).unwrap();
        assert!(c.validate().is_err());
        let c = TrainExperiment::from_json(r#"{"de": {"population_size": 2, "differential_weight": 0.7, "crossover_rate": 0.9, "generations": 1, "seed": 1}}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = SweepExperiment::default();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 2;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn technology_names_parse_in_configs() {
        let c =
            EnduranceExperiment::from_json(r#"{"technology": "feram", "encoder": "fnw"}"#).unwrap();
        assert_eq!(c.technology, Technology::Feram);
        assert_eq!(c.encoder, EncoderChoice::Fnw);
    }

    #[test]
    fn bench_profiles_resolve() {
        let c = BenchExperiment {
            profiles: vec!["default".into(), "mram".into()],
            ..BenchExperiment::default()
        };
        let p = c.resolve_profiles().unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(p[6].technology, Technology::ToggleMram);
    }
}
