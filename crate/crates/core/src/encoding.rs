//! Write encodings. Flip-N-Write stores either the data or its complement,
//! whichever changes fewer cells, and records the choice in the spare bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterization::{run_endurance, ErrorHistogram, DEFAULT_ENDURANCE_CYCLES};
use crate::device::{DeviceInstance, StoredWord};
use crate::error::{Error, Result};
use crate::profile::{Technology, TechnologyProfile};
use crate::stats;

/// A byte as stored under Flip-N-Write.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FnwWord {
    pub data: u8,
    pub flip_flag: bool,
}

impl From<StoredWord> for FnwWord {
    fn from(w: StoredWord) -> Self {
        FnwWord {
            data: w.data,
            flip_flag: w.spare,
        }
    }
}

impl From<FnwWord> for StoredWord {
    fn from(w: FnwWord) -> Self {
        StoredWord::new(w.data, w.flip_flag)
    }
}

/// Bits that change when `new` overwrites `stored`.
pub fn toggle_cost(stored: u8, new: u8) -> u32 {
    (stored ^ new).count_ones()
}

/// Chooses between `(new_data, 0)` and `(!new_data, 1)`, counting the flag
/// bit. Ties keep the current flag.
pub fn fnw_encode(stored: FnwWord, new_data: u8) -> FnwWord {
    let plain = toggle_cost(stored.data, new_data) + stored.flip_flag as u32;
    let inverted = toggle_cost(stored.data, !new_data) + !stored.flip_flag as u32;
    let flip = if stored.flip_flag {
        inverted <= plain
    } else {
        inverted < plain
    };
    if flip {
        FnwWord {
            data: !new_data,
            flip_flag: true,
        }
    } else {
        FnwWord {
            data: new_data,
            flip_flag: false,
        }
    }
}

pub fn fnw_decode(word: FnwWord) -> u8 {
    if word.flip_flag {
        !word.data
    } else {
        word.data
    }
}

/// A strategy that maps intended data onto stored words.
pub trait WriteEncoder: Send + Sync {
    fn name(&self) -> &'static str;
    fn encode(&self, stored: StoredWord, data: u8) -> StoredWord;
    fn decode(&self, word: StoredWord) -> u8;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FlipNWrite;

impl WriteEncoder for FlipNWrite {
    fn name(&self) -> &'static str {
        "fnw"
    }

    fn encode(&self, stored: StoredWord, data: u8) -> StoredWord {
        fnw_encode(stored.into(), data).into()
    }

    fn decode(&self, word: StoredWord) -> u8 {
        fnw_decode(word.into())
    }
}

/// `baseline / encoded`, with 1 when both are zero and infinity when only
/// the encoded count is zero.
pub fn reduction_factor(baseline: u64, encoded: u64) -> f64 {
    match (baseline, encoded) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (b, e) => b as f64 / e as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub baseline_total: u64,
    pub fnw_total: u64,
    pub baseline_2bit: u64,
    pub fnw_2bit: u64,
    pub reduction_factor_total: f64,
    pub reduction_factor_2bit: f64,
    pub baseline_toggles: u64,
    pub fnw_toggles: u64,
    pub fnw_regressions: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnwComparison {
    pub technology: Technology,
    pub cycles: u64,
    pub seeds: Vec<u64>,
    /// Summed over seeds.
    pub baseline: ErrorHistogram,
    /// Summed over seeds.
    pub fnw: ErrorHistogram,
    /// From the summed histograms.
    pub reduction_factor_total: f64,
    pub reduction_factor_2bit: f64,
    /// Geometric means of the per-seed factors.
    pub geomean_reduction_factor_total: f64,
    pub geomean_reduction_factor_2bit: f64,
    pub per_seed: Vec<SeedComparison>,
}

/// Paired endurance runs with and without Flip-N-Write. Both arms of a seed
/// share the device seed and the data stream.
pub fn compare_endurance(
    profile: &TechnologyProfile,
    cycles: u64,
    seeds: &[u64],
) -> Result<FnwComparison> {
    if seeds.is_empty() {
        return Err(Error::argument("at least one seed is required"));
    }
    let arms: Vec<(u64, bool)> = seeds
        .iter()
        .flat_map(|&s| [(s, false), (s, true)])
        .collect();
    let runs = arms
        .par_iter()
        .map(|&(seed, fnw)| {
            let mut device = DeviceInstance::new(profile.clone(), seed)?;
            let encoder: Option<&dyn WriteEncoder> = if fnw { Some(&FlipNWrite) } else { None };
            run_endurance(&mut device, cycles, encoder)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut baseline = ErrorHistogram::default();
    let mut fnw = ErrorHistogram::default();
    let mut per_seed = Vec::with_capacity(seeds.len());
    for (pair, &seed) in runs.chunks_exact(2).zip(seeds) {
        let (b, f) = (&pair[0], &pair[1]);
        baseline.merge(&b.histogram);
        fnw.merge(&f.histogram);
        per_seed.push(SeedComparison {
            seed,
            baseline_total: b.histogram.total_errors,
            fnw_total: f.histogram.total_errors,
            baseline_2bit: b.histogram.count(2),
            fnw_2bit: f.histogram.count(2),
            reduction_factor_total: reduction_factor(
                b.histogram.total_errors,
                f.histogram.total_errors,
            ),
            reduction_factor_2bit: reduction_factor(b.histogram.count(2), f.histogram.count(2)),
            baseline_toggles: b.encoded_toggles,
            fnw_toggles: f.encoded_toggles,
            fnw_regressions: f.encoder_regressions,
        });
    }
    let geo = |f: fn(&SeedComparison) -> f64| {
        stats::geometric_mean(&per_seed.iter().map(f).collect::<Vec<_>>())
    };
    Ok(FnwComparison {
        technology: profile.technology,
        cycles,
        seeds: seeds.to_vec(),
        reduction_factor_total: reduction_factor(baseline.total_errors, fnw.total_errors),
        reduction_factor_2bit: reduction_factor(baseline.count(2), fnw.count(2)),
        geomean_reduction_factor_total: geo(|s| s.reduction_factor_total),
        geomean_reduction_factor_2bit: geo(|s| s.reduction_factor_2bit),
        baseline,
        fnw,
        per_seed,
    })
}

/// Default study: CBRAM, 200k cycles, seeds 1..=10.
pub fn default_comparison_seeds() -> Vec<u64> {
    (1..=10).collect()
}

pub const DEFAULT_FNW_CYCLES: u64 = DEFAULT_ENDURANCE_CYCLES;
