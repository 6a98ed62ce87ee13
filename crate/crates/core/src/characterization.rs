//! The three bench experiments: toggle-pattern current sweep, aging trace,
//! and endurance error classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceInstance, StoredWord};
use crate::encoding::WriteEncoder;
use crate::error::{Error, Result};
use crate::profile::{Technology, TechnologyProfile, PAGE_SIZE};
use crate::stats::{self, Group, LinearFit, Running};

pub const DEFAULT_SWEEP_CYCLES: u32 = 500;
pub const DEFAULT_AGING_CYCLES: u64 = 200_000;
pub const DEFAULT_ENDURANCE_CYCLES: u64 = 200_000;

/// Page targeted by the aging and endurance experiments.
pub const TARGET_PAGE: usize = 0;

/// SplitMix64 finalizer; derives independent stream seeds from one user seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const AGING_DATA_STREAM: u64 = 0xA61;
const ENDURANCE_DATA_STREAM: u64 = 0xE4D;

/// Number of bits that differ between the intended and the observed byte.
pub fn classify_error(expected: u8, actual: u8) -> u32 {
    (expected ^ actual).count_ones()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    AllZeros,
    AllOnes,
}

impl InitialState {
    pub const BOTH: [InitialState; 2] = [InitialState::AllZeros, InitialState::AllOnes];

    pub fn byte(self) -> u8 {
        match self {
            InitialState::AllZeros => 0x00,
            InitialState::AllOnes => 0xFF,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_values: Vec<u8>,
    pub cycles: u32,
    /// Bit positions in toggle order: `k` toggles the first `k` entries.
    pub toggle_order: [u8; 8],
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_values: (1..=8).collect(),
            cycles: DEFAULT_SWEEP_CYCLES,
            toggle_order: [0, 1, 2, 3, 4, 5, 6, 7],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(&k) = self.k_values.iter().find(|&&k| !(1..=8).contains(&k)) {
            return Err(Error::argument(format!(
                "bits toggled must lie in 1..=8, got {k}"
            )));
        }
        if self.k_values.is_empty() {
            return Err(Error::argument("at least one toggle count is required"));
        }
        if self.cycles == 0 {
            return Err(Error::argument("sweep cycles must be >= 1"));
        }
        let mut seen = [false; 8];
        for &b in &self.toggle_order {
            if b > 7 || std::mem::replace(&mut seen[b as usize], true) {
                return Err(Error::argument(
                    "toggle_order must be a permutation of 0..8",
                ));
            }
        }
        Ok(())
    }

    pub fn toggle_mask(&self, k: u8) -> u8 {
        self.toggle_order[..k as usize]
            .iter()
            .fold(0u8, |m, &b| m | (1 << b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub bits_toggled: u8,
    pub initial_state: InitialState,
    pub written_byte: u8,
    pub mean_page_current: f64,
    pub std_page_current: f64,
    pub mean_page_latency_cycles: f64,
    pub trials: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSweepResult {
    pub technology: Technology,
    pub cells: Vec<SweepCell>,
}

impl PatternSweepResult {
    pub fn cell(&self, k: u8, initial: InitialState) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.bits_toggled == k && c.initial_state == initial)
    }

    pub fn cells_for(&self, initial: InitialState) -> impl Iterator<Item = &SweepCell> {
        self.cells
            .iter()
            .filter(move |c| c.initial_state == initial)
    }

    /// Regression of page current on bits toggled over every trial of one
    /// initial state.
    pub fn fit(&self, initial: InitialState) -> Option<LinearFit> {
        let groups: Vec<Group> = self
            .cells_for(initial)
            .map(|c| Group {
                x: c.bits_toggled as f64,
                n: c.trials as u64,
                mean: c.mean_page_current,
                std: c.std_page_current,
            })
            .collect();
        stats::linear_fit_grouped(&groups)
    }

    /// Regression of the per-k mean currents (one point per k).
    pub fn fit_of_means(&self, initial: InitialState) -> Option<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .cells_for(initial)
            .map(|c| (c.bits_toggled as f64, c.mean_page_current))
            .unzip();
        stats::linear_fit(&xs, &ys)
    }
}

/// Measures mean page current for every (bits toggled, initial state) cell.
///
/// Each cell gets its own device from `factory`, so wear from one cell never
/// leaks into another. A cycle resets the page to the initial pattern
/// (unmeasured) and then writes the pattern with `k` bits flipped in every
/// byte (measured).
pub fn run_pattern_sweep<F>(factory: F, config: &SweepConfig) -> Result<PatternSweepResult>
where
    F: Fn(u8, InitialState) -> Result<DeviceInstance> + Sync,
{
    config.validate()?;
    let jobs: Vec<(u8, InitialState)> = InitialState::BOTH
        .iter()
        .flat_map(|&s| config.k_values.iter().map(move |&k| (k, s)))
        .collect();
    let results: Vec<Result<(Technology, SweepCell)>> = jobs
        .par_iter()
        .map(|&(k, initial)| {
            let mut device = factory(k, initial)?;
            let base = [initial.byte(); PAGE_SIZE];
            let written = initial.byte() ^ config.toggle_mask(k);
            let pattern = [written; PAGE_SIZE];
            let mut current = Running::default();
            let mut latency = Running::default();
            for _ in 0..config.cycles {
                device.write_page(TARGET_PAGE, &base)?;
                let o = device.write_page(TARGET_PAGE, &pattern)?;
                current.push(o.current);
                latency.push(o.latency_cycles as f64);
            }
            Ok((
                device.technology(),
                SweepCell {
                    bits_toggled: k,
                    initial_state: initial,
                    written_byte: written,
                    mean_page_current: current.mean(),
                    std_page_current: current.std(),
                    mean_page_latency_cycles: latency.mean(),
                    trials: config.cycles,
                },
            ))
        })
        .collect();
    let mut technology = None;
    let mut cells = Vec::with_capacity(results.len());
    for r in results {
        let (t, cell) = r?;
        technology = Some(t);
        cells.push(cell);
    }
    Ok(PatternSweepResult {
        technology: technology.expect("at least one cell"),
        cells,
    })
}

/// Sweep with one fresh device per cell, seeded from `seed`.
pub fn sweep_profile(
    profile: &TechnologyProfile,
    seed: u64,
    config: &SweepConfig,
) -> Result<PatternSweepResult> {
    run_pattern_sweep(
        |k, initial| {
            let stream = ((initial == InitialState::AllOnes) as u64) << 8 | k as u64;
            DeviceInstance::new(profile.clone(), derive_seed(seed, stream))
        },
        config,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgingSample {
    pub cycle_index: u64,
    pub page_current: f64,
    pub page_latency_cycles: u64,
    pub mean_wvw_attempts: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgingTrace {
    pub technology: Technology,
    pub cycles: u64,
    pub sample_every: u64,
    pub samples: Vec<AgingSample>,
}

impl AgingTrace {
    fn decile<'a>(&'a self, last: bool) -> &'a [AgingSample] {
        let n = (self.samples.len() / 10).max(1);
        if last {
            &self.samples[self.samples.len() - n..]
        } else {
            &self.samples[..n]
        }
    }

    /// (first-decile, last-decile) mean page latency in cycles.
    pub fn latency_deciles(&self) -> (f64, f64) {
        let m = |s: &[AgingSample]| {
            stats::mean(
                &s.iter()
                    .map(|x| x.page_latency_cycles as f64)
                    .collect::<Vec<_>>(),
            )
        };
        (m(self.decile(false)), m(self.decile(true)))
    }

    /// (first-decile, last-decile) mean page current.
    pub fn current_deciles(&self) -> (f64, f64) {
        let m =
            |s: &[AgingSample]| stats::mean(&s.iter().map(|x| x.page_current).collect::<Vec<_>>());
        (m(self.decile(false)), m(self.decile(true)))
    }

    pub fn current_fit(&self) -> Option<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .samples
            .iter()
            .map(|s| (s.cycle_index as f64, s.page_current))
            .unzip();
        stats::linear_fit(&xs, &ys)
    }

    pub fn latency_fit(&self) -> Option<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .samples
            .iter()
            .map(|s| (s.cycle_index as f64, s.page_latency_cycles as f64))
            .unzip();
        stats::linear_fit(&xs, &ys)
    }
}

/// Writes a uniformly random page every cycle and samples the write every
/// `sample_every` cycles (starting with cycle 0).
pub fn run_aging(
    device: &mut DeviceInstance,
    cycles: u64,
    sample_every: u64,
) -> Result<AgingTrace> {
    if cycles == 0 {
        return Err(Error::argument("aging cycles must be >= 1"));
    }
    if sample_every == 0 {
        return Err(Error::argument("sample_every must be >= 1"));
    }
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(device.seed(), AGING_DATA_STREAM));
    let mut page = [0u8; PAGE_SIZE];
    let mut samples = Vec::with_capacity((cycles / sample_every + 1) as usize);
    for cycle in 0..cycles {
        data_rng.fill(&mut page[..]);
        let o = device.write_page(TARGET_PAGE, &page)?;
        if cycle % sample_every == 0 {
            samples.push(AgingSample {
                cycle_index: cycle,
                page_current: o.current,
                page_latency_cycles: o.latency_cycles,
                mean_wvw_attempts: o.mean_wvw_attempts(),
            });
        }
    }
    Ok(AgingTrace {
        technology: device.technology(),
        cycles,
        sample_every,
        samples,
    })
}

/// Counts of k-bit errors (k = 1..=8) per byte address of the target page.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    /// `per_address[addr][k - 1]`
    pub per_address: Vec<[u64; 8]>,
    /// `page[k - 1]`, summed over addresses.
    pub page: [u64; 8],
    pub total_errors: u64,
}

impl Default for ErrorHistogram {
    fn default() -> Self {
        ErrorHistogram {
            per_address: vec![[0; 8]; PAGE_SIZE],
            page: [0; 8],
            total_errors: 0,
        }
    }
}

impl ErrorHistogram {
    pub fn record(&mut self, addr: usize, bits: u32) {
        if bits == 0 {
            return;
        }
        let k = bits as usize - 1;
        self.per_address[addr][k] += 1;
        self.page[k] += 1;
        self.total_errors += 1;
    }

    /// Page-level count of `k`-bit errors.
    pub fn count(&self, k: usize) -> u64 {
        assert!((1..=8).contains(&k), "k-bit error class must lie in 1..=8");
        self.page[k - 1]
    }

    pub fn merge(&mut self, other: &ErrorHistogram) {
        for (mine, theirs) in self.per_address.iter_mut().zip(&other.per_address) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        for (a, b) in self.page.iter_mut().zip(&other.page) {
            *a += b;
        }
        self.total_errors += other.total_errors;
    }

    /// Checks the histogram's internal sums.
    pub fn is_consistent(&self) -> bool {
        let by_addr: u64 = self.per_address.iter().flatten().sum();
        let by_page: u64 = self.page.iter().sum();
        by_addr == self.total_errors && by_page == self.total_errors
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnduranceRun {
    pub technology: Technology,
    pub cycles: u64,
    pub encoder: Option<String>,
    pub histogram: ErrorHistogram,
    /// Bits (data + spare) changed by the writes actually issued.
    pub encoded_toggles: u64,
    /// Bits a plain write of the data (spare cleared) would have changed.
    pub direct_toggles: u64,
    /// Writes where the encoder changed more bits than a plain write.
    pub encoder_regressions: u64,
}

/// Writes random data to the target page `cycles` times, reading every byte
/// back and classifying errors against the intended data.
pub fn run_endurance(
    device: &mut DeviceInstance,
    cycles: u64,
    encoder: Option<&dyn WriteEncoder>,
) -> Result<EnduranceRun> {
    if cycles == 0 {
        return Err(Error::argument("endurance cycles must be >= 1"));
    }
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(device.seed(), ENDURANCE_DATA_STREAM));
    let base = TARGET_PAGE * PAGE_SIZE;
    let mut data = [0u8; PAGE_SIZE];
    let mut run = EnduranceRun {
        technology: device.technology(),
        cycles,
        encoder: encoder.map(|e| e.name().to_string()),
        histogram: ErrorHistogram::default(),
        encoded_toggles: 0,
        direct_toggles: 0,
        encoder_regressions: 0,
    };
    for _ in 0..cycles {
        data_rng.fill(&mut data[..]);
        for (offset, &intended) in data.iter().enumerate() {
            let addr = base + offset;
            let stored = device.peek(addr)?;
            let word = match encoder {
                Some(e) => e.encode(stored, intended),
                None => StoredWord::new(intended, stored.spare),
            };
            let direct = classify_error(stored.data, intended) + stored.spare as u32;
            let issued =
                classify_error(stored.data, word.data) + (stored.spare != word.spare) as u32;
            run.direct_toggles += direct as u64;
            run.encoded_toggles += issued as u64;
            if issued > direct {
                run.encoder_regressions += 1;
            }
            device.write_word(addr, word)?;
            let read = device.read_word(addr)?;
            let observed = match encoder {
                Some(e) => e.decode(read),
                None => read.data,
            };
            run.histogram
                .record(offset, classify_error(intended, observed));
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_distance(a: u8, b: u8) -> u32 {
        let mut n = 0;
        for bit in 0..8 {
            if (a >> bit) & 1 != (b >> bit) & 1 {
                n += 1;
            }
        }
        n
    }

    #[test]
    fn classify_error_examples() {
        assert_eq!(classify_error(0xFF, 0xFF), 0);
        assert_eq!(classify_error(0b0000_0111, 0b0000_0000), 3);
    }

    #[test]
    fn classify_error_matches_bit_loop_for_all_pairs() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(classify_error(a, b), naive_distance(a, b));
            }
        }
    }

    #[test]
    fn classify_error_is_a_metric() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(classify_error(a, b), classify_error(b, a));
                assert_eq!(classify_error(a, b) == 0, a == b);
            }
        }
        // triangle inequality over a strided subset of triples
        for a in (0..=255u8).step_by(3) {
            for b in (0..=255u8).step_by(5) {
                for c in (0..=255u8).step_by(7) {
                    assert!(classify_error(a, c) <= classify_error(a, b) + classify_error(b, c));
                }
            }
        }
    }

    #[test]
    fn sweep_rejects_bad_k() {
        let cfg = SweepConfig {
            k_values: vec![0, 1],
            ..SweepConfig::default()
        };
        let p = TechnologyProfile::default_for(Technology::Feram);
        assert!(matches!(
            sweep_profile(&p, 1, &cfg),
            Err(Error::Argument(_))
        ));
        let cfg = SweepConfig {
            k_values: vec![9],
            ..SweepConfig::default()
        };
        assert!(sweep_profile(&p, 1, &cfg).is_err());
    }

    #[test]
    fn full_toggle_from_zeros_writes_ff() {
        let cfg = SweepConfig {
            cycles: 3,
            ..SweepConfig::default()
        };
        let p = TechnologyProfile::default_for(Technology::Cbram);
        let r = sweep_profile(&p, 1, &cfg).unwrap();
        assert_eq!(
            r.cell(8, InitialState::AllZeros).unwrap().written_byte,
            0xFF
        );
        assert_eq!(r.cell(8, InitialState::AllOnes).unwrap().written_byte, 0x00);
        assert_eq!(
            r.cell(3, InitialState::AllZeros).unwrap().written_byte,
            0b111
        );
        assert_eq!(r.cells.len(), 16);
        assert!(r
            .cells
            .iter()
            .all(|c| c.trials == 3 && c.std_page_current >= 0.0));
    }

    #[test]
    fn custom_toggle_order() {
        let cfg = SweepConfig {
            toggle_order: [7, 6, 5, 4, 3, 2, 1, 0],
            ..SweepConfig::default()
        };
        assert_eq!(cfg.toggle_mask(2), 0b1100_0000);
        let bad = SweepConfig {
            toggle_order: [0, 0, 1, 2, 3, 4, 5, 6],
            ..SweepConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig {
            cycles: 20,
            ..SweepConfig::default()
        };
        let p = TechnologyProfile::default_for(Technology::ToggleMram);
        assert_eq!(
            sweep_profile(&p, 4, &cfg).unwrap(),
            sweep_profile(&p, 4, &cfg).unwrap()
        );
    }

    #[test]
    fn aging_single_cycle_has_one_sample() {
        let mut d =
            DeviceInstance::new(TechnologyProfile::default_for(Technology::Cbram), 1).unwrap();
        let t = run_aging(&mut d, 1, 100).unwrap();
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.samples[0].cycle_index, 0);
        assert!(run_aging(&mut d, 0, 1).is_err());
        assert!(run_aging(&mut d, 1, 0).is_err());
    }

    #[test]
    fn aging_samples_are_strictly_increasing() {
        let mut d =
            DeviceInstance::new(TechnologyProfile::default_for(Technology::Feram), 1).unwrap();
        let t = run_aging(&mut d, 1000, 7).unwrap();
        assert!(t
            .samples
            .windows(2)
            .all(|w| w[0].cycle_index < w[1].cycle_index));
        assert_eq!(t.samples.len(), 143);
    }

    #[test]
    fn histogram_bookkeeping() {
        let mut h = ErrorHistogram::default();
        h.record(3, 2);
        h.record(3, 0);
        h.record(63, 7);
        assert_eq!(h.count(2), 1);
        assert_eq!(h.count(7), 1);
        assert_eq!(h.total_errors, 2);
        assert!(h.is_consistent());
        let mut g = h.clone();
        g.merge(&h);
        assert_eq!(g.total_errors, 4);
        assert_eq!(g.per_address[3][1], 2);
        assert!(g.is_consistent());
    }

    #[test]
    fn endurance_rejects_zero_cycles() {
        let mut d =
            DeviceInstance::new(TechnologyProfile::default_for(Technology::Cbram), 1).unwrap();
        assert!(run_endurance(&mut d, 0, None).is_err());
    }

    #[test]
    fn early_endurance_is_error_free_and_deterministic() {
        let p = TechnologyProfile::default_for(Technology::Cbram);
        let run = |seed| {
            let mut d = DeviceInstance::new(p.clone(), seed).unwrap();
            run_endurance(&mut d, 5_000, None).unwrap()
        };
        let a = run(3);
        assert_eq!(a.histogram.total_errors, 0);
        assert_eq!(a, run(3));
        assert_eq!(a.encoder_regressions, 0);
    }
}
