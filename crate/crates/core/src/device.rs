//! Stateful behavioral model of one memory chip.
//!
//! Every byte location stores eight data bits plus one spare bit (used by
//! write encoders for a flag). Each of the nine bits has its own wear
//! counter, incremented whenever a write or erase changes the bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{CurrentModel, Logistic, Technology, TechnologyProfile, PAGE_SIZE};

/// Default capacity: 128 pages, enough for the network parameters (5391
/// bytes) and every characterization experiment.
pub const DEFAULT_CAPACITY: usize = 128 * PAGE_SIZE;

/// Bits per stored location (8 data + 1 spare).
pub const WORD_BITS: usize = 9;
const SPARE_BIT: u16 = 1 << 8;

/// Flip probabilities below this are treated as zero and not sampled.
const NEGLIGIBLE_FLIP: f64 = 1e-15;

/// Contents of one location: a data byte and its spare bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoredWord {
    pub data: u8,
    pub spare: bool,
}

impl StoredWord {
    pub fn new(data: u8, spare: bool) -> Self {
        StoredWord { data, spare }
    }

    fn bits(self) -> u16 {
        self.data as u16 | if self.spare { SPARE_BIT } else { 0 }
    }

    fn from_bits(bits: u16) -> Self {
        StoredWord {
            data: bits as u8,
            spare: bits & SPARE_BIT != 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub byte_writes: u64,
    pub byte_reads: u64,
    pub erases: u64,
    pub wvw_attempts: u64,
    pub total_latency_cycles: u64,
    pub total_current_au: f64,
    /// Part of `total_current_au` spent on erases.
    pub erase_current_au: f64,
    /// Part of `total_current_au` spent on byte programming.
    pub write_current_au: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EraseOutcome {
    pub current: f64,
    pub latency_cycles: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WriteOutcome {
    pub stored_value: u8,
    pub stored_spare: bool,
    /// Data bits that differ between the previously stored and the requested byte.
    pub bits_toggled: u32,
    pub spare_toggled: bool,
    /// Program current (excludes any automatic erase).
    pub current: f64,
    /// Program latency (excludes any automatic erase).
    pub latency_cycles: u64,
    pub wvw_attempts: u32,
    /// Data bits that differ between the requested and the stored byte.
    pub observed_error_bits: u32,
    /// Set when a Flash write needed an automatic page erase first.
    pub auto_erase: Option<EraseOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageWriteOutcome {
    /// Sum of the per-byte program currents.
    pub current: f64,
    /// Sum of the per-byte program latencies (serial interface).
    pub latency_cycles: u64,
    pub erase_current: f64,
    pub erase_latency_cycles: u64,
    pub bytes: Vec<WriteOutcome>,
}

impl PageWriteOutcome {
    pub fn mean_wvw_attempts(&self) -> f64 {
        self.bytes
            .iter()
            .map(|b| b.wvw_attempts as f64)
            .sum::<f64>()
            / self.bytes.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyDraw {
    pub latency_cycles: u64,
    pub wvw_attempts: u32,
}

/// Draws the write-verify-write attempt count for a byte whose worst bit has
/// the given wear.
pub fn latency_of_write<R: Rng + ?Sized>(
    profile: &TechnologyProfile,
    wear: &[u32],
    rng: &mut R,
) -> LatencyDraw {
    let model = &profile.latency_model;
    if !model.wvw_enabled {
        return LatencyDraw {
            latency_cycles: model.base_write_cycles,
            wvw_attempts: 1,
        };
    }
    let worst = wear.iter().copied().max().unwrap_or(0) as f64;
    let p_fail = model.wvw_retry.eval(worst);
    let mut attempts = 1;
    while attempts < model.max_attempts && rng.gen::<f64>() < p_fail {
        attempts += 1;
    }
    LatencyDraw {
        latency_cycles: model.base_write_cycles + (attempts as u64 - 1) * model.wvw_attempt_cycles,
        wvw_attempts: attempts,
    }
}

/// Expected write current of one byte (noise-free), including the mean
/// write-verify-write retry charge at the given worst bit wear.
pub fn expected_write_current(
    profile: &TechnologyProfile,
    previous: u8,
    value: u8,
    worst_wear: u32,
) -> f64 {
    let lat = &profile.latency_model;
    let base = profile.current_model.expected(previous, value);
    if !lat.wvw_enabled {
        return base;
    }
    // E[attempts - 1] for a capped geometric process
    let p = lat.wvw_retry.eval(worst_wear as f64);
    let extra: f64 = (1..lat.max_attempts as i32).map(|j| p.powi(j)).sum();
    base + extra * lat.wvw_attempt_current
}

/// Applies raw bit flips to `requested` according to the per-bit wear, then
/// single-error correction when the profile has ECC.
pub fn inject_errors<R: Rng + ?Sized>(
    profile: &TechnologyProfile,
    wear: &[u32; 8],
    requested: u8,
    rng: &mut R,
) -> u8 {
    let flip = &profile.endurance_model.raw_flip;
    let floor = flip.wear_below(NEGLIGIBLE_FLIP);
    inject_bits(
        flip,
        floor,
        profile.ecc.enabled,
        wear,
        requested as u16,
        rng,
    ) as u8
}

fn inject_bits<R: Rng + ?Sized>(
    flip: &Logistic,
    floor: f64,
    ecc: bool,
    wear: &[u32],
    requested: u16,
    rng: &mut R,
) -> u16 {
    if wear.iter().all(|&w| (w as f64) < floor) {
        return requested;
    }
    let mut flips = 0u16;
    for (bit, &w) in wear.iter().enumerate() {
        let p = flip.eval(w as f64);
        if rng.gen::<f64>() < p {
            flips |= 1 << bit;
        }
    }
    if ecc && flips.count_ones() == 1 {
        return requested;
    }
    requested ^ flips
}

/// Simulated chip with deterministic randomness and transaction accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceInstance {
    profile: TechnologyProfile,
    seed: u64,
    memory: Vec<u8>,
    spare: Vec<bool>,
    wear: Vec<[u32; WORD_BITS]>,
    rng: ChaCha8Rng,
    counters: Counters,
    flip_floor: f64,
}

impl DeviceInstance {
    pub fn new(profile: TechnologyProfile, seed: u64) -> Result<Self> {
        Self::with_capacity(profile, seed, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(profile: TechnologyProfile, seed: u64, capacity: usize) -> Result<Self> {
        profile.validate()?;
        if capacity == 0 || capacity % PAGE_SIZE != 0 {
            return Err(Error::config(format!(
                "capacity must be a positive multiple of {PAGE_SIZE}, got {capacity}"
            )));
        }
        let flip_floor = profile.endurance_model.raw_flip.wear_below(NEGLIGIBLE_FLIP);
        Ok(DeviceInstance {
            profile,
            seed,
            memory: vec![0; capacity],
            spare: vec![false; capacity],
            wear: vec![[0; WORD_BITS]; capacity],
            rng: ChaCha8Rng::seed_from_u64(seed),
            counters: Counters::default(),
            flip_floor,
        })
    }

    pub fn profile(&self) -> &TechnologyProfile {
        &self.profile
    }

    pub fn technology(&self) -> Technology {
        self.profile.technology
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn capacity(&self) -> usize {
        self.memory.len()
    }

    pub fn page_count(&self) -> usize {
        self.memory.len() / PAGE_SIZE
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Wear of the eight data bits (index 0 = LSB) followed by the spare bit.
    pub fn wear(&self, addr: usize) -> Result<&[u32; WORD_BITS]> {
        self.check_addr(addr)?;
        Ok(&self.wear[addr])
    }

    /// Current contents without touching the read counters.
    pub fn peek(&self, addr: usize) -> Result<StoredWord> {
        self.check_addr(addr)?;
        Ok(StoredWord::new(self.memory[addr], self.spare[addr]))
    }

    fn check_addr(&self, addr: usize) -> Result<()> {
        if addr >= self.memory.len() {
            return Err(Error::OutOfBounds {
                addr,
                capacity: self.memory.len(),
            });
        }
        Ok(())
    }

    fn check_page(&self, page: usize) -> Result<usize> {
        let start = page
            .checked_mul(PAGE_SIZE)
            .filter(|&s| s < self.memory.len())
            .ok_or(Error::OutOfBounds {
                addr: page.saturating_mul(PAGE_SIZE),
                capacity: self.memory.len(),
            })?;
        Ok(start)
    }

    /// Writes a data byte, leaving the spare bit as it is.
    pub fn write_byte(&mut self, addr: usize, value: u8) -> Result<WriteOutcome> {
        self.check_addr(addr)?;
        let spare = self.spare[addr];
        self.write_word_inner(addr, StoredWord::new(value, spare), None)
    }

    /// Writes a data byte together with its spare bit.
    pub fn write_word(&mut self, addr: usize, word: StoredWord) -> Result<WriteOutcome> {
        self.check_addr(addr)?;
        self.write_word_inner(addr, word, None)
    }

    /// Writes 64 bytes to `page` as sequential byte writes.
    pub fn write_page(&mut self, page: usize, data: &[u8]) -> Result<PageWriteOutcome> {
        if data.len() != PAGE_SIZE {
            return Err(Error::argument(format!(
                "page data must be {PAGE_SIZE} bytes, got {}",
                data.len()
            )));
        }
        let start = self.check_page(page)?;
        let words: Vec<StoredWord> = data
            .iter()
            .enumerate()
            .map(|(i, &d)| StoredWord::new(d, self.spare[start + i]))
            .collect();
        self.write_page_words(page, &words)
    }

    /// Writes 64 data/spare words to `page`.
    pub fn write_page_words(
        &mut self,
        page: usize,
        words: &[StoredWord],
    ) -> Result<PageWriteOutcome> {
        if words.len() != PAGE_SIZE {
            return Err(Error::argument(format!(
                "page data must be {PAGE_SIZE} words, got {}",
                words.len()
            )));
        }
        let start = self.check_page(page)?;
        let page_draw = match self.profile.current_model {
            CurrentModel::Reram { mean, spread } => Some(self.draw_uniform(mean, spread)),
            _ => None,
        };
        let mut out = PageWriteOutcome {
            current: 0.0,
            latency_cycles: 0,
            erase_current: 0.0,
            erase_latency_cycles: 0,
            bytes: Vec::with_capacity(PAGE_SIZE),
        };
        for (i, &word) in words.iter().enumerate() {
            let o = self.write_word_inner(start + i, word, page_draw)?;
            out.current += o.current;
            out.latency_cycles += o.latency_cycles;
            if let Some(e) = o.auto_erase {
                out.erase_current += e.current;
                out.erase_latency_cycles += e.latency_cycles;
            }
            out.bytes.push(o);
        }
        Ok(out)
    }

    fn draw_uniform(&mut self, mean: f64, spread: f64) -> f64 {
        if spread == 0.0 {
            mean
        } else {
            self.rng.gen_range(mean - spread..=mean + spread)
        }
    }

    fn write_word_inner(
        &mut self,
        addr: usize,
        word: StoredWord,
        page_draw: Option<f64>,
    ) -> Result<WriteOutcome> {
        let before = StoredWord::new(self.memory[addr], self.spare[addr]);

        // NOR-style programming can only clear bits; anything else needs the
        // page erased first (controller read-modify-write).
        let mut auto_erase = None;
        if self.profile.erase_model.erase_before_write && before.data & word.data != word.data {
            auto_erase = Some(self.erase(addr / PAGE_SIZE)?);
        }
        let programmed_over = StoredWord::new(self.memory[addr], self.spare[addr]);

        let toggled = programmed_over.bits() ^ word.bits();
        let wear = &mut self.wear[addr];
        for (bit, w) in wear.iter_mut().enumerate() {
            if toggled & (1 << bit) != 0 {
                *w += 1;
            }
        }
        let wear = self.wear[addr];

        let mut current = match self.profile.current_model {
            CurrentModel::Reram { mean, spread } => match page_draw {
                Some(c) => c,
                None => self.draw_uniform(mean, spread),
            },
            ref model => {
                let expected = model.expected(programmed_over.data, word.data);
                let sigma = match *model {
                    CurrentModel::Mram { noise_sigma, .. }
                    | CurrentModel::Cbram { noise_sigma, .. }
                    | CurrentModel::Feram { noise_sigma, .. } => noise_sigma,
                    _ => 0.0,
                };
                if sigma > 0.0 {
                    let z: f64 = self.rng.sample(StandardNormal);
                    (expected + sigma * z).max(0.0)
                } else {
                    expected
                }
            }
        };

        let lat = latency_of_write(&self.profile, &wear, &mut self.rng);
        current += (lat.wvw_attempts - 1) as f64 * self.profile.latency_model.wvw_attempt_current;

        let stored_bits = inject_bits(
            &self.profile.endurance_model.raw_flip,
            self.flip_floor,
            self.profile.ecc.enabled,
            &wear,
            word.bits(),
            &mut self.rng,
        );
        let stored = StoredWord::from_bits(stored_bits);
        self.memory[addr] = stored.data;
        self.spare[addr] = stored.spare;

        let c = &mut self.counters;
        c.byte_writes += 1;
        c.wvw_attempts += lat.wvw_attempts as u64;
        c.total_latency_cycles += lat.latency_cycles;
        c.total_current_au += current;
        c.write_current_au += current;

        Ok(WriteOutcome {
            stored_value: stored.data,
            stored_spare: stored.spare,
            bits_toggled: (before.data ^ word.data).count_ones(),
            spare_toggled: before.spare != word.spare,
            current,
            latency_cycles: lat.latency_cycles,
            wvw_attempts: lat.wvw_attempts,
            observed_error_bits: (word.data ^ stored.data).count_ones(),
            auto_erase,
        })
    }

    pub fn read_byte(&mut self, addr: usize) -> Result<u8> {
        Ok(self.read_word(addr)?.data)
    }

    pub fn read_word(&mut self, addr: usize) -> Result<StoredWord> {
        self.check_addr(addr)?;
        let lat = &self.profile.latency_model;
        self.counters.byte_reads += 1;
        self.counters.total_latency_cycles += lat.read_cycles;
        self.counters.total_current_au += lat.read_current;
        Ok(StoredWord::new(self.memory[addr], self.spare[addr]))
    }

    /// Erases `page` to all ones. A zero-cost no-op on technologies without
    /// erase-before-write.
    pub fn erase(&mut self, page: usize) -> Result<EraseOutcome> {
        let start = self.check_page(page)?;
        let model = &self.profile.erase_model;
        if !model.erase_before_write {
            return Ok(EraseOutcome::default());
        }
        let outcome = EraseOutcome {
            current: model.erase_current,
            latency_cycles: model.erase_latency_cycles,
        };
        for addr in start..start + PAGE_SIZE {
            let rising = !self.memory[addr];
            for (bit, w) in self.wear[addr].iter_mut().take(8).enumerate() {
                if rising & (1 << bit) != 0 {
                    *w += 1;
                }
            }
            self.memory[addr] = 0xFF;
        }
        let c = &mut self.counters;
        c.erases += 1;
        c.total_latency_cycles += outcome.latency_cycles;
        c.total_current_au += outcome.current;
        c.erase_current_au += outcome.current;
        Ok(outcome)
    }
}

/// Fresh device with all-zero memory and wear.
pub fn create_device(profile: TechnologyProfile, seed: u64) -> Result<DeviceInstance> {
    DeviceInstance::new(profile, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Logistic;

    fn device(t: Technology, seed: u64) -> DeviceInstance {
        create_device(TechnologyProfile::default_for(t), seed).unwrap()
    }

    #[test]
    fn fresh_device_is_zeroed() {
        let mut d = device(Technology::Cbram, 1);
        for addr in 0..d.capacity() {
            assert_eq!(d.wear(addr).unwrap(), &[0; WORD_BITS]);
        }
        assert_eq!(d.read_byte(17).unwrap(), 0x00);
        assert_eq!(d.counters().byte_writes, 0);
    }

    #[test]
    fn identical_seed_gives_identical_instances() {
        assert_eq!(device(Technology::Cbram, 1), device(Technology::Cbram, 1));
        assert_ne!(device(Technology::Cbram, 1), device(Technology::Cbram, 2));
    }

    #[test]
    fn invalid_profile_is_a_configuration_error() {
        let mut p = TechnologyProfile::default_for(Technology::Cbram);
        p.clock_hz = 0.0;
        assert!(matches!(create_device(p, 1), Err(Error::Config(_))));
    }

    #[test]
    fn out_of_range_access_is_a_bounds_error() {
        let mut d = device(Technology::Feram, 1);
        let cap = d.capacity();
        assert!(matches!(
            d.write_byte(cap, 1),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(d.read_byte(cap), Err(Error::OutOfBounds { .. })));
        assert!(matches!(
            d.erase(d.page_count()),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            d.write_page(d.page_count(), &[0; PAGE_SIZE]),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn feram_write_costs_constant_current_and_base_latency() {
        let mut d = device(Technology::Feram, 3);
        let o = d.write_byte(0, 0xFF).unwrap();
        assert_eq!(o.bits_toggled, 8);
        assert!((o.current - 0.02).abs() < 5.0 * 0.0002);
        assert_eq!(o.latency_cycles, 769);
        assert_eq!(o.observed_error_bits, 0);
        assert_eq!(o.wvw_attempts, 1);
    }

    #[test]
    fn rewriting_the_stored_value_toggles_nothing_and_adds_no_wear() {
        let mut d = device(Technology::Cbram, 5);
        d.write_byte(9, 0x5A).unwrap();
        let wear = *d.wear(9).unwrap();
        let o = d.write_byte(9, 0x5A).unwrap();
        assert_eq!(o.bits_toggled, 0);
        assert_eq!(d.wear(9).unwrap(), &wear);
    }

    #[test]
    fn wear_accrues_only_on_toggled_bits() {
        let mut d = device(Technology::Cbram, 5);
        d.write_byte(0, 0b1010_0001).unwrap();
        assert_eq!(&d.wear(0).unwrap()[..8], &[1, 0, 0, 0, 0, 1, 0, 1]);
        d.write_byte(0, 0b0010_0011).unwrap();
        assert_eq!(&d.wear(0).unwrap()[..8], &[1, 1, 0, 0, 0, 1, 0, 2]);
        assert_eq!(d.wear(0).unwrap()[8], 0);
    }

    #[test]
    fn read_after_write_and_reads_do_not_wear() {
        let mut d = device(Technology::ToggleMram, 1);
        d.write_byte(100, 0xA5).unwrap();
        let wear = *d.wear(100).unwrap();
        assert_eq!(d.read_byte(100).unwrap(), 0xA5);
        assert_eq!(d.wear(100).unwrap(), &wear);
        assert_eq!(d.counters().byte_reads, 1);
        assert_eq!(d.counters().total_latency_cycles, 2 + 1);
    }

    #[test]
    fn page_write_rejects_wrong_length() {
        let mut d = device(Technology::Cbram, 1);
        assert!(matches!(d.write_page(0, &[0; 63]), Err(Error::Argument(_))));
    }

    #[test]
    fn unchanged_page_costs_base_current() {
        let mut d = device(Technology::Cbram, 1);
        let o = d.write_page(0, &[0; PAGE_SIZE]).unwrap();
        // 64 * base, within 6 sigma of the summed noise
        assert!(
            (o.current - 64.0 * 0.027).abs() < 6.0 * 8.0 * 0.0003,
            "{}",
            o.current
        );
        assert!(o.bytes.iter().all(|b| b.bits_toggled == 0));
    }

    #[test]
    fn cbram_two_bit_page_current_matches_analytic_expectation() {
        let profile = TechnologyProfile::default_for(Technology::Cbram);
        let expected = 64.0 * expected_write_current(&profile, 0, 0b11, 1);
        assert!((expected / 64.0 - (0.027 + 2.0 * 0.00075)).abs() < 1e-4);
        let n = 400;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let mut d = create_device(profile.clone(), seed).unwrap();
            let c = d.write_page(0, &[0b11; PAGE_SIZE]).unwrap().current;
            sum += c;
            sum_sq += c * c;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).max(0.0).sqrt();
        assert!((mean - expected).abs() < 3.0 * sd / (n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn mram_one_bit_from_ones_costs_more_than_from_zeros() {
        let profile = TechnologyProfile::default_for(Technology::ToggleMram);
        let mut ones = create_device(profile.clone(), 1).unwrap();
        ones.write_page(0, &[0xFF; PAGE_SIZE]).unwrap();
        let from_ones = ones.write_page(0, &[0xFE; PAGE_SIZE]).unwrap().current;
        let mut zeros = create_device(profile, 1).unwrap();
        let from_zeros = zeros.write_page(0, &[0x01; PAGE_SIZE]).unwrap().current;
        assert!(from_ones > from_zeros);
    }

    #[test]
    fn reram_page_draw_is_shared_by_all_bytes() {
        let mut d = device(Technology::Reram, 2);
        let o = d.write_page(1, &[0x33; PAGE_SIZE]).unwrap();
        let first = o.bytes[0].current;
        assert!(o.bytes.iter().all(|b| b.current == first));
        assert!((0.03..=0.05).contains(&first));
    }

    #[test]
    fn flash_erase_sets_ones_and_costs_current() {
        let mut d = device(Technology::Flash, 7);
        let e = d.erase(0).unwrap();
        assert_eq!(e.current, 1.0);
        assert_eq!(e.latency_cycles, 631_706);
        assert!((0..PAGE_SIZE).all(|a| d.peek(a).unwrap().data == 0xFF));
        let wear = *d.wear(0).unwrap();
        d.erase(0).unwrap();
        assert!((0..PAGE_SIZE).all(|a| d.peek(a).unwrap().data == 0xFF));
        assert_eq!(d.wear(0).unwrap(), &wear);
        assert_eq!(d.counters().erases, 2);
    }

    #[test]
    fn flash_auto_erases_before_setting_bits() {
        let mut d = device(Technology::Flash, 7);
        // fresh memory is all zeros: setting any bit needs an erase
        let o = d.write_byte(3, 0x0F).unwrap();
        assert!(o.auto_erase.is_some());
        assert_eq!(o.bits_toggled, 4);
        assert_eq!(d.peek(3).unwrap().data, 0x0F);
        // clearing bits does not
        let o = d.write_byte(3, 0x05).unwrap();
        assert!(o.auto_erase.is_none());
        assert_eq!(d.counters().erases, 1);
    }

    #[test]
    fn non_flash_erase_is_free_noop() {
        let mut d = device(Technology::ToggleMram, 1);
        d.write_byte(0, 0x42).unwrap();
        let before = d.clone();
        assert_eq!(d.erase(0).unwrap(), EraseOutcome::default());
        assert_eq!(d, before);
    }

    #[test]
    fn latency_is_base_without_wvw() {
        let p = TechnologyProfile::default_for(Technology::Reram);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let l = latency_of_write(&p, &[u32::MAX / 2; 9], &mut rng);
            assert_eq!(l.wvw_attempts, 1);
            assert_eq!(l.latency_cycles, 38_462);
        }
    }

    #[test]
    fn fresh_cbram_write_rarely_retries() {
        let p = TechnologyProfile::default_for(Technology::Cbram);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 10_000;
        let retries = (0..n)
            .filter(|_| latency_of_write(&p, &[0; 9], &mut rng).wvw_attempts > 1)
            .count();
        let p0 = p.latency_model.wvw_retry.eval(0.0);
        assert!(p0 < 0.01);
        assert!((retries as f64) < n as f64 * p0 * 2.0 + 10.0);
    }

    #[test]
    fn wvw_latency_grows_with_wear() {
        let p = TechnologyProfile::default_for(Technology::Cbram);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mean = |wear: u32, rng: &mut ChaCha8Rng| {
            (0..10_000)
                .map(|_| latency_of_write(&p, &[wear; 9], rng).latency_cycles as f64)
                .sum::<f64>()
                / 10_000.0
        };
        let young = mean(10_000, &mut rng);
        let old = mean(150_000, &mut rng);
        assert!(old > young, "{old} <= {young}");
        let max = p.latency_model.base_write_cycles
            + (p.latency_model.max_attempts as u64 - 1) * p.latency_model.wvw_attempt_cycles;
        assert!(old <= max as f64);
    }

    #[test]
    fn pristine_bits_never_flip() {
        let p = TechnologyProfile::default_for(Technology::Cbram);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for v in 0..=255u8 {
            assert_eq!(inject_errors(&p, &[0; 8], v, &mut rng), v);
        }
    }

    #[test]
    fn ecc_masks_single_flips() {
        // One bit with certain failure, the rest pristine.
        let mut p = TechnologyProfile::default_for(Technology::Cbram);
        p.endurance_model.raw_flip = Logistic {
            p_max: 1.0,
            steepness: 1.0,
            midpoint_wear: 50.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let wear = [1000, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(inject_errors(&p, &wear, 0xAA, &mut rng), 0xAA);
        p.ecc.enabled = false;
        assert_eq!(inject_errors(&p, &wear, 0xAA, &mut rng), 0xAB);
        // Two certain flips pass through even with ECC.
        p.ecc.enabled = true;
        let wear = [1000, 1000, 0, 0, 0, 0, 0, 0];
        assert_eq!(inject_errors(&p, &wear, 0x00, &mut rng), 0x03);
    }

    #[test]
    fn worn_cbram_shows_multi_bit_but_no_single_bit_errors() {
        let mut p = TechnologyProfile::default_for(Technology::Cbram);
        p.endurance_model.rated_cycles = 100;
        p.endurance_model.raw_flip = Logistic {
            p_max: 0.02,
            steepness: 0.1,
            midpoint_wear: 300.0,
        };
        let mut d = create_device(p, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hist = [0u64; 9];
        for _ in 0..20_000 {
            let v: u8 = rng.gen();
            let o = d.write_byte(0, v).unwrap();
            hist[o.observed_error_bits as usize] += 1;
        }
        assert_eq!(hist[1], 0);
        assert!(hist[2..].iter().sum::<u64>() > 0);
    }

    #[test]
    fn spare_bit_is_preserved_by_plain_byte_writes() {
        let mut d = device(Technology::Cbram, 1);
        d.write_word(4, StoredWord::new(0x10, true)).unwrap();
        d.write_byte(4, 0x11).unwrap();
        assert_eq!(d.peek(4).unwrap(), StoredWord::new(0x11, true));
        assert_eq!(d.wear(4).unwrap()[8], 1);
    }
}
