//! Cross-technology comparison of the network application: parameter upload
//! latency, inference latency, erase current and byte-write current, each
//! normalized to its column maximum.

use serde::{Deserialize, Serialize};

use crate::device::DeviceInstance;
use crate::error::{Error, Result};
use crate::nn::{ImageInput, NNParameters, NnEngine};
use crate::profile::{Technology, TechnologyProfile};

/// Raw per-technology measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub technology: Technology,
    /// Erase (if any) plus program latency of the parameter upload.
    pub weights_write_cycles: u64,
    /// Parameter read-in plus compute.
    pub nn_application_cycles: u64,
    pub weights_write_seconds: f64,
    pub nn_application_seconds: f64,
    /// Mean current per erase operation, 0 when nothing was erased.
    pub average_erase_current_au: f64,
    pub average_byte_write_current_au: f64,
    pub byte_writes: u64,
    pub byte_reads: u64,
    pub erases: u64,
    pub prediction: u8,
    pub volatile: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub weights_write: f64,
    pub nn_application: f64,
    pub average_erase_current: f64,
    pub average_byte_write_current: f64,
}

impl NormalizedRow {
    pub fn columns(&self) -> [f64; 4] {
        [
            self.weights_write,
            self.nn_application,
            self.average_erase_current,
            self.average_byte_write_current,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub raw: Measurement,
    pub normalized: NormalizedRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub notes: Vec<String>,
}

pub const COLUMN_NAMES: [&str; 4] = [
    "weights_write",
    "nn_application",
    "average_erase_current",
    "average_byte_write_current",
];

pub fn measure(
    profile: &TechnologyProfile,
    params: &NNParameters,
    image: &ImageInput,
    seed: u64,
    cycles_per_mac: u64,
) -> Result<Measurement> {
    let device = DeviceInstance::new(profile.clone(), seed)?;
    let mut engine = NnEngine::new(device).with_cycles_per_mac(cycles_per_mac);
    let store = engine.store_parameters(params)?;
    let report = engine.infer(image)?;
    let nn_cycles = report.weight_load.latency_cycles + report.compute.latency_cycles;
    let average = |sum: f64, n: u64| if n == 0 { 0.0 } else { sum / n as f64 };
    Ok(Measurement {
        technology: profile.technology,
        weights_write_cycles: store.latency_cycles,
        nn_application_cycles: nn_cycles,
        weights_write_seconds: profile.cycles_to_seconds(store.latency_cycles),
        nn_application_seconds: profile.cycles_to_seconds(nn_cycles),
        average_erase_current_au: average(store.erase_current_au, store.erases),
        average_byte_write_current_au: average(store.write_current_au, store.byte_writes),
        byte_writes: store.byte_writes,
        byte_reads: report.weight_load.byte_reads,
        erases: store.erases,
        prediction: report.prediction,
        volatile: profile.technology == Technology::Sram,
    })
}

/// Divides each column by its maximum. A column whose maximum is zero
/// stays zero.
pub fn normalize(measurements: &[Measurement]) -> Vec<NormalizedRow> {
    let raw: Vec<[f64; 4]> = measurements
        .iter()
        .map(|m| {
            [
                m.weights_write_seconds,
                m.nn_application_seconds,
                m.average_erase_current_au,
                m.average_byte_write_current_au,
            ]
        })
        .collect();
    let mut max = [0.0f64; 4];
    for r in &raw {
        for c in 0..4 {
            max[c] = max[c].max(r[c]);
        }
    }
    let scale = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };
    raw.iter()
        .map(|r| NormalizedRow {
            weights_write: scale(r[0], max[0]),
            nn_application: scale(r[1], max[1]),
            average_erase_current: scale(r[2], max[2]),
            average_byte_write_current: scale(r[3], max[3]),
        })
        .collect()
}

pub fn benchmark_technologies(
    profiles: &[TechnologyProfile],
    params: &NNParameters,
    image: &ImageInput,
    seed: u64,
    cycles_per_mac: u64,
) -> Result<BenchmarkTable> {
    if profiles.is_empty() {
        return Err(Error::argument("at least one profile is required"));
    }
    let measurements = profiles
        .iter()
        .map(|p| measure(p, params, image, seed, cycles_per_mac))
        .collect::<Result<Vec<_>>>()?;
    let normalized = normalize(&measurements);
    let mut notes = Vec::new();
    if measurements.iter().any(|m| m.volatile) {
        notes.push(
            "SRAM is volatile: parameters must be reloaded after every power cycle".to_string(),
        );
    }
    if measurements.iter().any(|m| m.erases > 0) {
        notes.push(
            "latency of erase-before-write technologies includes erase and program".to_string(),
        );
    }
    Ok(BenchmarkTable {
        rows: measurements
            .into_iter()
            .zip(normalized)
            .map(|(raw, normalized)| BenchmarkRow { raw, normalized })
            .collect(),
        notes,
    })
}

/// Published normalized values bundled with the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTable {
    pub columns: Vec<String>,
    pub relative_tolerance: f64,
    pub rows: Vec<ReferenceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRow {
    pub technology: Technology,
    pub values: [f64; 4],
}

/// Entries published as exactly 1 must agree to four significant figures.
pub const UNIT_TOLERANCE: f64 = 5e-4;

pub fn reference_table() -> ReferenceTable {
    serde_json::from_str(include_str!("../data/benchmark_reference.json"))
        .expect("bundled reference parses")
}

/// Zero entries must be exactly zero, unit entries within
/// [`UNIT_TOLERANCE`], everything else within `relative_tolerance`.
pub fn matches_reference(measured: f64, expected: f64, relative_tolerance: f64) -> bool {
    if expected == 0.0 {
        measured == 0.0
    } else if expected == 1.0 {
        (measured - 1.0).abs() <= UNIT_TOLERANCE
    } else {
        ((measured - expected) / expected).abs() <= relative_tolerance
    }
}

/// `(technology, column, measured, expected)` for every entry outside tolerance.
pub fn reference_mismatches(
    table: &BenchmarkTable,
    reference: &ReferenceTable,
) -> Vec<(Technology, &'static str, f64, f64)> {
    let mut out = Vec::new();
    for r in &reference.rows {
        let Some(row) = table.row(r.technology) else {
            out.push((r.technology, "missing", f64::NAN, f64::NAN));
            continue;
        };
        for (c, (&m, &e)) in row.normalized.columns().iter().zip(&r.values).enumerate() {
            if !matches_reference(m, e, reference.relative_tolerance) {
                out.push((r.technology, COLUMN_NAMES[c], m, e));
            }
        }
    }
    out
}

/// Four significant figures, scientific notation below `1e-3`.
pub fn format_au(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        let digits = |v: f64| (3 - v.abs().log10().floor() as i32).max(0) as usize;
        let rounded: f64 = format!("{:.*}", digits(x), x)
            .parse()
            .expect("formatted float");
        format!("{:.*}", digits(rounded), rounded)
    }
}

impl BenchmarkTable {
    pub fn row(&self, technology: Technology) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.raw.technology == technology)
    }

    /// Aligned text rendering in the layout of the published comparison table.
    pub fn to_text(&self) -> String {
        let header = [
            "Memory Type",
            "Weights Write",
            "NN Application",
            "Average Erase",
            "Average Byte Write",
        ];
        let mut cells: Vec<[String; 5]> = vec![header.map(String::from)];
        for r in &self.rows {
            let n = r.normalized.columns().map(format_au);
            cells.push([
                r.raw.technology.display_name().to_string(),
                n[0].clone(),
                n[1].clone(),
                n[2].clone(),
                n[3].clone(),
            ]);
        }
        let mut width = [0usize; 5];
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let group = format!(
            "{:<w0$} | {:^w12$} | {:^w34$}",
            "",
            "Latency (a.u.)",
            "Current (a.u.)",
            w0 = width[0],
            w12 = width[1] + width[2] + 3,
            w34 = width[3] + width[4] + 3,
        );
        let mut out = format!("{}\n", group.trim_end());
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(width)
                .enumerate()
                .map(|(c, (s, w))| {
                    if c == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            out.push_str(line.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        for note in &self.notes {
            out.push_str("* ");
            out.push_str(note);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{INPUTS, PARAMETER_BYTES};

    fn image() -> ImageInput {
        ImageInput::new((0..INPUTS).map(|i| (i % 256) as u8).collect()).unwrap()
    }

    #[test]
    fn format_examples() {
        assert_eq!(format_au(0.0), "0");
        assert_eq!(format_au(1.0), "1.000");
        assert_eq!(format_au(0.8251), "0.8251");
        assert_eq!(format_au(0.02), "0.02000");
        assert_eq!(format_au(5.2e-5), "5.200e-5");
        assert_eq!(format_au(12.345), "12.35");
        assert_eq!(format_au(0.99996), "1.000");
        assert_eq!(format_au(9999.6), "10000");
    }

    #[test]
    fn single_profile_self_normalizes() {
        let p = TechnologyProfile::default_for(Technology::Flash);
        let t = benchmark_technologies(&[p], &NNParameters::random(3), &image(), 1, 1).unwrap();
        assert_eq!(t.rows[0].normalized.columns(), [1.0; 4]);
    }

    #[test]
    fn zero_column_stays_zero() {
        let p = TechnologyProfile::default_for(Technology::Feram);
        let t = benchmark_technologies(&[p], &NNParameters::random(3), &image(), 1, 1).unwrap();
        let n = t.rows[0].normalized;
        assert_eq!(n.average_erase_current, 0.0);
        assert_eq!(n.weights_write, 1.0);
        assert_eq!(n.nn_application, 1.0);
        assert_eq!(n.average_byte_write_current, 1.0);
    }

    #[test]
    fn every_technology_moves_the_full_parameter_set() {
        let t = benchmark_technologies(
            &TechnologyProfile::defaults(),
            &NNParameters::zeros(),
            &image(),
            1,
            1,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 6);
        for r in &t.rows {
            assert_eq!(r.raw.byte_writes, PARAMETER_BYTES as u64);
            assert_eq!(r.raw.byte_reads, PARAMETER_BYTES as u64);
            assert_eq!(r.raw.prediction, 255);
            for v in r.normalized.columns() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        for c in 0..4 {
            let max = t
                .rows
                .iter()
                .map(|r| r.normalized.columns()[c])
                .fold(0.0, f64::max);
            assert_eq!(max, 1.0);
        }
        let text = t.to_text();
        assert!(text.contains("Toggle MRAM"));
        assert!(text.contains("volatile"));
    }

    #[test]
    fn reference_rule() {
        assert!(matches_reference(0.0, 0.0, 0.1));
        assert!(!matches_reference(1e-12, 0.0, 0.1));
        assert!(matches_reference(0.99996, 1.0, 0.1));
        assert!(!matches_reference(0.95, 1.0, 0.1));
        assert!(matches_reference(0.0209, 0.02, 0.1));
        assert!(!matches_reference(0.0221, 0.02, 0.1));
        assert_eq!(reference_table().rows.len(), 6);
    }

    #[test]
    fn empty_profile_list_is_rejected() {
        assert!(benchmark_technologies(&[], &NNParameters::zeros(), &image(), 1, 1).is_err());
    }
}
