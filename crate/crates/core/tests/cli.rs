use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use nvm_bench::benchmark::{reference_mismatches, reference_table, BenchmarkTable};
use nvm_bench::nn::{NNParameters, INPUTS, PARAMETER_BYTES};

fn nvm_bench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvm-bench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NVM_BENCH_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = nvm_bench(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bench_matches_bundled_reference() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["bench", "--profiles", "default", "--out", "table.json"],
        dir.path(),
    );
    let report = read_json(&dir.path().join("table.json"));
    let table: BenchmarkTable = serde_json::from_value(report["result"].clone()).unwrap();
    assert!(reference_mismatches(&table, &reference_table()).is_empty());
    let text = std::fs::read_to_string(dir.path().join("table.txt")).unwrap();
    assert!(text.contains("5.200e-5"));
    let csv = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn feram_sweep_csv_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["sweep", "--technology", "feram", "--cycles", "500"],
        dir.path(),
    );
    let mut reader = csv::Reader::from_path(dir.path().join("sweep_feram_1.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    for state in ["all_zeros", "all_ones"] {
        let cells: Vec<_> = rows
            .iter()
            .filter(|r| &r[col("initial_state")] == state)
            .collect();
        assert_eq!(cells.len(), 8);
        let means: Vec<f64> = cells
            .iter()
            .map(|r| r[col("mean_page_current")].parse().unwrap())
            .collect();
        let stds: Vec<f64> = cells
            .iter()
            .map(|r| r[col("std_page_current")].parse().unwrap())
            .collect();
        let spread = means.iter().cloned().fold(f64::MIN, f64::max)
            - means.iter().cloned().fold(f64::MAX, f64::min);
        let pooled = (stds.iter().map(|s| s * s).sum::<f64>() / 8.0).sqrt();
        assert!(spread < 3.0 * pooled * (2.0f64 / 500.0).sqrt());
    }
}

#[test]
fn infer_with_zero_parameters_predicts_high() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("zeros.bin"), vec![0u8; PARAMETER_BYTES]).unwrap();
    std::fs::write(dir.path().join("img.raw"), vec![17u8; INPUTS]).unwrap();
    for t in ["mram", "flash", "reram"] {
        ok(
            &[
                "infer",
                "-t",
                t,
                "--params",
                "zeros.bin",
                "--image",
                "img.raw",
                "--out",
                "i.json",
            ],
            dir.path(),
        );
        let r = read_json(&dir.path().join("i.json"));
        assert_eq!(r["result"]["inference"]["prediction"], 255);
        assert_eq!(r["result"]["inference"]["weight_load"]["byte_reads"], 5391);
        assert_eq!(r["result"]["store"]["byte_writes"], 5391);
    }
}

#[test]
fn png_images_are_scaled_to_the_input_layer() {
    let dir = tempfile::tempdir().unwrap();
    let img = image::RgbImage::from_fn(40, 30, |x, y| image::Rgb([x as u8 * 6, y as u8 * 8, 200]));
    img.save(dir.path().join("in.png")).unwrap();
    NNParameters::random(2)
        .save(&dir.path().join("p.bin"))
        .unwrap();
    ok(
        &[
            "infer", "--params", "p.bin", "--image", "in.png", "--out", "o.json",
        ],
        dir.path(),
    );
    let r = read_json(&dir.path().join("o.json"));
    let p = r["result"]["inference"]["prediction"].as_u64().unwrap();
    assert!(p == 0 || p == 255);
}

#[test]
fn train_writes_parameters_usable_by_infer() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "train",
            "--generations",
            "2",
            "--population-size",
            "6",
            "--samples",
            "20",
        ],
        dir.path(),
    );
    let stem = dir.path().join("train_synthetic_1");
    let report = read_json(&stem.with_extension("json"));
    assert_eq!(report["result"]["history"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.starts_with("generation,best_fitness\r\n"));
    let bin = dir.path().join("train_synthetic_1.params.bin");
    assert_eq!(
        std::fs::metadata(&bin).unwrap().len(),
        PARAMETER_BYTES as u64
    );
    let sidecar = read_json(&dir.path().join("train_synthetic_1.params.json"));
    assert_eq!(sidecar["parameter_bytes"], 5391);
    std::fs::write(dir.path().join("img.raw"), vec![200u8; INPUTS]).unwrap();
    ok(
        &[
            "infer",
            "--params",
            bin.to_str().unwrap(),
            "--image",
            "img.raw",
        ],
        dir.path(),
    );
}

#[test]
fn metadata_is_embedded() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["endurance", "-t", "cbram", "--cycles", "100", "--seed", "4"],
        dir.path(),
    );
    let r = read_json(&dir.path().join("endurance_cbram_4.json"));
    let meta = &r["meta"];
    assert_eq!(meta["seed"], 4);
    assert_eq!(meta["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!(meta["generated_at"].as_str().unwrap().ends_with('Z'));
    assert_eq!(r["config"]["cycles"], 100);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("aging.json"),
        r#"{"schema_version": 1, "technology": "feram", "seed": 5, "cycles": 300, "sample_every": 3}"#,
    )
    .unwrap();
    ok(&["aging", "-c", "aging.json", "--seed", "7"], dir.path());
    let r = read_json(&dir.path().join("aging_feram_7.json"));
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(r["config"]["cycles"], 300);
    assert_eq!(
        r["result"]["trace"]["samples"].as_array().unwrap().len(),
        100
    );
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nvm-bench"))
        .args(["fnw-compare", "--seeds", "3,4", "--cycles", "50"])
        .current_dir(dir.path())
        .env("NVM_BENCH_OUT_DIR", "results")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("results/fnw_compare_cbram_3.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("results/fnw_compare_cbram_3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn same_seed_and_config_reproduce_payload() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "-t", "reram", "--cycles", "20", "--k", "1,4,8"];
    let mut payloads = Vec::new();
    for out in ["a.json", "b.json"] {
        let mut full = args.to_vec();
        full.extend(["--out", out]);
        ok(&full, dir.path());
        let json = std::fs::read_to_string(dir.path().join(out)).unwrap();
        payloads.push(nvm_bench::report::reproducible_payload(&json).unwrap());
    }
    assert_eq!(payloads[0], payloads[1]);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| nvm_bench(args, dir.path()).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["sweep", "--technology", "dram"]), 2);
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"cycles": 10, "colour": 1}"#,
    )
    .unwrap();
    assert_eq!(code(&["sweep", "-c", "bad.json"]), 3);
    std::fs::write(dir.path().join("range.json"), r#"{"k_values": [0]}"#).unwrap();
    assert_eq!(code(&["sweep", "-c", "range.json"]), 3);
    assert_eq!(code(&["aging", "-c", "missing.json"]), 4);
    assert_eq!(
        code(&["infer", "--params", "none.bin", "--image", "none.raw"]),
        4
    );
    let out = nvm_bench(&["aging", "-c", "missing.json"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}
