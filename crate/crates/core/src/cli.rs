//! The `nvm-bench` command line: one subcommand per experiment. Each
//! subcommand reads an optional JSON config, applies flag overrides, runs,
//! and writes `<experiment>_<technology>_<seed>.{json,csv}`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::benchmark::{benchmark_technologies, format_au, BenchmarkTable};
use crate::characterization::{run_aging, run_endurance, sweep_profile, InitialState};
use crate::config::*;
use crate::de::{de_train, Dataset};
use crate::device::DeviceInstance;
use crate::encoding::{compare_endurance, FlipNWrite, WriteEncoder};
use crate::error::{Error, Result};
use crate::nn::{ImageInput, NNParameters, NnEngine, INPUTS};
use crate::profile::{Technology, TechnologyProfile};
use crate::report::{self, ExperimentReport, Meta, OutputPaths, OUT_DIR_ENV};
use crate::stats::LinearFit;

/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "nvm-bench",
    version,
    about = "Behavioral NVM characterization and benchmark suite"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write-current signature versus number of toggled bits.
    Sweep(SweepArgs),
    /// Page current and latency over repeated write cycles.
    Aging(AgingArgs),
    /// k-bit error histogram after repeated random page writes.
    Endurance(EnduranceArgs),
    /// Paired endurance runs with and without Flip-N-Write.
    FnwCompare(FnwCompareArgs),
    /// Train the integer network with differential evolution.
    Train(TrainArgs),
    /// Store parameters on a device and classify one image.
    Infer(InferArgs),
    /// Cross-technology network application benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// JSON config file for this subcommand; flags override its values.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Output JSON path; the CSV is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output directory used when --out is absent.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    /// Memory technology (toggle_mram, feram, cbram, reram, flash, sram).
    #[arg(long, short = 't', value_parser = parse_technology)]
    pub technology: Option<Technology>,
    /// Technology profile JSON replacing the built-in one.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Measured writes per (k, initial state) cell.
    #[arg(long)]
    pub cycles: Option<u32>,
    /// Toggle counts to measure, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<u8>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AgingArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cycles: Option<u64>,
    /// Keep every n-th page write in the trace.
    #[arg(long)]
    pub sample_every: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EncoderArg {
    None,
    Fnw,
}

#[derive(Debug, Args)]
pub struct EnduranceArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cycles: Option<u64>,
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FnwCompareArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    /// Device seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub cycles: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Optimizer seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub generations: Option<u32>,
    #[arg(long)]
    pub population_size: Option<usize>,
    /// Differential weight F.
    #[arg(long)]
    pub differential_weight: Option<f64>,
    /// Crossover rate CR.
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    /// Stop once this accuracy is reached.
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    /// Number of synthetic samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Class-mean separation of the synthetic set.
    #[arg(long)]
    pub separation: Option<f64>,
    /// Pixel noise standard deviation of the synthetic set.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub dataset_seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Raw 5391-byte parameter file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Raw 768-byte image or PNG (scaled to 16x16 RGB).
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub cycles_per_mac: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// "default", technology names or profile files, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub profiles: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub cycles_per_mac: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_technology(s: &str) -> std::result::Result<Technology, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Argument(_) => EXIT_USAGE,
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) | Error::Image(_) => EXIT_IO,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Aging(a) => aging(a),
        Command::Endurance(a) => endurance(a),
        Command::FnwCompare(a) => fnw_compare(a),
        Command::Train(a) => train(a),
        Command::Infer(a) => infer(a),
        Command::Bench(a) => bench(a),
    }
}

fn load_config<E: Experiment>(path: Option<&Path>) -> Result<E> {
    match path {
        Some(p) => E::load(p),
        None => Ok(E::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_device(args: DeviceArgs, technology: &mut Technology, profile: &mut Option<PathBuf>) {
    set(technology, args.technology);
    if args.profile.is_some() {
        *profile = args.profile;
    }
}

/// Writes JSON and CSV outputs and returns their paths.
fn emit<C: Experiment, R: Serialize, S: Serialize>(
    output: &OutputArgs,
    config: &C,
    technology: &str,
    seed: u64,
    result: R,
    rows: &[S],
) -> Result<OutputPaths> {
    let stem = report::output_stem(C::NAME, technology, seed);
    let paths = OutputPaths::resolve(output.out.as_deref(), output.out_dir.as_deref(), &stem);
    let report = ExperimentReport {
        meta: Meta::new(C::NAME, technology, seed, config.config_hash()),
        config,
        result,
    };
    report::write_json(&paths.json, &report)?;
    report::write_csv(&paths.csv, rows)?;
    say!("wrote {}", paths.json.display());
    say!("wrote {}", paths.csv.display());
    Ok(paths)
}

#[derive(Serialize)]
struct FitSummary {
    initial_state: InitialState,
    fit: Option<LinearFit>,
    fit_of_means: Option<LinearFit>,
}

#[derive(Serialize)]
struct SweepRow {
    technology: Technology,
    initial_state: InitialState,
    bits_toggled: u8,
    written_byte: u8,
    trials: u32,
    mean_page_current: f64,
    std_page_current: f64,
    mean_page_latency_cycles: f64,
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut c: SweepExperiment = load_config(a.output.config.as_deref())?;
    apply_device(a.device, &mut c.technology, &mut c.profile);
    set(&mut c.seed, a.seed);
    set(&mut c.cycles, a.cycles);
    set(&mut c.k_values, a.k);
    c.validate()?;
    let profile = resolve_profile(c.technology, c.profile.as_deref())?;
    let result = sweep_profile(&profile, c.seed, &c.sweep_config())?;
    let fits: Vec<FitSummary> = [InitialState::AllZeros, InitialState::AllOnes]
        .into_iter()
        .map(|s| FitSummary {
            initial_state: s,
            fit: result.fit(s),
            fit_of_means: result.fit_of_means(s),
        })
        .collect();
    let rows: Vec<SweepRow> = result
        .cells
        .iter()
        .map(|cell| SweepRow {
            technology: result.technology,
            initial_state: cell.initial_state,
            bits_toggled: cell.bits_toggled,
            written_byte: cell.written_byte,
            trials: cell.trials,
            mean_page_current: cell.mean_page_current,
            std_page_current: cell.std_page_current,
            mean_page_latency_cycles: cell.mean_page_latency_cycles,
        })
        .collect();
    for f in &fits {
        if let Some(fit) = &f.fit {
            say!(
                "{:?}: slope {:.4e} a.u./bit, R^2 {:.4}, p {:.3e}",
                f.initial_state,
                fit.slope,
                fit.r_squared,
                fit.p_value
            );
        }
    }
    #[derive(Serialize)]
    struct Out<'a> {
        profile: &'a TechnologyProfile,
        sweep: &'a crate::characterization::PatternSweepResult,
        fits: Vec<FitSummary>,
    }
    emit(
        &a.output,
        &c,
        c.technology.slug(),
        c.seed,
        Out {
            profile: &profile,
            sweep: &result,
            fits,
        },
        &rows,
    )?;
    Ok(())
}

fn aging(a: AgingArgs) -> Result<()> {
    let mut c: AgingExperiment = load_config(a.output.config.as_deref())?;
    apply_device(a.device, &mut c.technology, &mut c.profile);
    set(&mut c.seed, a.seed);
    set(&mut c.cycles, a.cycles);
    set(&mut c.sample_every, a.sample_every);
    c.validate()?;
    let profile = resolve_profile(c.technology, c.profile.as_deref())?;
    let mut device = DeviceInstance::new(profile.clone(), c.seed)?;
    let trace = run_aging(&mut device, c.cycles, c.sample_every)?;
    let (lat_first, lat_last) = trace.latency_deciles();
    let (cur_first, cur_last) = trace.current_deciles();
    say!("latency  first/last decile: {lat_first:.1} / {lat_last:.1} cycles");
    say!("current  first/last decile: {cur_first:.4} / {cur_last:.4} a.u.");
    #[derive(Serialize)]
    struct Summary {
        latency_first_decile: f64,
        latency_last_decile: f64,
        current_first_decile: f64,
        current_last_decile: f64,
        current_fit: Option<LinearFit>,
        latency_fit: Option<LinearFit>,
    }
    #[derive(Serialize)]
    struct Out<'a> {
        profile: &'a TechnologyProfile,
        summary: Summary,
        trace: &'a crate::characterization::AgingTrace,
    }
    let out = Out {
        profile: &profile,
        summary: Summary {
            latency_first_decile: lat_first,
            latency_last_decile: lat_last,
            current_first_decile: cur_first,
            current_last_decile: cur_last,
            current_fit: trace.current_fit(),
            latency_fit: trace.latency_fit(),
        },
        trace: &trace,
    };
    emit(
        &a.output,
        &c,
        c.technology.slug(),
        c.seed,
        &out,
        &trace.samples,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct HistogramRow {
    bits_in_error: usize,
    count: u64,
}

fn histogram_rows(h: &crate::characterization::ErrorHistogram) -> Vec<HistogramRow> {
    (1..=8)
        .map(|k| HistogramRow {
            bits_in_error: k,
            count: h.count(k),
        })
        .collect()
}

fn endurance(a: EnduranceArgs) -> Result<()> {
    let mut c: EnduranceExperiment = load_config(a.output.config.as_deref())?;
    apply_device(a.device, &mut c.technology, &mut c.profile);
    set(&mut c.seed, a.seed);
    set(&mut c.cycles, a.cycles);
    if let Some(e) = a.encoder {
        c.encoder = match e {
            EncoderArg::None => EncoderChoice::None,
            EncoderArg::Fnw => EncoderChoice::Fnw,
        };
    }
    c.validate()?;
    let profile = resolve_profile(c.technology, c.profile.as_deref())?;
    let mut device = DeviceInstance::new(profile.clone(), c.seed)?;
    let encoder: Option<&dyn WriteEncoder> = match c.encoder {
        EncoderChoice::None => None,
        EncoderChoice::Fnw => Some(&FlipNWrite),
    };
    let run = run_endurance(&mut device, c.cycles, encoder)?;
    let rows = histogram_rows(&run.histogram);
    for r in &rows {
        say!("{}-bit errors: {}", r.bits_in_error, r.count);
    }
    #[derive(Serialize)]
    struct Out<'a> {
        profile: &'a TechnologyProfile,
        endurance: &'a crate::characterization::EnduranceRun,
    }
    emit(
        &a.output,
        &c,
        c.technology.slug(),
        c.seed,
        Out {
            profile: &profile,
            endurance: &run,
        },
        &rows,
    )?;
    Ok(())
}

fn fnw_compare(a: FnwCompareArgs) -> Result<()> {
    let mut c: FnwCompareExperiment = load_config(a.output.config.as_deref())?;
    apply_device(a.device, &mut c.technology, &mut c.profile);
    set(&mut c.seeds, a.seeds);
    set(&mut c.cycles, a.cycles);
    c.validate()?;
    let profile = resolve_profile(c.technology, c.profile.as_deref())?;
    let cmp = compare_endurance(&profile, c.cycles, &c.seeds)?;
    say!(
        "2-bit reduction {:.3}x (geomean {:.3}x), total reduction {:.3}x (geomean {:.3}x)",
        cmp.reduction_factor_2bit,
        cmp.geomean_reduction_factor_2bit,
        cmp.reduction_factor_total,
        cmp.geomean_reduction_factor_total
    );
    #[derive(Serialize)]
    struct Out<'a> {
        profile: &'a TechnologyProfile,
        comparison: &'a crate::encoding::FnwComparison,
    }
    emit(
        &a.output,
        &c,
        c.technology.slug(),
        c.seeds[0],
        Out {
            profile: &profile,
            comparison: &cmp,
        },
        &cmp.per_seed,
    )?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut c: TrainExperiment = load_config(a.output.config.as_deref())?;
    set(&mut c.de.seed, a.seed);
    set(&mut c.de.generations, a.generations);
    set(&mut c.de.population_size, a.population_size);
    set(&mut c.de.differential_weight, a.differential_weight);
    set(&mut c.de.crossover_rate, a.crossover_rate);
    if a.target_accuracy.is_some() {
        c.de.target_accuracy = a.target_accuracy;
    }
    set(&mut c.dataset.count, a.samples);
    set(&mut c.dataset.separation, a.separation);
    set(&mut c.dataset.noise, a.noise);
    set(&mut c.dataset.seed, a.dataset_seed);
    c.validate()?;
    let dataset = Dataset::synthetic(&c.dataset)?;
    let result = de_train(&dataset, &c.de)?;
    say!(
        "accuracy {:.4} after {} generations",
        result.accuracy,
        result.generations_run
    );
    #[derive(Serialize)]
    struct HistoryRow {
        generation: usize,
        best_fitness: f64,
    }
    let rows: Vec<HistoryRow> = result
        .history
        .iter()
        .enumerate()
        .map(|(generation, &best_fitness)| HistoryRow {
            generation,
            best_fitness,
        })
        .collect();
    #[derive(Serialize)]
    struct Out<'a> {
        samples: usize,
        positive_fraction: f64,
        accuracy: f64,
        generations_run: u32,
        history: &'a [f64],
        parameters: crate::nn::ParameterSidecar,
        best: &'a NNParameters,
    }
    let paths = emit(
        &a.output,
        &c,
        "synthetic",
        c.de.seed,
        Out {
            samples: dataset.len(),
            positive_fraction: dataset.positive_fraction(),
            accuracy: result.accuracy,
            generations_run: result.generations_run,
            history: &result.history,
            parameters: result.best.sidecar(),
            best: &result.best,
        },
        &rows,
    )?;
    let bin = paths.sibling("params.bin");
    result.best.save(&bin)?;
    say!("wrote {}", bin.display());
    Ok(())
}

/// Reads a raw 768-byte image, or a PNG scaled to 16x16 RGB. Pixels are
/// row-major with interleaved R, G, B.
pub fn load_image(path: &Path) -> Result<ImageInput> {
    let bytes = crate::error::read(path)?;
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?.to_rgb8();
        let img = if img.dimensions() == (16, 16) {
            img
        } else {
            image::imageops::resize(&img, 16, 16, image::imageops::FilterType::Triangle)
        };
        return ImageInput::new(img.into_raw());
    }
    if bytes.len() != INPUTS {
        return Err(Error::argument(format!(
            "{}: raw image must be {INPUTS} bytes, got {}",
            path.display(),
            bytes.len()
        )));
    }
    ImageInput::new(bytes)
}

/// Fixed gradient image used when none is supplied.
pub fn default_image() -> ImageInput {
    ImageInput::new(
        (0..INPUTS)
            .map(|i| (i * 255 / (INPUTS - 1)) as u8)
            .collect(),
    )
    .expect("768 pixels")
}

fn infer(a: InferArgs) -> Result<()> {
    let mut c: InferExperiment = load_config(a.output.config.as_deref())?;
    apply_device(a.device, &mut c.technology, &mut c.profile);
    set(&mut c.seed, a.seed);
    if a.params.is_some() {
        c.params = a.params;
    }
    if a.image.is_some() {
        c.image = a.image;
    }
    set(&mut c.cycles_per_mac, a.cycles_per_mac);
    c.validate()?;
    let profile = resolve_profile(c.technology, c.profile.as_deref())?;
    let params = NNParameters::load(c.params.as_deref().expect("validated"))?;
    let image = load_image(c.image.as_deref().expect("validated"))?;
    let device = DeviceInstance::new(profile.clone(), c.seed)?;
    let mut engine = NnEngine::new(device).with_cycles_per_mac(c.cycles_per_mac);
    let store = engine.store_parameters(&params)?;
    let inference = engine.infer(&image)?;
    say!("prediction {}", inference.prediction);
    #[derive(Serialize)]
    struct Row {
        technology: Technology,
        prediction: u8,
        byte_writes: u64,
        store_latency_cycles: u64,
        byte_reads: u64,
        load_latency_cycles: u64,
        mac_count: u64,
        compute_latency_cycles: u64,
    }
    let row = Row {
        technology: c.technology,
        prediction: inference.prediction,
        byte_writes: store.byte_writes,
        store_latency_cycles: store.latency_cycles,
        byte_reads: inference.weight_load.byte_reads,
        load_latency_cycles: inference.weight_load.latency_cycles,
        mac_count: inference.compute.mac_count,
        compute_latency_cycles: inference.compute.latency_cycles,
    };
    #[derive(Serialize)]
    struct Out<'a> {
        profile: &'a TechnologyProfile,
        parameters_sha256: String,
        store: crate::nn::StoreReport,
        inference: crate::nn::InferenceReport,
    }
    emit(
        &a.output,
        &c,
        c.technology.slug(),
        c.seed,
        Out {
            profile: &profile,
            parameters_sha256: params.sidecar().sha256,
            store,
            inference,
        },
        &[row],
    )?;
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    technology: Technology,
    weights_write_au: String,
    nn_application_au: String,
    average_erase_current_au: String,
    average_byte_write_current_au: String,
    weights_write_cycles: u64,
    nn_application_cycles: u64,
    raw_erase_current: f64,
    raw_byte_write_current: f64,
}

fn bench_rows(table: &BenchmarkTable) -> Vec<BenchRow> {
    table
        .rows
        .iter()
        .map(|r| BenchRow {
            technology: r.raw.technology,
            weights_write_au: format_au(r.normalized.weights_write),
            nn_application_au: format_au(r.normalized.nn_application),
            average_erase_current_au: format_au(r.normalized.average_erase_current),
            average_byte_write_current_au: format_au(r.normalized.average_byte_write_current),
            weights_write_cycles: r.raw.weights_write_cycles,
            nn_application_cycles: r.raw.nn_application_cycles,
            raw_erase_current: r.raw.average_erase_current_au,
            raw_byte_write_current: r.raw.average_byte_write_current_au,
        })
        .collect()
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut c: BenchExperiment = load_config(a.output.config.as_deref())?;
    set(&mut c.profiles, a.profiles);
    set(&mut c.seed, a.seed);
    if a.params.is_some() {
        c.params = a.params;
    }
    if a.image.is_some() {
        c.image = a.image;
    }
    set(&mut c.cycles_per_mac, a.cycles_per_mac);
    c.validate()?;
    let profiles = c.resolve_profiles()?;
    let params = match &c.params {
        Some(p) => NNParameters::load(p)?,
        None => NNParameters::random(c.seed),
    };
    let image = match &c.image {
        Some(p) => load_image(p)?,
        None => default_image(),
    };
    let table = benchmark_technologies(&profiles, &params, &image, c.seed, c.cycles_per_mac)?;
    let text = table.to_text();
    {
        use std::io::Write;
        let _ = std::io::stdout().write_all(text.as_bytes());
    }
    let paths = emit(&a.output, &c, "all", c.seed, &table, &bench_rows(&table))?;
    let txt = paths.json.with_extension("txt");
    std::fs::write(&txt, text)?;
    say!("wrote {}", txt.display());
    Ok(())
}
