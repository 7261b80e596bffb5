//! `mcanc`: run multichannel FxLMS scenarios, design filters, synthesize
//! paths and recompute metrics.
//!
//! Exit codes: 0 success, 1 config/input/I-O error, 2 the adaptive filter
//! diverged (partial results are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use mcanc_core::fir_design::summarize;
use mcanc_core::harness::{export_result, run_scenario, Outcome, ScenarioConfig};
use mcanc_core::signal::{synth_path_matrix, PathMatrix, PathSynthSpec};
use mcanc_core::{compute_metrics, design_bandpass, io, BandSpec};

#[derive(Parser, Debug)]
#[command(
    name = "mcanc",
    version,
    about = "Multichannel FxLMS active noise control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario config and export its results.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override `duration_s`.
        #[arg(long)]
        duration: Option<f64>,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Design a Hamming-window bandpass FIR and write its taps.
    DesignFir {
        #[arg(long)]
        order: usize,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write an M×K matrix of synthetic decaying-noise paths.
    GenPaths {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        len: usize,
        #[arg(long)]
        delay: usize,
        #[arg(long)]
        decay: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute block MSE and noise reduction from saved signals.
    Metrics {
        #[arg(long)]
        error: PathBuf,
        #[arg(long)]
        disturbance: PathBuf,
        /// Block length in samples.
        #[arg(long)]
        block: usize,
    },
}

enum Status {
    Ok,
    Diverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Diverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<Status> {
    match cmd {
        Command::Simulate {
            config,
            out,
            duration,
            seed,
        } => simulate(&config, &out, duration, seed),
        Command::DesignFir { order, lo, hi, out } => {
            design_fir(order, lo, hi, &out).map(|_| Status::Ok)
        }
        Command::GenPaths {
            m,
            k,
            len,
            delay,
            decay,
            seed,
            out,
        } => gen_paths(m, k, len, delay, decay, seed, &out).map(|_| Status::Ok),
        Command::Metrics {
            error,
            disturbance,
            block,
        } => metrics(&error, &disturbance, block).map(|_| Status::Ok),
    }
}

fn check_parent(out: &Path) -> anyhow::Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            bail!("output directory {} does not exist", parent.display());
        }
    }
    Ok(())
}

fn simulate(
    config: &Path,
    out: &Path,
    duration: Option<f64>,
    seed: Option<u64>,
) -> anyhow::Result<Status> {
    let mut cfg = ScenarioConfig::load(config)
        .with_context(|| format!("loading config {}", config.display()))?;
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
    if let Some(s) = seed {
        cfg.seeds.noise = s;
    }
    cfg.validate()
        .with_context(|| format!("invalid config {}", config.display()))?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let res = run_scenario(&cfg)?;
    export_result(&res, out)?;
    eprintln!(
        "{} J={} K={} M={} N={} Ls={} samples={} wall_time_s={:.3}",
        cfg.topology.label(),
        cfg.num_references,
        cfg.num_speakers,
        cfg.num_mics,
        cfg.filter_len,
        cfg.path_len,
        cfg.num_samples(),
        res.wall_time_s
    );
    for (m, nr) in res.metrics.noise_reduction_db.iter().enumerate() {
        println!("mic={} nr_db={}", m + 1, nr);
    }
    match res.outcome {
        Outcome::Completed => Ok(Status::Ok),
        Outcome::Diverged { sample } => {
            println!("diverged sample={sample}");
            eprintln!(
                "error: adaptive filter diverged at sample {sample}; step_size {} is too large (partial results in {})",
                cfg.step_size,
                out.display()
            );
            Ok(Status::Diverged)
        }
    }
}

fn design_fir(order: usize, lo: f64, hi: f64, out: &Path) -> anyhow::Result<()> {
    let spec = BandSpec::new(order, lo, hi)?;
    check_parent(out)?;
    let fir = design_bandpass(&spec)?;
    let matrix = PathMatrix::new(1, 1, vec![fir.clone()])?;
    io::write_path_matrix(out, &matrix)?;
    let s = summarize(&fir, &spec, 0.01, 0.02, 4096)?;
    println!("taps={}", fir.len());
    println!("passband_min_db={}", s.passband_min_db);
    println!("passband_max_db={}", s.passband_max_db);
    println!("stopband_max_db={}", s.stopband_max_db);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen_paths(
    m: usize,
    k: usize,
    len: usize,
    delay: usize,
    decay: f64,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    if m == 0 || k == 0 {
        bail!("--m and --k must be at least 1");
    }
    PathSynthSpec {
        length: len,
        delay,
        decay,
        seed,
    }
    .validate()?;
    check_parent(out)?;
    let paths = synth_path_matrix(m, k, len, delay, decay, seed)?;
    io::write_path_matrix(out, &paths)?;
    println!("paths={} taps={}", m * k, len);
    Ok(())
}

fn metrics(error: &Path, disturbance: &Path, block: usize) -> anyhow::Result<()> {
    let e = io::read_signals(error)?;
    let d = io::read_signals(disturbance)?;
    let report = compute_metrics(&e, &d, block)
        .with_context(|| format!("{} vs {}", error.display(), disturbance.display()))?;
    print!("{}", report.to_csv_string());
    Ok(())
}
