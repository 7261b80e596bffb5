//! Scenario assembly: config → signals and paths → cancellation run → metrics → files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fir_design::{design_bandpass, BandSpec};
use crate::io;
use crate::mcfxlms::{
    Coefficients, Dims, McFxLmsController, RunOptions, RunOutput, Snapshot, Topology,
};
use crate::metrics::{compute_metrics, cost_trace, MetricsReport};
use crate::signal::{
    make_disturbance, make_reference, split_seed, synth_path_matrix, white_gaussian, PathMatrix,
    ReferenceMode, SignalMatrix,
};

fn default_sample_rate() -> f64 {
    16_000.0
}

fn default_block_len_s() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub noise: u64,
    pub paths: u64,
}

/// Shape shared by every synthetic path of one kind; length comes from
/// `path_len` and each path gets its own derived seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthGroup {
    pub delay: usize,
    pub decay: f64,
}

impl SynthGroup {
    fn build(&self, outputs: usize, inputs: usize, length: usize, seed: u64) -> Result<PathMatrix> {
        synth_path_matrix(outputs, inputs, length, self.delay, self.decay, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryWiring {
    /// Reference `j` reaches only mic `j` (requires `M == J`).
    #[default]
    Diagonal,
    /// Every reference reaches every mic.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSource {
    Synthetic {
        primary: SynthGroup,
        secondary: SynthGroup,
        #[serde(default)]
        primary_wiring: PrimaryWiring,
    },
    /// Path-matrix CSV files: primary `M × J`, secondary `M × K` with `path_len` taps.
    Csv {
        primary: PathBuf,
        secondary: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SecEstimateSource {
    #[default]
    SameAsPlant,
    Csv(PathBuf),
}

/// Declarative description of one experiment (JSON, snake_case keys).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub num_references: usize,
    pub num_speakers: usize,
    pub num_mics: usize,
    pub filter_len: usize,
    pub path_len: usize,
    pub step_size: f64,
    pub topology: Topology,
    pub band_lo: f64,
    pub band_hi: f64,
    pub fir_order: usize,
    #[serde(default)]
    pub reference_mode: ReferenceMode,
    pub seeds: Seeds,
    pub path_source: PathSource,
    #[serde(default)]
    pub sec_estimate_source: SecEstimateSource,
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "default_block_len_s")]
    pub block_len_s: f64,
    /// Step control units concurrently within each sample (same results).
    #[serde(default)]
    pub parallel_units: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))
    }

    /// Reads a config file; relative CSV paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PathSource::Csv { primary, secondary } = &mut self.path_source {
            fix(primary);
            fix(secondary);
        }
        if let SecEstimateSource::Csv(p) = &mut self.sec_estimate_source {
            fix(p);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn dims(&self) -> Dims {
        Dims {
            references: self.num_references,
            speakers: self.num_speakers,
            mics: self.num_mics,
        }
    }

    pub fn band(&self) -> BandSpec {
        BandSpec {
            order: self.fir_order,
            lo: self.band_lo,
            hi: self.band_hi,
        }
    }

    /// `round(duration · fs) + 1`: the time grid includes both endpoints.
    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize + 1
    }

    pub fn block_len(&self) -> usize {
        ((self.block_len_s * self.sample_rate_hz).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be finite and positive, got {v}"),
                ))
            }
        };
        positive("sample_rate_hz", self.sample_rate_hz)?;
        positive("duration_s", self.duration_s)?;
        if self.duration_s < 1.0 / self.sample_rate_hz {
            return Err(Error::config(
                "duration_s",
                format!(
                    "{} s is shorter than one sample period at {} Hz",
                    self.duration_s, self.sample_rate_hz
                ),
            ));
        }
        for (field, v) in [
            ("num_references", self.num_references),
            ("num_speakers", self.num_speakers),
            ("num_mics", self.num_mics),
            ("filter_len", self.filter_len),
            ("path_len", self.path_len),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return Err(Error::config(
                "step_size",
                format!("must be finite and non-negative, got {}", self.step_size),
            ));
        }
        if self.topology == Topology::Collocated && self.num_speakers != self.num_references {
            return Err(Error::config(
                "num_speakers",
                format!(
                    "collocated topology needs num_speakers == num_references ({} != {})",
                    self.num_speakers, self.num_references
                ),
            ));
        }
        self.band()
            .validate()
            .map_err(|e| Error::config("fir_order/band_lo/band_hi", e.to_string()))?;
        positive("block_len_s", self.block_len_s)?;
        if let PathSource::Synthetic {
            primary,
            secondary,
            primary_wiring,
        } = &self.path_source
        {
            for (field, g) in [
                ("path_source.synthetic.primary", primary),
                ("path_source.synthetic.secondary", secondary),
            ] {
                if g.delay >= self.path_len {
                    return Err(Error::config(
                        field,
                        format!(
                            "delay {} must be less than path_len {}",
                            g.delay, self.path_len
                        ),
                    ));
                }
                if !(g.decay > 0.0 && g.decay < 1.0) {
                    return Err(Error::config(
                        field,
                        format!("decay must lie in (0, 1), got {}", g.decay),
                    ));
                }
            }
            if *primary_wiring == PrimaryWiring::Diagonal && self.num_mics != self.num_references {
                return Err(Error::config(
                    "path_source.synthetic.primary_wiring",
                    "diagonal wiring needs num_mics == num_references",
                ));
            }
        }
        Ok(())
    }

    fn reference_seeds(&self) -> Vec<u64> {
        (0..self.num_references as u64)
            .map(|j| split_seed(self.seeds.noise, j))
            .collect()
    }

    /// Primary `M × J` and secondary `M × K` paths for this scenario.
    pub fn build_paths(&self) -> Result<(PathMatrix, PathMatrix)> {
        let (m, j, k) = (self.num_mics, self.num_references, self.num_speakers);
        let (primary, secondary) = match &self.path_source {
            PathSource::Synthetic {
                primary,
                secondary,
                primary_wiring,
            } => {
                let p_seed = split_seed(self.seeds.paths, 0);
                let s_seed = split_seed(self.seeds.paths, 1);
                let pri = match primary_wiring {
                    PrimaryWiring::Full => primary.build(m, j, self.path_len, p_seed)?,
                    PrimaryWiring::Diagonal => {
                        let direct = synth_path_matrix(
                            m,
                            1,
                            self.path_len,
                            primary.delay,
                            primary.decay,
                            p_seed,
                        )?;
                        PathMatrix::diagonal(direct.column(0))?
                    }
                };
                let sec = secondary.build(m, k, self.path_len, s_seed)?;
                (pri, sec)
            }
            PathSource::Csv { primary, secondary } => (
                io::read_path_matrix(primary)?,
                io::read_path_matrix(secondary)?,
            ),
        };
        if primary.outputs() != m || primary.inputs() != j {
            return Err(Error::config(
                "path_source.primary",
                format!(
                    "expected {m}×{j} paths, got {}×{}",
                    primary.outputs(),
                    primary.inputs()
                ),
            ));
        }
        check_secondary("path_source.secondary", &secondary, m, k, self.path_len)?;
        Ok((primary, secondary))
    }

    pub fn build_sec_estimate(&self, plant: &PathMatrix) -> Result<PathMatrix> {
        match &self.sec_estimate_source {
            SecEstimateSource::SameAsPlant => Ok(plant.clone()),
            SecEstimateSource::Csv(p) => {
                let est = io::read_path_matrix(p)?;
                check_secondary(
                    "sec_estimate_source",
                    &est,
                    self.num_mics,
                    self.num_speakers,
                    self.path_len,
                )?;
                Ok(est)
            }
        }
    }

    /// Reference `J × T` and disturbance `M × T`.
    pub fn build_signals(&self, primary: &PathMatrix) -> Result<(SignalMatrix, SignalMatrix)> {
        let t = self.num_samples();
        let bandpass = design_bandpass(&self.band())?;
        let noise = white_gaussian(t, self.seeds.noise);
        let reference = make_reference(
            &noise,
            &bandpass,
            self.num_references,
            self.reference_mode,
            &self.reference_seeds(),
            self.sample_rate_hz,
        )?;
        let disturbance = make_disturbance(primary, &reference)?;
        Ok((reference, disturbance))
    }
}

fn check_secondary(field: &str, p: &PathMatrix, m: usize, k: usize, len: usize) -> Result<()> {
    if p.outputs() != m || p.inputs() != k || p.taps() != len {
        return Err(Error::config(
            field,
            format!(
                "expected {m}×{k} paths of {len} taps, got {}×{} of {}",
                p.outputs(),
                p.inputs(),
                p.taps()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Diverged { sample: usize },
}

/// Everything a scenario produces. After a divergence, `error` and
/// `disturbance` hold only the finite prefix.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub config: ScenarioConfig,
    pub outcome: Outcome,
    pub error: Vec<Vec<f64>>,
    pub disturbance: Vec<Vec<f64>>,
    pub coefficients: Coefficients,
    pub snapshots: Vec<Snapshot>,
    pub metrics: MetricsReport,
    pub wall_time_s: f64,
}

/// Builds every input from the config and runs the cancellation loop.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimResult> {
    cfg.validate()?;
    let started = Instant::now();
    let (primary, plant) = cfg.build_paths()?;
    let estimate = cfg.build_sec_estimate(&plant)?;
    let (reference, disturbance) = cfg.build_signals(&primary)?;

    let mut controller = McFxLmsController::new(
        cfg.topology,
        cfg.dims(),
        cfg.filter_len,
        cfg.step_size,
        &estimate,
        &plant,
    )?
    .with_parallel(cfg.parallel_units);
    let opts = RunOptions {
        snapshot_stride: cfg.snapshot_stride,
        record_speaker_outputs: false,
    };
    let (outcome, output) = match controller.run(&reference, &disturbance, &opts) {
        Ok(out) => (Outcome::Completed, out),
        Err(Error::RunDiverged(div)) => (Outcome::Diverged { sample: div.sample }, div.partial),
        Err(e) => return Err(e),
    };
    let RunOutput {
        error, snapshots, ..
    } = output;
    let t = error[0].len();
    let disturbance: Vec<Vec<f64>> = disturbance
        .into_rows()
        .into_iter()
        .map(|mut r| {
            r.truncate(t);
            r
        })
        .collect();
    let mut metrics = compute_metrics(&error, &disturbance, cfg.block_len())?;
    metrics.cost_trace = cost_trace(&error, cfg.snapshot_stride);

    Ok(SimResult {
        config: cfg.clone(),
        outcome,
        error,
        disturbance,
        coefficients: controller.coefficients(),
        snapshots,
        metrics,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

pub const ERROR_FILE: &str = "error.csv";
pub const DISTURBANCE_FILE: &str = "disturbance.csv";
pub const COEFFICIENTS_FILE: &str = "coefficients.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const COST_FILE: &str = "cost.csv";
pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const DIVERGED_FILE: &str = "DIVERGED";

/// Writes the result files into `out_dir` and returns their paths.
///
/// Contents depend only on the simulated data, never on timing.
pub fn export_result(res: &SimResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = io::ensure_dir(out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    io::write_signals(&emit(ERROR_FILE), "mic", &res.error)?;
    io::write_signals(&emit(DISTURBANCE_FILE), "mic", &res.disturbance)?;
    io::write_coefficients(&emit(COEFFICIENTS_FILE), &res.coefficients)?;
    let metrics_path = emit(METRICS_FILE);
    io::write_text(&metrics_path, &res.metrics.to_csv_string())?;
    io::write_text(&emit(CONFIG_FILE), &res.config.to_json())?;

    if res.config.snapshot_stride > 0 {
        let (n, j): (Vec<f64>, Vec<f64>) = res
            .metrics
            .cost_trace
            .iter()
            .map(|&(n, j)| (n as f64, j))
            .unzip();
        let p = emit(COST_FILE);
        let mut f = std::fs::File::create(&p).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        })?;
        io::write_columns(&mut f, &["sample".into(), "cost".into()], &[&n, &j]).map_err(
            |source| Error::Io {
                path: p.clone(),
                source,
            },
        )?;
        write_snapshots(&emit(SNAPSHOTS_FILE), &res.snapshots, &res.coefficients)?;
    }

    let marker = dir.join(DIVERGED_FILE);
    match res.outcome {
        Outcome::Diverged { sample } => {
            io::write_text(&marker, &format!("diverged_at_sample={sample}\n"))?;
            written.push(marker);
        }
        Outcome::Completed => {
            if marker.exists() {
                std::fs::remove_file(&marker).map_err(|source| Error::Io {
                    path: marker,
                    source,
                })?;
            }
        }
    }
    Ok(written)
}

/// `sample,tap,<coefficient labels…>`, one row per (snapshot, tap).
fn write_snapshots(path: &Path, snapshots: &[Snapshot], like: &Coefficients) -> Result<()> {
    let mut headers = vec!["sample".to_owned(), "tap".to_owned()];
    headers.extend(like.labels());
    let mut samples = Vec::new();
    let mut taps = Vec::new();
    let mut cols = vec![Vec::new(); like.units.len()];
    for s in snapshots {
        for i in 0..s.coefficients.filter_len {
            samples.push(s.sample as f64);
            taps.push(i as f64);
            for (c, u) in cols.iter_mut().zip(&s.coefficients.units) {
                c.push(u[i]);
            }
        }
    }
    let mut refs: Vec<&[f64]> = vec![&samples, &taps];
    refs.extend(cols.iter().map(Vec::as_slice));
    let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    io::write_columns(&mut f, &headers, &refs).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
