//! Multichannel filtered-reference LMS.
//!
//! A controller with `J` references, `K` loudspeakers and `M` error mics is a
//! grid of [`ControlUnit`]s. Each unit owns one adaptive FIR `w_kj` and the
//! four histories it needs: reference samples for its own output, reference
//! samples for filtered-reference generation, its own output samples for
//! secondary-path propagation, and the `N × M` filtered-reference history.
//!
//! Sign convention: `e = d - y'` and `w <- w + mu * sum_m e_m * x'_m`.
//! The mirrored pair (`e = d + y'`, `w <- w - mu * ...`) is the same algorithm
//! with both secondary-path matrices negated.
//!
//! Every sample, a unit
//!   1. pushes `x_in` into both reference histories,
//!   2. updates `w` with the error of the previous sample and the filtered
//!      references up to the previous sample,
//!   3. computes `y = w . x`,
//!   4. pushes `y` into its output history,
//!   5. propagates its output history through a secondary-path column,
//!   6. pushes the new filtered references `x'_m = s_hat_m . x`.
//!
//! Sums run over ascending indices everywhere (taps, mics, units) so runs are
//! reproducible bit-for-bit, including when units step in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{dot_slices, DelayLine, FirFilter};
use crate::error::{Error, Result};
use crate::signal::{PathMatrix, SignalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Reference `j` drives only loudspeaker `j` (requires `K == J`).
    Collocated,
    /// Every reference feeds every loudspeaker through its own filter.
    FullyConnected,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::Collocated => "collocated",
            Topology::FullyConnected => "fully-connected",
        }
    }
}

/// Channel counts of a controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub references: usize,
    pub speakers: usize,
    pub mics: usize,
}

/// One adaptive filter `w_kj` with its delay lines.
#[derive(Debug, Clone)]
pub struct ControlUnit {
    weights: Vec<f64>,
    xd: DelayLine,
    xf: DelayLine,
    yd: DelayLine,
    // one newest-first line of length N per error mic
    fd: Vec<DelayLine>,
    sec_est: Vec<FirFilter>,
    step_size: f64,
    output: f64,
    samples: usize,
}

impl ControlUnit {
    /// `sec_est[m]` is the secondary-path estimate from this unit's
    /// loudspeaker to mic `m`.
    pub fn new(sec_est: Vec<FirFilter>, filter_len: usize, step_size: f64) -> Result<Self> {
        if sec_est.is_empty() {
            return Err(Error::invalid(
                "control unit",
                "needs at least one error mic",
            ));
        }
        if filter_len == 0 {
            return Err(Error::invalid(
                "control unit",
                "filter length must be positive",
            ));
        }
        if !(step_size >= 0.0 && step_size.is_finite()) {
            return Err(Error::invalid(
                "step size",
                format!("must be finite and non-negative, got {step_size}"),
            ));
        }
        let ls = sec_est[0].len();
        if let Some(p) = sec_est.iter().find(|p| p.len() != ls) {
            return Err(Error::dim("secondary path length", ls, p.len()));
        }
        Ok(Self {
            weights: vec![0.0; filter_len],
            xd: DelayLine::new(filter_len)?,
            xf: DelayLine::new(ls)?,
            yd: DelayLine::new(ls)?,
            fd: (0..sec_est.len())
                .map(|_| DelayLine::new(filter_len))
                .collect::<Result<_>>()?,
            sec_est,
            step_size,
            output: 0.0,
            samples: 0,
        })
    }

    pub fn filter_len(&self) -> usize {
        self.weights.len()
    }

    pub fn path_len(&self) -> usize {
        self.xf.len()
    }

    pub fn mics(&self) -> usize {
        self.sec_est.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Overwrites the adaptive taps, e.g. to probe a frozen filter.
    pub fn set_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.weights.len() {
            return Err(Error::dim("weights", self.weights.len(), w.len()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "weights" });
        }
        self.weights.copy_from_slice(w);
        Ok(())
    }

    /// Output `y` produced by the most recent step.
    pub fn output(&self) -> f64 {
        self.output
    }

    /// Filtered references `x'_m(n - lag)` for every mic.
    pub fn filtered_reference(&self, lag: usize) -> Vec<f64> {
        self.fd.iter().map(|line| line.get(lag)).collect()
    }

    /// Runs one full step and returns this unit's contribution at every mic,
    /// propagated through its own secondary-path estimate.
    pub fn step(&mut self, x_in: f64, e_prev: &[f64]) -> Result<Vec<f64>> {
        self.advance(x_in, e_prev)?;
        let mut out = vec![0.0; self.mics()];
        propagate(&self.yd, &self.sec_est, &mut out);
        Ok(out)
    }

    /// Steps 1-4 and 6; step 5 is left to the caller so that the physical
    /// plant can differ from the estimate.
    fn advance(&mut self, x_in: f64, e_prev: &[f64]) -> Result<()> {
        if e_prev.len() != self.fd.len() {
            return Err(Error::dim("error frame", self.fd.len(), e_prev.len()));
        }
        if !x_in.is_finite() {
            return Err(Error::NonFinite {
                what: "reference sample",
            });
        }
        let sample = self.samples;
        self.samples += 1;

        self.xd.push_unchecked(x_in);
        self.xf.push_unchecked(x_in);

        let history: Vec<&[f64]> = self.fd.iter().map(DelayLine::as_slice).collect();
        let mu = self.step_size;
        let mut finite = true;
        for (i, w) in self.weights.iter_mut().enumerate() {
            let mut g = 0.0;
            for (e, h) in e_prev.iter().zip(&history) {
                g += e * h[i];
            }
            *w += mu * g;
            finite &= w.is_finite();
        }
        if !finite {
            return Err(Error::Diverged { sample });
        }

        let y = dot_slices(self.xd.as_slice(), &self.weights);
        if !y.is_finite() {
            return Err(Error::Diverged { sample });
        }
        self.output = y;
        self.yd.push_unchecked(y);

        for (line, s) in self.fd.iter_mut().zip(&self.sec_est) {
            line.push_unchecked(dot_slices(self.xf.as_slice(), s.taps()));
        }
        Ok(())
    }
}

/// `out[m] = Σ_i paths[m][i] * yd[i]`.
fn propagate(yd: &DelayLine, paths: &[FirFilter], out: &mut [f64]) {
    for (o, p) in out.iter_mut().zip(paths) {
        *o = dot_slices(p.taps(), yd.as_slice());
    }
}

/// Structure summary of a built controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerInfo {
    pub structure: &'static str,
    pub references: usize,
    pub speakers: usize,
    pub mics: usize,
    pub filter_len: usize,
    pub path_len: usize,
    pub units: usize,
}

impl std::fmt::Display for ControllerInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "structure={} references={} speakers={} mics={} filter_len={} path_len={} units={}",
            self.structure,
            self.references,
            self.speakers,
            self.mics,
            self.filter_len,
            self.path_len,
            self.units
        )
    }
}

/// Final (or snapshot) control filters.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub topology: Topology,
    pub filter_len: usize,
    pub speakers: usize,
    pub references: usize,
    /// One tap vector per unit, in unit order.
    pub units: Vec<Vec<f64>>,
}

impl Coefficients {
    /// `[N, K, J]` when fully connected, `[N, J]` when collocated.
    pub fn shape(&self) -> Vec<usize> {
        match self.topology {
            Topology::FullyConnected => vec![self.filter_len, self.speakers, self.references],
            Topology::Collocated => vec![self.filter_len, self.references],
        }
    }

    /// CSV column names in unit order (`k{k}_j{j}` or `j{j}`, 1-based).
    pub fn labels(&self) -> Vec<String> {
        match self.topology {
            Topology::FullyConnected => (0..self.speakers)
                .flat_map(|k| (0..self.references).map(move |j| format!("k{}_j{}", k + 1, j + 1)))
                .collect(),
            Topology::Collocated => (0..self.references)
                .map(|j| format!("j{}", j + 1))
                .collect(),
        }
    }

    /// Taps of the filter from reference `j` to speaker `k`.
    pub fn filter(&self, k: usize, j: usize) -> Option<&[f64]> {
        let idx = match self.topology {
            Topology::FullyConnected => {
                (k < self.speakers && j < self.references).then(|| k * self.references + j)
            }
            Topology::Collocated => (k == j && j < self.references).then_some(j),
        }?;
        Some(&self.units[idx])
    }

    pub fn is_all_zero(&self) -> bool {
        self.units.iter().flatten().all(|&w| w == 0.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record coefficients every `snapshot_stride` samples (0 = never).
    pub snapshot_stride: usize,
    /// Keep each loudspeaker's drive signal `y_k(n)`.
    pub record_speaker_outputs: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub sample: usize,
    pub coefficients: Coefficients,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `M × T` residual error.
    pub error: Vec<Vec<f64>>,
    /// `K × T` loudspeaker signals, when requested.
    pub speaker_outputs: Option<Vec<Vec<f64>>>,
    pub snapshots: Vec<Snapshot>,
}

/// A run that produced a non-finite filter. `partial.error` holds every
/// error sample computed before the failing one.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub sample: usize,
    pub partial: RunOutput,
}

/// Grid of control units plus the physical secondary paths.
#[derive(Debug, Clone)]
pub struct McFxLmsController {
    topology: Topology,
    dims: Dims,
    filter_len: usize,
    path_len: usize,
    step_size: f64,
    units: Vec<ControlUnit>,
    // physical paths from each unit's speaker to every mic
    plant: Vec<Vec<FirFilter>>,
    parallel: bool,
}

impl McFxLmsController {
    pub fn new(
        topology: Topology,
        dims: Dims,
        filter_len: usize,
        step_size: f64,
        sec_estimate: &PathMatrix,
        plant: &PathMatrix,
    ) -> Result<Self> {
        let Dims {
            references,
            speakers,
            mics,
        } = dims;
        if references == 0 || speakers == 0 || mics == 0 {
            return Err(Error::invalid(
                "controller",
                "channel counts must be positive",
            ));
        }
        for (what, p) in [
            ("secondary estimate", sec_estimate),
            ("secondary plant", plant),
        ] {
            if p.outputs() != mics {
                return Err(Error::Dimension {
                    what,
                    expected: mics,
                    actual: p.outputs(),
                });
            }
            if p.inputs() != speakers {
                return Err(Error::Dimension {
                    what,
                    expected: speakers,
                    actual: p.inputs(),
                });
            }
        }
        if plant.taps() != sec_estimate.taps() {
            return Err(Error::dim(
                "secondary plant length",
                sec_estimate.taps(),
                plant.taps(),
            ));
        }
        let speaker_of: Vec<usize> = match topology {
            Topology::Collocated => {
                if speakers != references {
                    return Err(Error::invalid(
                        "controller",
                        format!(
                            "collocated topology needs as many speakers as references (K={speakers}, J={references})"
                        ),
                    ));
                }
                (0..references).collect()
            }
            Topology::FullyConnected => (0..speakers)
                .flat_map(|k| std::iter::repeat_n(k, references))
                .collect(),
        };
        let units = speaker_of
            .iter()
            .map(|&k| ControlUnit::new(sec_estimate.column(k), filter_len, step_size))
            .collect::<Result<Vec<_>>>()?;
        let plant = speaker_of.iter().map(|&k| plant.column(k)).collect();
        Ok(Self {
            topology,
            dims,
            filter_len,
            path_len: sec_estimate.taps(),
            step_size,
            units,
            plant,
            parallel: false,
        })
    }

    /// Lets units step concurrently inside each sample. Results are identical
    /// to the serial path.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn info(&self) -> ControllerInfo {
        ControllerInfo {
            structure: self.topology.label(),
            references: self.dims.references,
            speakers: self.dims.speakers,
            mics: self.dims.mics,
            filter_len: self.filter_len,
            path_len: self.path_len,
            units: self.units.len(),
        }
    }

    pub fn units(&self) -> &[ControlUnit] {
        &self.units
    }

    /// `(speaker, reference)` served by unit `idx`.
    pub fn unit_coords(&self, idx: usize) -> (usize, usize) {
        match self.topology {
            Topology::Collocated => (idx, idx),
            Topology::FullyConnected => (idx / self.dims.references, idx % self.dims.references),
        }
    }

    fn unit_index(&self, k: usize, j: usize) -> Option<usize> {
        match self.topology {
            Topology::Collocated => (k == j && j < self.dims.references).then_some(j),
            Topology::FullyConnected => (k < self.dims.speakers && j < self.dims.references)
                .then(|| k * self.dims.references + j),
        }
    }

    pub fn unit(&self, k: usize, j: usize) -> Option<&ControlUnit> {
        self.unit_index(k, j).map(|i| &self.units[i])
    }

    /// Loads taps into the filter from reference `j` to speaker `k`.
    pub fn set_filter(&mut self, k: usize, j: usize, w: &[f64]) -> Result<()> {
        let idx = self
            .unit_index(k, j)
            .ok_or_else(|| Error::invalid("filter index", format!("no filter for k={k}, j={j}")))?;
        self.units[idx].set_weights(w)
    }

    /// Advances every unit by one sample and returns `y'(n)` at the mics.
    pub fn step(&mut self, x: &[f64], e_prev: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims.references {
            return Err(Error::dim("reference frame", self.dims.references, x.len()));
        }
        if e_prev.len() != self.dims.mics {
            return Err(Error::dim("error frame", self.dims.mics, e_prev.len()));
        }
        let mics = self.dims.mics;
        let refs = self.dims.references;
        let input_of = |idx: usize| match self.topology {
            Topology::Collocated => idx,
            Topology::FullyConnected => idx % refs,
        };
        let inputs: Vec<f64> = (0..self.units.len()).map(|i| x[input_of(i)]).collect();

        let mut anti = vec![0.0; mics];
        if self.parallel {
            let contributions = self
                .units
                .par_iter_mut()
                .zip(self.plant.par_iter())
                .zip(inputs.par_iter())
                .map(|((unit, plant), &x_in)| {
                    unit.advance(x_in, e_prev)?;
                    let mut c = vec![0.0; mics];
                    propagate(&unit.yd, plant, &mut c);
                    Ok(c)
                })
                .collect::<Vec<Result<Vec<f64>>>>();
            for c in contributions {
                let c = c?;
                anti.iter_mut().zip(&c).for_each(|(a, v)| *a += v);
            }
        } else {
            let mut c = vec![0.0; mics];
            for ((unit, plant), &x_in) in self.units.iter_mut().zip(&self.plant).zip(&inputs) {
                unit.advance(x_in, e_prev)?;
                propagate(&unit.yd, plant, &mut c);
                anti.iter_mut().zip(&c).for_each(|(a, v)| *a += v);
            }
        }
        Ok(anti)
    }

    /// Current drive signal of every loudspeaker, `y_k = Σ_j y_kj`.
    pub fn speaker_outputs(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dims.speakers];
        for (idx, unit) in self.units.iter().enumerate() {
            y[self.unit_coords(idx).0] += unit.output();
        }
        y
    }

    /// Copy of every unit's current taps.
    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            topology: self.topology,
            filter_len: self.filter_len,
            speakers: self.dims.speakers,
            references: self.dims.references,
            units: self.units.iter().map(|u| u.weights.clone()).collect(),
        }
    }

    /// Sample-synchronous cancellation loop: `y'(n) = step(x(n), e(n-1))`,
    /// `e(n) = d(n) - y'(n)`, with `e(-1) = 0`.
    ///
    /// A non-finite filter stops the run with [`Error::RunDiverged`], which
    /// carries everything computed up to the failing sample.
    pub fn run(
        &mut self,
        reference: &SignalMatrix,
        disturbance: &SignalMatrix,
        opts: &RunOptions,
    ) -> Result<RunOutput> {
        if reference.channels() != self.dims.references {
            return Err(Error::dim(
                "reference channels",
                self.dims.references,
                reference.channels(),
            ));
        }
        if disturbance.channels() != self.dims.mics {
            return Err(Error::dim(
                "disturbance channels",
                self.dims.mics,
                disturbance.channels(),
            ));
        }
        if reference.samples() != disturbance.samples() {
            return Err(Error::dim(
                "disturbance length",
                reference.samples(),
                disturbance.samples(),
            ));
        }
        let t_len = reference.samples();
        let mics = self.dims.mics;
        let mut out = RunOutput {
            error: vec![Vec::with_capacity(t_len); mics],
            speaker_outputs: opts
                .record_speaker_outputs
                .then(|| vec![Vec::with_capacity(t_len); self.dims.speakers]),
            snapshots: Vec::new(),
        };
        let mut e = vec![0.0; mics];
        let mut x = vec![0.0; self.dims.references];
        for n in 0..t_len {
            for (xj, row) in x.iter_mut().zip(reference.rows()) {
                *xj = row[n];
            }
            let anti = match self.step(&x, &e) {
                Ok(a) => a,
                Err(Error::Diverged { sample }) => {
                    return Err(Error::RunDiverged(Box::new(Divergence {
                        sample,
                        partial: out,
                    })))
                }
                Err(other) => return Err(other),
            };
            for m in 0..mics {
                e[m] = disturbance.row(m)[n] - anti[m];
                out.error[m].push(e[m]);
            }
            if let Some(ys) = out.speaker_outputs.as_mut() {
                for (row, y) in ys.iter_mut().zip(self.speaker_outputs()) {
                    row.push(y);
                }
            }
            if opts.snapshot_stride > 0 && n % opts.snapshot_stride == 0 {
                out.snapshots.push(Snapshot {
                    sample: n,
                    coefficients: self.coefficients(),
                });
            }
        }
        Ok(out)
    }
}
