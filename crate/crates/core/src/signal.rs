//! Seeded scenario inputs: white noise, bandpassed references, synthetic
//! acoustic paths and disturbance synthesis.
//!
//! All randomness comes from ChaCha20 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`, with standard-normal samples drawn by the
//! `rand_distr` ziggurat sampler. Both are value-stable within their pinned
//! versions. Independent streams are derived from one base seed with
//! [`split_seed`] (a SplitMix64 finalizer), so adding a path never perturbs
//! the samples of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::{filter_batch, FirFilter};
use crate::error::{Error, Result};

/// `channels × samples` block of real signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    rows: Vec<Vec<f64>>,
    sample_rate_hz: f64,
}

impl SignalMatrix {
    pub fn new(rows: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid(
                "signal matrix",
                "needs at least one channel",
            ));
        }
        let t = rows[0].len();
        if t == 0 {
            return Err(Error::invalid("signal matrix", "needs at least one sample"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != t) {
            return Err(Error::dim("signal matrix row length", t, bad.len()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "signal matrix",
            });
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample rate", format!("{sample_rate_hz}")));
        }
        Ok(Self {
            rows,
            sample_rate_hz,
        })
    }

    pub fn zeros(channels: usize, samples: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![vec![0.0; samples]; channels], sample_rate_hz)
    }

    pub fn channels(&self) -> usize {
        self.rows.len()
    }

    pub fn samples(&self) -> usize {
        self.rows[0].len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn row(&self, ch: usize) -> &[f64] {
        &self.rows[ch]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    /// All channels at sample `n`.
    pub fn frame(&self, n: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[n]).collect()
    }

    /// Element-wise scaling, used by invariance checks.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.rows
                .iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect(),
            self.sample_rate_hz,
        )
    }
}

/// Grid of equal-length impulse responses; entry `(out, inp)` maps input
/// channel `inp` to output channel `out` (e.g. mic `m` from speaker `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    outputs: usize,
    inputs: usize,
    taps: usize,
    // row-major over (out, inp)
    paths: Vec<FirFilter>,
}

impl PathMatrix {
    pub fn new(outputs: usize, inputs: usize, paths: Vec<FirFilter>) -> Result<Self> {
        if outputs == 0 || inputs == 0 {
            return Err(Error::invalid("path matrix", "dimensions must be positive"));
        }
        if paths.len() != outputs * inputs {
            return Err(Error::dim(
                "path matrix entries",
                outputs * inputs,
                paths.len(),
            ));
        }
        let taps = paths[0].len();
        if let Some(p) = paths.iter().find(|p| p.len() != taps) {
            return Err(Error::dim("path length", taps, p.len()));
        }
        Ok(Self {
            outputs,
            inputs,
            taps,
            paths,
        })
    }

    /// Builds a matrix from a closure over `(out, inp)`.
    pub fn from_fn(
        outputs: usize,
        inputs: usize,
        mut f: impl FnMut(usize, usize) -> Result<FirFilter>,
    ) -> Result<Self> {
        let mut paths = Vec::with_capacity(outputs * inputs);
        for o in 0..outputs {
            for i in 0..inputs {
                paths.push(f(o, i)?);
            }
        }
        Self::new(outputs, inputs, paths)
    }

    /// Square matrix with `diag[i]` on the diagonal and zero filters elsewhere.
    pub fn diagonal(diag: Vec<FirFilter>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("path matrix", "empty diagonal"));
        }
        let len = diag[0].len();
        let zero = FirFilter::zeros(len)?;
        let mut diag = diag.into_iter();
        Self::from_fn(n, n, |o, i| {
            if o == i {
                Ok(diag.next().expect("one diagonal entry per row"))
            } else {
                Ok(zero.clone())
            }
        })
    }

    /// Every entry is a unit impulse of length `taps`.
    pub fn impulses(outputs: usize, inputs: usize, taps: usize) -> Result<Self> {
        Self::from_fn(outputs, inputs, |_, _| FirFilter::impulse(taps))
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn get(&self, out: usize, inp: usize) -> &FirFilter {
        &self.paths[out * self.inputs + inp]
    }

    /// Paths from input `inp` to every output, in output order.
    pub fn column(&self, inp: usize) -> Vec<FirFilter> {
        (0..self.outputs)
            .map(|o| self.get(o, inp).clone())
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let paths = self
            .paths
            .iter()
            .map(|p| FirFilter::new(p.taps().iter().map(|&t| f(t)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.outputs, self.inputs, paths)
    }
}

/// Recipe for one synthetic room-like impulse response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSynthSpec {
    pub length: usize,
    pub delay: usize,
    pub decay: f64,
    pub seed: u64,
}

impl PathSynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::invalid("path spec", "length must be positive"));
        }
        if self.delay >= self.length {
            return Err(Error::invalid(
                "path spec",
                format!(
                    "delay ({}) must be less than length ({})",
                    self.delay, self.length
                ),
            ));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid(
                "path spec",
                format!("decay must lie in (0, 1), got {}", self.decay),
            ));
        }
        Ok(())
    }
}

/// How the reference channels relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// One bandpassed noise copied to every channel.
    #[default]
    Replicate,
    /// One independently seeded noise per channel.
    Independent,
}

/// Derives the `index`-th child seed of `base` (SplitMix64 finalizer).
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normals(rng: &mut ChaCha20Rng) -> impl Iterator<Item = f64> + '_ {
    std::iter::repeat_with(move || rng.sample::<f64, _>(StandardNormal))
}

/// `n` i.i.d. standard-normal samples, a pure function of `seed`.
pub fn white_gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    normals(&mut rng).take(n).collect()
}

/// Bandpassed reference signals for `num_refs` channels.
pub fn make_reference(
    noise: &[f64],
    bandpass: &FirFilter,
    num_refs: usize,
    mode: ReferenceMode,
    seeds: &[u64],
    sample_rate_hz: f64,
) -> Result<SignalMatrix> {
    if num_refs == 0 {
        return Err(Error::invalid("reference", "needs at least one channel"));
    }
    let rows = match mode {
        ReferenceMode::Replicate => {
            let row = filter_batch(bandpass, noise)?;
            vec![row; num_refs]
        }
        ReferenceMode::Independent => {
            if seeds.len() < num_refs {
                return Err(Error::invalid(
                    "reference seeds",
                    format!(
                        "independent mode needs {num_refs} seeds, got {}",
                        seeds.len()
                    ),
                ));
            }
            seeds[..num_refs]
                .iter()
                .map(|&s| filter_batch(bandpass, &white_gaussian(noise.len(), s)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    SignalMatrix::new(rows, sample_rate_hz)
}

/// `d_m = Σ_j p_mj * x_j`, summed over ascending `j`.
///
/// All-zero paths are skipped; they would only add zeros.
pub fn make_disturbance(primary: &PathMatrix, reference: &SignalMatrix) -> Result<SignalMatrix> {
    if primary.inputs() != reference.channels() {
        return Err(Error::dim(
            "primary path inputs vs reference channels",
            primary.inputs(),
            reference.channels(),
        ));
    }
    let t = reference.samples();
    let mut rows = Vec::with_capacity(primary.outputs());
    for m in 0..primary.outputs() {
        let mut d = vec![0.0; t];
        for j in 0..primary.inputs() {
            let p = primary.get(m, j);
            if p.is_zero() {
                continue;
            }
            let part = filter_batch(p, reference.row(j))?;
            d.iter_mut().zip(&part).for_each(|(acc, v)| *acc += v);
        }
        rows.push(d);
    }
    SignalMatrix::new(rows, reference.sample_rate_hz())
}

/// Delayed, exponentially decaying Gaussian noise, normalized to unit peak.
pub fn synth_path(spec: &PathSynthSpec) -> Result<FirFilter> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut taps = vec![0.0; spec.length];
    let mut envelope = 1.0;
    for (tap, g) in taps[spec.delay..].iter_mut().zip(normals(&mut rng)) {
        *tap = g * envelope;
        envelope *= spec.decay;
    }
    let peak = taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if peak == 0.0 {
        return Err(Error::invalid("path spec", "synthesized path is all zeros"));
    }
    taps.iter_mut().for_each(|t| *t /= peak);
    FirFilter::new(taps)
}

/// `outputs × inputs` synthetic paths sharing length/delay/decay, each seeded
/// with `split_seed(seed, out * inputs + inp)`.
pub fn synth_path_matrix(
    outputs: usize,
    inputs: usize,
    length: usize,
    delay: usize,
    decay: f64,
    seed: u64,
) -> Result<PathMatrix> {
    PathMatrix::from_fn(outputs, inputs, |o, i| {
        synth_path(&PathSynthSpec {
            length,
            delay,
            decay,
            seed: split_seed(seed, (o * inputs + i) as u64),
        })
    })
}
