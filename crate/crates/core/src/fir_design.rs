//! Window-method bandpass design (Hamming window, unit gain at band centre).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::FirFilter;
use crate::error::{Error, Result};

/// Bandpass request. Edges are normalized so that 1.0 is Nyquist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub order: usize,
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub fn new(order: usize, lo: f64, hi: f64) -> Result<Self> {
        let spec = Self { order, lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || !self.order.is_multiple_of(2) {
            return Err(Error::invalid(
                "band spec",
                format!(
                    "order must be even and positive (got {}); a type-I linear-phase bandpass needs an odd tap count",
                    self.order
                ),
            ));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::NonFinite { what: "band edges" });
        }
        if !(0.0 < self.lo && self.lo < self.hi && self.hi < 1.0) {
            return Err(Error::invalid(
                "band spec",
                format!(
                    "edges must satisfy 0 < lo < hi < 1 (got lo={}, hi={})",
                    self.lo, self.hi
                ),
            ));
        }
        Ok(())
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Hamming-windowed ideal bandpass, `order + 1` taps.
pub fn design_bandpass(spec: &BandSpec) -> Result<FirFilter> {
    let taps = windowed_bandpass(spec)?;
    let gain = magnitude_at(&taps, spec.center());
    FirFilter::new(taps.into_iter().map(|t| t / gain).collect())
}

/// The windowed sinc difference before gain normalization.
pub(crate) fn windowed_bandpass(spec: &BandSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let order = spec.order;
    let mid = (order / 2) as i64;
    let taps = (0..=order)
        .map(|n| {
            let k = n as i64 - mid;
            let ideal = if k == 0 {
                spec.hi - spec.lo
            } else {
                let t = k as f64;
                ((PI * spec.hi * t).sin() - (PI * spec.lo * t).sin()) / (PI * t)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / order as f64).cos();
            ideal * window
        })
        .collect();
    Ok(taps)
}

/// |H(e^{jπf})| for a normalized frequency `f` in [0, 1].
pub fn magnitude_at(taps: &[f64], f: f64) -> f64 {
    let omega = PI * f;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &h) in taps.iter().enumerate() {
        let phase = omega * n as f64;
        re += h * phase.cos();
        im -= h * phase.sin();
    }
    re.hypot(im)
}

/// Magnitude response on `n_points` evenly spaced frequencies from 0 to Nyquist.
pub fn magnitude_response(fir: &FirFilter, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::invalid(
            "magnitude response",
            "needs at least 2 points",
        ));
    }
    let last = (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|k| magnitude_at(fir.taps(), k as f64 / last))
        .collect())
}

/// Passband ripple and stopband floor of a designed filter, for reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSummary {
    pub passband_min_db: f64,
    pub passband_max_db: f64,
    pub stopband_max_db: f64,
}

/// Summarises the response over `[lo + pass_guard, hi - pass_guard]`
/// (passband) and everything outside `[lo - stop_guard, hi + stop_guard]`
/// (stopband).
pub fn summarize(
    fir: &FirFilter,
    spec: &BandSpec,
    pass_guard: f64,
    stop_guard: f64,
    n_points: usize,
) -> Result<BandSummary> {
    let mags = magnitude_response(fir, n_points)?;
    let last = (n_points - 1) as f64;
    let db = |m: f64| 20.0 * m.log10();
    let mut summary = BandSummary {
        passband_min_db: f64::INFINITY,
        passband_max_db: f64::NEG_INFINITY,
        stopband_max_db: f64::NEG_INFINITY,
    };
    for (k, &m) in mags.iter().enumerate() {
        let f = k as f64 / last;
        if f >= spec.lo + pass_guard && f <= spec.hi - pass_guard {
            summary.passband_min_db = summary.passband_min_db.min(db(m));
            summary.passband_max_db = summary.passband_max_db.max(db(m));
        } else if f <= spec.lo - stop_guard || f >= spec.hi + stop_guard {
            summary.stopband_max_db = summary.stopband_max_db.max(db(m));
        }
    }
    Ok(summary)
}
