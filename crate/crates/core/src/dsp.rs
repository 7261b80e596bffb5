//! Streaming primitives shared by every stage of the simulation.
//!
//! A [`DelayLine`] is a fixed-length, newest-first history. It is backed by a
//! double-written circular buffer so the current window is always one
//! contiguous slice; pushing is O(1) and [`dot`] walks taps from index 0
//! (newest sample) upward. [`filter_batch`] uses the same accumulation order,
//! so streaming and batch filtering agree bit-for-bit.

use crate::error::{Error, Result};

/// Fixed-length newest-first sample history.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    // Every sample is stored twice (at `pos` and `pos + len`) so that
    // `buf[pos..pos + len]` is the full window, newest first.
    buf: Vec<f64>,
    pos: usize,
    len: usize,
}

impl DelayLine {
    /// A zero-filled line of `len` samples. `len` must be at least 1.
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("delay line length", "must be at least 1"));
        }
        Ok(Self {
            buf: vec![0.0; 2 * len],
            pos: 0,
            len,
        })
    }

    /// Builds a line holding `data` (index 0 = newest).
    pub fn from_slice(data: &[f64]) -> Result<Self> {
        let mut line = Self::new(data.len())?;
        for &v in data.iter().rev() {
            line.push(v)?;
        }
        Ok(line)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shifts the history by one and stores `sample` at index 0.
    pub fn push(&mut self, sample: f64) -> Result<()> {
        if !sample.is_finite() {
            return Err(Error::NonFinite {
                what: "delay line input",
            });
        }
        self.push_unchecked(sample);
        Ok(())
    }

    #[inline]
    pub(crate) fn push_unchecked(&mut self, sample: f64) {
        self.pos = if self.pos == 0 {
            self.len - 1
        } else {
            self.pos - 1
        };
        self.buf[self.pos] = sample;
        self.buf[self.pos + self.len] = sample;
    }

    /// Current window, newest first.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.len]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.as_slice()[i]
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.pos = 0;
    }
}

/// One finite impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
}

impl FirFilter {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("FIR filter", "needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { what: "FIR taps" });
        }
        Ok(Self { taps })
    }

    /// Unit impulse of the given length.
    pub fn impulse(len: usize) -> Result<Self> {
        let mut taps = vec![0.0; len.max(1)];
        taps[0] = 1.0;
        Self::new(taps)
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    #[inline]
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.taps.iter().all(|&t| t == 0.0)
    }

    pub fn into_taps(self) -> Vec<f64> {
        self.taps
    }
}

/// Inner product of a line and a tap vector, accumulated from index 0 up.
pub fn dot(line: &DelayLine, taps: &FirFilter) -> Result<f64> {
    if line.len() != taps.len() {
        return Err(Error::dim("dot product length", line.len(), taps.len()));
    }
    Ok(dot_slices(line.as_slice(), taps.taps()))
}

/// The pinned accumulation: `acc = 0; acc += a[i] * b[i]` for ascending `i`.
#[inline]
pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Causal FIR filtering from zero initial state; output length equals input length.
pub fn filter_batch(fir: &FirFilter, input: &[f64]) -> Result<Vec<f64>> {
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "filter input",
        });
    }
    let taps = fir.taps();
    let out = (0..input.len())
        .map(|n| {
            // Pre-history samples are zeros and still take part in the sum,
            // exactly as they do in a freshly zeroed DelayLine.
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let x = if i <= n { input[n - i] } else { 0.0 };
                acc += t * x;
            }
            acc
        })
        .collect();
    Ok(out)
}
