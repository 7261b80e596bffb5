//! Convergence metrics computed from error and disturbance signals.

use std::io::Write;

use crate::error::{Error, Result};

/// Fraction of the run (at the end) used for the noise-reduction figure.
pub const TAIL_FRACTION_DENOM: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub block_len: usize,
    /// `M × num_blocks` mean-square error per non-overlapping block.
    pub block_mse: Vec<Vec<f64>>,
    /// Per mic, `10 log10(mean d² / mean e²)` over the final tenth of the run.
    pub noise_reduction_db: Vec<f64>,
    /// Mics whose residual tail power is exactly zero (reported as +inf dB).
    pub saturated: Vec<bool>,
    /// `(n, Σ_m e_m(n)²)` at the snapshot stride; empty when not requested.
    pub cost_trace: Vec<(usize, f64)>,
}

fn mean_square(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
    }
    acc / x.len() as f64
}

/// Block MSE and tail noise reduction. A trailing partial block is dropped.
pub fn compute_metrics(
    error: &[Vec<f64>],
    disturbance: &[Vec<f64>],
    block_len: usize,
) -> Result<MetricsReport> {
    if block_len == 0 {
        return Err(Error::invalid("block length", "must be positive"));
    }
    if error.len() != disturbance.len() {
        return Err(Error::dim(
            "metric channels",
            disturbance.len(),
            error.len(),
        ));
    }
    if error.is_empty() {
        return Err(Error::invalid("metrics", "no channels"));
    }
    let t = disturbance[0].len();
    for (e, d) in error.iter().zip(disturbance) {
        if d.len() != t {
            return Err(Error::dim("disturbance length", t, d.len()));
        }
        if e.len() != t {
            return Err(Error::dim("error length", t, e.len()));
        }
    }
    if t == 0 {
        return Err(Error::invalid("metrics", "no samples"));
    }

    let block_mse = error
        .iter()
        .map(|e| e.chunks_exact(block_len).map(mean_square).collect())
        .collect();

    let tail = (t / TAIL_FRACTION_DENOM).max(1);
    let mut noise_reduction_db = Vec::with_capacity(error.len());
    let mut saturated = Vec::with_capacity(error.len());
    for (e, d) in error.iter().zip(disturbance) {
        let pe = mean_square(&e[t - tail..]);
        let pd = mean_square(&d[t - tail..]);
        let (nr, sat) = if pe > 0.0 {
            (10.0 * (pd / pe).log10(), false)
        } else if pd == 0.0 {
            // silent disturbance and silent residual: nothing was reduced
            (0.0, false)
        } else {
            (f64::INFINITY, true)
        };
        noise_reduction_db.push(nr);
        saturated.push(sat);
    }

    Ok(MetricsReport {
        block_len,
        block_mse,
        noise_reduction_db,
        saturated,
        cost_trace: Vec::new(),
    })
}

/// Instantaneous cost `Σ_m e_m(n)²` every `stride` samples.
pub fn cost_trace(error: &[Vec<f64>], stride: usize) -> Vec<(usize, f64)> {
    if stride == 0 || error.is_empty() {
        return Vec::new();
    }
    (0..error[0].len())
        .step_by(stride)
        .map(|n| {
            let mut j = 0.0;
            for e in error {
                j += e[n] * e[n];
            }
            (n, j)
        })
        .collect()
}

impl MetricsReport {
    /// Long-format CSV: `metric,mic,block,value`, mics 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "mic", "block", "value"])?;
        for (m, nr) in self.noise_reduction_db.iter().enumerate() {
            w.write_record(["nr_db", &(m + 1).to_string(), "", &nr.to_string()])?;
        }
        for (m, blocks) in self.block_mse.iter().enumerate() {
            for (b, v) in blocks.iter().enumerate() {
                w.write_record([
                    "block_mse",
                    &(m + 1).to_string(),
                    &b.to_string(),
                    &v.to_string(),
                ])?;
            }
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
