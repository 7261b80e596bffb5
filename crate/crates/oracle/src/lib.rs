//! Naive multichannel FxLMS, written straight from the update equations.
//!
//! Nothing here is shared with `mcanc-core`: there are no delay lines, every
//! convolution is recomputed from the full signal history at every sample,
//! and inputs are plain nested vectors. It is slow (O(T·N·Ls·K·J·M)) and is
//! meant only to certify the streaming engine in tests.
//!
//! Summation orders match the engine (ascending taps, mics and units, each
//! sum starting from `0.0`), so the two agree bit-for-bit.

#![allow(clippy::needless_range_loop)]

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Collocated,
    FullyConnected,
}

/// Secondary paths are indexed `[m][k][tap]`; signals `[channel][sample]`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub structure: Structure,
    pub filter_len: usize,
    pub step_size: f64,
    pub sec_estimate: &'a [Vec<Vec<f64>>],
    pub plant: &'a [Vec<Vec<f64>>],
    pub reference: &'a [Vec<f64>],
    pub disturbance: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diverged {
    pub sample: usize,
    /// Error samples computed before the failing one, `[m][n]`.
    pub error_prefix: Vec<Vec<f64>>,
}

/// Append-only histories of the run so far.
#[derive(Debug, Clone)]
pub struct OracleState {
    /// `x[j][n]`
    pub x: Vec<Vec<f64>>,
    /// `y[unit][n]`, one history per (k, j) filter
    pub y: Vec<Vec<f64>>,
    /// `w[unit][i]`
    pub w: Vec<Vec<f64>>,
    /// `e[m][n]`
    pub e: Vec<Vec<f64>>,
}

/// `(k, j)` for each filter, in the order their outputs are summed.
pub fn unit_pairs(structure: Structure, refs: usize, speakers: usize) -> Vec<(usize, usize)> {
    match structure {
        Structure::Collocated => (0..refs).map(|j| (j, j)).collect(),
        Structure::FullyConnected => {
            let mut v = Vec::new();
            for k in 0..speakers {
                for j in 0..refs {
                    v.push((k, j));
                }
            }
            v
        }
    }
}

fn at(signal: &[f64], t: isize) -> f64 {
    if t < 0 {
        0.0
    } else {
        signal[t as usize]
    }
}

/// `x'_jkm(t) = Σ_l s_hat_mk[l] · x_j(t - l)`; zero before the signal starts.
pub fn filtered_reference(s_mk: &[f64], x_j: &[f64], t: isize) -> f64 {
    if t < 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (l, s) in s_mk.iter().enumerate() {
        acc += at(x_j, t - l as isize) * s;
    }
    acc
}

pub fn naive_run(p: &Problem) -> Result<Vec<Vec<f64>>, Diverged> {
    naive_run_with_weights(p, None).map(|state| state.e)
}

/// Like [`naive_run`], optionally starting from given filters (`[unit][tap]`
/// in [`unit_pairs`] order), and returning the full state.
pub fn naive_run_with_weights(
    p: &Problem,
    initial: Option<&[Vec<f64>]>,
) -> Result<OracleState, Diverged> {
    let refs = p.reference.len();
    let mics = p.disturbance.len();
    let speakers = p.plant[0].len();
    let total = p.reference[0].len();
    let pairs = unit_pairs(p.structure, refs, speakers);

    let mut st = OracleState {
        x: vec![Vec::new(); refs],
        y: vec![Vec::new(); pairs.len()],
        w: match initial {
            Some(w) => w.to_vec(),
            None => vec![vec![0.0; p.filter_len]; pairs.len()],
        },
        e: vec![Vec::new(); mics],
    };

    for n in 0..total {
        for j in 0..refs {
            st.x[j].push(p.reference[j][n]);
        }
        let e_prev: Vec<f64> = (0..mics)
            .map(|m| if n == 0 { 0.0 } else { st.e[m][n - 1] })
            .collect();
        let mut anti = vec![0.0; mics];

        for (u, &(k, j)) in pairs.iter().enumerate() {
            // w(n) = w(n-1) + mu Σ_m e_m(n-1) x'_jkm(n-1-i)
            for i in 0..p.filter_len {
                let mut g = 0.0;
                for m in 0..mics {
                    let xp = filtered_reference(
                        &p.sec_estimate[m][k],
                        &st.x[j],
                        n as isize - 1 - i as isize,
                    );
                    g += e_prev[m] * xp;
                }
                st.w[u][i] += p.step_size * g;
            }
            if st.w[u].iter().any(|v| !v.is_finite()) {
                return Err(Diverged {
                    sample: n,
                    error_prefix: st.e,
                });
            }

            // y_kj(n) = Σ_i w_i x_j(n - i)
            let mut y = 0.0;
            for i in 0..p.filter_len {
                y += at(&st.x[j], n as isize - i as isize) * st.w[u][i];
            }
            if !y.is_finite() {
                return Err(Diverged {
                    sample: n,
                    error_prefix: st.e,
                });
            }
            st.y[u].push(y);

            // this filter's share of y'_m(n) = Σ_l s_mk[l] y_kj(n - l)
            for (m, a) in anti.iter_mut().enumerate() {
                let mut c = 0.0;
                for (l, s) in p.plant[m][k].iter().enumerate() {
                    c += s * at(&st.y[u], n as isize - l as isize);
                }
                *a += c;
            }
        }

        for m in 0..mics {
            st.e[m].push(p.disturbance[m][n] - anti[m]);
        }
    }
    Ok(st)
}
