#![allow(dead_code)]

use mcanc_core::signal::{make_disturbance, split_seed, white_gaussian};
use mcanc_core::{Dims, FirFilter, McFxLmsController, PathMatrix, SignalMatrix, Topology};
use mcanc_oracle::{Problem, Structure};

pub const FS: f64 = 16_000.0;

/// Small random scenario: secondary `M×K`, primary `M×J`, white references.
pub struct Fixture {
    pub dims: Dims,
    pub secondary: PathMatrix,
    pub reference: SignalMatrix,
    pub disturbance: SignalMatrix,
}

fn random_paths(outputs: usize, inputs: usize, taps: usize, seed: u64) -> PathMatrix {
    PathMatrix::from_fn(outputs, inputs, |o, i| {
        let g = white_gaussian(taps, split_seed(seed, (o * inputs + i) as u64));
        FirFilter::new(g.iter().map(|v| 0.5 * v).collect())
    })
    .unwrap()
}

pub fn fixture(j: usize, k: usize, m: usize, ls: usize, t: usize, seed: u64) -> Fixture {
    let secondary = random_paths(m, k, ls, split_seed(seed, 0));
    let primary = random_paths(m, j, ls, split_seed(seed, 1));
    let rows = (0..j)
        .map(|r| white_gaussian(t, split_seed(seed, 10 + r as u64)))
        .collect();
    let reference = SignalMatrix::new(rows, FS).unwrap();
    let disturbance = make_disturbance(&primary, &reference).unwrap();
    Fixture {
        dims: Dims {
            references: j,
            speakers: k,
            mics: m,
        },
        secondary,
        reference,
        disturbance,
    }
}

impl Fixture {
    pub fn controller(&self, topology: Topology, n: usize, mu: f64) -> McFxLmsController {
        McFxLmsController::new(topology, self.dims, n, mu, &self.secondary, &self.secondary)
            .unwrap()
    }

    /// `[m][k][tap]` as the oracle expects.
    pub fn nested_secondary(&self) -> Vec<Vec<Vec<f64>>> {
        nested(&self.secondary)
    }
}

pub fn nested(p: &PathMatrix) -> Vec<Vec<Vec<f64>>> {
    (0..p.outputs())
        .map(|m| {
            (0..p.inputs())
                .map(|k| p.get(m, k).taps().to_vec())
                .collect()
        })
        .collect()
}

pub fn structure(t: Topology) -> Structure {
    match t {
        Topology::Collocated => Structure::Collocated,
        Topology::FullyConnected => Structure::FullyConnected,
    }
}

pub fn problem<'a>(
    topology: Topology,
    n: usize,
    mu: f64,
    sec: &'a [Vec<Vec<f64>>],
    fx: &'a Fixture,
) -> Problem<'a> {
    Problem {
        structure: structure(topology),
        filter_len: n,
        step_size: mu,
        sec_estimate: sec,
        plant: sec,
        reference: fx.reference.rows(),
        disturbance: fx.disturbance.rows(),
    }
}

pub fn bits(rows: &[Vec<f64>]) -> Vec<Vec<u64>> {
    rows.iter()
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect()
}
