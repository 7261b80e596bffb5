mod common;

use common::{bits, fixture, nested, problem};
use mcanc_core::dsp::filter_batch;
use mcanc_core::signal::{split_seed, white_gaussian};
use mcanc_core::{
    ControlUnit, Dims, Error, FirFilter, McFxLmsController, PathMatrix, RunOptions, SignalMatrix,
    Topology,
};
use mcanc_oracle::{filtered_reference, naive_run, naive_run_with_weights, unit_pairs};
use proptest::prelude::*;

fn run_errors(c: &mut McFxLmsController, x: &SignalMatrix, d: &SignalMatrix) -> Vec<Vec<f64>> {
    c.run(x, d, &RunOptions::default()).unwrap().error
}

#[test]
fn matches_oracle_fully_connected() {
    let fx = fixture(2, 2, 2, 4, 500, 11);
    let mut c = fx.controller(Topology::FullyConnected, 8, 1e-3);
    let got = run_errors(&mut c, &fx.reference, &fx.disturbance);
    let sec = fx.nested_secondary();
    let want = naive_run(&problem(Topology::FullyConnected, 8, 1e-3, &sec, &fx)).unwrap();
    assert_eq!(bits(&got), bits(&want));
}

#[test]
fn matches_oracle_collocated() {
    let fx = fixture(2, 2, 2, 4, 500, 12);
    let mut c = fx.controller(Topology::Collocated, 8, 1e-3);
    let got = run_errors(&mut c, &fx.reference, &fx.disturbance);
    let sec = fx.nested_secondary();
    let want = naive_run(&problem(Topology::Collocated, 8, 1e-3, &sec, &fx)).unwrap();
    assert_eq!(bits(&got), bits(&want));
}

#[test]
fn matches_oracle_uneven_dims() {
    let fx = fixture(3, 2, 4, 5, 200, 13);
    let mut c = fx.controller(Topology::FullyConnected, 6, 5e-4);
    let got = run_errors(&mut c, &fx.reference, &fx.disturbance);
    let sec = fx.nested_secondary();
    let want = naive_run(&problem(Topology::FullyConnected, 6, 5e-4, &sec, &fx)).unwrap();
    assert_eq!(bits(&got), bits(&want));
}

#[test]
fn final_weights_match_oracle() {
    let fx = fixture(2, 2, 2, 4, 300, 14);
    let mut c = fx.controller(Topology::FullyConnected, 8, 1e-3);
    run_errors(&mut c, &fx.reference, &fx.disturbance);
    let sec = fx.nested_secondary();
    let st = naive_run_with_weights(&problem(Topology::FullyConnected, 8, 1e-3, &sec, &fx), None)
        .unwrap();
    let coef = c.coefficients();
    for (u, &(k, j)) in unit_pairs(mcanc_oracle::Structure::FullyConnected, 2, 2)
        .iter()
        .enumerate()
    {
        assert_eq!(coef.filter(k, j).unwrap(), st.w[u].as_slice());
    }
}

#[test]
fn plant_mismatch_matches_oracle() {
    let fx = fixture(2, 2, 2, 4, 300, 15);
    let est = fx.secondary.map(|v| 0.8 * v).unwrap();
    let mut c = McFxLmsController::new(
        Topology::FullyConnected,
        fx.dims,
        8,
        1e-3,
        &est,
        &fx.secondary,
    )
    .unwrap();
    let got = run_errors(&mut c, &fx.reference, &fx.disturbance);
    let est_n = nested(&est);
    let plant_n = fx.nested_secondary();
    let mut p = problem(Topology::FullyConnected, 8, 1e-3, &plant_n, &fx);
    p.sec_estimate = &est_n;
    assert_eq!(bits(&got), bits(&naive_run(&p).unwrap()));
}

#[test]
fn scale_invariance_is_exact() {
    let fx = fixture(2, 2, 2, 4, 500, 21);
    let mut base = fx.controller(Topology::FullyConnected, 8, 1e-3);
    let e = run_errors(&mut base, &fx.reference, &fx.disturbance);
    let mut scaled = fx.controller(Topology::FullyConnected, 8, 1e-3 / 4.0);
    let e2 = run_errors(
        &mut scaled,
        &fx.reference.scaled(2.0).unwrap(),
        &fx.disturbance.scaled(2.0).unwrap(),
    );
    let doubled: Vec<Vec<f64>> = e
        .iter()
        .map(|r| r.iter().map(|v| 2.0 * v).collect())
        .collect();
    assert_eq!(bits(&e2), bits(&doubled));
}

#[test]
fn gradient_matches_finite_differences() {
    let fx = fixture(2, 2, 2, 4, 60, 31);
    let n_taps = 8;
    let t_end = 59;
    let base_w: Vec<Vec<f64>> = (0..4)
        .map(|u| white_gaussian(n_taps, split_seed(99, u)))
        .collect();
    let pairs = [(0, 0), (0, 1), (1, 0), (1, 1)];

    let cost = |unit: usize, tap: usize, delta: f64| {
        let mut c = fx.controller(Topology::FullyConnected, n_taps, 0.0);
        for (u, &(k, j)) in pairs.iter().enumerate() {
            let mut w = base_w[u].clone();
            if u == unit {
                w[tap] += delta;
            }
            c.set_filter(k, j, &w).unwrap();
        }
        let e = run_errors(&mut c, &fx.reference, &fx.disturbance);
        (e.iter().map(|r| r[t_end] * r[t_end]).sum::<f64>(), e)
    };

    let (_, e) = cost(0, 0, 0.0);
    let sec = fx.nested_secondary();
    let eps = 1e-6;
    for (unit, &(k, j)) in pairs.iter().enumerate() {
        for tap in [0, 3, 7] {
            let numeric = (cost(unit, tap, eps).0 - cost(unit, tap, -eps).0) / (2.0 * eps);
            let analytic = -2.0
                * (0..2)
                    .map(|m| {
                        e[m][t_end]
                            * filtered_reference(
                                &sec[m][k],
                                fx.reference.row(j),
                                (t_end - tap) as isize,
                            )
                    })
                    .sum::<f64>();
            let rel = (numeric - analytic).abs() / analytic.abs().max(1e-12);
            assert!(
                rel <= 1e-4,
                "unit {unit} tap {tap}: {numeric} vs {analytic}"
            );
        }
    }
}

#[test]
fn plant_superposition_holds() {
    let fx = fixture(2, 3, 2, 4, 400, 41);
    let mut c = fx.controller(Topology::FullyConnected, 8, 1e-3);
    let opts = RunOptions {
        snapshot_stride: 0,
        record_speaker_outputs: true,
    };
    let out = c.run(&fx.reference, &fx.disturbance, &opts).unwrap();
    let ys = out.speaker_outputs.unwrap();
    for m in 0..2 {
        let mut total = out.error[m].clone();
        for (k, y) in ys.iter().enumerate() {
            let through = filter_batch(fx.secondary.get(m, k), y).unwrap();
            total.iter_mut().zip(&through).for_each(|(a, b)| *a += b);
        }
        for (n, (a, d)) in total.iter().zip(fx.disturbance.row(m)).enumerate() {
            assert!((a - d).abs() <= 1e-10, "mic {m} sample {n}");
        }
    }
}

#[test]
fn negated_paths_give_same_error_and_negated_filters() {
    let fx = fixture(2, 2, 2, 4, 400, 51);
    let neg = fx.secondary.map(|v| -v).unwrap();
    let mut a = fx.controller(Topology::FullyConnected, 8, 1e-3);
    let mut b =
        McFxLmsController::new(Topology::FullyConnected, fx.dims, 8, 1e-3, &neg, &neg).unwrap();
    let ea = run_errors(&mut a, &fx.reference, &fx.disturbance);
    let eb = run_errors(&mut b, &fx.reference, &fx.disturbance);
    assert_eq!(bits(&ea), bits(&eb));
    let wa = a.coefficients().units;
    let wb = b.coefficients().units;
    for (ua, ub) in wa.iter().zip(&wb) {
        for (x, y) in ua.iter().zip(ub) {
            assert_eq!(x.to_bits(), (-y).to_bits());
        }
    }
}

#[test]
fn mirrored_sign_pair_is_equivalent() {
    // e = d + s*y with w -= mu e x', run naively on a single channel.
    let s = [0.9, -0.4, 0.2];
    let x = white_gaussian(300, 5);
    let p = filter_batch(&FirFilter::new(vec![0.0, 0.5, -0.3, 0.1]).unwrap(), &x).unwrap();
    let (n_taps, mu) = (4, 2e-3);
    let mut w = vec![0.0; n_taps];
    let mut y = Vec::new();
    let mut e_mirror: Vec<f64> = Vec::new();
    for n in 0..x.len() {
        let e_prev = if n == 0 { 0.0 } else { e_mirror[n - 1] };
        for (i, wi) in w.iter_mut().enumerate() {
            let xp = mcanc_oracle::filtered_reference(&s, &x[..n], n as isize - 1 - i as isize);
            *wi -= mu * e_prev * xp;
        }
        let yn: f64 = (0..n_taps)
            .filter(|&i| i <= n)
            .map(|i| w[i] * x[n - i])
            .sum();
        y.push(yn);
        let anti: f64 = (0..s.len())
            .filter(|&l| l <= n)
            .map(|l| s[l] * y[n - l])
            .sum();
        e_mirror.push(p[n] + anti);
    }

    let neg = PathMatrix::new(
        1,
        1,
        vec![FirFilter::new(s.iter().map(|v| -v).collect()).unwrap()],
    )
    .unwrap();
    let dims = Dims {
        references: 1,
        speakers: 1,
        mics: 1,
    };
    let mut c = McFxLmsController::new(Topology::Collocated, dims, n_taps, mu, &neg, &neg).unwrap();
    let e = run_errors(
        &mut c,
        &SignalMatrix::new(vec![x.clone()], 1.0).unwrap(),
        &SignalMatrix::new(vec![p.clone()], 1.0).unwrap(),
    );
    for (a, b) in e[0].iter().zip(&e_mirror) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn parallel_units_match_serial() {
    let fx = fixture(3, 2, 3, 5, 300, 61);
    let mut serial = fx.controller(Topology::FullyConnected, 8, 1e-3);
    let mut par = fx
        .controller(Topology::FullyConnected, 8, 1e-3)
        .with_parallel(true);
    let a = run_errors(&mut serial, &fx.reference, &fx.disturbance);
    let b = run_errors(&mut par, &fx.reference, &fx.disturbance);
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(serial.coefficients(), par.coefficients());
}

#[test]
fn zero_step_size_freezes_everything() {
    let fx = fixture(2, 2, 2, 4, 300, 71);
    for topology in [Topology::Collocated, Topology::FullyConnected] {
        let mut c = fx.controller(topology, 8, 0.0);
        let e = run_errors(&mut c, &fx.reference, &fx.disturbance);
        assert_eq!(bits(&e), bits(fx.disturbance.rows()));
        assert!(c.coefficients().is_all_zero());
    }
}

#[test]
fn identical_units_superpose_exactly() {
    let s = PathMatrix::new(1, 2, vec![FirFilter::new(vec![0.7, 0.2]).unwrap(); 2]).unwrap();
    let one = PathMatrix::new(1, 1, vec![FirFilter::new(vec![0.7, 0.2]).unwrap()]).unwrap();
    let w = [0.3, -0.1, 0.05];
    let mut pair = McFxLmsController::new(
        Topology::FullyConnected,
        Dims {
            references: 1,
            speakers: 2,
            mics: 1,
        },
        3,
        0.0,
        &s,
        &s,
    )
    .unwrap();
    pair.set_filter(0, 0, &w).unwrap();
    pair.set_filter(1, 0, &w).unwrap();
    let mut single = McFxLmsController::new(
        Topology::Collocated,
        Dims {
            references: 1,
            speakers: 1,
            mics: 1,
        },
        3,
        0.0,
        &one,
        &one,
    )
    .unwrap();
    single.set_filter(0, 0, &w).unwrap();
    for x in white_gaussian(50, 3) {
        let a = pair.step(&[x], &[0.0]).unwrap();
        let b = single.step(&[x], &[0.0]).unwrap();
        assert_eq!(a[0].to_bits(), (2.0 * b[0]).to_bits());
    }
}

#[test]
fn update_uses_only_previous_errors() {
    // N = 1, s_hat = [1]: y(n) = w(n) x(n) with w(n) = w(n-1) + mu e(n-1) x(n-1).
    let mu = 0.5;
    let mut u = ControlUnit::new(vec![FirFilter::impulse(1).unwrap()], 1, mu).unwrap();
    let xs = [2.0, 3.0, 5.0];
    let es = [7.0, 11.0, 13.0];

    u.step(xs[0], &[es[0]]).unwrap();
    assert_eq!(u.weights(), &[0.0]);
    assert_eq!(u.output(), 0.0);

    u.step(xs[1], &[es[1]]).unwrap();
    // the error passed at sample 0 never reaches the filter: fd was still empty then
    let w1 = mu * es[1] * xs[0];
    assert_eq!(u.weights(), &[w1]);
    assert_eq!(u.output(), w1 * xs[1]);

    u.step(xs[2], &[es[2]]).unwrap();
    let w2 = w1 + mu * es[2] * xs[1];
    assert_eq!(u.weights(), &[w2]);
    assert_eq!(u.output(), w2 * xs[2]);
}

#[test]
fn divergence_reports_sample_and_prefix() {
    let fx = fixture(2, 2, 2, 4, 3000, 81);
    let mut c = fx.controller(Topology::FullyConnected, 8, 5.0);
    match c.run(&fx.reference, &fx.disturbance, &RunOptions::default()) {
        Err(Error::RunDiverged(d)) => {
            assert!(d.sample < 3000);
            assert!(d.partial.error.iter().all(|r| r.len() == d.sample));
            assert!(d.partial.error.iter().flatten().all(|v| v.is_finite()));
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_agrees_on_random_scenarios(
        seed in any::<u64>(),
        j in 1usize..3,
        k in 1usize..3,
        m in 1usize..3,
        n in 1usize..6,
        ls in 1usize..5,
        collocated in any::<bool>(),
    ) {
        let topology = if collocated { Topology::Collocated } else { Topology::FullyConnected };
        let k = if collocated { j } else { k };
        let fx = fixture(j, k, m, ls, 120, seed);
        let mut c = fx.controller(topology, n, 1e-3);
        let got = run_errors(&mut c, &fx.reference, &fx.disturbance);
        let sec = fx.nested_secondary();
        let want = naive_run(&problem(topology, n, 1e-3, &sec, &fx)).unwrap();
        prop_assert_eq!(bits(&got), bits(&want));
    }
}
