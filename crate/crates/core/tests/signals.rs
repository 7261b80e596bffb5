use mcanc_core::fir_design::magnitude_response;
use mcanc_core::signal::{make_reference, white_gaussian, ReferenceMode};
use mcanc_core::{design_bandpass, BandSpec};
use rustfft::{num_complex::Complex, FftPlanner};

#[test]
fn bandpassed_reference_power_is_in_band() {
    let spec = BandSpec::new(512, 0.05, 0.1).unwrap();
    let bp = design_bandpass(&spec).unwrap();
    let n = 1 << 16;
    let x = make_reference(
        &white_gaussian(n, 2024),
        &bp,
        1,
        ReferenceMode::Replicate,
        &[],
        16_000.0,
    )
    .unwrap();

    let mut buf: Vec<Complex<f64>> = x.row(0).iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut inside, mut total) = (0.0, 0.0);
    for (b, c) in buf.iter().enumerate().take(n / 2 + 1) {
        // bin b sits at normalized frequency 2b/n (1.0 = Nyquist)
        let f = 2.0 * b as f64 / n as f64;
        let p = c.norm_sqr();
        total += p;
        if (0.04..=0.11).contains(&f) {
            inside += p;
        }
    }
    assert!(
        inside / total >= 0.95,
        "in-band fraction {}",
        inside / total
    );
}

#[test]
fn stopband_and_passband_bounds() {
    let f = design_bandpass(&BandSpec::new(512, 0.05, 0.1).unwrap()).unwrap();
    let mags = magnitude_response(&f, 4096).unwrap();
    let floor = 10f64.powf(-40.0 / 20.0);
    for (k, &m) in mags.iter().enumerate() {
        let freq = k as f64 / 4095.0;
        if freq <= 0.03 || freq >= 0.12 {
            assert!(m <= floor, "f={freq} |H|={m}");
        }
        if (0.06..=0.09).contains(&freq) {
            assert!((20.0 * m.log10()).abs() <= 1.0, "f={freq} |H|={m}");
        }
    }
}

#[test]
fn independent_rows_are_uncorrelated() {
    let bp = design_bandpass(&BandSpec::new(64, 0.1, 0.3).unwrap()).unwrap();
    let x = make_reference(
        &white_gaussian(20_000, 1),
        &bp,
        2,
        ReferenceMode::Independent,
        &[3, 4],
        1.0,
    )
    .unwrap();
    let (a, b) = (x.row(0), x.row(1));
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let corr = dot(a, b) / (dot(a, a) * dot(b, b)).sqrt();
    assert!(corr.abs() < 0.05, "correlation {corr}");
}
