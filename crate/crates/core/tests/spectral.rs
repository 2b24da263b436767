mod common;

use std::f64::consts::PI;

use common::*;
use micdist::corrector::{correct, CorrectionConfig};
use micdist::model::{simulate, MicParams, NonlinearityConfig};
use micdist::signal::{SampledSignal, Unit};
use micdist::spectral::{
    harmonics, harmonics_in_frame, imd_products, multitone_grid, product_bins, synthesize, thd,
    two_tone_grid, Spectrum, Tone, ToneGrid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parseval(seed in any::<u64>(), n in 16usize..1500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = SampledSignal::new(x, FS, Unit::Volts).unwrap();
        let e = Spectrum::of(&s).unwrap().energy();
        prop_assert!(rel(e, s.energy()) < 1e-10);
    }

    #[test]
    fn phase_does_not_change_thd(phase in -PI..PI, y_m in 0.005f64..0.2) {
        let grid = ToneGrid::new(N, FS, vec![Tone { bin: BIN, amplitude: y_m, phase }]).unwrap();
        let y = synthesize(&grid, Unit::Dimensionless).unwrap();
        let u = simulate(&y, &MicParams::default(), &NonlinearityConfig::default()).unwrap();
        let t = thd(&harmonics(&u, BIN, 5).unwrap()).unwrap();
        prop_assert!(rel(t, y_m / 2.0) < 1e-9);
    }

    #[test]
    fn h2_slope_is_two_db_per_db(l0 in 70.0f64..110.0, step in 1.0f64..10.0) {
        let mic = MicParams::default();
        let h2 = |level: f64| {
            let y_m = micdist::units::displacement_amplitude(level, &mic);
            harmonics(&mic_output(y_m, &NonlinearityConfig::default()), BIN, 3).unwrap().magnitude(2)
        };
        let slope = 20.0 * (h2(l0 + step) / h2(l0)).log10() / step;
        prop_assert!((slope - 2.0).abs() < 0.01, "{slope}");
    }
}

#[test]
fn bin_aligned_tone_has_no_leakage() {
    let s = tone(N, BIN, 0.7);
    let spec = Spectrum::of(&s).unwrap();
    assert!((spec.magnitude(BIN) - 0.7).abs() < 1e-12);
    let stray = (0..spec.len())
        .filter(|&k| k != BIN)
        .map(|k| spec.magnitude(k))
        .fold(0.0, f64::max);
    assert!(stray < 1e-12, "{stray}");
}

#[test]
fn sine_phase_convention() {
    let phase = 0.4;
    let grid = ToneGrid::new(
        N,
        FS,
        vec![Tone {
            bin: BIN,
            amplitude: 1.0,
            phase,
        }],
    )
    .unwrap();
    let spec = Spectrum::of(&synthesize(&grid, Unit::Volts).unwrap()).unwrap();
    assert!((spec.amplitude(BIN).arg() - (phase - PI / 2.0)).abs() < 1e-12);
}

#[test]
fn thd_matches_half_displacement() {
    for y_m in [0.001, 0.02, 0.0633, 0.2] {
        let t = thd(&harmonics(&mic_output(y_m, &NonlinearityConfig::default()), BIN, 10).unwrap())
            .unwrap();
        assert!(rel(t, y_m / 2.0) < 1e-3, "{y_m}: {t}");
    }
}

#[test]
fn silent_frame_has_undefined_thd() {
    let s = SampledSignal::zeros(N, FS, Unit::Volts).unwrap();
    assert_eq!(
        thd(&harmonics(&s, BIN, 3).unwrap()).unwrap_err().category(),
        "undefined_thd"
    );
}

#[test]
fn frame_mismatch_is_rejected() {
    let s = tone(N, BIN, 0.1);
    assert!(harmonics_in_frame(&s, N, BIN, 3).is_ok());
    assert_eq!(
        harmonics_in_frame(&s, N / 2, BIN, 3)
            .unwrap_err()
            .category(),
        "invalid_input"
    );
}

#[test]
fn noise_floor_tracks_white_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = rand_distr::Normal::new(0.0, 1e-3).unwrap();
    let x: Vec<f64> = (0..N).map(|_| rng.sample(normal)).collect();
    let s = SampledSignal::new(x, FS, Unit::Volts).unwrap();
    let report = harmonics(&s, BIN, 3).unwrap();
    // White noise of variance s^2 has per-bin peak-amplitude RMS 2 s / sqrt(N).
    let expected = 2.0 * 1e-3 / (N as f64).sqrt();
    assert!(
        rel(report.noise_floor, expected) < 0.1,
        "{}",
        report.noise_floor
    );
}

#[test]
fn imd_products_scale_bilinearly() {
    let (a1, a2) = (0.05, 0.03);
    let grid = two_tone_grid(N, FS, 1000.0, 1300.0, 1.0).unwrap();
    let b = grid.bins();
    let amp = |g1: f64, g2: f64| {
        let g = ToneGrid::new(
            N,
            FS,
            vec![
                Tone {
                    bin: b[0],
                    amplitude: a1 * g1,
                    phase: 0.0,
                },
                Tone {
                    bin: b[1],
                    amplitude: a2 * g2,
                    phase: 0.0,
                },
            ],
        )
        .unwrap();
        let y = synthesize(&g, Unit::Dimensionless).unwrap();
        let u = simulate(&y, &MicParams::default(), &NonlinearityConfig::default()).unwrap();
        let r = imd_products(&u, &g, 2).unwrap();
        r.imd2().map(|p| p.amplitude.norm()).collect::<Vec<_>>()
    };
    let base = amp(1.0, 1.0);
    assert_eq!(base.len(), 2);
    for g1 in [0.5, 1.0, 2.0] {
        for g2 in [0.5, 1.0, 2.0] {
            for (x, y) in amp(g1, g2).iter().zip(&base) {
                assert!(rel(*x, g1 * g2 * y) < 1e-9);
            }
        }
    }
    // Difference and sum products of y^2: K0 a1 a2 each.
    for v in &base {
        assert!(rel(*v, K0 * a1 * a2) < 1e-9);
    }
}

#[test]
fn product_collision_and_nyquist() {
    let grid = ToneGrid::new(
        4800,
        FS,
        vec![
            Tone {
                bin: 100,
                amplitude: 1.0,
                phase: 0.0,
            },
            Tone {
                bin: 200,
                amplitude: 1.0,
                phase: 0.0,
            },
        ],
    )
    .unwrap();
    assert_eq!(product_bins(&grid, 2).unwrap_err().category(), "collision");
    let high = ToneGrid::new(
        100,
        FS,
        vec![
            Tone {
                bin: 10,
                amplitude: 1.0,
                phase: 0.0,
            },
            Tone {
                bin: 45,
                amplitude: 1.0,
                phase: 0.0,
            },
        ],
    )
    .unwrap();
    assert_eq!(
        product_bins(&high, 2).unwrap_err().category(),
        "invalid_parameter"
    );
}

#[test]
fn multitone_grid_is_seeded_and_collision_free() {
    let a = multitone_grid(65536, FS, 8, 200.0, 8000.0, 0.01, 5).unwrap();
    let b = multitone_grid(65536, FS, 8, 200.0, 8000.0, 0.01, 5).unwrap();
    let c = multitone_grid(65536, FS, 8, 200.0, 8000.0, 0.01, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.bins(), c.bins());
    assert_eq!(a.tones().len(), 8);
    assert!(product_bins(&a, 2).is_ok());
}

#[test]
fn exact_correction_removes_all_intermodulation() {
    let grid = multitone_grid(N, FS, 8, 200.0, 8000.0, 0.02, 1).unwrap();
    let y = synthesize(&grid, Unit::Dimensionless).unwrap();
    let u = simulate(&y, &MicParams::default(), &NonlinearityConfig::default()).unwrap();
    let (c, _) = correct(&u, &CorrectionConfig::exact(K0)).unwrap();
    let r = imd_products(&c, &grid, 2).unwrap();
    assert!(r.products.iter().all(|p| p.amplitude.norm() < 1e-12));
}
