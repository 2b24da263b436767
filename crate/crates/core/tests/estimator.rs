mod common;

use common::*;
use micdist::estimator::{
    aggregate, estimate_k0, estimate_k0_sweep, median, GateReason, LevelEstimate, LevelReport,
    DEFAULT_GATE_MARGIN_DB,
};
use micdist::model::{simulate, MicParams, NonlinearityConfig};
use micdist::signal::Unit;
use micdist::spectral::{harmonics, nearest_bin, synthesize, ToneGrid};
use micdist::units::{displacement_amplitude, spl_to_peak_pressure};
use proptest::prelude::*;

fn sweep(mic: &MicParams, levels: &[f64], bin: usize, nl: NonlinearityConfig) -> Vec<LevelReport> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let y = synthesize(
                &ToneGrid::single(N, FS, bin, displacement_amplitude(level, mic)).unwrap(),
                Unit::Dimensionless,
            )
            .unwrap();
            let cfg = NonlinearityConfig {
                seed: nl.seed + i as u64,
                ..nl
            };
            let u = simulate(&y, mic, &cfg).unwrap();
            LevelReport {
                level_db_spl: level,
                report: harmonics(&u, bin, 4).unwrap(),
            }
        })
        .collect()
}

fn levels(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

#[test]
fn noiseless_sweep_recovers_k0() {
    let mic = MicParams::default();
    let est = estimate_k0_sweep(
        &sweep(
            &mic,
            &levels(80.0, 126.0, 2.0),
            BIN,
            NonlinearityConfig::default(),
        ),
        DEFAULT_GATE_MARGIN_DB,
    )
    .unwrap();
    assert!(est.valid_count() >= 20);
    for e in est.per_level.iter().filter(|e| e.valid) {
        assert!(rel(e.k0, mic.k0()) < 1e-6, "{}: {}", e.level_db_spl, e.k0);
    }
    assert!(rel(est.aggregate, mic.k0()) < 1e-6);

    let k: Vec<f64> = est.per_level.iter().map(|e| e.k0).collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    let var = k.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k.len() as f64;
    assert!(var / (mean * mean) < 1e-10);
}

#[test]
fn worked_example() {
    let mut r = harmonics(&tone(N, BIN, 1.0), BIN, 3).unwrap();
    r.amplitudes[0] = micdist::spectral::Complex64::new(0.0885, 0.0);
    r.amplitudes[1] = micdist::spectral::Complex64::new(0.0, -4.425e-4);
    assert!(rel(estimate_k0(&r).unwrap(), 8.85) < 1e-12);
}

#[test]
fn estimate_is_frequency_invariant() {
    let mic = MicParams::default();
    for f in [100.0, 500.0, 1000.0, 2000.0, 5000.0] {
        let bin = nearest_bin(f, N, FS);
        let r = &sweep(&mic, &[110.0], bin, NonlinearityConfig::default())[0];
        assert!(rel(estimate_k0(&r.report).unwrap(), mic.k0()) < 1e-9, "{f}");
    }
}

#[test]
fn estimate_follows_physical_parameters() {
    for (u0, c0, cp) in [
        (200.0, 20e-12, 2e-12),
        (48.0, 8e-12, 4e-12),
        (10.0, 1.77e-12, 0.23e-12),
    ] {
        let mic = MicParams::new(u0, c0, cp, 20e-6, 10e-3).unwrap();
        let expected = u0 * c0 / (c0 + cp);
        let r = &sweep(&mic, &[116.0], BIN, NonlinearityConfig::default())[0];
        assert!(rel(estimate_k0(&r.report).unwrap(), expected) < 1e-9);
    }
}

#[test]
fn zero_second_harmonic_is_undefined() {
    let mut r = harmonics(&tone(N, BIN, 0.1), BIN, 3).unwrap();
    r.amplitudes[1] = Default::default();
    assert_eq!(estimate_k0(&r).unwrap_err().category(), "undefined_k0");
}

#[test]
fn noisy_levels_are_gated() {
    let mic = MicParams::default();
    let noise = mic.sensitivity() * spl_to_peak_pressure(94.0) / 2f64.sqrt() * 1e-3;
    let nl = NonlinearityConfig {
        noise_rms: Some(noise),
        seed: 9,
        ..NonlinearityConfig::default()
    };
    let est = estimate_k0_sweep(
        &sweep(&mic, &levels(60.0, 118.0, 2.0), BIN, nl),
        DEFAULT_GATE_MARGIN_DB,
    )
    .unwrap();
    let low = est
        .per_level
        .iter()
        .find(|e| e.level_db_spl == 60.0)
        .unwrap();
    assert!(!low.valid);
    assert_eq!(low.reason, GateReason::V2BelowFloor);
    assert!(est.valid_count() >= 10);
    assert!(rel(est.aggregate, mic.k0()) < 0.01, "{}", est.aggregate);
}

#[test]
fn clipping_is_flagged() {
    let mic = MicParams::default();
    let clip = mic.sensitivity() * spl_to_peak_pressure(118.0);
    let nl = NonlinearityConfig {
        clip_level: Some(clip),
        ..NonlinearityConfig::default()
    };
    let est = estimate_k0_sweep(
        &sweep(&mic, &[100.0, 110.0, 124.0], BIN, nl),
        DEFAULT_GATE_MARGIN_DB,
    )
    .unwrap();
    assert!(est.per_level[0].valid && est.per_level[1].valid);
    assert_eq!(est.per_level[2].reason, GateReason::ClippingSuspected);
    assert!(rel(est.aggregate, mic.k0()) < 1e-6);
}

#[test]
fn all_gated_fails_with_reasons() {
    let mic = MicParams::default();
    let nl = NonlinearityConfig {
        noise_rms: Some(1e-2),
        ..NonlinearityConfig::default()
    };
    match estimate_k0_sweep(&sweep(&mic, &[40.0, 50.0], BIN, nl), DEFAULT_GATE_MARGIN_DB) {
        Err(micdist::Error::EstimationFailed { reasons }) => {
            assert_eq!(reasons.len(), 2);
            assert!(reasons.iter().all(|(_, r)| *r == GateReason::V2BelowFloor));
        }
        other => panic!("expected estimation failure, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn median_ignores_minority_outliers(
        truth in 1.0f64..100.0,
        n in 5usize..40,
        outliers in prop::collection::vec(-1e6f64..1e6, 0..20),
        jitter in prop::collection::vec(-1e-3f64..1e-3, 40),
    ) {
        let bad = outliers.len().min((n - 1) / 2);
        let per_level: Vec<LevelEstimate> = (0..n)
            .map(|i| LevelEstimate {
                level_db_spl: i as f64,
                k0: if i < bad { outliers[i] } else { truth * (1.0 + jitter[i]) },
                valid: true,
                reason: GateReason::Ok,
            })
            .collect();
        let est = aggregate(per_level).unwrap();
        prop_assert!(rel(est.aggregate, truth) <= 1.001e-3, "{} vs {truth}", est.aggregate);
    }

    #[test]
    fn median_of_permutation_is_stable(mut v in prop::collection::vec(-1e3f64..1e3, 1..50), rot in 0usize..50) {
        let a = median(&mut v.clone()).unwrap();
        let k = rot % v.len();
        v.rotate_left(k);
        prop_assert_eq!(a, median(&mut v).unwrap());
    }
}
