mod common;

use std::fs;

use common::*;
use micdist::model::{simulate, MicParams, NonlinearityConfig};
use micdist::pipeline::wav::{
    encode_wav, ingest_wav, parse_wav, read_wav, write_wav, SampleFormat,
};
use micdist::pipeline::{execute, run, Experiment, ExperimentConfig};
use micdist::signal::{SampledSignal, Unit};
use micdist::spectral::{synthesize, ToneGrid};
use micdist::units::displacement_amplitude;

fn quick(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        frame_length: 8192,
        levels_db_spl: vec![100.0, 106.0, 112.0, 118.0],
        ..ExperimentConfig::new(experiment)
    }
}

fn recorded_tone(level: f64) -> SampledSignal {
    let mic = MicParams::default();
    let cfg = ExperimentConfig::default();
    let grid = ToneGrid::single(
        cfg.frame_length,
        cfg.sample_rate,
        cfg.fundamental_bin(),
        displacement_amplitude(level, &mic),
    )
    .unwrap();
    let y = synthesize(&grid, Unit::Dimensionless).unwrap();
    simulate(&y, &mic, &NonlinearityConfig::default()).unwrap()
}

#[test]
fn float64_wav_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.wav");
    let s = recorded_tone(110.0);
    write_wav(&path, &s, SampleFormat::Float64, 2.0).unwrap();
    let back = ingest_wav(&path, 0, 2.0).unwrap();
    assert_eq!(back.sample_rate(), s.sample_rate());
    for (a, b) in s.samples().iter().zip(back.samples()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn int16_wav_round_trip_within_one_lsb() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.wav");
    let s = recorded_tone(110.0);
    write_wav(&path, &s, SampleFormat::Int16, 1.0).unwrap();
    let back = ingest_wav(&path, 0, 1.0).unwrap();
    let lsb = 1.0 / 32768.0;
    for (a, b) in s.samples().iter().zip(back.samples()) {
        assert!((a - b).abs() <= lsb, "{a} {b}");
    }
}

#[test]
fn malformed_and_unsupported_wavs() {
    let bytes = encode_wav(&[&[0.1, -0.2, 0.3]], 48_000, SampleFormat::Int24).unwrap();
    assert_eq!(
        parse_wav(&bytes[..bytes.len() - 2]).unwrap_err().category(),
        "malformed_wav"
    );
    assert_eq!(
        parse_wav(&bytes[..20]).unwrap_err().category(),
        "malformed_wav"
    );
    assert_eq!(
        parse_wav(b"not a wav file at all").unwrap_err().category(),
        "malformed_wav"
    );
    let mut alaw = bytes.clone();
    alaw[20] = 6;
    assert_eq!(
        parse_wav(&alaw).unwrap_err().category(),
        "unsupported_codec"
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stereo.wav");
    fs::write(
        &path,
        encode_wav(&[&[0.1], &[0.2]], 48_000, SampleFormat::Float32).unwrap(),
    )
    .unwrap();
    assert_eq!(read_wav(&path).unwrap().channels.len(), 2);
    assert!((ingest_wav(&path, 1, 1.0).unwrap().samples()[0] - 0.2).abs() < 1e-7);
    assert_eq!(
        ingest_wav(&path, 2, 1.0).unwrap_err().category(),
        "channel_out_of_range"
    );
}

#[test]
fn wav_recording_drives_estimation_and_correction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec.wav");
    write_wav(&path, &recorded_tone(116.0), SampleFormat::Float64, 1.0).unwrap();

    let cfg = ExperimentConfig {
        wav_path: Some(path.clone()),
        wav_full_scale_volts: Some(1.0),
        ..ExperimentConfig::new(Experiment::K0SweepEstimate)
    };
    let out = run(&cfg).unwrap();
    let est = out.k0_estimate.unwrap();
    assert!(rel(est.aggregate, 8.85) < 1e-6);
    assert!((est.per_level[0].level_db_spl - 116.0).abs() < 1e-9);

    let cfg = ExperimentConfig {
        experiment: Experiment::SingleToneCorrection,
        ..cfg
    };
    let out = run(&cfg).unwrap();
    let k0 = out.report.column("k0_used_v").unwrap();
    assert!(rel(k0[0], 8.85) < 1e-6);
    let h2 = out.report.column("h2_reduction_db").unwrap();
    assert!(h2[0] > 120.0 && (h2[1] - 55.94).abs() < 0.05, "{h2:?}");
}

#[test]
fn wav_below_nyquist_requirement_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("low.wav");
    let s = SampledSignal::new(vec![0.0; 4096], 8000.0, Unit::Volts).unwrap();
    write_wav(&path, &s, SampleFormat::Int16, 1.0).unwrap();
    let cfg = ExperimentConfig {
        wav_path: Some(path),
        wav_full_scale_volts: Some(1.0),
        fundamental_hz: 1000.0,
        sample_rate: 8000.0,
        n_harmonics: Some(10),
        ..ExperimentConfig::new(Experiment::SingleToneCorrection)
    };
    assert_eq!(run(&cfg).unwrap_err().category(), "config");
}

#[test]
fn every_experiment_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for e in Experiment::ALL {
        let csv = |tag: &str| {
            let cfg = ExperimentConfig {
                output_dir: dir.path().join(format!("{e}-{tag}")),
                noise_rms: Some(2e-5),
                seed: 4,
                ..quick(e)
            };
            let files = execute(&cfg).unwrap();
            let mut all = Vec::new();
            for f in files
                .iter()
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
            {
                all.push((f.file_name().unwrap().to_owned(), fs::read(f).unwrap()));
            }
            assert!(!all.is_empty());
            all
        };
        assert_eq!(csv("a"), csv("b"), "{e}");
    }
}

#[test]
fn seed_changes_noisy_output() {
    let a = ExperimentConfig {
        noise_rms: Some(1e-4),
        seed: 1,
        ..quick(Experiment::ThdVsLevel)
    };
    let b = ExperimentConfig {
        seed: 2,
        ..a.clone()
    };
    assert_ne!(run(&a).unwrap().report.rows, run(&b).unwrap().report.rows);
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn hash_ignores_output_directory() {
    let a = quick(Experiment::TwoTone);
    let b = ExperimentConfig {
        output_dir: "elsewhere".into(),
        ..a.clone()
    };
    assert_eq!(a.hash(), b.hash());
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig {
        k0_override: Some(9.1),
        k0_factors: Some(vec![0.5, 1.5]),
        ..quick(Experiment::ThdVsK0)
    };
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    let err =
        ExperimentConfig::from_toml_str("experiment = \"two_tone\"\nbogus = 1\n").unwrap_err();
    assert_eq!(err.category(), "config");
}

#[test]
fn csv_carries_provenance_and_no_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: dir.path().into(),
        svg: true,
        ..quick(Experiment::HarmonicSweep)
    };
    execute(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(text.starts_with("# experiment=harmonic_sweep\n"));
    assert!(text.contains(&format!("# config_hash={}\n", cfg.hash())));
    assert!(dir.path().join("k0_estimate.csv").exists());
    assert!(dir.path().join("harmonics.svg").exists());
    let meta: String = fs::read_to_string(dir.path().join("run.json")).unwrap();
    assert!(meta.contains("started_unix_s"));
    assert!(!text.contains("unix"));
}

#[test]
fn corrected_dc_removal_only_touches_dc() {
    let base = ExperimentConfig {
        level_db_spl: Some(116.0),
        ..quick(Experiment::SingleToneCorrection)
    };
    let plain = run(&base).unwrap();
    let blocked = run(&ExperimentConfig {
        dc_block_corrected: true,
        ..base
    })
    .unwrap();
    let dc = |o: &micdist::pipeline::RunOutput| o.spectra[2].spectrum.magnitude(0);
    // K0 (y - 2y^3 + y^4) keeps a 3/8 K0 y^4 mean.
    let y = displacement_amplitude(116.0, &MicParams::default());
    assert!(
        rel(dc(&plain), 0.375 * K0 * y.powi(4)) < 1e-6,
        "{}",
        dc(&plain)
    );
    assert!(dc(&blocked) < 1e-12);
    let thd = |o: &micdist::pipeline::RunOutput| o.report.column("thd_corrected").unwrap()[1];
    assert!(rel(thd(&blocked), thd(&plain)) < 1e-12);
}

#[test]
fn mis_set_k0_follows_closed_form() {
    // Approximate inverse with K0_hat = K0 / r applied to K0 (y - y^2).
    let level = 110.0;
    let y = displacement_amplitude(level, &MicParams::default());
    for factor in [0.5, 1.5, 2.0, 4.0] {
        let r = 1.0 / factor;
        let h1 = y - 1.5 * r * y.powi(3);
        let h2 = (1.0 - r) * y * y / 2.0 - r * y.powi(4) / 2.0;
        let h3 = r * y.powi(3) / 2.0;
        let h4 = r * y.powi(4) / 8.0;
        let expected = (y / 2.0) / ((h2 * h2 + h3 * h3 + h4 * h4).sqrt() / h1);

        let cfg = ExperimentConfig {
            level_db_spl: Some(level),
            k0_factors: Some(vec![factor]),
            ..ExperimentConfig::new(Experiment::ThdVsK0)
        };
        let out = run(&cfg).unwrap();
        let got = out.report.column("thd_orig").unwrap()[0]
            / out.report.column("thd_corrected").unwrap()[0];
        assert!(rel(got, expected) < 1e-6, "{factor}: {got} vs {expected}");
        if factor == 2.0 {
            assert!(got < 2.0 && got > 1.999, "{got}");
        }
    }
}
