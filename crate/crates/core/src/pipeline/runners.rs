//! Experiment runners: model → corrector → spectral → estimator.

use rayon::prelude::*;

use crate::corrector::{correct, CorrectionConfig, Method};
use crate::error::{Error, Result};
use crate::estimator::{estimate_k0, estimate_k0_sweep, K0Estimate, LevelReport};
use crate::model::{predicted_harmonics, simulate, MicParams, NonlinearityConfig};
use crate::pipeline::config::{Experiment, ExperimentConfig, Input};
use crate::pipeline::report::{Cell, ExperimentReport};
use crate::pipeline::svg::{Chart, Style};
use crate::pipeline::wav::ingest_wav;
use crate::pipeline::{ImdPair, NamedSpectrum, RunOutput};
use crate::signal::{SampledSignal, Unit};
use crate::spectral::{
    harmonics_from_spectrum, imd_from_spectrum, multitone_grid, nearest_bin, product_bins,
    synthesize, thd, two_tone_grid, HarmonicReport, Spectrum, ToneGrid,
};
use crate::units::{amplitude_db, displacement_amplitude, volts_to_spl};

/// Per-task noise seed, so parallel levels never share a generator.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ (stream + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything needed to synthesize and analyze one recording.
struct Rig {
    mic: MicParams,
    nl: NonlinearityConfig,
    frame: usize,
    sample_rate: f64,
    f0_bin: usize,
    n_harmonics: usize,
    correction: CorrectionConfig,
    dc_block_corrected: bool,
}

impl Rig {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let mic = cfg.mic()?;
        let n_harmonics = cfg.harmonic_count();
        if n_harmonics < 2 {
            return Err(Error::Config(format!(
                "fundamental {} Hz leaves fewer than two harmonics below Nyquist",
                cfg.fundamental_hz
            )));
        }
        Ok(Self {
            nl: cfg.nonlinearity(&mic),
            frame: cfg.frame_length,
            sample_rate: cfg.sample_rate,
            f0_bin: cfg.fundamental_bin(),
            n_harmonics,
            correction: CorrectionConfig::new(cfg.k0_override.unwrap_or(mic.k0()), cfg.method),
            dc_block_corrected: cfg.dc_block_corrected,
            mic,
        })
    }

    fn tone_amplitude(&self, level: f64) -> Result<f64> {
        let y_m = displacement_amplitude(level, &self.mic);
        if y_m >= 1.0 {
            return Err(Error::domain(
                format!("{level} dB SPL drives y_m = {y_m:.3}, outside |y| < 1"),
                None,
            ));
        }
        Ok(y_m)
    }

    /// Displacement waveform of `grid` through the microphone model.
    fn record(&self, grid: &ToneGrid, stream: u64, level: f64) -> Result<SampledSignal> {
        let y = synthesize(grid, Unit::Dimensionless)?;
        let nl = NonlinearityConfig {
            seed: stream_seed(self.nl.seed, stream),
            ..self.nl
        };
        simulate(&y, &self.mic, &nl).map_err(|e| match e {
            Error::Domain { message, index } => Error::Domain {
                message: format!("{level} dB SPL: {message}"),
                index,
            },
            e => e,
        })
    }

    fn correct(&self, u: &SampledSignal, cfg: &CorrectionConfig) -> Result<(SampledSignal, u64)> {
        let (mut c, stats) = correct(u, cfg)?;
        if self.dc_block_corrected {
            c.remove_dc();
        }
        Ok((c, stats.domain_clamps))
    }

    fn spl(&self, volts: f64) -> f64 {
        volts_to_spl(volts, self.mic.sensitivity())
    }
}

fn h(report: &HarmonicReport, k: usize) -> f64 {
    report.amplitudes.get(k - 1).map_or(f64::NAN, |a| a.norm())
}

fn finite_reduction_db(orig: f64, corrected: f64, what: &str) -> Result<f64> {
    let r = amplitude_db(orig / corrected);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::domain(
            format!("{what}: reduction {orig} / {corrected} is not finite"),
            None,
        ))
    }
}

struct LevelAnalysis {
    level: f64,
    y_m: f64,
    original: HarmonicReport,
    corrected: HarmonicReport,
    thd_original: f64,
    thd_corrected: f64,
    clamps: u64,
}

impl LevelAnalysis {
    fn reduction_db(&self) -> Result<f64> {
        finite_reduction_db(
            self.thd_original,
            self.thd_corrected,
            &format!("{} dB SPL", self.level),
        )
    }
}

fn analyze_level(rig: &Rig, level: f64, stream: u64) -> Result<LevelAnalysis> {
    let y_m = rig.tone_amplitude(level)?;
    let grid = ToneGrid::single(rig.frame, rig.sample_rate, rig.f0_bin, y_m)?;
    let u = rig.record(&grid, stream, level)?;
    let (c, clamps) = rig.correct(&u, &rig.correction)?;
    let original = harmonics_from_spectrum(&Spectrum::of(&u)?, rig.f0_bin, rig.n_harmonics)?;
    let corrected = harmonics_from_spectrum(&Spectrum::of(&c)?, rig.f0_bin, rig.n_harmonics)?;
    Ok(LevelAnalysis {
        level,
        y_m,
        thd_original: thd(&original)?,
        thd_corrected: thd(&corrected)?,
        original,
        corrected,
        clamps,
    })
}

fn sweep(cfg: &ExperimentConfig, rig: &Rig) -> Result<Vec<LevelAnalysis>> {
    if cfg.input() != Input::Synthetic {
        return Err(Error::Config(format!(
            "{} supports synthetic input only",
            cfg.experiment
        )));
    }
    if cfg.levels_db_spl.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "levels_db_spl must be strictly ascending".into(),
        ));
    }
    cfg.levels_db_spl
        .par_iter()
        .enumerate()
        .map(|(i, &level)| analyze_level(rig, level, i as u64))
        .collect()
}

fn level_reports(analyses: &[LevelAnalysis]) -> Vec<LevelReport> {
    analyses
        .iter()
        .map(|a| LevelReport {
            level_db_spl: a.level,
            report: a.original.clone(),
        })
        .collect()
}

pub fn run_harmonic_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rig = Rig::new(cfg)?;
    let analyses = sweep(cfg, &rig)?;
    let estimate = match estimate_k0_sweep(&level_reports(&analyses), cfg.gate_margin_db) {
        Ok(e) => Some(e),
        Err(Error::EstimationFailed { .. }) => None,
        Err(e) => return Err(e),
    };

    let mut report = ExperimentReport::new(
        cfg,
        &[
            "level_db_spl",
            "y_peak",
            "h1_db_spl",
            "h2_db_spl",
            "h3_db_spl",
            "model_h1_db_spl",
            "model_h2_db_spl",
            "h2_corrected_db_spl",
            "thd_orig",
            "thd_corrected",
            "k0_used_v",
            "reduction_db",
            "domain_clamps",
            "k0_estimate_v",
        ],
    );
    report.note("method", method_name(rig.correction.method));
    for (i, a) in analyses.iter().enumerate() {
        let (m1, m2) = predicted_harmonics(rig.mic.k0(), a.y_m);
        let k0_level = estimate.as_ref().map_or(f64::NAN, |e| e.per_level[i].k0);
        report.push(vec![
            a.level.into(),
            a.y_m.into(),
            rig.spl(h(&a.original, 1)).into(),
            rig.spl(h(&a.original, 2)).into(),
            rig.spl(h(&a.original, 3)).into(),
            rig.spl(m1).into(),
            rig.spl(m2).into(),
            rig.spl(h(&a.corrected, 2)).into(),
            a.thd_original.into(),
            a.thd_corrected.into(),
            rig.correction.k0.into(),
            a.reduction_db()?.into(),
            a.clamps.into(),
            k0_level.into(),
        ]);
    }
    if let Some(e) = &estimate {
        report.note("k0_aggregate_v", e.aggregate);
    }

    let col = |k: usize| -> Vec<(f64, f64)> {
        analyses
            .iter()
            .map(|a| (a.level, rig.spl(h(&a.original, k))))
            .collect()
    };
    let model = |k: usize| -> Vec<(f64, f64)> {
        analyses
            .iter()
            .map(|a| {
                let (m1, m2) = predicted_harmonics(rig.mic.k0(), a.y_m);
                (a.level, rig.spl(if k == 1 { m1 } else { m2 }))
            })
            .collect()
    };
    let chart = Chart::new(
        "harmonics",
        "Harmonic levels vs excitation",
        "reference level (dB SPL)",
        "equivalent input level (dB SPL)",
    )
    .with("H1", Style::Markers, col(1))
    .with("H2", Style::Markers, col(2))
    .with("H3", Style::Markers, col(3))
    .with("H1 model", Style::Line, model(1))
    .with("H2 model", Style::Line, model(2));

    Ok(RunOutput {
        report,
        spectra: Vec::new(),
        k0_estimate: estimate,
        imd: None,
        charts: vec![chart],
    })
}

pub fn run_thd_vs_level(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rig = Rig::new(cfg)?;
    let analyses = sweep(cfg, &rig)?;
    let mut report = ExperimentReport::new(
        cfg,
        &[
            "level_db_spl",
            "y_peak",
            "h1_db_spl",
            "h2_db_spl",
            "h3_db_spl",
            "thd_orig",
            "thd_corrected",
            "k0_used_v",
            "reduction_db",
            "reduction_factor",
            "domain_clamps",
        ],
    );
    report.note("method", method_name(rig.correction.method));
    for a in &analyses {
        let red = a.reduction_db()?;
        report.push(vec![
            a.level.into(),
            a.y_m.into(),
            rig.spl(h(&a.original, 1)).into(),
            rig.spl(h(&a.original, 2)).into(),
            rig.spl(h(&a.original, 3)).into(),
            a.thd_original.into(),
            a.thd_corrected.into(),
            rig.correction.k0.into(),
            red.into(),
            (a.thd_original / a.thd_corrected).into(),
            a.clamps.into(),
        ]);
    }
    let pct = |f: fn(&LevelAnalysis) -> f64| -> Vec<(f64, f64)> {
        analyses.iter().map(|a| (a.level, 100.0 * f(a))).collect()
    };
    let chart = Chart::new(
        "thd_vs_level",
        "THD vs level",
        "reference level (dB SPL)",
        "THD (%)",
    )
    .with("unprocessed", Style::Markers, pct(|a| a.thd_original))
    .with("corrected", Style::Markers, pct(|a| a.thd_corrected));
    Ok(RunOutput {
        report,
        spectra: Vec::new(),
        k0_estimate: None,
        imd: None,
        charts: vec![chart],
    })
}

/// A single analyzed recording, synthetic or ingested.
struct Recording {
    rig: Rig,
    level: f64,
    signal: SampledSignal,
}

fn recording(cfg: &ExperimentConfig) -> Result<Recording> {
    match cfg.input() {
        Input::Synthetic => {
            let rig = Rig::new(cfg)?;
            let level = cfg.level();
            let y_m = rig.tone_amplitude(level)?;
            let grid = ToneGrid::single(rig.frame, rig.sample_rate, rig.f0_bin, y_m)?;
            let signal = rig.record(&grid, 0, level)?;
            Ok(Recording { rig, level, signal })
        }
        Input::Wav(path) => {
            let fs_volts = cfg
                .wav_full_scale_volts
                .ok_or_else(|| Error::Config("WAV input requires wav_full_scale_volts".into()))?;
            let full = ingest_wav(path, cfg.wav_channel, fs_volts)?;
            let frame = full.len().min(cfg.frame_length);
            let signal = SampledSignal::new(
                full.samples()[..frame].to_vec(),
                full.sample_rate(),
                Unit::Volts,
            )?;
            let rate = signal.sample_rate();
            let wav_cfg = ExperimentConfig {
                sample_rate: rate,
                frame_length: frame,
                ..cfg.clone()
            };
            let f0_bin = nearest_bin(cfg.fundamental_hz, frame, rate);
            let n = cfg.harmonic_count().min(10);
            if 2 * n * f0_bin >= frame {
                return Err(Error::Config(format!(
                    "sample rate {rate} Hz is below twice the highest analyzed harmonic ({n} x {} Hz)",
                    cfg.fundamental_hz
                )));
            }
            let mut rig = Rig::new(&wav_cfg)?;
            rig.n_harmonics = n;
            let spec = Spectrum::of(&signal)?;
            let v1 = spec.magnitude(rig.f0_bin);
            let level = rig.spl(v1);
            if cfg.k0_override.is_none() {
                let rep = harmonics_from_spectrum(&spec, rig.f0_bin, rig.n_harmonics)?;
                rig.correction.k0 = estimate_k0(&rep)?;
            }
            Ok(Recording { rig, level, signal })
        }
    }
}

pub fn run_k0_sweep_estimate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (levels, rig) = match cfg.input() {
        Input::Synthetic => {
            let rig = Rig::new(cfg)?;
            (level_reports(&sweep(cfg, &rig)?), rig)
        }
        Input::Wav(_) => {
            let rec = recording(cfg)?;
            let rep = harmonics_from_spectrum(
                &Spectrum::of(&rec.signal)?,
                rec.rig.f0_bin,
                rec.rig.n_harmonics,
            )?;
            (
                vec![LevelReport {
                    level_db_spl: rec.level,
                    report: rep,
                }],
                rec.rig,
            )
        }
    };
    let estimate = estimate_k0_sweep(&levels, cfg.gate_margin_db)?;
    let mut report = ExperimentReport::new(
        cfg,
        &[
            "level_db_spl",
            "h1_db_spl",
            "h2_db_spl",
            "h3_db_spl",
            "noise_floor_db_spl",
            "k0_estimate_v",
            "valid",
            "reason",
        ],
    );
    report.note("k0_aggregate_v", estimate.aggregate);
    report.note("k0_physical_v", rig.mic.k0());
    report.note("gate_margin_db", cfg.gate_margin_db);
    for (l, e) in levels.iter().zip(&estimate.per_level) {
        report.push(vec![
            l.level_db_spl.into(),
            rig.spl(h(&l.report, 1)).into(),
            rig.spl(h(&l.report, 2)).into(),
            rig.spl(h(&l.report, 3)).into(),
            rig.spl(l.report.noise_floor).into(),
            e.k0.into(),
            e.valid.into(),
            Cell::Text(e.reason.to_string()),
        ]);
    }
    let chart = k0_chart(&estimate);
    Ok(RunOutput {
        report,
        spectra: Vec::new(),
        k0_estimate: Some(estimate),
        imd: None,
        charts: vec![chart],
    })
}

fn k0_chart(estimate: &K0Estimate) -> Chart {
    let valid: Vec<(f64, f64)> = estimate
        .per_level
        .iter()
        .filter(|e| e.valid)
        .map(|e| (e.level_db_spl, e.k0))
        .collect();
    let rejected: Vec<(f64, f64)> = estimate
        .per_level
        .iter()
        .filter(|e| !e.valid)
        .map(|e| (e.level_db_spl, e.k0))
        .collect();
    let span = estimate
        .per_level
        .iter()
        .map(|e| e.level_db_spl)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
    Chart::new(
        "k0_estimate",
        "Estimated K0 vs level",
        "reference level (dB SPL)",
        "K0 (V)",
    )
    .with("valid", Style::Markers, valid)
    .with("gated out", Style::Markers, rejected)
    .with(
        "aggregate",
        Style::Line,
        vec![(span.0, estimate.aggregate), (span.1, estimate.aggregate)],
    )
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ExactSqrt => "exact_sqrt",
        Method::QuadraticApprox => "quadratic_approx",
    }
}

fn spectrum_chart(
    name: &str,
    title: &str,
    rig: &Rig,
    max_bin: usize,
    spectra: &[&NamedSpectrum],
) -> Chart {
    let mut chart = Chart::new(name, title, "frequency (Hz)", "level (dB SPL)");
    for s in spectra {
        let pts = (1..=max_bin.min(s.spectrum.len() - 1))
            .map(|k| {
                (
                    s.spectrum.bin_hz(k),
                    rig.spl(s.spectrum.magnitude(k).max(1e-20)),
                )
            })
            .collect();
        chart = chart.with(&s.name, Style::Line, pts);
    }
    chart
}

pub fn run_single_tone_correction(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rec = recording(cfg)?;
    let rig = &rec.rig;
    let k0 = rig.correction.k0;
    let original = Spectrum::of(&rec.signal)?;
    let orig_h = harmonics_from_spectrum(&original, rig.f0_bin, rig.n_harmonics)?;
    let thd_orig = thd(&orig_h)?;

    let mut report = ExperimentReport::new(
        cfg,
        &[
            "method",
            "level_db_spl",
            "k0_used_v",
            "h1_db_spl",
            "h2_orig_db_spl",
            "h2_corrected_db_spl",
            "h2_reduction_db",
            "h3_orig_db_spl",
            "h3_corrected_db_spl",
            "thd_orig",
            "thd_corrected",
            "reduction_db",
            "domain_clamps",
        ],
    );
    let mut spectra = vec![NamedSpectrum::new("original", original)];
    for method in [Method::ExactSqrt, Method::QuadraticApprox] {
        let (c, clamps) = rig.correct(&rec.signal, &CorrectionConfig::new(k0, method))?;
        let spec = Spectrum::of(&c)?;
        let corr_h = harmonics_from_spectrum(&spec, rig.f0_bin, rig.n_harmonics)?;
        let thd_corr = thd(&corr_h)?;
        report.push(vec![
            method_name(method).into(),
            rec.level.into(),
            k0.into(),
            rig.spl(h(&orig_h, 1)).into(),
            rig.spl(h(&orig_h, 2)).into(),
            rig.spl(h(&corr_h, 2)).into(),
            finite_reduction_db(h(&orig_h, 2), h(&corr_h, 2), "H2")?.into(),
            rig.spl(h(&orig_h, 3)).into(),
            rig.spl(h(&corr_h, 3)).into(),
            thd_orig.into(),
            thd_corr.into(),
            finite_reduction_db(thd_orig, thd_corr, "THD")?.into(),
            clamps.into(),
        ]);
        let name = match method {
            Method::ExactSqrt => "exact",
            Method::QuadraticApprox => "approx",
        };
        spectra.push(NamedSpectrum::new(name, spec));
    }
    let max_bin = rig.f0_bin * (rig.n_harmonics + 1);
    let charts = vec![
        spectrum_chart(
            "spectrum_exact",
            "Single tone: exact inverse",
            rig,
            max_bin,
            &[&spectra[0], &spectra[1]],
        ),
        spectrum_chart(
            "spectrum_approx",
            "Single tone: quadratic approximation",
            rig,
            max_bin,
            &[&spectra[0], &spectra[2]],
        ),
    ];
    Ok(RunOutput {
        report,
        spectra,
        k0_estimate: None,
        imd: None,
        charts,
    })
}

/// factor, K0 used, THD exact, THD approx, exact-inverse clamps
type K0Row = (f64, f64, f64, f64, u64);

pub fn run_thd_vs_k0(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rec = recording(cfg)?;
    let rig = &rec.rig;
    let reference = rig.correction.k0;
    let orig_h = harmonics_from_spectrum(&Spectrum::of(&rec.signal)?, rig.f0_bin, rig.n_harmonics)?;
    let thd_orig = thd(&orig_h)?;
    let estimate = estimate_k0(&orig_h).ok();
    let factors = cfg.k0_grid();

    let rows = factors
        .par_iter()
        .map(|&f| {
            let k0 = f * reference;
            let thd_of = |method| -> Result<(f64, u64)> {
                let (c, clamps) = rig.correct(&rec.signal, &CorrectionConfig::new(k0, method))?;
                let r = harmonics_from_spectrum(&Spectrum::of(&c)?, rig.f0_bin, rig.n_harmonics)?;
                Ok((thd(&r)?, clamps))
            };
            let (exact, clamps) = thd_of(Method::ExactSqrt)?;
            let (approx, _) = thd_of(Method::QuadraticApprox)?;
            Ok((f, k0, exact, approx, clamps))
        })
        .collect::<Result<Vec<K0Row>>>()?;

    let nearest = estimate.map(|e| {
        rows.iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1 .1 / e).ln().abs();
                let db = (b.1 .1 / e).ln().abs();
                da.total_cmp(&db)
            })
            .map_or(0, |(i, _)| i)
    });

    let mut report = ExperimentReport::new(
        cfg,
        &[
            "level_db_spl",
            "k0_factor",
            "k0_used_v",
            "thd_orig",
            "thd_corrected",
            "reduction_db",
            "thd_exact",
            "thd_approx",
            "domain_clamps_exact",
            "nearest_estimate",
        ],
    );
    report.note("k0_reference_v", reference);
    report.note("method", method_name(cfg.method));
    if let Some(e) = estimate {
        report.note("k0_estimate_v", e);
    }
    for (i, &(f, k0, exact, approx, clamps)) in rows.iter().enumerate() {
        let corrected = match cfg.method {
            Method::ExactSqrt => exact,
            Method::QuadraticApprox => approx,
        };
        report.push(vec![
            rec.level.into(),
            f.into(),
            k0.into(),
            thd_orig.into(),
            corrected.into(),
            finite_reduction_db(thd_orig, corrected, &format!("K0 = {k0} V"))?.into(),
            exact.into(),
            approx.into(),
            clamps.into(),
            (nearest == Some(i)).into(),
        ]);
    }
    let pct = |sel: &dyn Fn(&K0Row) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.1, 100.0 * sel(r))).collect()
    };
    let chart = Chart::new("thd_vs_k0", "THD vs assumed K0", "K0 (V)", "THD (%)")
        .log_x()
        .with("unprocessed", Style::Line, pct(&|_| thd_orig))
        .with("exact inverse", Style::Markers, pct(&|r| r.2))
        .with("quadratic approx", Style::Markers, pct(&|r| r.3));
    Ok(RunOutput {
        report,
        spectra: Vec::new(),
        k0_estimate: None,
        imd: None,
        charts: vec![chart],
    })
}

pub fn run_imd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    if cfg.input() != Input::Synthetic {
        return Err(Error::Config(format!(
            "{} supports synthetic input only",
            cfg.experiment
        )));
    }
    let rig = Rig::new(cfg)?;
    let level = cfg.level();
    let amp = rig.tone_amplitude(level)?;
    let grid = match cfg.experiment {
        Experiment::TwoTone => {
            let [f1, f2] = cfg.two_tone_hz;
            two_tone_grid(rig.frame, rig.sample_rate, f1, f2, amp)?
        }
        Experiment::Multitone => {
            if cfg.multitone_count < 8 {
                return Err(Error::Config(format!(
                    "multitone needs at least 8 tones, got {}",
                    cfg.multitone_count
                )));
            }
            multitone_grid(
                rig.frame,
                rig.sample_rate,
                cfg.multitone_count,
                cfg.multitone_min_hz,
                cfg.multitone_max_hz,
                amp,
                cfg.seed,
            )?
        }
        other => return Err(Error::Config(format!("{other} is not an IMD experiment"))),
    };
    let bins = product_bins(&grid, cfg.imd_max_order)?;
    let u = rig.record(&grid, 0, level)?;
    let (c, clamps) = rig.correct(&u, &rig.correction)?;
    let orig_spec = Spectrum::of(&u)?;
    let corr_spec = Spectrum::of(&c)?;
    let original = imd_from_spectrum(&orig_spec, &grid, &bins);
    let corrected = imd_from_spectrum(&corr_spec, &grid, &bins);

    let mut report = ExperimentReport::new(
        cfg,
        &[
            "product_hz",
            "bin",
            "order",
            "mixed",
            "orig_db_spl",
            "corrected_db_spl",
            "reduction_db",
        ],
    );
    let mut imd2 = Vec::new();
    for (o, c) in original.products.iter().zip(&corrected.products) {
        let red = amplitude_db(o.amplitude.norm() / c.amplitude.norm());
        if o.order == 2 && o.mixed {
            imd2.push(red);
        }
        report.push(vec![
            grid.bin_hz(o.bin).into(),
            o.bin.into(),
            u64::from(o.order).into(),
            o.mixed.into(),
            rig.spl(o.amplitude.norm()).into(),
            rig.spl(c.amplitude.norm()).into(),
            red.into(),
        ]);
    }
    let y = synthesize(&grid, Unit::Dimensionless)?;
    let bins_text: Vec<String> = grid.bins().iter().map(usize::to_string).collect();
    report.note("tone_level_db_spl", level);
    report.note("tone_bins", bins_text.join(" "));
    report.note("crest_factor", y.crest_factor());
    report.note("k0_used_v", rig.correction.k0);
    report.note("method", method_name(rig.correction.method));
    report.note("domain_clamps", clamps);
    report.note("imd2_count", imd2.len());
    if !imd2.is_empty() {
        let mean = imd2.iter().sum::<f64>() / imd2.len() as f64;
        let min = imd2.iter().copied().fold(f64::INFINITY, f64::min);
        report.note("imd2_mean_reduction_db", mean);
        report.note("imd2_min_reduction_db", min);
    }

    let spectra = vec![
        NamedSpectrum::new("original", orig_spec),
        NamedSpectrum::new("corrected", corr_spec),
    ];
    let top = bins
        .iter()
        .map(|b| b.1)
        .chain(grid.bins())
        .max()
        .unwrap_or(1);
    let chart = spectrum_chart(
        &format!("spectrum_{}", cfg.experiment),
        &format!("{}: spectra before and after correction", cfg.experiment),
        &rig,
        top + top / 10 + 1,
        &[&spectra[0], &spectra[1]],
    );
    Ok(RunOutput {
        report,
        spectra,
        k0_estimate: None,
        imd: Some(ImdPair {
            original,
            corrected,
        }),
        charts: vec![chart],
    })
}
