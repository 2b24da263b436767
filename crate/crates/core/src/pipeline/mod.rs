//! Experiment configuration, runners, and report/plot-data emission.

pub mod config;
pub mod report;
pub mod runners;
pub mod svg;
pub mod wav;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::Result;
use crate::estimator::K0Estimate;
use crate::signal::Unit;
use crate::spectral::{ImdReport, Spectrum};

pub use config::{Experiment, ExperimentConfig, Input};
pub use report::{Cell, ExperimentReport};
pub use runners::{
    run_harmonic_sweep, run_imd, run_k0_sweep_estimate, run_single_tone_correction, run_thd_vs_k0,
    run_thd_vs_level,
};

#[derive(Debug, Clone)]
pub struct NamedSpectrum {
    pub name: String,
    pub spectrum: Spectrum,
}

impl NamedSpectrum {
    pub fn new(name: &str, spectrum: Spectrum) -> Self {
        Self {
            name: name.to_owned(),
            spectrum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImdPair {
    pub original: ImdReport,
    pub corrected: ImdReport,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub spectra: Vec<NamedSpectrum>,
    pub k0_estimate: Option<K0Estimate>,
    pub imd: Option<ImdPair>,
    pub charts: Vec<svg::Chart>,
}

/// Validates `cfg` and runs its experiment without touching the filesystem
/// (apart from reading a WAV input).
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::HarmonicSweep => run_harmonic_sweep(cfg),
        Experiment::K0SweepEstimate => run_k0_sweep_estimate(cfg),
        Experiment::SingleToneCorrection => run_single_tone_correction(cfg),
        Experiment::ThdVsLevel => run_thd_vs_level(cfg),
        Experiment::ThdVsK0 => run_thd_vs_k0(cfg),
        Experiment::TwoTone | Experiment::Multitone => run_imd(cfg),
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Writes `report.csv`, `spectrum_*.csv`, `k0_estimate.csv` and, when
/// enabled, `*.svg` into `dir`. Returns the paths written.
pub fn write_outputs(out: &RunOutput, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: String| -> Result<(PathBuf, BufWriter<File>)> {
        let path = dir.join(name);
        let f = BufWriter::new(File::create(&path)?);
        written.push(path.clone());
        Ok((path, f))
    };
    let (_, w) = create("report.csv".into())?;
    out.report.write_csv(w)?;
    for s in &out.spectra {
        let (_, w) = create(format!("spectrum_{}.csv", s.name))?;
        s.spectrum.write_csv(w, Unit::Volts)?;
    }
    if let Some(e) = &out.k0_estimate {
        let (_, w) = create("k0_estimate.csv".into())?;
        e.write_csv(w)?;
    }
    if svg {
        for c in &out.charts {
            let (path, _) = create(format!("{}.svg", c.name))?;
            fs::write(path, c.render())?;
        }
    }
    Ok(written)
}

/// Runs the experiment and writes every output, plus a `run.json` holding
/// the configuration and wall-clock timestamps (kept out of the CSVs so
/// those stay byte-reproducible).
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let started = unix_now();
    let out = run(cfg)?;
    let mut written = write_outputs(&out, &cfg.output_dir, cfg.svg)?;
    let meta = serde_json::json!({
        "experiment": cfg.experiment.name(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "started_unix_s": started,
        "finished_unix_s": unix_now(),
        "config": cfg,
        "files": written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect::<Vec<_>>(),
    });
    let path = cfg.output_dir.join("run.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&meta).expect("JSON serializes"),
    )?;
    written.push(path);
    Ok(written)
}
