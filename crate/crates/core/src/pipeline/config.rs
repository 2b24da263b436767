use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corrector::Method;
use crate::error::{Error, Result};
use crate::model::{MicParams, NonlinearityConfig, DEFAULT_SENSITIVITY};
use crate::spectral::{default_harmonic_count, nearest_bin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    HarmonicSweep,
    K0SweepEstimate,
    SingleToneCorrection,
    ThdVsLevel,
    ThdVsK0,
    TwoTone,
    Multitone,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::HarmonicSweep,
        Experiment::K0SweepEstimate,
        Experiment::SingleToneCorrection,
        Experiment::ThdVsLevel,
        Experiment::ThdVsK0,
        Experiment::TwoTone,
        Experiment::Multitone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::HarmonicSweep => "harmonic_sweep",
            Experiment::K0SweepEstimate => "k0_sweep_estimate",
            Experiment::SingleToneCorrection => "single_tone_correction",
            Experiment::ThdVsLevel => "thd_vs_level",
            Experiment::ThdVsK0 => "thd_vs_k0",
            Experiment::TwoTone => "two_tone",
            Experiment::Multitone => "multitone",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            Experiment::HarmonicSweep | Experiment::K0SweepEstimate | Experiment::ThdVsLevel
        )
    }

    /// Excitation level used by single-level experiments when none is given.
    pub fn default_level_db_spl(self) -> f64 {
        match self {
            Experiment::ThdVsK0 => 110.0,
            Experiment::TwoTone | Experiment::Multitone => 120.0,
            _ => 116.0,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Where the analyzed signal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Input<'a> {
    Synthetic,
    Wav(&'a Path),
}

/// Flat experiment description. Every field has a default, so a config
/// file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,

    /// Volts.
    pub polarization_voltage: f64,
    /// Farads.
    pub static_capacitance: f64,
    /// Farads.
    pub parasitic_capacitance: f64,
    /// Meters.
    pub air_gap: f64,
    /// Volts per pascal.
    pub sensitivity: f64,

    /// Sweep levels, dB SPL, ascending.
    pub levels_db_spl: Vec<f64>,
    /// Level of single-level experiments (per tone for two-tone/multitone).
    pub level_db_spl: Option<f64>,

    pub fundamental_hz: f64,
    pub sample_rate: f64,
    pub frame_length: usize,
    pub n_harmonics: Option<usize>,

    pub method: Method,
    /// Volts; replaces the K0 derived from the physical parameters.
    pub k0_override: Option<f64>,

    pub order: u32,
    /// Hard clip at the linear output peak of a tone at this level.
    pub clip_db_spl: Option<f64>,
    /// Volts RMS.
    pub noise_rms: Option<f64>,
    pub dc_block: bool,
    /// Remove the frame mean after correction (the quadratic term adds DC).
    pub dc_block_corrected: bool,

    pub gate_margin_db: f64,
    /// Multiples of the reference K0 for `thd_vs_k0`.
    pub k0_factors: Option<Vec<f64>>,

    pub two_tone_hz: [f64; 2],
    pub multitone_count: usize,
    pub multitone_min_hz: f64,
    pub multitone_max_hz: f64,
    pub imd_max_order: u32,

    pub wav_path: Option<PathBuf>,
    pub wav_channel: usize,
    /// Volts corresponding to digital full scale; required for WAV input.
    pub wav_full_scale_volts: Option<f64>,

    pub output_dir: PathBuf,
    pub seed: u64,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::default(),
            polarization_voltage: 10.0,
            static_capacitance: 1.77e-12,
            parasitic_capacitance: 0.23e-12,
            air_gap: 4e-6,
            sensitivity: DEFAULT_SENSITIVITY,
            levels_db_spl: (0..24).map(|i| 80.0 + 2.0 * f64::from(i)).collect(),
            level_db_spl: None,
            fundamental_hz: 1000.0,
            sample_rate: 48_000.0,
            frame_length: 1 << 16,
            n_harmonics: None,
            method: Method::QuadraticApprox,
            k0_override: None,
            order: 2,
            clip_db_spl: None,
            noise_rms: None,
            dc_block: false,
            dc_block_corrected: false,
            gate_margin_db: crate::estimator::DEFAULT_GATE_MARGIN_DB,
            k0_factors: None,
            two_tone_hz: [1000.0, 1300.0],
            multitone_count: 8,
            multitone_min_hz: 200.0,
            multitone_max_hz: 8000.0,
            imd_max_order: 2,
            wav_path: None,
            wav_channel: 0,
            wav_full_scale_volts: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            svg: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn input(&self) -> Input<'_> {
        match &self.wav_path {
            Some(p) => Input::Wav(p),
            None => Input::Synthetic,
        }
    }

    pub fn mic(&self) -> Result<MicParams> {
        MicParams::new(
            self.polarization_voltage,
            self.static_capacitance,
            self.parasitic_capacitance,
            self.air_gap,
            self.sensitivity,
        )
    }

    pub fn nonlinearity(&self, mic: &MicParams) -> NonlinearityConfig {
        NonlinearityConfig {
            order: self.order,
            clip_level: self
                .clip_db_spl
                .map(|l| mic.sensitivity() * crate::units::spl_to_peak_pressure(l)),
            noise_rms: self.noise_rms,
            seed: self.seed,
            dc_block: self.dc_block,
        }
    }

    pub fn level(&self) -> f64 {
        self.level_db_spl
            .unwrap_or_else(|| self.experiment.default_level_db_spl())
    }

    pub fn fundamental_bin(&self) -> usize {
        nearest_bin(self.fundamental_hz, self.frame_length, self.sample_rate)
    }

    pub fn harmonic_count(&self) -> usize {
        self.n_harmonics
            .unwrap_or_else(|| default_harmonic_count(self.frame_length, self.fundamental_bin()))
    }

    /// 41 log-spaced multiples from 1/4 to 4, including exactly 1.
    pub fn k0_grid(&self) -> Vec<f64> {
        self.k0_factors
            .clone()
            .unwrap_or_else(|| (-20..=20).map(|i| 2f64.powf(f64::from(i) / 10.0)).collect())
    }

    /// Hash of everything that influences report contents. The output
    /// directory is excluded so the same experiment hashes identically
    /// wherever it is written.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.mic()?;
        if self.experiment.is_sweep() && self.levels_db_spl.is_empty() {
            return Err(Error::Config(format!(
                "{} needs at least one level",
                self.experiment
            )));
        }
        if self.levels_db_spl.iter().any(|l| !l.is_finite()) {
            return Err(Error::Config("levels must be finite".into()));
        }
        if !(self.sample_rate > 0.0) || self.frame_length < 16 {
            return Err(Error::Config(
                "sample rate must be positive and frame length at least 16".into(),
            ));
        }
        if !(self.fundamental_hz > 0.0 && 2.0 * self.fundamental_hz < self.sample_rate) {
            return Err(Error::Config(format!(
                "fundamental {} Hz must lie in (0, Nyquist)",
                self.fundamental_hz
            )));
        }
        if let Some(k) = self.k0_override {
            if !(k > 0.0) {
                return Err(Error::Config(format!(
                    "k0_override must be positive, got {k}"
                )));
            }
        }
        if let Some(f) = &self.k0_factors {
            if f.is_empty() || f.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config(
                    "k0_factors must be non-empty and positive".into(),
                ));
            }
        }
        if self.wav_path.is_some() && self.wav_full_scale_volts.is_none() {
            return Err(Error::Config(
                "WAV input requires wav_full_scale_volts (volts at digital full scale)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.levels_db_spl.first(), Some(&80.0));
        assert_eq!(c.levels_db_spl.last(), Some(&126.0));
        assert_eq!(c.fundamental_bin(), 1365);
        assert_eq!(c.harmonic_count(), 10);
        assert!((c.mic().unwrap().k0() - 8.85).abs() < 1e-12);
        let grid = c.k0_grid();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[20], 1.0);
        assert!((grid[0] - 0.25).abs() < 1e-15 && (grid[40] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"thd_vs_k0\"\nlevel_db_spl = 105.0\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::ThdVsK0);
        assert_eq!(c.level(), 105.0);
        assert_eq!(c.sensitivity, DEFAULT_SENSITIVITY);
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("levles = [1.0]").unwrap_err();
        assert_eq!(err.category(), "config");
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        let c = ExperimentConfig {
            seed: 1,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn experiment_names_parse() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(e.name().replace('_', "-").parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Experiment::ThdVsLevel);
        c.levels_db_spl.clear();
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            wav_path: Some("x.wav".into()),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            polarization_voltage: -1.0,
            ..ExperimentConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().category(), "invalid_parameter");
    }
}
