//! Electrical output of a single-backplate condenser microphone.
//!
//! The capsule output is the alternating power series
//! `u = K0 (y - y^2 + y^3 - ...)` in the relative membrane displacement `y`,
//! truncated at a configurable order. `K0 = U0 C0 / (C_P + C0)` lumps the
//! polarization voltage and the capacitive divider formed with the parasitic
//! capacitance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::signal::{SampledSignal, Unit};

/// Sensitivity that puts y_m = 0.02 at 110 dB SPL for K0 = 8.85 V.
pub const DEFAULT_SENSITIVITY: f64 = 19.8e-3;

/// Lumped voltage constant `U0 C0 / (C_P + C0)`.
pub fn k0_from_physical(
    polarization_voltage: f64,
    static_capacitance: f64,
    parasitic_capacitance: f64,
) -> Result<f64> {
    if !(polarization_voltage > 0.0) {
        return Err(Error::param(format!(
            "polarization voltage must be positive, got {polarization_voltage}"
        )));
    }
    if !(static_capacitance > 0.0) {
        return Err(Error::param(format!(
            "static capacitance must be positive, got {static_capacitance}"
        )));
    }
    if !(parasitic_capacitance >= 0.0) {
        return Err(Error::param(format!(
            "parasitic capacitance must be non-negative, got {parasitic_capacitance}"
        )));
    }
    Ok(polarization_voltage * static_capacitance / (parasitic_capacitance + static_capacitance))
}

/// Physical microphone parameters. `k0` is derived once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicParams {
    polarization_voltage: f64,
    static_capacitance: f64,
    parasitic_capacitance: f64,
    air_gap: f64,
    sensitivity: f64,
    k0: f64,
}

impl MicParams {
    /// Units: volts, farads, farads, meters, volts per pascal.
    pub fn new(
        polarization_voltage: f64,
        static_capacitance: f64,
        parasitic_capacitance: f64,
        air_gap: f64,
        sensitivity: f64,
    ) -> Result<Self> {
        let k0 = k0_from_physical(
            polarization_voltage,
            static_capacitance,
            parasitic_capacitance,
        )?;
        if !(air_gap > 0.0) {
            return Err(Error::param(format!(
                "air gap must be positive, got {air_gap}"
            )));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(Error::param(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            polarization_voltage,
            static_capacitance,
            parasitic_capacitance,
            air_gap,
            sensitivity,
            k0,
        })
    }

    /// A capsule with no parasitic capacitance, so that `k0 == polarization_voltage`.
    pub fn from_k0(k0: f64, sensitivity: f64) -> Result<Self> {
        Self::new(k0, 1e-12, 0.0, 4e-6, sensitivity)
    }

    pub fn polarization_voltage(&self) -> f64 {
        self.polarization_voltage
    }

    pub fn static_capacitance(&self) -> f64 {
        self.static_capacitance
    }

    pub fn parasitic_capacitance(&self) -> f64 {
        self.parasitic_capacitance
    }

    pub fn air_gap(&self) -> f64 {
        self.air_gap
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn with_sensitivity(self, sensitivity: f64) -> Result<Self> {
        Self::new(
            self.polarization_voltage,
            self.static_capacitance,
            self.parasitic_capacitance,
            self.air_gap,
            sensitivity,
        )
    }
}

impl Default for MicParams {
    /// 10 V polarization, 1.77 pF capsule, 0.23 pF parasitic: K0 = 8.85 V.
    fn default() -> Self {
        Self::new(10.0, 1.77e-12, 0.23e-12, 4e-6, DEFAULT_SENSITIVITY)
            .expect("default microphone parameters are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityConfig {
    /// Number of retained powers of y.
    pub order: u32,
    /// Symmetric hard clip applied last, in volts.
    pub clip_level: Option<f64>,
    /// Additive white Gaussian noise after the nonlinearity, in volts RMS.
    pub noise_rms: Option<f64>,
    pub seed: u64,
    /// Remove the frame mean from the output.
    pub dc_block: bool,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            order: 2,
            clip_level: None,
            noise_rms: None,
            seed: 0,
            dc_block: false,
        }
    }
}

impl NonlinearityConfig {
    pub fn with_order(order: u32) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }
}

/// Maps pressure to relative displacement `y = S p / K0`, so the linear
/// term of the series reproduces `u_lin = S p`.
pub fn pressure_to_displacement_ratio(p: &SampledSignal, mic: &MicParams) -> Result<SampledSignal> {
    p.expect_unit(Unit::Pascals)?;
    let gain = mic.sensitivity() / mic.k0();
    p.try_map(Unit::Dimensionless, |_, x| Ok(gain * x))
}

/// `sum_{k=1..order} (-1)^(k+1) y^k`, by Horner's rule.
fn truncated_series(y: f64, order: u32) -> f64 {
    let mut acc = 0.0;
    for _ in 0..order {
        acc = y * (1.0 - acc);
    }
    acc
}

/// Synthesizes the distorted output voltage for a displacement waveform.
pub fn simulate(
    y: &SampledSignal,
    mic: &MicParams,
    cfg: &NonlinearityConfig,
) -> Result<SampledSignal> {
    y.expect_unit(Unit::Dimensionless)?;
    if cfg.order < 1 {
        return Err(Error::param("nonlinearity order must be at least 1"));
    }
    if let Some(c) = cfg.clip_level {
        if !(c > 0.0) {
            return Err(Error::param(format!(
                "clip level must be positive, got {c}"
            )));
        }
    }
    if let Some(n) = cfg.noise_rms {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::param(format!(
                "noise RMS must be non-negative, got {n}"
            )));
        }
    }
    if let Some(i) = y.samples().iter().position(|v| v.abs() >= 1.0) {
        return Err(Error::domain(
            format!(
                "|y| = {} is outside the series convergence region |y| < 1",
                y.samples()[i].abs()
            ),
            Some(i),
        ));
    }

    let k0 = mic.k0();
    let mut out: Vec<f64> = y
        .samples()
        .iter()
        .map(|&v| k0 * truncated_series(v, cfg.order))
        .collect();

    if let Some(sigma) = cfg.noise_rms.filter(|&s| s > 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
        for s in &mut out {
            *s += normal.sample(&mut rng);
        }
    }
    if let Some(c) = cfg.clip_level {
        for s in &mut out {
            *s = s.clamp(-c, c);
        }
    }

    let mut u = SampledSignal::new(out, y.sample_rate(), Unit::Volts)?;
    if cfg.dc_block {
        u.remove_dc();
    }
    Ok(u)
}

/// Closed-form fundamental and second-harmonic amplitudes of the order-2
/// model driven by a pure tone of amplitude `y_m`: `(K0 y_m, K0 y_m^2 / 2)`.
pub fn predicted_harmonics(k0: f64, y_m: f64) -> (f64, f64) {
    (k0 * y_m, k0 * y_m * y_m / 2.0)
}
