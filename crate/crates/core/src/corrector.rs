//! Inverse post-processing of the quadratic capsule nonlinearity.
//!
//! Keeping terms up to second order, the output is `u = u_lin - u_lin^2 / K0`
//! with `u_lin = K0 y` the distortion-free signal. Two inverses are provided:
//!
//! * [`Method::ExactSqrt`]: `u_lin = (K0 / 2) (1 - sqrt(1 - 4 u / K0))`,
//!   evaluated in the cancellation-free form `2 u / (1 + sqrt(1 - 4 u / K0))`.
//! * [`Method::QuadraticApprox`]: `u_lin ~= u + u^2 / K0`.
//!
//! Both are memoryless, so any chunking of a stream gives the same output as
//! processing it whole.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{SampledSignal, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactSqrt,
    #[default]
    QuadraticApprox,
}

/// What to do where the exact inverse's radicand `1 - 4u/K0` is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampPolicy {
    /// Treat the radicand as zero (output `K0 / 2`) and count the sample.
    #[default]
    ClampToVertex,
    ErrorOut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionConfig {
    pub k0: f64,
    pub method: Method,
    pub clamp_policy: ClampPolicy,
}

impl CorrectionConfig {
    pub fn new(k0: f64, method: Method) -> Self {
        Self {
            k0,
            method,
            clamp_policy: ClampPolicy::default(),
        }
    }

    pub fn exact(k0: f64) -> Self {
        Self::new(k0, Method::ExactSqrt)
    }

    pub fn approx(k0: f64) -> Self {
        Self::new(k0, Method::QuadraticApprox)
    }

    fn validate(&self) -> Result<()> {
        if self.k0 > 0.0 && self.k0.is_finite() {
            Ok(())
        } else {
            Err(Error::param(format!(
                "K0 must be positive, got {}",
                self.k0
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorrectionStats {
    pub samples_processed: u64,
    /// Samples where `1 - 4u/K0 < 0` and the radicand was clamped.
    pub domain_clamps: u64,
}

impl Add for CorrectionStats {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            samples_processed: self.samples_processed + rhs.samples_processed,
            domain_clamps: self.domain_clamps + rhs.domain_clamps,
        }
    }
}

impl AddAssign for CorrectionStats {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Exact square-root inverse applied to one sample. `None` if the radicand is negative.
#[inline]
pub fn invert_exact(u: f64, k0: f64) -> Option<f64> {
    let radicand = 1.0 - 4.0 * u / k0;
    if radicand < 0.0 {
        None
    } else {
        Some(2.0 * u / (1.0 + radicand.sqrt()))
    }
}

#[inline]
pub fn invert_approx(u: f64, k0: f64) -> f64 {
    u + u * u / k0
}

/// Forward quadratic model `u = u_lin - u_lin^2 / K0`.
#[inline]
pub fn distort(u_lin: f64, k0: f64) -> f64 {
    u_lin - u_lin * u_lin / k0
}

pub fn correct_exact(
    u: &SampledSignal,
    cfg: &CorrectionConfig,
) -> Result<(SampledSignal, CorrectionStats)> {
    if cfg.method != Method::ExactSqrt {
        return Err(Error::param("correct_exact requires method exact_sqrt"));
    }
    u.expect_unit(Unit::Volts)?;
    cfg.validate()?;
    let k0 = cfg.k0;
    let mut clamps = 0u64;
    let out = u.try_map(Unit::Volts, |i, x| match invert_exact(x, k0) {
        Some(v) => Ok(v),
        None => match cfg.clamp_policy {
            ClampPolicy::ClampToVertex => {
                clamps += 1;
                Ok(k0 / 2.0)
            }
            ClampPolicy::ErrorOut => Err(Error::domain(
                format!("radicand 1 - 4u/K0 is negative (u = {x} V, K0 = {k0} V)"),
                Some(i),
            )),
        },
    })?;
    let stats = CorrectionStats {
        samples_processed: u.len() as u64,
        domain_clamps: clamps,
    };
    Ok((out, stats))
}

pub fn correct_approx(
    u: &SampledSignal,
    cfg: &CorrectionConfig,
) -> Result<(SampledSignal, CorrectionStats)> {
    if cfg.method != Method::QuadraticApprox {
        return Err(Error::param(
            "correct_approx requires method quadratic_approx",
        ));
    }
    u.expect_unit(Unit::Volts)?;
    cfg.validate()?;
    let k0 = cfg.k0;
    let out = u.try_map(Unit::Volts, |_, x| Ok(invert_approx(x, k0)))?;
    let stats = CorrectionStats {
        samples_processed: u.len() as u64,
        domain_clamps: 0,
    };
    Ok((out, stats))
}

/// Dispatches on `cfg.method`.
pub fn correct(
    u: &SampledSignal,
    cfg: &CorrectionConfig,
) -> Result<(SampledSignal, CorrectionStats)> {
    match cfg.method {
        Method::ExactSqrt => correct_exact(u, cfg),
        Method::QuadraticApprox => correct_approx(u, cfg),
    }
}

/// Corrects one chunk of a stream.
pub fn correct_stream(chunk: &SampledSignal, cfg: &CorrectionConfig) -> Result<SampledSignal> {
    correct(chunk, cfg).map(|(s, _)| s)
}

/// Chunked corrector that keeps running statistics.
#[derive(Debug, Clone)]
pub struct StreamCorrector {
    cfg: CorrectionConfig,
    stats: CorrectionStats,
}

impl StreamCorrector {
    pub fn new(cfg: CorrectionConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            stats: CorrectionStats::default(),
        })
    }

    pub fn process(&mut self, chunk: &SampledSignal) -> Result<SampledSignal> {
        let (out, stats) = correct(chunk, &self.cfg)?;
        self.stats += stats;
        Ok(out)
    }

    pub fn stats(&self) -> CorrectionStats {
        self.stats
    }
}
