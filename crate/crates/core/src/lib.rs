//! Nonlinear distortion of single-backplate condenser microphones: a
//! capsule model, a one-parameter inverse that removes the quadratic
//! distortion, coherent THD/IMD analysis, and estimation of the correction
//! parameter K0 from measured harmonics.
//!
//! ```
//! use micdist::prelude::*;
//!
//! let mic = MicParams::default(); // K0 = 8.85 V
//! let grid = ToneGrid::single(4096, 48_000.0, 85, 0.05).unwrap();
//! let y = synthesize(&grid, Unit::Dimensionless).unwrap();
//! let u = simulate(&y, &mic, &NonlinearityConfig::default()).unwrap();
//!
//! let before = harmonics(&u, 85, 4).unwrap();
//! let k0 = estimate_k0(&before).unwrap();
//! let (fixed, _) = correct(&u, &CorrectionConfig::approx(k0)).unwrap();
//! let after = harmonics(&fixed, 85, 4).unwrap();
//! assert!(before.magnitude(2) / after.magnitude(2) > 300.0);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrector;
pub mod error;
pub mod estimator;
pub mod model;
pub mod pipeline;
pub mod signal;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::corrector::{
        correct, correct_approx, correct_exact, correct_stream, ClampPolicy, CorrectionConfig,
        CorrectionStats, Method, StreamCorrector,
    };
    pub use crate::error::{Error, Result};
    pub use crate::estimator::{
        estimate_k0, estimate_k0_sweep, GateReason, K0Estimate, LevelReport,
    };
    pub use crate::model::{
        k0_from_physical, pressure_to_displacement_ratio, simulate, MicParams, NonlinearityConfig,
    };
    pub use crate::pipeline::{Experiment, ExperimentConfig, ExperimentReport};
    pub use crate::signal::{SampledSignal, Unit};
    pub use crate::spectral::{
        harmonics, imd_products, synthesize, thd, HarmonicReport, ImdReport, Spectrum, Tone,
        ToneGrid,
    };
}
