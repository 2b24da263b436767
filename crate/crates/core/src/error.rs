use std::fmt;

use crate::estimator::GateReason;
use crate::signal::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unit mismatch: expected {expected}, found {found}")]
    Unit { expected: Unit, found: Unit },

    #[error("domain error{}: {message}", index.map(|i| format!(" at sample {i}")).unwrap_or_default())]
    Domain {
        message: String,
        /// First offending sample, when the error is tied to one.
        index: Option<usize>,
    },

    #[error("THD is undefined: fundamental amplitude is zero")]
    UndefinedThd,

    #[error("K0 is undefined: second-harmonic amplitude is zero")]
    UndefinedK0,

    #[error("intermodulation products collide with stimulus tones at bins {bins:?}")]
    Collision { bins: Vec<usize> },

    #[error("K0 estimation failed, no valid level: {}", DisplayReasons(.reasons))]
    EstimationFailed { reasons: Vec<(f64, GateReason)> },

    #[error("malformed WAV: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedCodec(String),

    #[error("channel {index} out of range for {channels}-channel file")]
    ChannelOutOfRange { index: usize, channels: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable, machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::Unit { .. } => "unit",
            Error::Domain { .. } => "domain",
            Error::UndefinedThd => "undefined_thd",
            Error::UndefinedK0 => "undefined_k0",
            Error::Collision { .. } => "collision",
            Error::EstimationFailed { .. } => "estimation_failed",
            Error::MalformedWav(_) => "malformed_wav",
            Error::UnsupportedCodec(_) => "unsupported_codec",
            Error::ChannelOutOfRange { .. } => "channel_out_of_range",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>, index: Option<usize>) -> Self {
        Error::Domain {
            message: msg.into(),
            index,
        }
    }
}

struct DisplayReasons<'a>(&'a [(f64, GateReason)]);

impl fmt::Display for DisplayReasons<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (level, reason)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{level} dB SPL: {reason}")?;
        }
        Ok(())
    }
}
