//! Shared fixtures for the criterion benchmarks.

use micdist::model::{simulate, MicParams, NonlinearityConfig};
use micdist::signal::{SampledSignal, Unit};
use micdist::spectral::{synthesize, ToneGrid};

pub const SAMPLE_RATE: f64 = 48_000.0;

/// A distorted 1 kHz-ish tone of `len` samples at displacement amplitude `y_m`.
pub fn distorted_tone(len: usize, y_m: f64) -> SampledSignal {
    let bin = (len as f64 * 1000.0 / SAMPLE_RATE).round() as usize;
    let grid = ToneGrid::single(len, SAMPLE_RATE, bin.max(1), y_m).expect("valid grid");
    let y = synthesize(&grid, Unit::Dimensionless).expect("synthesizes");
    simulate(&y, &MicParams::default(), &NonlinearityConfig::default()).expect("in domain")
}
