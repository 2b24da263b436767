#![allow(dead_code)]

use micdist::model::{simulate, MicParams, NonlinearityConfig};
use micdist::signal::{SampledSignal, Unit};
use micdist::spectral::{synthesize, ToneGrid};

pub const FS: f64 = 48_000.0;
pub const N: usize = 4096;
pub const BIN: usize = 85;
pub const K0: f64 = 8.85;

pub fn tone(n: usize, bin: usize, y_m: f64) -> SampledSignal {
    synthesize(
        &ToneGrid::single(n, FS, bin, y_m).unwrap(),
        Unit::Dimensionless,
    )
    .unwrap()
}

pub fn mic_output(y_m: f64, cfg: &NonlinearityConfig) -> SampledSignal {
    simulate(&tone(N, BIN, y_m), &MicParams::default(), cfg).unwrap()
}

pub fn volts(samples: Vec<f64>) -> SampledSignal {
    SampledSignal::new(samples, FS, Unit::Volts).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
