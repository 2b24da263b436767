//! Uniformly sampled waveforms with a physical unit tag.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Volts,
    Pascals,
    Dimensionless,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Volts => "volts",
            Unit::Pascals => "pascals",
            Unit::Dimensionless => "dimensionless",
        })
    }
}

/// A real-valued waveform. Sample rate is positive and every sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate: f64,
    unit: Unit,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64, unit: Unit) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::param(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::input(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            unit,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64, unit: Unit) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate, unit)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn expect_unit(&self, expected: Unit) -> Result<()> {
        if self.unit == expected {
            Ok(())
        } else {
            Err(Error::Unit {
                expected,
                found: self.unit,
            })
        }
    }

    /// Applies a sample-wise map that may fail, keeping rate and assigning `unit`.
    pub(crate) fn try_map<F>(&self, unit: Unit, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, f64) -> Result<f64>,
    {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &s)| f(i, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, self.sample_rate, unit)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.energy() / self.samples.len() as f64).sqrt()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Peak-to-RMS ratio; zero for a silent signal.
    pub fn crest_factor(&self) -> f64 {
        let rms = self.rms();
        if rms == 0.0 {
            0.0
        } else {
            self.peak() / rms
        }
    }

    /// Subtracts the frame mean, mimicking an AC-coupled output.
    pub fn remove_dc(&mut self) {
        let mean = self.mean();
        self.samples.iter_mut().for_each(|s| *s -= mean);
    }

    pub fn concat(&self, other: &SampledSignal) -> Result<Self> {
        if self.unit != other.unit {
            return Err(Error::Unit {
                expected: self.unit,
                found: other.unit,
            });
        }
        if self.sample_rate != other.sample_rate {
            return Err(Error::input(
                "cannot concatenate signals with different sample rates",
            ));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(Self {
            samples,
            sample_rate: self.sample_rate,
            unit: self.unit,
        })
    }

    /// Splits into consecutive chunks of at most `len` samples.
    pub fn chunks(&self, len: usize) -> impl Iterator<Item = SampledSignal> + '_ {
        self.samples.chunks(len.max(1)).map(move |c| SampledSignal {
            samples: c.to_vec(),
            sample_rate: self.sample_rate,
            unit: self.unit,
        })
    }
}
