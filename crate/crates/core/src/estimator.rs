//! K0 estimation from first- and second-harmonic magnitudes.
//!
//! For a pure-tone drive the quadratic model gives `V1 = K0 y_m` and
//! `V2 = K0 y_m^2 / 2`, hence `K0 = V1^2 / (2 V2)` independently of level
//! and frequency. Across a level sweep, levels whose second harmonic is
//! buried in noise or whose output looks clipped are gated out, and the
//! median of the remaining estimates is reported.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::HarmonicReport;

pub const DEFAULT_GATE_MARGIN_DB: f64 = 10.0;

/// `|V3|` within this many dB of `|V2|` flags a level as clipped.
pub const CLIPPING_PROXIMITY_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    Ok,
    V2BelowFloor,
    ClippingSuspected,
}

impl fmt::Display for GateReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateReason::Ok => "ok",
            GateReason::V2BelowFloor => "v2_below_floor",
            GateReason::ClippingSuspected => "clipping_suspected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEstimate {
    pub level_db_spl: f64,
    /// `NaN` when `V2` is exactly zero.
    pub k0: f64,
    pub valid: bool,
    pub reason: GateReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct K0Estimate {
    pub per_level: Vec<LevelEstimate>,
    /// Median over valid levels.
    pub aggregate: f64,
}

/// A harmonic analysis tagged with its excitation level.
#[derive(Debug, Clone)]
pub struct LevelReport {
    pub level_db_spl: f64,
    pub report: HarmonicReport,
}

/// `V1^2 / (2 V2)` from harmonic magnitudes.
pub fn estimate_k0(report: &HarmonicReport) -> Result<f64> {
    if report.n_harmonics < 2 {
        return Err(Error::param("K0 estimation needs the first two harmonics"));
    }
    let v1 = report.magnitude(1);
    let v2 = report.magnitude(2);
    if v1 == 0.0 {
        return Err(Error::input("fundamental amplitude is zero"));
    }
    if v2 == 0.0 {
        return Err(Error::UndefinedK0);
    }
    Ok(v1 * v1 / (2.0 * v2))
}

fn gate(report: &HarmonicReport, gate_margin_db: f64) -> GateReason {
    let v2 = report.magnitude(2);
    if v2 < report.noise_floor * 10f64.powf(gate_margin_db / 20.0) {
        return GateReason::V2BelowFloor;
    }
    if report.n_harmonics >= 3 {
        let v3 = report.magnitude(3);
        if v3 >= v2 * 10f64.powf(-CLIPPING_PROXIMITY_DB / 20.0) {
            return GateReason::ClippingSuspected;
        }
    }
    GateReason::Ok
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn estimate_k0_sweep(levels: &[LevelReport], gate_margin_db: f64) -> Result<K0Estimate> {
    if levels.is_empty() {
        return Err(Error::input("K0 sweep needs at least one level"));
    }
    let per_level = levels
        .iter()
        .map(|l| {
            let k0 = match estimate_k0(&l.report) {
                Ok(k) => k,
                Err(Error::UndefinedK0) => f64::NAN,
                Err(e) => return Err(e),
            };
            let reason = if k0.is_nan() {
                GateReason::V2BelowFloor
            } else {
                gate(&l.report, gate_margin_db)
            };
            Ok(LevelEstimate {
                level_db_spl: l.level_db_spl,
                k0,
                valid: reason == GateReason::Ok,
                reason,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(per_level)
}

/// Median over the valid entries of `per_level`.
pub fn aggregate(per_level: Vec<LevelEstimate>) -> Result<K0Estimate> {
    let mut valid: Vec<f64> = per_level.iter().filter(|e| e.valid).map(|e| e.k0).collect();
    match median(&mut valid) {
        Some(aggregate) => Ok(K0Estimate {
            per_level,
            aggregate,
        }),
        None => Err(Error::EstimationFailed {
            reasons: per_level
                .iter()
                .map(|e| (e.level_db_spl, e.reason))
                .collect(),
        }),
    }
}

impl K0Estimate {
    pub fn valid_count(&self) -> usize {
        self.per_level.iter().filter(|e| e.valid).count()
    }

    /// `level_db,k0_volts,valid,reason`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# aggregate_k0_volts={}", self.aggregate)?;
        writeln!(w, "level_db,k0_volts,valid,reason")?;
        for e in &self.per_level {
            writeln!(w, "{},{},{},{}", e.level_db_spl, e.k0, e.valid, e.reason)?;
        }
        Ok(())
    }
}
