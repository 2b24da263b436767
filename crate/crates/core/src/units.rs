//! Sound pressure level conversions. Amplitudes are peak values, levels are
//! RMS re 20 µPa.

use std::f64::consts::SQRT_2;

use crate::model::MicParams;

/// Reference pressure for dB SPL, in pascals.
pub const P_REF: f64 = 20e-6;

pub fn spl_to_peak_pressure(level_db_spl: f64) -> f64 {
    P_REF * 10f64.powf(level_db_spl / 20.0) * SQRT_2
}

pub fn peak_pressure_to_spl(peak_pa: f64) -> f64 {
    20.0 * (peak_pa / SQRT_2 / P_REF).log10()
}

/// Equivalent input level of an output amplitude, through the linear sensitivity.
pub fn volts_to_spl(peak_volts: f64, sensitivity: f64) -> f64 {
    peak_pressure_to_spl(peak_volts / sensitivity)
}

/// Normalized displacement amplitude y_m produced by a pure tone at `level_db_spl`.
pub fn displacement_amplitude(level_db_spl: f64, mic: &MicParams) -> f64 {
    mic.sensitivity() * spl_to_peak_pressure(level_db_spl) / mic.k0()
}

/// Inverse of [`displacement_amplitude`].
pub fn level_for_displacement(y_m: f64, mic: &MicParams) -> f64 {
    peak_pressure_to_spl(y_m * mic.k0() / mic.sensitivity())
}

pub fn amplitude_db(x: f64) -> f64 {
    20.0 * x.log10()
}
