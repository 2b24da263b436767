//! Coherent (bin-aligned) spectral analysis.
//!
//! Every stimulus is built on a [`ToneGrid`] whose tones sit exactly on DFT
//! bins of the analysis frame, so a rectangular window is leakage-free and a
//! single-frame DFT projection returns each component's complex amplitude
//! exactly. Amplitudes are peak values.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
pub use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{SampledSignal, Unit};

/// Upper bound on harmonics analyzed by default.
pub const DEFAULT_MAX_HARMONICS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub bin: usize,
    /// Peak amplitude.
    pub amplitude: f64,
    /// Sine phase in radians: `a sin(w t + phase)`.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToneGrid {
    frame_length: usize,
    sample_rate: f64,
    tones: Vec<Tone>,
}

impl ToneGrid {
    pub fn new(frame_length: usize, sample_rate: f64, tones: Vec<Tone>) -> Result<Self> {
        if frame_length < 4 {
            return Err(Error::param(format!(
                "frame length {frame_length} is too short"
            )));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::param(format!("invalid sample rate {sample_rate}")));
        }
        let mut seen = Vec::with_capacity(tones.len());
        for t in &tones {
            if t.bin == 0 || 2 * t.bin >= frame_length {
                return Err(Error::param(format!(
                    "tone bin {} outside (0, {}): would alias or sit at DC",
                    t.bin,
                    frame_length / 2
                )));
            }
            if !(t.amplitude.is_finite() && t.phase.is_finite()) {
                return Err(Error::param("tone amplitude and phase must be finite"));
            }
            if seen.contains(&t.bin) {
                return Err(Error::param(format!("duplicate tone bin {}", t.bin)));
            }
            seen.push(t.bin);
        }
        Ok(Self {
            frame_length,
            sample_rate,
            tones,
        })
    }

    pub fn single(
        frame_length: usize,
        sample_rate: f64,
        bin: usize,
        amplitude: f64,
    ) -> Result<Self> {
        Self::new(
            frame_length,
            sample_rate,
            vec![Tone {
                bin,
                amplitude,
                phase: 0.0,
            }],
        )
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn bins(&self) -> Vec<usize> {
        self.tones.iter().map(|t| t.bin).collect()
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin_frequency(bin, self.frame_length, self.sample_rate)
    }

    /// Same tones with every amplitude multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        let tones = self
            .tones
            .iter()
            .map(|t| Tone {
                amplitude: t.amplitude * gain,
                ..*t
            })
            .collect();
        Self {
            tones,
            ..self.clone()
        }
    }
}

pub fn bin_frequency(bin: usize, frame_length: usize, sample_rate: f64) -> f64 {
    bin as f64 * sample_rate / frame_length as f64
}

/// Bin whose center is nearest `freq_hz`, clamped to `[1, N/2 - 1]`.
pub fn nearest_bin(freq_hz: f64, frame_length: usize, sample_rate: f64) -> usize {
    let b = (freq_hz * frame_length as f64 / sample_rate).round();
    (b.max(1.0) as usize).min(frame_length / 2 - 1)
}

/// Sum of bin-aligned sines. The phase index `bin * n mod N` is reduced in
/// integers so every period is sampled identically.
pub fn synthesize(grid: &ToneGrid, unit: Unit) -> Result<SampledSignal> {
    let n_len = grid.frame_length;
    let mut out = vec![0.0; n_len];
    for tone in &grid.tones {
        let step = TAU / n_len as f64;
        for (n, s) in out.iter_mut().enumerate() {
            let idx = (tone.bin as u64 * n as u64) % n_len as u64;
            *s += tone.amplitude * (step * idx as f64 + tone.phase).sin();
        }
    }
    SampledSignal::new(out, grid.sample_rate, unit)
}

/// One-sided DFT of a frame.
#[derive(Debug, Clone)]
pub struct Spectrum {
    frame_length: usize,
    sample_rate: f64,
    /// Raw DFT coefficients for bins `0..=N/2`.
    raw: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(s: &SampledSignal) -> Result<Self> {
        let n = s.len();
        if n < 2 {
            return Err(Error::input("spectrum needs at least two samples"));
        }
        let mut buf: Vec<Complex64> = s
            .samples()
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        buf.truncate(n / 2 + 1);
        Ok(Self {
            frame_length: n,
            sample_rate: s.sample_rate(),
            raw: buf,
        })
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.raw
    }

    fn is_edge(&self, bin: usize) -> bool {
        bin == 0 || 2 * bin == self.frame_length
    }

    /// Complex peak amplitude at `bin`. A sine `a sin(w t + phi)` yields
    /// `a * exp(i (phi - pi/2))`; DC and Nyquist are returned unscaled by two.
    pub fn amplitude(&self, bin: usize) -> Complex64 {
        let n = self.frame_length as f64;
        let scale = if self.is_edge(bin) { 1.0 / n } else { 2.0 / n };
        self.raw[bin] * scale
    }

    pub fn magnitude(&self, bin: usize) -> f64 {
        self.amplitude(bin).norm()
    }

    /// Time-domain energy recovered from the spectrum (Parseval).
    pub fn energy(&self) -> f64 {
        let total: f64 = self
            .raw
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let w = if self.is_edge(k) { 1.0 } else { 2.0 };
                w * c.norm_sqr()
            })
            .sum();
        total / self.frame_length as f64
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin_frequency(bin, self.frame_length, self.sample_rate)
    }

    /// Median magnitude over bins not in `exclude` (DC and Nyquist always
    /// excluded), rescaled from the Rayleigh median to the RMS bin magnitude.
    pub fn noise_floor(&self, exclude: &[usize]) -> f64 {
        let last = self.raw.len() - 1;
        let mut mags: Vec<f64> = (1..last)
            .filter(|k| !exclude.contains(k))
            .map(|k| self.magnitude(k))
            .collect();
        if mags.is_empty() {
            return 0.0;
        }
        let mid = mags.len() / 2;
        let (_, median, _) = mags.select_nth_unstable_by(mid, f64::total_cmp);
        // Rayleigh: median = sigma sqrt(2 ln 2), RMS = sigma sqrt(2).
        *median / std::f64::consts::LN_2.sqrt()
    }

    /// Writes `bin_hz,magnitude_db,phase_rad` rows (dB re 1 unit peak).
    pub fn write_csv<W: Write>(&self, mut w: W, unit: Unit) -> Result<()> {
        writeln!(
            w,
            "# magnitude_db: dB re 1 {unit} peak; phase_rad: DFT phase"
        )?;
        writeln!(w, "bin_hz,magnitude_db,phase_rad")?;
        for k in 0..self.raw.len() {
            let a = self.amplitude(k);
            let db = 20.0 * a.norm().max(1e-20).log10();
            writeln!(w, "{},{},{}", self.bin_hz(k), db, a.arg())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReport {
    pub fundamental_bin: usize,
    pub frame_length: usize,
    pub sample_rate: f64,
    /// Complex peak amplitudes of harmonics `1..=n_harmonics`.
    pub amplitudes: Vec<Complex64>,
    /// RMS bin magnitude over non-harmonic bins.
    pub noise_floor: f64,
    pub n_harmonics: usize,
}

impl HarmonicReport {
    /// Magnitude of harmonic `k` (1-based).
    pub fn magnitude(&self, k: usize) -> f64 {
        self.amplitudes[k - 1].norm()
    }

    pub fn fundamental_hz(&self) -> f64 {
        bin_frequency(self.fundamental_bin, self.frame_length, self.sample_rate)
    }
}

/// `min(10, highest harmonic below Nyquist)`.
pub fn default_harmonic_count(frame_length: usize, fundamental_bin: usize) -> usize {
    if fundamental_bin == 0 {
        return 0;
    }
    DEFAULT_MAX_HARMONICS.min((frame_length.div_ceil(2) - 1) / fundamental_bin)
}

pub fn harmonics(s: &SampledSignal, fundamental_bin: usize, n: usize) -> Result<HarmonicReport> {
    let spec = Spectrum::of(s)?;
    harmonics_from_spectrum(&spec, fundamental_bin, n)
}

/// Like [`harmonics`], also checking the frame length a grid was built for.
pub fn harmonics_in_frame(
    s: &SampledSignal,
    frame_length: usize,
    fundamental_bin: usize,
    n: usize,
) -> Result<HarmonicReport> {
    if s.len() != frame_length {
        return Err(Error::input(format!(
            "signal has {} samples, analysis frame is {frame_length}",
            s.len()
        )));
    }
    harmonics(s, fundamental_bin, n)
}

pub fn harmonics_from_spectrum(
    spec: &Spectrum,
    fundamental_bin: usize,
    n: usize,
) -> Result<HarmonicReport> {
    let frame = spec.frame_length();
    if fundamental_bin == 0 {
        return Err(Error::param("fundamental bin must be positive"));
    }
    if n == 0 {
        return Err(Error::param("at least one harmonic is required"));
    }
    if 2 * n * fundamental_bin >= frame {
        return Err(Error::input(format!(
            "harmonic {n} of bin {fundamental_bin} is at or above Nyquist for frame {frame}"
        )));
    }
    let amplitudes: Vec<Complex64> = (1..=n)
        .map(|k| spec.amplitude(k * fundamental_bin))
        .collect();
    let all_harmonics: Vec<usize> = (1..)
        .map(|k| k * fundamental_bin)
        .take_while(|&b| 2 * b < frame)
        .collect();
    Ok(HarmonicReport {
        fundamental_bin,
        frame_length: frame,
        sample_rate: spec.sample_rate(),
        amplitudes,
        noise_floor: spec.noise_floor(&all_harmonics),
        n_harmonics: n,
    })
}

/// `sqrt(sum_{k>=2} |V_k|^2) / |V_1|`.
pub fn thd(report: &HarmonicReport) -> Result<f64> {
    if report.n_harmonics < 2 {
        return Err(Error::param("THD needs at least two harmonics"));
    }
    let v1 = report.magnitude(1);
    if v1 == 0.0 {
        return Err(Error::UndefinedThd);
    }
    let harm: f64 = report.amplitudes[1..].iter().map(|a| a.norm_sqr()).sum();
    Ok(harm.sqrt() / v1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImdProduct {
    /// Lowest `sum |k_i|` that reaches this bin.
    pub order: u32,
    pub bin: usize,
    pub amplitude: Complex64,
    /// Reached by a combination of at least two distinct tones at this order.
    pub mixed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImdReport {
    pub products: Vec<ImdProduct>,
    pub grid: ToneGrid,
}

impl ImdReport {
    /// Second-order products involving two distinct tones.
    pub fn imd2(&self) -> impl Iterator<Item = &ImdProduct> {
        self.products.iter().filter(|p| p.order == 2 && p.mixed)
    }
}

/// Bins `|sum k_i f_i|` for `2 <= sum |k_i| <= max_order`, keyed by bin,
/// with the minimal order and whether a mixed combination reaches it.
fn enumerate_products(bins: &[usize], max_order: u32) -> BTreeMap<usize, (u32, bool)> {
    fn walk(
        bins: &[usize],
        idx: usize,
        budget: u32,
        order: u32,
        nonzero: u32,
        acc: i64,
        out: &mut BTreeMap<usize, (u32, bool)>,
    ) {
        if idx == bins.len() {
            if order >= 2 && acc != 0 {
                let bin = acc.unsigned_abs() as usize;
                let mixed = nonzero >= 2;
                out.entry(bin)
                    .and_modify(|e| {
                        if order < e.0 {
                            *e = (order, mixed);
                        } else if order == e.0 {
                            e.1 |= mixed;
                        }
                    })
                    .or_insert((order, mixed));
            }
            return;
        }
        let b = bins[idx] as i64;
        for k in -(budget as i64)..=(budget as i64) {
            let used = k.unsigned_abs() as u32;
            walk(
                bins,
                idx + 1,
                budget - used,
                order + used,
                nonzero + u32::from(k != 0),
                acc + k * b,
                out,
            );
        }
    }
    let mut out = BTreeMap::new();
    walk(bins, 0, max_order, 0, 0, 0, &mut out);
    out
}

/// Product bins of a grid. Fails if any product lands on a stimulus tone or
/// at/above Nyquist.
pub fn product_bins(grid: &ToneGrid, max_order: u32) -> Result<Vec<(u32, usize, bool)>> {
    if max_order < 2 {
        return Err(Error::param("intermodulation order must be at least 2"));
    }
    let bins = grid.bins();
    let products = enumerate_products(&bins, max_order);
    let collisions: Vec<usize> = products
        .keys()
        .copied()
        .filter(|b| bins.contains(b))
        .collect();
    if !collisions.is_empty() {
        return Err(Error::Collision { bins: collisions });
    }
    if let Some((&b, _)) = products.iter().find(|(&b, _)| 2 * b >= grid.frame_length) {
        return Err(Error::param(format!(
            "product bin {b} is at or above Nyquist; lower the tones or the order"
        )));
    }
    Ok(products.into_iter().map(|(b, (o, m))| (o, b, m)).collect())
}

pub fn imd_products(s: &SampledSignal, grid: &ToneGrid, max_order: u32) -> Result<ImdReport> {
    if s.len() != grid.frame_length {
        return Err(Error::input(format!(
            "signal has {} samples, grid frame is {}",
            s.len(),
            grid.frame_length
        )));
    }
    let bins = product_bins(grid, max_order)?;
    let spec = Spectrum::of(s)?;
    Ok(imd_from_spectrum(&spec, grid, &bins))
}

pub(crate) fn imd_from_spectrum(
    spec: &Spectrum,
    grid: &ToneGrid,
    bins: &[(u32, usize, bool)],
) -> ImdReport {
    let products = bins
        .iter()
        .map(|&(order, bin, mixed)| ImdProduct {
            order,
            bin,
            amplitude: spec.amplitude(bin),
            mixed,
        })
        .collect();
    ImdReport {
        products,
        grid: grid.clone(),
    }
}

/// Two equal-amplitude tones at the bins nearest `f1` and `f2`.
pub fn two_tone_grid(
    frame_length: usize,
    sample_rate: f64,
    f1: f64,
    f2: f64,
    amplitude: f64,
) -> Result<ToneGrid> {
    let tones = [f1, f2]
        .iter()
        .map(|&f| Tone {
            bin: nearest_bin(f, frame_length, sample_rate),
            amplitude,
            phase: 0.0,
        })
        .collect();
    let grid = ToneGrid::new(frame_length, sample_rate, tones)?;
    product_bins(&grid, 2)?;
    Ok(grid)
}

/// `count` equal-amplitude tones, log-spaced between `f_lo` and `f_hi`, with
/// seeded uniform random phases.
///
/// Each tone starts at the bin nearest its log-spaced frequency and is moved
/// outward one bin at a time until no second-order product of the tones
/// chosen so far lands on a tone.
pub fn multitone_grid(
    frame_length: usize,
    sample_rate: f64,
    count: usize,
    f_lo: f64,
    f_hi: f64,
    amplitude: f64,
    seed: u64,
) -> Result<ToneGrid> {
    if count < 2 {
        return Err(Error::param("a multitone needs at least two tones"));
    }
    if !(f_lo > 0.0 && f_hi > f_lo) {
        return Err(Error::param(format!(
            "invalid multitone band [{f_lo}, {f_hi}] Hz"
        )));
    }
    let ratio = (f_hi / f_lo).powf(1.0 / (count - 1) as f64);
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let target = nearest_bin(f_lo * ratio.powi(i as i32), frame_length, sample_rate) as i64;
        let found = (0..frame_length as i64 / 2)
            .flat_map(|d| [target + d, target - d])
            .filter(|&b| b > 0 && 2 * b < frame_length as i64)
            .map(|b| b as usize)
            .find(|b| {
                if chosen.contains(b) {
                    return false;
                }
                let mut trial = chosen.clone();
                trial.push(*b);
                let products = enumerate_products(&trial, 2);
                !trial.iter().any(|t| products.contains_key(t))
            });
        match found {
            Some(b) => chosen.push(b),
            None => return Err(Error::param("no collision-free bin found for multitone")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tones = chosen
        .into_iter()
        .map(|bin| Tone {
            bin,
            amplitude,
            phase: rng.random_range(0.0..TAU),
        })
        .collect();
    ToneGrid::new(frame_length, sample_rate, tones)
}
