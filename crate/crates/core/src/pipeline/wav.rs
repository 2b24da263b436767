//! RIFF/WAVE reading and writing for PCM integer (16/24/32-bit) and IEEE
//! float (32/64-bit) data, including `WAVE_FORMAT_EXTENSIBLE` headers.
//!
//! Samples are normalized so digital full scale is 1.0; integer data maps
//! `[-2^(b-1), 2^(b-1))` onto `[-1, 1)`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{SampledSignal, Unit};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int16,
    Int24,
    Int32,
    Float32,
    Float64,
}

impl SampleFormat {
    pub fn bits(self) -> u16 {
        match self {
            SampleFormat::Int16 => 16,
            SampleFormat::Int24 => 24,
            SampleFormat::Int32 | SampleFormat::Float32 => 32,
            SampleFormat::Float64 => 64,
        }
    }

    fn bytes(self) -> usize {
        usize::from(self.bits() / 8)
    }

    fn is_float(self) -> bool {
        matches!(self, SampleFormat::Float32 | SampleFormat::Float64)
    }

    fn from_tag(tag: u16, bits: u16) -> Result<Self> {
        match (tag, bits) {
            (FORMAT_PCM, 16) => Ok(SampleFormat::Int16),
            (FORMAT_PCM, 24) => Ok(SampleFormat::Int24),
            (FORMAT_PCM, 32) => Ok(SampleFormat::Int32),
            (FORMAT_FLOAT, 32) => Ok(SampleFormat::Float32),
            (FORMAT_FLOAT, 64) => Ok(SampleFormat::Float64),
            _ => Err(Error::UnsupportedCodec(format!(
                "format tag {tag:#06x} with {bits} bits per sample"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub channels: u16,
    pub sample_rate: u32,
    pub format: SampleFormat,
}

/// Decoded audio, one vector per channel, normalized to full scale 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub spec: WavSpec,
    pub channels: Vec<Vec<f64>>,
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn malformed(msg: &str) -> Error {
    Error::MalformedWav(msg.to_owned())
}

fn decode_sample(format: SampleFormat, b: &[u8]) -> f64 {
    match format {
        SampleFormat::Int16 => f64::from(i16::from_le_bytes([b[0], b[1]])) / 32_768.0,
        SampleFormat::Int24 => {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            f64::from(v) / 8_388_608.0
        }
        SampleFormat::Int32 => {
            f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])) / 2_147_483_648.0
        }
        SampleFormat::Float32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        SampleFormat::Float64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
    }
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavData> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut spec: Option<WavSpec> = None;
    let mut block_align = 0usize;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                malformed(&format!(
                    "chunk '{}' declares {size} bytes but the file is truncated",
                    String::from_utf8_lossy(id)
                ))
            })?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                let mut tag = le_u16(bytes, body);
                let channels = le_u16(bytes, body + 2);
                let sample_rate = le_u32(bytes, body + 4);
                block_align = usize::from(le_u16(bytes, body + 12));
                let bits = le_u16(bytes, body + 14);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(malformed("extensible fmt chunk shorter than 40 bytes"));
                    }
                    // First two bytes of the sub-format GUID hold the format tag.
                    tag = le_u16(bytes, body + 24);
                }
                let format = SampleFormat::from_tag(tag, bits)?;
                if channels == 0 || sample_rate == 0 {
                    return Err(malformed("zero channels or sample rate"));
                }
                if block_align != usize::from(channels) * format.bytes() {
                    return Err(malformed(
                        "block alignment does not match channels and bit depth",
                    ));
                }
                spec = Some(WavSpec {
                    channels,
                    sample_rate,
                    format,
                });
            }
            b"data" => data = Some(&bytes[body..end]),
            _ => {}
        }
        pos = end + (size & 1);
    }
    let spec = spec.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if data.len() % block_align != 0 {
        return Err(malformed("data chunk is not a whole number of frames"));
    }
    let nch = usize::from(spec.channels);
    let width = spec.format.bytes();
    let mut channels = vec![Vec::with_capacity(data.len() / block_align); nch];
    for frame in data.chunks_exact(block_align) {
        for (c, ch) in channels.iter_mut().enumerate() {
            ch.push(decode_sample(spec.format, &frame[c * width..]));
        }
    }
    Ok(WavData { spec, channels })
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    parse_wav(&fs::read(path)?)
}

/// Reads one channel and scales digital full scale to `full_scale_volts`.
pub fn ingest_wav(path: &Path, channel: usize, full_scale_volts: f64) -> Result<SampledSignal> {
    if !(full_scale_volts > 0.0 && full_scale_volts.is_finite()) {
        return Err(Error::param(format!(
            "full-scale calibration must be positive, got {full_scale_volts}"
        )));
    }
    let wav = read_wav(path)?;
    let nch = wav.channels.len();
    let samples = wav
        .channels
        .into_iter()
        .nth(channel)
        .ok_or(Error::ChannelOutOfRange {
            index: channel,
            channels: nch,
        })?;
    let scaled = samples.into_iter().map(|s| s * full_scale_volts).collect();
    SampledSignal::new(scaled, f64::from(wav.spec.sample_rate), Unit::Volts)
}

fn encode_sample(format: SampleFormat, x: f64, out: &mut Vec<u8>) {
    fn quantize(x: f64, bits: u32) -> i64 {
        let full = (1i64 << (bits - 1)) as f64;
        (x * full).round().clamp(-full, full - 1.0) as i64
    }
    match format {
        SampleFormat::Int16 => out.extend_from_slice(&(quantize(x, 16) as i16).to_le_bytes()),
        SampleFormat::Int24 => out.extend_from_slice(&(quantize(x, 24) as i32).to_le_bytes()[..3]),
        SampleFormat::Int32 => out.extend_from_slice(&(quantize(x, 32) as i32).to_le_bytes()),
        SampleFormat::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        SampleFormat::Float64 => out.extend_from_slice(&x.to_le_bytes()),
    }
}

/// Encodes channels of normalized samples (full scale 1.0).
pub fn encode_wav(channels: &[&[f64]], sample_rate: u32, format: SampleFormat) -> Result<Vec<u8>> {
    let nch = channels.len();
    if nch == 0 || nch > usize::from(u16::MAX) {
        return Err(Error::param(
            "WAV output needs between 1 and 65535 channels",
        ));
    }
    let frames = channels[0].len();
    if channels.iter().any(|c| c.len() != frames) {
        return Err(Error::param("all channels must have the same length"));
    }
    let width = format.bytes();
    let data_len = frames * nch * width;
    let fmt_len: u32 = if format.is_float() { 18 } else { 16 };
    let riff_len = 4 + (8 + fmt_len as usize) + (8 + data_len) + (data_len & 1);
    let riff_len = u32::try_from(riff_len).map_err(|_| Error::param("WAV output exceeds 4 GiB"))?;

    let mut out = Vec::with_capacity(riff_len as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&fmt_len.to_le_bytes());
    let tag = if format.is_float() {
        FORMAT_FLOAT
    } else {
        FORMAT_PCM
    };
    let block_align = (nch * width) as u16;
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(nch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    if format.is_float() {
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..frames {
        for ch in channels {
            encode_sample(format, ch[i], &mut out);
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    Ok(out)
}

/// Writes a mono signal, mapping `full_scale_volts` to digital full scale.
pub fn write_wav(
    path: &Path,
    signal: &SampledSignal,
    format: SampleFormat,
    full_scale_volts: f64,
) -> Result<()> {
    if !(full_scale_volts > 0.0) {
        return Err(Error::param("full-scale calibration must be positive"));
    }
    let rate = signal.sample_rate();
    if rate.fract() != 0.0 || rate > f64::from(u32::MAX) {
        return Err(Error::param(format!(
            "sample rate {rate} is not an integer number of Hz"
        )));
    }
    let norm: Vec<f64> = signal
        .samples()
        .iter()
        .map(|s| s / full_scale_volts)
        .collect();
    let bytes = encode_wav(&[&norm], rate as u32, format)?;
    fs::write(path, bytes)?;
    Ok(())
}
