use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use micdist::corrector::Method;
use micdist::model::{simulate, MicParams};
use micdist::pipeline::wav::{write_wav, SampleFormat};
use micdist::pipeline::{execute, Experiment, ExperimentConfig};
use micdist::signal::Unit;
use micdist::spectral::{synthesize, ToneGrid};
use micdist::units::displacement_amplitude;
use micdist::Error;

/// Quadratic-distortion model, correction and analysis for condenser microphones.
///
/// Units: voltages in V, capacitances in F, air gap in m, sensitivity in
/// V/Pa, sound levels in dB SPL re 20 µPa (a sine at L dB SPL has peak
/// pressure 20 µPa · 10^(L/20) · √2), frequencies in Hz.
#[derive(Parser, Debug)]
#[command(name = "micdist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// H1/H2/H3 and THD across a level sweep, with model predictions.
    HarmonicSweep(RunArgs),
    /// Estimate K0 (V) from H1 and H2 over a level sweep or a WAV recording.
    K0SweepEstimate(RunArgs),
    /// Correct one tone with both inverses and write the three spectra.
    SingleToneCorrection(RunArgs),
    /// THD before and after correction across a level sweep.
    ThdVsLevel(RunArgs),
    /// THD after correction with a deliberately mis-set K0.
    ThdVsK0(RunArgs),
    /// Second-order intermodulation of two tones.
    TwoTone(RunArgs),
    /// Second-order intermodulation of a log-spaced multitone.
    Multitone(RunArgs),
    /// Write a simulated single-tone capsule output to a WAV file.
    RenderWav(RenderArgs),
}

#[derive(Args, Debug, Clone)]
struct MicArgs {
    /// Polarization voltage U0 (V).
    #[arg(long)]
    u0: Option<f64>,
    /// Static capsule capacitance C0 (F).
    #[arg(long)]
    c0: Option<f64>,
    /// Parasitic capacitance C_P (F).
    #[arg(long)]
    cp: Option<f64>,
    /// Air gap h_g (m).
    #[arg(long)]
    air_gap: Option<f64>,
    /// Linear sensitivity S (V/Pa).
    #[arg(long)]
    sensitivity: Option<f64>,
    /// Tone frequency (Hz); snapped to the nearest analysis bin.
    #[arg(long)]
    fundamental_hz: Option<f64>,
    /// Model truncation order N (1 = linear).
    #[arg(long)]
    order: Option<u32>,
    /// Additive white noise at the capsule output, rms (V).
    #[arg(long)]
    noise_rms: Option<f64>,
    /// Hard output clipping at the peak voltage of a tone at this level (dB SPL).
    #[arg(long)]
    clip_db_spl: Option<f64>,
    /// Remove the mean of the simulated output.
    #[arg(long)]
    dc_block: bool,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    /// TOML experiment configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    mic: MicArgs,
    /// Correction parameter K0 (V), instead of the value derived from U0, C0, C_P.
    #[arg(long)]
    k0: Option<f64>,
    /// Inverse used for correction.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ascending sweep levels (dB SPL).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Single-tone level, per tone for IMD runs (dB SPL).
    #[arg(long)]
    level: Option<f64>,
    /// Analyze this WAV recording instead of simulating.
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Zero-based WAV channel.
    #[arg(long)]
    wav_channel: Option<usize>,
    /// Voltage represented by digital full scale in the WAV (V).
    #[arg(long)]
    wav_full_scale_volts: Option<f64>,
    /// Remove the frame mean of the corrected signal.
    #[arg(long)]
    dc_block_corrected: bool,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct RenderArgs {
    #[command(flatten)]
    mic: MicArgs,
    /// Tone level (dB SPL).
    #[arg(long, default_value_t = 110.0)]
    level: f64,
    #[arg(long, default_value_t = 48_000)]
    sample_rate: u32,
    /// Number of samples.
    #[arg(long, default_value_t = 65_536)]
    frame_length: usize,
    /// Voltage mapped to digital full scale (V).
    #[arg(long, default_value_t = 1.0)]
    full_scale_volts: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::F64)]
    format: FormatArg,
    /// Destination WAV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MethodArg {
    Exact,
    Approx,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    I16,
    I24,
    I32,
    F32,
    F64,
}

impl MicArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(u0 => polarization_voltage, c0 => static_capacitance, cp => parasitic_capacitance,
             air_gap => air_gap, sensitivity => sensitivity, fundamental_hz => fundamental_hz,
             order => order, seed => seed);
        if self.noise_rms.is_some() {
            cfg.noise_rms = self.noise_rms;
        }
        if self.clip_db_spl.is_some() {
            cfg.clip_db_spl = self.clip_db_spl;
        }
        cfg.dc_block |= self.dc_block;
    }
}

fn build_config(experiment: Experiment, args: &RunArgs) -> micdist::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = experiment;
    args.mic.apply(&mut cfg);
    if args.k0.is_some() {
        cfg.k0_override = args.k0;
    }
    if let Some(m) = args.method {
        cfg.method = match m {
            MethodArg::Exact => Method::ExactSqrt,
            MethodArg::Approx => Method::QuadraticApprox,
        };
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(levels) = &args.levels {
        cfg.levels_db_spl = levels.clone();
    }
    if args.level.is_some() {
        cfg.level_db_spl = args.level;
    }
    if args.wav.is_some() {
        cfg.wav_path = args.wav.clone();
    }
    if let Some(c) = args.wav_channel {
        cfg.wav_channel = c;
    }
    if args.wav_full_scale_volts.is_some() {
        cfg.wav_full_scale_volts = args.wav_full_scale_volts;
    }
    cfg.dc_block_corrected |= args.dc_block_corrected;
    cfg.svg |= args.svg;
    Ok(cfg)
}

fn render(args: &RenderArgs) -> micdist::Result<Vec<PathBuf>> {
    let mut cfg = ExperimentConfig {
        sample_rate: f64::from(args.sample_rate),
        frame_length: args.frame_length,
        ..ExperimentConfig::new(Experiment::SingleToneCorrection)
    };
    args.mic.apply(&mut cfg);
    let mic: MicParams = cfg.mic()?;
    let y_m = displacement_amplitude(args.level, &mic);
    let grid = ToneGrid::single(
        cfg.frame_length,
        cfg.sample_rate,
        cfg.fundamental_bin(),
        y_m,
    )?;
    let y = synthesize(&grid, Unit::Dimensionless)?;
    let u = simulate(&y, &mic, &cfg.nonlinearity(&mic))?;
    let format = match args.format {
        FormatArg::I16 => SampleFormat::Int16,
        FormatArg::I24 => SampleFormat::Int24,
        FormatArg::I32 => SampleFormat::Int32,
        FormatArg::F32 => SampleFormat::Float32,
        FormatArg::F64 => SampleFormat::Float64,
    };
    write_wav(&args.out, &u, format, args.full_scale_volts)?;
    Ok(vec![args.out.clone()])
}

fn dispatch(cli: &Cli) -> micdist::Result<Vec<PathBuf>> {
    let (experiment, args) = match &cli.command {
        Command::RenderWav(r) => return render(r),
        Command::HarmonicSweep(a) => (Experiment::HarmonicSweep, a),
        Command::K0SweepEstimate(a) => (Experiment::K0SweepEstimate, a),
        Command::SingleToneCorrection(a) => (Experiment::SingleToneCorrection, a),
        Command::ThdVsLevel(a) => (Experiment::ThdVsLevel, a),
        Command::ThdVsK0(a) => (Experiment::ThdVsK0, a),
        Command::TwoTone(a) => (Experiment::TwoTone, a),
        Command::Multitone(a) => (Experiment::Multitone, a),
    };
    execute(&build_config(experiment, args)?)
}

fn report_error(category: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": category, "message": message })
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            report_error("usage", e.to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(e.category(), &e.to_string());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}
