use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use penh::engine::{bench, EngineConfig, Enhancer};
use penh::features::{FeatureVector, FEATURE_DIM};
use penh::model::{infer, ModelState, ModelWeights};
use penh::pitch::{comb_response_csv, PITCH_RATE};
use penh::records::{read_records, write_records};
use penh::targets::{extract_records, gain_loss, strength_loss, LossConfig};
use penh::wav::{read_wav, write_wav, Audio, OutputFormat};

mod dataset;

#[derive(Parser)]
#[command(name = "penh", version, about = "Streaming fullband speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a WAV file with a quantized model.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Disable the pitch comb blend.
        #[arg(long)]
        no_pitch: bool,
        /// Disable gain warping, the decay floor and the high-pass.
        #[arg(long)]
        no_postfilter: bool,
        /// Disable only the pitch-adaptive high-pass.
        #[arg(long)]
        no_highpass: bool,
        /// Required input rate.
        #[arg(long, value_parser = ["16000", "48000"])]
        rate: Option<String>,
        /// Frames per batched inference call.
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long)]
        pcm16: bool,
    },
    /// Enhance with ideal gains and strengths computed from the clean file.
    OracleEnhance {
        clean: PathBuf,
        noisy: PathBuf,
        output: PathBuf,
        #[arg(long)]
        no_pitch: bool,
        #[arg(long)]
        no_postfilter: bool,
        #[arg(long)]
        no_highpass: bool,
        #[arg(long)]
        pcm16: bool,
    },
    /// Synthesize augmented clean/noisy pairs with feature records.
    MakeDataset {
        #[arg(long)]
        speech: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        rir: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        out: PathBuf,
    },
    /// Write the feature/target records of a clean/noisy pair.
    MakeTargets {
        clean: PathBuf,
        noisy: PathBuf,
        output: PathBuf,
    },
    /// Mean per-frame losses of a model on a record file.
    EvalLoss {
        targets: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Comb filter magnitude response as CSV.
    CombResponse {
        #[arg(long, default_value_t = 200.0)]
        pitch_hz: f64,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 2000.0)]
        max_hz: f64,
        #[arg(long, default_value_t = 1.0)]
        step_hz: f64,
        output: PathBuf,
    },
    /// Real-time factor and complexity of a model.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
    },
    /// Write a randomly initialized desk-size model.
    InitModel {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        output: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Format(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Format(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Format(m) => f.write_str(m),
        }
    }
}

impl From<penh::Error> for CliError {
    fn from(e: penh::Error) -> Self {
        let msg = e.to_string();
        match e {
            penh::Error::Usage(_) | penh::Error::Config(_) => CliError::Usage(msg),
            penh::Error::Io(_) => CliError::Io(msg),
            penh::Error::Format { .. } | penh::Error::UnsupportedRate { .. } | penh::Error::Rejected(_) => {
                CliError::Format(msg)
            }
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn with_path<T>(path: &Path, r: penh::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| {
        let c = CliError::from(e);
        let m = format!("{}: {c}", path.display());
        match c {
            CliError::Usage(_) => CliError::Usage(m),
            CliError::Io(_) => CliError::Io(m),
            CliError::Format(_) => CliError::Format(m),
        }
    })
}

fn load_model(path: &Path) -> Result<Arc<ModelWeights>, CliError> {
    Ok(Arc::new(with_path(path, ModelWeights::load(path))?))
}

fn load_audio(path: &Path) -> Result<Audio, CliError> {
    with_path(path, read_wav(path))
}

fn format_of(pcm16: bool) -> OutputFormat {
    if pcm16 {
        OutputFormat::Pcm16
    } else {
        OutputFormat::Float32
    }
}

fn engine_config(rate: u32, no_pitch: bool, no_postfilter: bool, no_highpass: bool) -> EngineConfig {
    let mut cfg = EngineConfig::at_rate(rate);
    cfg.pitch_filter = !no_pitch;
    cfg.highpass = !no_highpass;
    if no_postfilter {
        cfg.postfilter = false;
        cfg.decay_floor = false;
        cfg.highpass = false;
    }
    cfg
}

fn supported_rate(path: &Path, rate: u32) -> Result<(), CliError> {
    if rate == 16_000 || rate == PITCH_RATE {
        Ok(())
    } else {
        Err(CliError::Format(format!(
            "{}: sample rate {rate} Hz is not supported (16000 or 48000)",
            path.display()
        )))
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Enhance {
            model,
            input,
            output,
            no_pitch,
            no_postfilter,
            no_highpass,
            rate,
            batch,
            pcm16,
        } => {
            if batch == 0 {
                return Err(CliError::Usage("--batch must be at least 1".into()));
            }
            let w = load_model(&model)?;
            let audio = load_audio(&input)?;
            if let Some(r) = rate {
                if r.parse::<u32>().ok() != Some(audio.sample_rate) {
                    return Err(CliError::Usage(format!(
                        "{} is {} Hz but --rate {r} was requested",
                        input.display(),
                        audio.sample_rate
                    )));
                }
            }
            supported_rate(&input, audio.sample_rate)?;
            let mut e = Enhancer::new(engine_config(audio.sample_rate, no_pitch, no_postfilter, no_highpass), Some(w))?;
            let out = e.enhance(&audio.samples, batch)?;
            with_path(&output, write_wav(&output, &out, audio.sample_rate, format_of(pcm16)))
        }
        Command::OracleEnhance {
            clean,
            noisy,
            output,
            no_pitch,
            no_postfilter,
            no_highpass,
            pcm16,
        } => {
            let c = load_audio(&clean)?;
            let n = load_audio(&noisy)?;
            check_pair(&c, &n)?;
            supported_rate(&noisy, n.sample_rate)?;
            let mut e = Enhancer::oracle(engine_config(n.sample_rate, no_pitch, no_postfilter, no_highpass))?;
            let out = e.enhance_oracle(&n.samples, &c.samples)?;
            with_path(&output, write_wav(&output, &out, n.sample_rate, format_of(pcm16)))
        }
        Command::MakeDataset {
            speech,
            noise,
            rir,
            count,
            seed,
            out,
        } => dataset::make_dataset(&speech, &noise, &rir, count, seed, &out),
        Command::MakeTargets { clean, noisy, output } => {
            let c = load_audio(&clean)?;
            let n = load_audio(&noisy)?;
            check_pair(&c, &n)?;
            supported_rate(&noisy, n.sample_rate)?;
            let recs = extract_records(&c.samples, &n.samples, n.sample_rate)?;
            let f = fs::File::create(&output).map_err(|e| io_err(&output, e))?;
            with_path(&output, write_records(std::io::BufWriter::new(f), &recs))?;
            println!("{} frames", recs.len());
            Ok(())
        }
        Command::EvalLoss { targets, model } => {
            let w = load_model(&model)?;
            let bytes = fs::read(&targets).map_err(|e| io_err(&targets, e))?;
            let recs = with_path(&targets, read_records(&bytes))?;
            if w.feature_dim != FEATURE_DIM {
                return Err(CliError::Format(format!(
                    "model expects {} features, records carry {FEATURE_DIM}",
                    w.feature_dim
                )));
            }
            let cfg = LossConfig::default();
            let mut st = ModelState::new(&w);
            let (mut lg, mut lr) = (0.0, 0.0);
            for r in &recs {
                let mut fv = FeatureVector { values: [0.0; FEATURE_DIM] };
                for (d, s) in fv.values.iter_mut().zip(&r.features) {
                    *d = f64::from(*s);
                }
                let o = infer(&w, &mut st, &fv)?;
                let g: Vec<f64> = r.gains.iter().map(|&v| f64::from(v)).collect();
                let s: Vec<f64> = r.strengths.iter().map(|&v| f64::from(v)).collect();
                lg += gain_loss(&g, &o.gains, &cfg);
                lr += strength_loss(&s, &o.strengths, &cfg);
            }
            let n = recs.len().max(1) as f64;
            println!("frames {}", recs.len());
            println!("gain_loss {:.6}", lg / n);
            println!("strength_loss {:.6}", lr / n);
            println!("total {:.6}", (lg + lr) / n);
            Ok(())
        }
        Command::CombResponse {
            pitch_hz,
            m,
            max_hz,
            step_hz,
            output,
        } => {
            if m == 0 {
                return Err(CliError::Usage("--m must be at least 1".into()));
            }
            let csv = comb_response_csv(pitch_hz, m, max_hz, step_hz)?;
            fs::write(&output, csv).map_err(|e| io_err(&output, e))
        }
        Command::Bench { model, batch, seconds } => {
            if batch == 0 || !(seconds > 0.0) {
                return Err(CliError::Usage("--batch and --seconds must be positive".into()));
            }
            let w = load_model(&model)?;
            let single = bench(w.clone(), seconds, 1)?;
            let batched = bench(w.clone(), seconds, batch)?;
            let stdout = std::io::stdout();
            let mut o = stdout.lock();
            let _ = writeln!(o, "weights {}", w.total_weights());
            let _ = writeln!(o, "mmacs {:.3}", single.mmacs);
            let _ = writeln!(o, "frames_processed {}", single.frames_processed);
            let _ = writeln!(o, "rtf {:.2}", single.real_time_factor);
            let _ = writeln!(o, "rtf_batch{} {:.2}", batch, batched.real_time_factor);
            Ok(())
        }
        Command::InitModel { seed, output } => {
            let w = ModelWeights::desk_random(seed);
            with_path(&output, w.save(&output))?;
            println!("{} weights", w.total_weights());
            Ok(())
        }
    }
}

fn check_pair(clean: &Audio, noisy: &Audio) -> Result<(), CliError> {
    if clean.sample_rate != noisy.sample_rate || clean.samples.len() != noisy.samples.len() {
        return Err(CliError::Usage(format!(
            "clean ({} samples at {} Hz) and noisy ({} samples at {} Hz) are not aligned",
            clean.samples.len(),
            clean.sample_rate,
            noisy.samples.len(),
            noisy.sample_rate
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
