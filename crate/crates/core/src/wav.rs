//! WAV I/O. Samples are converted to and from `f64` at the boundary.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    /// Mono samples in [-1, 1].
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Channel count of the source before down-mixing.
    pub channels: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Float32,
    Pcm16,
}

/// Read 16/24/32-bit integer or 32-bit float PCM, averaging channels.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let reader = WavReader::open(path)?;
    read_from(reader)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<Audio> {
    read_from(WavReader::new(std::io::Cursor::new(bytes))?)
}

fn read_from<R: std::io::Read>(reader: WavReader<R>) -> Result<Audio> {
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::format(22, "zero channels"));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::format(34, format!("unsupported sample format {fmt:?} with {bits} bits")));
        }
    };
    let ch = spec.channels as usize;
    let samples = interleaved
        .chunks_exact(ch)
        .map(|f| f.iter().sum::<f64>() / ch as f64)
        .collect();
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
        channels: spec.channels,
    })
}

/// Write mono audio. PCM16 output is clipped to [-1, 1] and rounded.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32, format: OutputFormat) -> Result<()> {
    let spec = match format {
        OutputFormat::Float32 => WavSpec {
            channels: 1,
            sample_rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
        OutputFormat::Pcm16 => WavSpec {
            channels: 1,
            sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
    };
    let mut w = WavWriter::create(path, spec)?;
    for &s in samples {
        match format {
            OutputFormat::Float32 => w.write_sample(s as f32)?,
            OutputFormat::Pcm16 => w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?,
        }
    }
    w.finalize()?;
    Ok(())
}
