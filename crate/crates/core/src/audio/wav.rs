use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{NpcError, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono 16-bit PCM at 16 kHz.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AudioStream {
    pub source_id: String,
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl AudioStream {
    pub fn new(source_id: impl Into<String>, samples: Vec<i16>) -> Result<Self> {
        if samples.is_empty() {
            return Err(NpcError::TooShort {
                samples: 0,
                needed: 1,
            });
        }
        Ok(Self {
            source_id: source_id.into(),
            sample_rate: SAMPLE_RATE,
            samples,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> NpcError {
    NpcError::CorruptFile(format!("{}: {e}", path.display()))
}

/// Reads a RIFF/WAVE file; only mono PCM16 at 16 kHz is accepted.
pub fn load_audio(path: &Path) -> Result<AudioStream> {
    if !path.exists() {
        return Err(NpcError::NotFound(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported => NpcError::UnsupportedFormat("encoding".into()),
        other => corrupt(path, other),
    })?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(NpcError::UnsupportedFormat(format!(
            "sample_rate={}",
            spec.sample_rate
        )));
    }
    if spec.channels != 1 {
        return Err(NpcError::UnsupportedFormat(format!(
            "channels={}",
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int {
        return Err(NpcError::UnsupportedFormat("encoding=float".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(NpcError::UnsupportedFormat(format!(
            "bits_per_sample={}",
            spec.bits_per_sample
        )));
    }
    let declared = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| corrupt(path, e))?;
    if samples.len() != declared {
        return Err(corrupt(
            path,
            format!("header declares {declared} samples, found {}", samples.len()),
        ));
    }
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioStream::new(source_id, samples).map_err(|_| corrupt(path, "no samples"))
}

pub fn write_wav(path: &Path, samples: &[i16]) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| corrupt(path, e))?;
    for &s in samples {
        w.write_sample(s).map_err(|e| corrupt(path, e))?;
    }
    w.finalize().map_err(|e| corrupt(path, e))?;
    Ok(())
}
