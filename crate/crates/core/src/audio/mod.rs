//! Raw audio in, MFCC feature streams out.

pub mod container;
mod mfcc;
mod wav;

pub use container::{read_header, read_matrix, write_matrix, ContainerKind};
pub use mfcc::{
    compute_mfcc, dct_matrix, frame_count, hz_to_mel, mel_center_frequencies, mel_to_hz,
    FeatureMatrix, MfccExtractor, FFT_LEN, FRAME_HOP, FRAME_LEN, LOG_FLOOR, NUM_CEPS, NUM_MEL,
};
pub use wav::{load_audio, write_wav, AudioStream, SAMPLE_RATE};

use std::path::Path;

use crate::error::Result;
use crate::scalar::Scalar;

/// Loads features from either a WAV file (computing MFCCs) or an `NPCF`
/// cache, chosen by extension.
pub fn load_features<S: Scalar>(source_id: &str, path: &Path) -> Result<FeatureMatrix<S>> {
    let is_wav = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("wav"))
        .unwrap_or(false);
    if is_wav {
        let mut stream = load_audio(path)?;
        stream.source_id = source_id.to_string();
        compute_mfcc(&stream)
    } else {
        FeatureMatrix::new(source_id, read_matrix(path, ContainerKind::Features)?)
    }
}

/// Frame count of a WAV or `NPCF` file without computing features.
pub fn probe_frame_count(path: &Path) -> Result<usize> {
    let is_wav = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("wav"))
        .unwrap_or(false);
    if is_wav {
        Ok(frame_count(load_audio(path)?.samples.len()))
    } else {
        Ok(read_header(path, ContainerKind::Features)?.0)
    }
}
