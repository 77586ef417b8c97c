//! 40-dimensional MFCC front end.
//!
//! Per frame: pre-emphasis inside the frame, Hamming window, 512-point
//! FFT magnitude, 40 triangular mel filters over 20-7600 Hz, natural log
//! with a 1e-10 floor, orthonormal DCT-II keeping all 40 coefficients.
//! Each frame depends only on its own 400 samples.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::wav::AudioStream;
use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const FRAME_LEN: usize = 400;
pub const FRAME_HOP: usize = 160;
pub const FFT_LEN: usize = 512;
pub const NUM_BINS: usize = FFT_LEN / 2 + 1;
pub const NUM_MEL: usize = 40;
pub const NUM_CEPS: usize = 40;
pub const MEL_LOW_HZ: f64 = 20.0;
pub const MEL_HIGH_HZ: f64 = 7600.0;
pub const PREEMPH: f64 = 0.97;
pub const LOG_FLOOR: f64 = 1e-10;

/// `T x 40` MFCC frames of one stream at a 10 ms hop.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<S> {
    pub source_id: String,
    pub frames: Tensor<S>,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn new(source_id: impl Into<String>, frames: Tensor<S>) -> Result<Self> {
        if frames.rank() != 2 {
            return Err(NpcError::shape("feature matrix must be T x m"));
        }
        Ok(Self {
            source_id: source_id.into(),
            frames,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.dim(0)
    }

    pub fn dim(&self) -> usize {
        self.frames.dim(1)
    }

    /// Rows `[start, start + len)` as a `len x m` window.
    pub fn window(&self, start: usize, len: usize) -> Result<Tensor<S>> {
        if start + len > self.num_frames() {
            return Err(NpcError::OutOfRange {
                source_id: self.source_id.clone(),
                start,
                end: start + len,
                frames: self.num_frames(),
            });
        }
        Ok(self.frames.rows(start, start + len))
    }
}

/// Number of full frames in `num_samples` samples.
pub fn frame_count(num_samples: usize) -> usize {
    if num_samples < FRAME_LEN {
        0
    } else {
        (num_samples - FRAME_LEN) / FRAME_HOP + 1
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * ((mel / 1127.0).exp() - 1.0)
}

/// Center frequencies (Hz) of the mel filters, ascending.
pub fn mel_center_frequencies() -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(MEL_LOW_HZ), hz_to_mel(MEL_HIGH_HZ));
    let step = (hi - lo) / (NUM_MEL + 1) as f64;
    (1..=NUM_MEL)
        .map(|j| mel_to_hz(lo + step * j as f64))
        .collect()
}

/// Orthonormal DCT-II basis, row `k` holding coefficient `k`.
pub fn dct_matrix<S: Scalar>(n: usize) -> Tensor<S> {
    let nf = n as f64;
    Tensor::from_fn(&[n, n], |idx| {
        let (k, i) = (idx / n, idx % n);
        let scale = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        let angle = std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * nf);
        S::c(scale * angle.cos())
    })
}

pub struct MfccExtractor<S: Scalar> {
    window: Vec<S>,
    filterbank: Vec<Vec<(usize, S)>>,
    dct: Tensor<S>,
    fft: Arc<dyn Fft<S>>,
}

impl<S: Scalar> Default for MfccExtractor<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> MfccExtractor<S> {
    pub fn new() -> Self {
        let window = (0..FRAME_LEN)
            .map(|n| {
                let x = 2.0 * std::f64::consts::PI * n as f64 / (FRAME_LEN - 1) as f64;
                S::c(0.54 - 0.46 * x.cos())
            })
            .collect();
        let (lo, hi) = (hz_to_mel(MEL_LOW_HZ), hz_to_mel(MEL_HIGH_HZ));
        let step = (hi - lo) / (NUM_MEL + 1) as f64;
        let bin_hz = super::wav::SAMPLE_RATE as f64 / FFT_LEN as f64;
        let filterbank = (0..NUM_MEL)
            .map(|j| {
                let (left, center, right) = (
                    lo + step * j as f64,
                    lo + step * (j + 1) as f64,
                    lo + step * (j + 2) as f64,
                );
                (0..NUM_BINS)
                    .filter_map(|k| {
                        let mel = hz_to_mel(k as f64 * bin_hz);
                        let w = if mel > left && mel <= center {
                            (mel - left) / (center - left)
                        } else if mel > center && mel < right {
                            (right - mel) / (right - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then(|| (k, S::c(w)))
                    })
                    .collect()
            })
            .collect();
        Self {
            window,
            filterbank,
            dct: dct_matrix(NUM_CEPS),
            fft: FftPlanner::new().plan_fft_forward(FFT_LEN),
        }
    }

    /// Floored log mel energies of one 400-sample frame (pre-DCT).
    pub fn log_mel_energies(&self, frame: &[i16]) -> Vec<S> {
        let mut buf = vec![Complex::new(S::zero(), S::zero()); FFT_LEN];
        let mut scratch = vec![Complex::new(S::zero(), S::zero()); self.fft.get_inplace_scratch_len()];
        self.log_mel_into(frame, &mut buf, &mut scratch)
    }

    fn log_mel_into(&self, frame: &[i16], buf: &mut [Complex<S>], scratch: &mut [Complex<S>]) -> Vec<S> {
        debug_assert_eq!(frame.len(), FRAME_LEN);
        let a = S::c(PREEMPH);
        let x = |i: usize| S::from_i16(frame[i]).unwrap();
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i >= FRAME_LEN {
                S::zero()
            } else {
                let prev = if i == 0 { x(0) } else { x(i - 1) };
                (x(i) - a * prev) * self.window[i]
            };
            *slot = Complex::new(v, S::zero());
        }
        self.fft.process_with_scratch(buf, scratch);
        let floor = S::c(LOG_FLOOR);
        self.filterbank
            .iter()
            .map(|filter| {
                let e: S = filter.iter().map(|&(k, w)| w * buf[k].norm()).sum();
                e.max(floor).ln()
            })
            .collect()
    }

    fn cepstra(&self, log_mel: &[S], out: &mut [S]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self
                .dct
                .row(k)
                .iter()
                .zip(log_mel)
                .map(|(c, v)| *c * *v)
                .sum();
        }
    }

    pub fn compute(&self, stream: &AudioStream) -> Result<FeatureMatrix<S>> {
        let n = stream.samples.len();
        if n < FRAME_LEN {
            return Err(NpcError::TooShort {
                samples: n,
                needed: FRAME_LEN,
            });
        }
        let t = frame_count(n);
        let mut data = vec![S::zero(); t * NUM_CEPS];
        data.par_chunks_mut(NUM_CEPS).enumerate().for_each_init(
            || {
                (
                    vec![Complex::new(S::zero(), S::zero()); FFT_LEN],
                    vec![Complex::new(S::zero(), S::zero()); self.fft.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), (i, row)| {
                let frame = &stream.samples[i * FRAME_HOP..i * FRAME_HOP + FRAME_LEN];
                let log_mel = self.log_mel_into(frame, buf, scratch);
                self.cepstra(&log_mel, row);
            },
        );
        FeatureMatrix::new(stream.source_id.clone(), Tensor::from_vec(&[t, NUM_CEPS], data)?)
    }
}

/// Convenience wrapper building a fresh extractor.
pub fn compute_mfcc<S: Scalar>(stream: &AudioStream) -> Result<FeatureMatrix<S>> {
    MfccExtractor::new().compute(stream)
}
