//! Frame-resolution NPC embeddings, the MFCC-stats baseline stream, and
//! utterance pooling.

use std::path::Path;

use rayon::prelude::*;

use crate::audio::{write_matrix, ContainerKind, FeatureMatrix};
use crate::error::{NpcError, Result};
use crate::model::{trunk_forward_eval, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Windows pushed through the trunk per forward call.
const EMBED_BATCH: usize = 64;

/// One embedding per window start `0, hop, 2 hop, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSequence<S> {
    pub source_id: String,
    pub vectors: Tensor<S>,
    /// Frames between consecutive rows.
    pub hop: usize,
}

impl<S: Scalar> EmbeddingSequence<S> {
    pub fn len(&self) -> usize {
        self.vectors.dim(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim(1)
    }

    /// Writes the rows as an `NPCE` container.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_matrix(path, ContainerKind::Embeddings, &self.vectors)
    }
}

fn window_starts(frames: usize, window: usize, hop: usize) -> Result<Vec<usize>> {
    if frames < window {
        return Err(NpcError::StreamTooShort {
            frames,
            needed: window,
        });
    }
    Ok((0..=frames - window).step_by(hop.max(1)).collect())
}

/// Dense pre-activation trunk output for every `d`-frame window, using
/// running batch-norm statistics. `hop = 1` gives the full 10 ms rate.
pub fn extract_embeddings<S: Scalar>(
    features: &FeatureMatrix<S>,
    params: &ModelParams<S>,
    hop: usize,
) -> Result<EmbeddingSequence<S>> {
    let (d, m) = (params.arch.input_frames, params.arch.input_dim);
    if features.dim() != m {
        return Err(NpcError::DimensionMismatch {
            expected: m,
            got: features.dim(),
        });
    }
    let starts = window_starts(features.num_frames(), d, hop)?;
    let dim = params.arch.embedding_dim;
    let mut rows = Vec::with_capacity(starts.len() * dim);
    for chunk in starts.chunks(EMBED_BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * d * m);
        for &t in chunk {
            data.extend_from_slice(&features.frames.data()[t * m..(t + d) * m]);
        }
        let batch = Tensor::from_vec(&[chunk.len(), d, m], data)?;
        rows.extend(trunk_forward_eval(params, &batch)?.embedding.into_data());
    }
    Ok(EmbeddingSequence {
        source_id: features.source_id.clone(),
        vectors: Tensor::from_vec(&[starts.len(), dim], rows)?,
        hop: hop.max(1),
    })
}

/// Sliding per-dimension mean followed by population std over `window`
/// frames at a one-frame shift: `(T - window + 1) x 2F`.
pub fn mfcc_stats_stream<S: Scalar>(features: &FeatureMatrix<S>, window: usize) -> Result<Tensor<S>> {
    if window == 0 {
        return Err(NpcError::InvalidConfig("stats window must be positive".into()));
    }
    let starts = window_starts(features.num_frames(), window, 1)?;
    let f = features.dim();
    let data = features.frames.data();
    let mut out = vec![S::zero(); starts.len() * 2 * f];
    out.par_chunks_mut(2 * f).enumerate().for_each(|(t, row)| {
        let block = &data[t * f..(t + window) * f];
        let (mean, std) = row.split_at_mut(f);
        mean_std(block, f, mean, std);
    });
    Tensor::from_vec(&[starts.len(), 2 * f], out)
}

/// Two-pass mean and population std of the rows of `block` (row width `f`).
fn mean_std<S: Scalar>(block: &[S], f: usize, mean: &mut [S], std: &mut [S]) {
    let k = S::from_usize(block.len() / f).unwrap();
    mean.fill(S::zero());
    std.fill(S::zero());
    for row in block.chunks_exact(f) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += *x);
    }
    mean.iter_mut().for_each(|m| *m /= k);
    for row in block.chunks_exact(f) {
        for ((s, x), m) in std.iter_mut().zip(row).zip(mean.iter()) {
            let c = *x - *m;
            *s += c * c;
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / k).sqrt());
}

/// Mean concatenated with population std over an utterance's frames.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledVector<S> {
    pub utterance_id: String,
    pub speaker_id: Option<String>,
    pub values: Vec<S>,
}

pub fn pool_utterance<S: Scalar>(
    utterance_id: &str,
    speaker_id: Option<&str>,
    frames: &Tensor<S>,
) -> Result<PooledVector<S>> {
    if frames.rank() != 2 {
        return Err(NpcError::shape(format!("pooling expects K x F, got {:?}", frames.shape())));
    }
    let (k, f) = (frames.dim(0), frames.dim(1));
    if k < 2 {
        return Err(NpcError::TooFewFrames(k));
    }
    let mut values = vec![S::zero(); 2 * f];
    let (mean, std) = values.split_at_mut(f);
    mean_std(frames.data(), f, mean, std);
    Ok(PooledVector {
        utterance_id: utterance_id.to_string(),
        speaker_id: speaker_id.map(str::to_string),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ArchitectureSpec, ConvLayerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ArchitectureSpec {
        ArchitectureSpec {
            input_frames: 10,
            input_dim: 4,
            convs: vec![ConvLayerSpec { kernel: (3, 3), channels: 2, pool_after: true }],
            embedding_dim: 5,
            embedding_activation: true,
            classifier_head: true,
        }
    }

    fn stream(t: usize, seed: u64) -> FeatureMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::new("s", Tensor::from_fn(&[t, 4], |_| rng.gen_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn row_counts() {
        let p = build_model::<f64>(&small(), 0).unwrap();
        assert_eq!(extract_embeddings(&stream(10, 0), &p, 1).unwrap().len(), 1);
        assert_eq!(extract_embeddings(&stream(60, 0), &p, 1).unwrap().len(), 51);
        assert_eq!(extract_embeddings(&stream(60, 0), &p, 10).unwrap().len(), 6);
        assert!(matches!(
            extract_embeddings(&stream(9, 0), &p, 1),
            Err(NpcError::StreamTooShort { frames: 9, needed: 10 })
        ));
    }

    #[test]
    fn rows_match_isolated_windows() {
        let p = build_model::<f64>(&small(), 1).unwrap();
        let s = stream(90, 2);
        let e = extract_embeddings(&s, &p, 1).unwrap();
        for t in [0, 17, 64, 80] {
            let single = trunk_forward_eval(&p, &s.window(t, 10).unwrap()).unwrap().embedding;
            let diff = single
                .data()
                .iter()
                .zip(e.vectors.row(t))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn repeated_window_repeats_row() {
        let p = build_model::<f64>(&small(), 1).unwrap();
        let base = stream(10, 3);
        let mut data = base.frames.data().to_vec();
        data.extend_from_slice(&data.clone());
        let s = FeatureMatrix::new("r", Tensor::from_vec(&[20, 4], data).unwrap()).unwrap();
        let e = extract_embeddings(&s, &p, 1).unwrap();
        assert_eq!(e.vectors.row(0), e.vectors.row(10));
    }

    #[test]
    fn stats_of_constant_stream() {
        let s = FeatureMatrix::new("c", Tensor::full(&[120, 3], 2.5f64)).unwrap();
        let st = mfcc_stats_stream(&s, 100).unwrap();
        assert_eq!(st.shape(), &[21, 6]);
        for r in 0..21 {
            assert_eq!(&st.row(r)[..3], &[2.5; 3]);
            assert_eq!(&st.row(r)[3..], &[0.0; 3]);
        }
    }

    #[test]
    fn stats_window_matches_pooling() {
        let s = stream(40, 5);
        let st = mfcc_stats_stream(&s, 7).unwrap();
        let pooled = pool_utterance("u", None, &s.frames.rows(11, 18)).unwrap();
        assert_eq!(st.row(11), pooled.values.as_slice());
    }

    #[test]
    fn pooling_closed_forms() {
        let x = Tensor::from_vec(&[2, 2], vec![0.0, 5.0, 2.0, 5.0]).unwrap();
        let p = pool_utterance("u", Some("spk"), &x).unwrap();
        assert_eq!(p.values, vec![1.0, 5.0, 1.0, 0.0]);
        assert!(matches!(
            pool_utterance("u", None, &Tensor::<f64>::zeros(&[1, 3])),
            Err(NpcError::TooFewFrames(1))
        ));
        let wide = Tensor::<f32>::zeros(&[3, 512]);
        assert_eq!(pool_utterance("u", None, &wide).unwrap().values.len(), 1024);
    }
}
