//! Speaker-turn labels and synthetic dialog construction.
//!
//! A mixed stream drops every second utterance of its source stream and
//! follows each kept utterance with a random utterance of a different
//! speaker: `S1, R1, S3, R2, S5, R3, ...`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::FeatureMatrix;
use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One speaker turn, frames `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub speaker: String,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledStream {
    pub source_id: String,
    pub segments: Vec<Segment>,
}

impl LabeledStream {
    /// Checks that segments tile `[0, T)` without gaps or overlaps.
    pub fn new(source_id: impl Into<String>, segments: Vec<Segment>) -> Result<Self> {
        let source_id = source_id.into();
        let mut cursor = 0;
        for (i, s) in segments.iter().enumerate() {
            if s.start != cursor || s.end <= s.start {
                return Err(NpcError::InvalidConfig(format!(
                    "stream `{source_id}` segment {i} [{}, {}) does not continue at frame {cursor}",
                    s.start, s.end
                )));
            }
            cursor = s.end;
        }
        Ok(Self {
            source_id,
            segments,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    /// Frame positions where the active speaker changes.
    pub fn change_points(&self) -> Vec<usize> {
        self.segments
            .windows(2)
            .filter(|w| w[0].speaker != w[1].speaker)
            .map(|w| w[1].start)
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub streams: Vec<LabeledStream>,
}

impl LabeledCorpus {
    pub fn speakers(&self) -> BTreeSet<&str> {
        self.streams
            .iter()
            .flat_map(|s| s.segments.iter().map(|g| g.speaker.as_str()))
            .collect()
    }

    pub fn total_frames(&self) -> usize {
        self.streams.iter().map(LabeledStream::num_frames).sum()
    }
}

/// Where a mixed segment's frames come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtteranceRef {
    pub source_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedCorpus {
    pub labels: LabeledCorpus,
    /// Parallel to `labels`: the origin of every output segment.
    pub origins: Vec<Vec<UtteranceRef>>,
}

pub fn mix_dialogs(corpus: &LabeledCorpus, seed: u64) -> Result<MixedCorpus> {
    let speakers = corpus.speakers();
    if speakers.len() < 2 {
        return Err(NpcError::InsufficientSpeakers(format!(
            "corpus has {} speaker(s), need 2",
            speakers.len()
        )));
    }
    for s in &corpus.streams {
        if s.segments.len() < 2 {
            return Err(NpcError::InsufficientSpeakers(format!(
                "stream `{}` has fewer than 2 utterances",
                s.source_id
            )));
        }
    }
    // Speaker -> every utterance in the corpus, in a stable order.
    let mut pool: BTreeMap<&str, Vec<UtteranceRef>> = BTreeMap::new();
    for s in &corpus.streams {
        for g in &s.segments {
            pool.entry(g.speaker.as_str()).or_default().push(UtteranceRef {
                source_id: s.source_id.clone(),
                start: g.start,
                end: g.end,
            });
        }
    }
    let names: Vec<&str> = pool.keys().copied().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = LabeledCorpus::default();
    let mut origins = Vec::with_capacity(corpus.streams.len());
    for stream in &corpus.streams {
        let kept: Vec<&Segment> = stream.segments.iter().step_by(2).collect();
        let mut segs = Vec::with_capacity(2 * kept.len());
        let mut refs = Vec::with_capacity(2 * kept.len());
        let mut cursor = 0;
        for (k, utt) in kept.iter().enumerate() {
            segs.push(Segment {
                speaker: utt.speaker.clone(),
                start: cursor,
                end: cursor + utt.len(),
            });
            refs.push(UtteranceRef {
                source_id: stream.source_id.clone(),
                start: utt.start,
                end: utt.end,
            });
            cursor += utt.len();

            let next = kept.get(k + 1).map(|s| s.speaker.as_str());
            let candidates: Vec<&str> = names
                .iter()
                .copied()
                .filter(|n| *n != utt.speaker && Some(*n) != next)
                .collect();
            if candidates.is_empty() {
                return Err(NpcError::InsufficientSpeakers(format!(
                    "no speaker differs from both neighbours in `{}`",
                    stream.source_id
                )));
            }
            let who = candidates[rng.gen_range(0..candidates.len())];
            let utts = &pool[who];
            let pick = &utts[rng.gen_range(0..utts.len())];
            let len = pick.end - pick.start;
            segs.push(Segment {
                speaker: who.to_string(),
                start: cursor,
                end: cursor + len,
            });
            refs.push(pick.clone());
            cursor += len;
        }
        labels
            .streams
            .push(LabeledStream::new(stream.source_id.clone(), segs)?);
        origins.push(refs);
    }
    Ok(MixedCorpus { labels, origins })
}

/// Concatenates the source frames of every mixed stream.
pub fn assemble_mixed_features<S: Scalar>(
    mixed: &MixedCorpus,
    store: &HashMap<String, FeatureMatrix<S>>,
) -> Result<Vec<FeatureMatrix<S>>> {
    mixed
        .labels
        .streams
        .iter()
        .zip(&mixed.origins)
        .map(|(stream, refs)| {
            let mut data = Vec::new();
            let mut dim = None;
            for r in refs {
                let src = store
                    .get(&r.source_id)
                    .ok_or_else(|| NpcError::MissingFeatures(r.source_id.clone()))?;
                let w = src.window(r.start, r.end - r.start)?;
                dim = Some(src.dim());
                data.extend_from_slice(w.data());
            }
            let dim = dim.unwrap_or(0);
            let rows = if dim == 0 { 0 } else { data.len() / dim };
            FeatureMatrix::new(
                stream.source_id.clone(),
                Tensor::from_vec(&[rows, dim], data)?,
            )
        })
        .collect()
}
