//! Genuine and impostor window pairs over unlabeled streams.
//!
//! Pair generation works on frame indices only; features are sliced later
//! by [`materialize`].

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::FeatureMatrix;
use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_SHIFT: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairLabel {
    /// Adjacent windows of one stream, `y = 0`.
    Genuine,
    /// Windows from two different streams, `y = 1`.
    Impostor,
}

impl PairLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            PairLabel::Genuine => 0,
            PairLabel::Impostor => 1,
        }
    }

    pub fn from_u8(y: u8) -> Option<Self> {
        match y {
            0 => Some(PairLabel::Genuine),
            1 => Some(PairLabel::Impostor),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PairLabel::Genuine => PairLabel::Impostor,
            PairLabel::Impostor => PairLabel::Genuine,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WindowRef {
    pub source_id: String,
    pub start: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PairSpec {
    pub left: WindowRef,
    pub right: WindowRef,
    pub label: PairLabel,
    pub window_len: usize,
}

impl fmt::Display for PairSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.left.source_id,
            self.left.start,
            self.right.source_id,
            self.right.start,
            self.label.as_u8()
        )
    }
}

/// Frame count of one stream, all the sampler needs to know about it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamInfo {
    pub source_id: String,
    pub num_frames: usize,
}

/// `(t, t + d)` for `t = 0, delta, 2*delta, ...` while `t + 2d <= T`.
pub fn generate_genuine_pairs(
    source_id: &str,
    num_frames: usize,
    d: usize,
    delta: usize,
) -> Result<Vec<PairSpec>> {
    if d == 0 || delta == 0 {
        return Err(NpcError::InvalidConfig("window and shift must be positive".into()));
    }
    if num_frames < 2 * d {
        return Err(NpcError::StreamTooShort {
            frames: num_frames,
            needed: 2 * d,
        });
    }
    Ok((0..=num_frames - 2 * d)
        .step_by(delta)
        .map(|t| PairSpec {
            left: WindowRef {
                source_id: source_id.to_string(),
                start: t,
            },
            right: WindowRef {
                source_id: source_id.to_string(),
                start: t + d,
            },
            label: PairLabel::Genuine,
            window_len: d,
        })
        .collect())
}

/// Closed-form count of genuine pairs in a stream of `num_frames` frames.
pub fn genuine_pair_count(num_frames: usize, d: usize, delta: usize) -> usize {
    if num_frames < 2 * d {
        0
    } else {
        (num_frames - 2 * d) / delta + 1
    }
}

/// One impostor per genuine pair: keeps the left window and draws the right
/// window uniformly from a uniformly chosen other stream.
pub fn generate_impostor_pairs(
    streams: &[StreamInfo],
    genuine: &[PairSpec],
    seed: u64,
) -> Result<Vec<PairSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(genuine.len());
    for g in genuine {
        let d = g.window_len;
        let eligible: Vec<&StreamInfo> = streams
            .iter()
            .filter(|s| s.num_frames >= d && s.source_id != g.left.source_id)
            .collect();
        if eligible.is_empty() {
            return Err(NpcError::NoOtherStream);
        }
        let other = eligible[rng.gen_range(0..eligible.len())];
        let start = rng.gen_range(0..=other.num_frames - d);
        out.push(PairSpec {
            left: g.left.clone(),
            right: WindowRef {
                source_id: other.source_id.clone(),
                start,
            },
            label: PairLabel::Impostor,
            window_len: d,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct CorpusPairs {
    pub genuine: Vec<PairSpec>,
    pub impostor: Vec<PairSpec>,
    /// Streams shorter than `2d`, which contribute no genuine pairs.
    pub skipped: Vec<String>,
}

impl CorpusPairs {
    /// Genuine pairs followed by impostors.
    pub fn all(&self) -> Vec<PairSpec> {
        self.genuine.iter().chain(&self.impostor).cloned().collect()
    }
}

/// Runs both generators over a whole corpus.
pub fn generate_corpus_pairs(
    streams: &[StreamInfo],
    d: usize,
    delta: usize,
    seed: u64,
) -> Result<CorpusPairs> {
    if streams.len() < 2 {
        return Err(NpcError::NoOtherStream);
    }
    let mut out = CorpusPairs::default();
    for s in streams {
        match generate_genuine_pairs(&s.source_id, s.num_frames, d, delta) {
            Ok(p) => out.genuine.extend(p),
            Err(NpcError::StreamTooShort { .. }) => out.skipped.push(s.source_id.clone()),
            Err(e) => return Err(e),
        }
    }
    out.impostor = generate_impostor_pairs(streams, &out.genuine, seed)?;
    Ok(out)
}

/// Two `d x m` windows and their label.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastivePair<S> {
    pub x1: Tensor<S>,
    pub x2: Tensor<S>,
    pub label: PairLabel,
}

pub fn materialize<S: Scalar>(
    pair: &PairSpec,
    store: &HashMap<String, FeatureMatrix<S>>,
) -> Result<ContrastivePair<S>> {
    let fetch = |w: &WindowRef| -> Result<Tensor<S>> {
        store
            .get(&w.source_id)
            .ok_or_else(|| NpcError::MissingFeatures(w.source_id.clone()))?
            .window(w.start, pair.window_len)
    };
    Ok(ContrastivePair {
        x1: fetch(&pair.left)?,
        x2: fetch(&pair.right)?,
        label: pair.label,
    })
}

pub fn format_pairs(pairs: &[PairSpec]) -> String {
    pairs.iter().map(|p| format!("{p}\n")).collect()
}

/// Parses `left_id<TAB>left_start<TAB>right_id<TAB>right_start<TAB>y`.
pub fn parse_pairs(text: &str, origin: &str, window_len: usize) -> Result<Vec<PairSpec>> {
    let err = |line: usize, message: String| NpcError::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(err(i + 1, "expected 5 tab-separated fields".into()));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(i + 1, format!("bad index `{s}`")));
        let label = f[4]
            .parse::<u8>()
            .ok()
            .and_then(PairLabel::from_u8)
            .ok_or_else(|| err(i + 1, format!("bad label `{}`", f[4])))?;
        out.push(PairSpec {
            left: WindowRef {
                source_id: f[0].to_string(),
                start: num(f[1])?,
            },
            right: WindowRef {
                source_id: f[2].to_string(),
                start: num(f[3])?,
            },
            label,
            window_len,
        });
    }
    Ok(out)
}
