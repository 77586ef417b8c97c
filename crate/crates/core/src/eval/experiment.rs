//! Repeated held-out 1-NN speaker identification at frame and utterance
//! level.
//!
//! Splits depend only on speaker and utterance ids and the seed, so two
//! feature types over the same utterances see identical enrollment and
//! test sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::knn::{knn1_classify_rows, LabeledVectorSet};
use crate::embed::pool_utterance;
use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-frame features of one labeled utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance<S> {
    pub utterance_id: String,
    pub speaker_id: String,
    pub frames: Tensor<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub enroll_counts: Vec<usize>,
    pub repeats: usize,
    pub heldout_per_speaker: usize,
    pub seed: u64,
    /// Test frames kept per held-out utterance (frame-level only).
    pub max_queries_per_utterance: Option<usize>,
}

impl ExperimentConfig {
    pub fn frame_level(enroll_counts: Vec<usize>, seed: u64) -> Self {
        Self {
            enroll_counts,
            repeats: 5,
            heldout_per_speaker: 5,
            seed,
            max_queries_per_utterance: Some(2000),
        }
    }

    pub fn utterance_level(enroll_counts: Vec<usize>, seed: u64) -> Self {
        Self {
            enroll_counts,
            repeats: 20,
            heldout_per_speaker: 5,
            seed,
            max_queries_per_utterance: None,
        }
    }
}

/// One repeat's split: held-out utterance ids and, per speaker, the
/// remaining utterances in enrollment order.
#[derive(Clone, Debug, PartialEq)]
pub struct RepeatSplit {
    pub heldout: Vec<String>,
    pub ranked: BTreeMap<String, Vec<String>>,
}

impl RepeatSplit {
    /// The first `n` ranked utterances of every speaker.
    pub fn enrollment(&self, n: usize) -> Vec<String> {
        self.ranked.values().flat_map(|v| v[..n].iter().cloned()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCell {
    pub enroll_count: usize,
    pub per_repeat: Vec<f64>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyTable {
    pub cells: Vec<AccuracyCell>,
    pub repeats: usize,
    pub heldout_per_speaker: usize,
    pub max_queries_per_utterance: Option<usize>,
}

/// Speaker -> sorted utterance ids.
fn speakers_of<S>(corpus: &[Utterance<S>]) -> Result<BTreeMap<String, Vec<String>>> {
    let mut seen = BTreeSet::new();
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for u in corpus {
        if !seen.insert(u.utterance_id.as_str()) {
            return Err(NpcError::InvalidConfig(format!("duplicate utterance `{}`", u.utterance_id)));
        }
        out.entry(u.speaker_id.clone()).or_default().push(u.utterance_id.clone());
    }
    out.values_mut().for_each(|v| v.sort());
    Ok(out)
}

pub fn plan_splits<S>(corpus: &[Utterance<S>], config: &ExperimentConfig) -> Result<Vec<RepeatSplit>> {
    let speakers = speakers_of(corpus)?;
    if speakers.len() < 2 {
        return Err(NpcError::InsufficientSpeakers(format!(
            "{} speaker(s) in the identification corpus",
            speakers.len()
        )));
    }
    let max_enroll = config.enroll_counts.iter().copied().max().unwrap_or(0);
    let needed = max_enroll + config.heldout_per_speaker;
    for (spk, utts) in &speakers {
        if utts.len() < needed {
            return Err(NpcError::InsufficientUtterances {
                speaker: spk.clone(),
                available: utts.len(),
                needed,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut splits = Vec::with_capacity(config.repeats);
    for _ in 0..config.repeats {
        let mut heldout = Vec::new();
        let mut ranked = BTreeMap::new();
        for (spk, utts) in &speakers {
            let mut order = utts.clone();
            order.shuffle(&mut rng);
            let rest = order.split_off(config.heldout_per_speaker);
            heldout.extend(order);
            ranked.insert(spk.clone(), rest);
        }
        splits.push(RepeatSplit { heldout, ranked });
    }
    Ok(splits)
}

fn stack_rows<'a, S: Scalar>(
    items: impl Iterator<Item = (&'a Utterance<S>, Option<Vec<usize>>)>,
) -> Result<LabeledVectorSet<S>>
where
    S: 'a,
{
    let (mut data, mut labels, mut groups, mut dim) = (Vec::new(), Vec::new(), Vec::new(), None);
    for (u, rows) in items {
        let f = u.frames.dim(1);
        if *dim.get_or_insert(f) != f {
            return Err(NpcError::DimensionMismatch {
                expected: dim.unwrap(),
                got: f,
            });
        }
        let rows = rows.unwrap_or_else(|| (0..u.frames.dim(0)).collect());
        for r in rows {
            data.extend_from_slice(u.frames.row(r));
            labels.push(u.speaker_id.clone());
            groups.push(u.utterance_id.clone());
        }
    }
    let n = labels.len();
    LabeledVectorSet::new(Tensor::from_vec(&[n, dim.unwrap_or(0)], data)?, labels, groups)
}

fn check_disjoint(enrolled: &LabeledVectorSet<impl Scalar>, test: &LabeledVectorSet<impl Scalar>) {
    let a: BTreeSet<&String> = enrolled.groups.iter().collect();
    assert!(
        test.groups.iter().all(|g| !a.contains(g)),
        "enrollment and test utterances overlap"
    );
}

fn run<S: Scalar>(
    corpus: &[Utterance<S>],
    config: &ExperimentConfig,
    splits: &[RepeatSplit],
    query_rows: impl Fn(usize, usize, &Utterance<S>) -> Option<Vec<usize>>,
) -> Result<AccuracyTable> {
    let by_id: BTreeMap<&str, (usize, &Utterance<S>)> = {
        let mut sorted: Vec<&Utterance<S>> = corpus.iter().collect();
        sorted.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, u)| (u.utterance_id.as_str(), (i, u)))
            .collect()
    };
    let mut cells: Vec<AccuracyCell> = config
        .enroll_counts
        .iter()
        .map(|&n| AccuracyCell {
            enroll_count: n,
            per_repeat: Vec::with_capacity(splits.len()),
            mean: 0.0,
        })
        .collect();
    for (r, split) in splits.iter().enumerate() {
        let test = stack_rows(split.heldout.iter().map(|id| {
            let (pos, u) = by_id[id.as_str()];
            (u, query_rows(r, pos, u))
        }))?;
        for cell in &mut cells {
            let enroll_ids = split.enrollment(cell.enroll_count);
            let enrolled = stack_rows(enroll_ids.iter().map(|id| (by_id[id.as_str()].1, None)))?;
            check_disjoint(&enrolled, &test);
            let predicted = knn1_classify_rows(&enrolled, &test.vectors)?;
            let correct = predicted.iter().zip(&test.labels).filter(|(p, l)| **p == l.as_str()).count();
            cell.per_repeat.push(correct as f64 / test.len().max(1) as f64);
        }
    }
    for cell in &mut cells {
        cell.mean = cell.per_repeat.iter().sum::<f64>() / cell.per_repeat.len().max(1) as f64;
    }
    Ok(AccuracyTable {
        cells,
        repeats: config.repeats,
        heldout_per_speaker: config.heldout_per_speaker,
        max_queries_per_utterance: config.max_queries_per_utterance,
    })
}

/// Every held-out frame (or a seeded subsample of at most
/// `max_queries_per_utterance`) is classified against all frames of the
/// enrollment utterances. Accuracy is pooled over frames per repeat and
/// averaged over repeats.
pub fn frame_id_experiment<S: Scalar>(
    corpus: &[Utterance<S>],
    config: &ExperimentConfig,
) -> Result<AccuracyTable> {
    let splits = plan_splits(corpus, config)?;
    frame_id_with_splits(corpus, config, &splits)
}

/// As `frame_id_experiment` with splits computed elsewhere, so several
/// feature types can share them.
pub fn frame_id_with_splits<S: Scalar>(
    corpus: &[Utterance<S>],
    config: &ExperimentConfig,
    splits: &[RepeatSplit],
) -> Result<AccuracyTable> {
    run(corpus, config, splits, |repeat, pos, u| {
        let k = u.frames.dim(0);
        let cap = config.max_queries_per_utterance?;
        if k <= cap {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(((repeat as u64) << 32) | pos as u64);
        let mut rows = index::sample(&mut rng, k, cap).into_vec();
        rows.sort_unstable();
        Some(rows)
    })
}

/// Each utterance is pooled to mean‖std first; one vector per utterance.
pub fn utterance_id_experiment<S: Scalar>(
    corpus: &[Utterance<S>],
    config: &ExperimentConfig,
) -> Result<AccuracyTable> {
    let splits = plan_splits(corpus, config)?;
    utterance_id_with_splits(corpus, config, &splits)
}

pub fn utterance_id_with_splits<S: Scalar>(
    corpus: &[Utterance<S>],
    config: &ExperimentConfig,
    splits: &[RepeatSplit],
) -> Result<AccuracyTable> {
    let pooled = corpus
        .iter()
        .map(|u| {
            let p = pool_utterance(&u.utterance_id, Some(&u.speaker_id), &u.frames)?;
            let f = p.values.len();
            Ok(Utterance {
                utterance_id: u.utterance_id.clone(),
                speaker_id: u.speaker_id.clone(),
                frames: Tensor::from_vec(&[1, f], p.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        max_queries_per_utterance: None,
        ..config.clone()
    };
    run(&pooled, &config, splits, |_, _, _| None)
}
