//! Loading manifests, feature stores and utterances for the commands.

use std::collections::HashMap;
use std::path::Path;

use npc_core::audio::{load_features, probe_frame_count, FeatureMatrix};
use npc_core::sampler::{
    read_manifest, read_segments, LabeledCorpus, LabeledStream, StreamInfo, StreamManifest,
};
use npc_core::{NpcError, Result};

pub type Store = HashMap<String, FeatureMatrix<f32>>;

/// Reads a manifest and checks that every file it names exists.
pub fn manifest(path: &Path) -> Result<StreamManifest> {
    let m = read_manifest(path)?;
    m.check_files(&path.to_string_lossy())?;
    if m.is_empty() {
        return Err(NpcError::EmptyData(format!("{} lists no streams", path.display())));
    }
    Ok(m)
}

pub fn store(m: &StreamManifest) -> Result<Store> {
    m.entries
        .iter()
        .map(|e| Ok((e.source_id.clone(), load_features(&e.source_id, &e.path)?)))
        .collect()
}

pub fn stream_infos(m: &StreamManifest) -> Result<Vec<StreamInfo>> {
    m.entries
        .iter()
        .map(|e| {
            Ok(StreamInfo {
                source_id: e.source_id.clone(),
                num_frames: probe_frame_count(&e.path)?,
            })
        })
        .collect()
}

pub fn labeled_corpus(m: &StreamManifest) -> Result<LabeledCorpus> {
    let streams = m
        .entries
        .iter()
        .map(|e| {
            let seg = e.segments.as_ref().ok_or_else(|| {
                NpcError::InvalidConfig(format!("stream `{}` has no speaker-turn file", e.source_id))
            })?;
            LabeledStream::new(e.source_id.clone(), read_segments(seg)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledCorpus { streams })
}

pub struct UtteranceFrames {
    pub utterance_id: String,
    pub speaker_id: Option<String>,
    pub frames: FeatureMatrix<f32>,
}

/// Labeled streams split into one utterance per turn (`<stream>-<k>`);
/// unlabeled streams are one utterance each.
pub fn utterances(m: &StreamManifest, store: &Store) -> Result<Vec<UtteranceFrames>> {
    let mut out = Vec::new();
    for e in &m.entries {
        let f = &store[&e.source_id];
        match &e.segments {
            None => out.push(UtteranceFrames {
                utterance_id: e.source_id.clone(),
                speaker_id: None,
                frames: f.clone(),
            }),
            Some(seg) => {
                for (k, s) in read_segments(seg)?.iter().enumerate() {
                    if s.end > f.num_frames() {
                        return Err(NpcError::OutOfRange {
                            source_id: e.source_id.clone(),
                            start: s.start,
                            end: s.end,
                            frames: f.num_frames(),
                        });
                    }
                    let id = format!("{}-{k:03}", e.source_id);
                    out.push(UtteranceFrames {
                        frames: FeatureMatrix::new(id.clone(), f.frames.rows(s.start, s.end))?,
                        utterance_id: id,
                        speaker_id: Some(s.speaker.clone()),
                    });
                }
            }
        }
    }
    Ok(out)
}
