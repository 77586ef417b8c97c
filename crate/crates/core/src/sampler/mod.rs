//! Contrastive sample creation from unlabeled streams, synthetic dialog
//! mixing, and genuine-pair label-noise measurement.

mod manifest;
mod mix;
mod noise;
mod pairs;

pub use manifest::{
    format_segments, parse_manifest, parse_segments, read_manifest, read_segments, ManifestEntry,
    StreamManifest,
};
pub use mix::{
    assemble_mixed_features, mix_dialogs, LabeledCorpus, LabeledStream, MixedCorpus, Segment,
    UtteranceRef,
};
pub use noise::{measure_label_noise, NoiseReport};
pub use pairs::{
    format_pairs, generate_corpus_pairs, generate_genuine_pairs, generate_impostor_pairs,
    genuine_pair_count, materialize, parse_pairs, ContrastivePair, CorpusPairs, PairLabel,
    PairSpec, StreamInfo, WindowRef, DEFAULT_SHIFT, DEFAULT_WINDOW,
};
