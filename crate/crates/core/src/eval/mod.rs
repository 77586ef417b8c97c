//! Speaker identification and verification protocols.

mod experiment;
mod knn;
mod metrics;
mod report;
mod trials;

pub use experiment::{
    frame_id_experiment, frame_id_with_splits, plan_splits, utterance_id_experiment,
    utterance_id_with_splits, AccuracyCell, AccuracyTable, ExperimentConfig, RepeatSplit,
    Utterance,
};
pub use knn::{knn1_classify, knn1_classify_rows, nearest_index, LabeledVectorSet};
pub use metrics::{compute_eer, compute_min_dcf, error_rate_curve, DcfParams, EerResult};
pub use report::{identification_csv, identification_text, VerificationReport};
pub use trials::{cosine_score, format_trials, parse_trials, score_trials, TrialSpec};
