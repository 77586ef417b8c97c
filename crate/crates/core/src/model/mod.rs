//! The siamese trunk, its two training losses, the training loop and
//! checkpoint files.

mod arch;
mod checkpoint;
mod head;
mod mirror;
mod network;
mod params;
mod train;

pub use arch::{ArchitectureSpec, ConvLayerSpec, StageKind, StageShape};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use head::{
    classify_pair, cosine_decision, cosine_loss, cosine_similarity, cross_entropy_from_logits,
    cross_entropy_loss, l1_distance, PairScores,
};
pub use mirror::{weight_mirror_stats, MirrorStats};
pub use network::{
    evaluate_pair_batch, pair_loss_and_grads, trunk_backward, trunk_forward_eval,
    trunk_forward_train, LossKind, PairBatchOutcome, PairEval, TrunkCache, TrunkOutput,
};
pub use params::{build_model, ClassifierHead, ConvBlock, ModelParams};
pub use train::{
    evaluate_pairs, train, train_step, EpochStats, EvalSummary, PairSource, SpecSource,
    TrainConfig, TrainOutcome, TrainReport,
};
