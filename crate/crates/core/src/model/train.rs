use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{evaluate_pair_batch, pair_loss_and_grads, LossKind, PairEval};
use super::params::ModelParams;
use crate::audio::FeatureMatrix;
use crate::error::{NpcError, Result};
use crate::nn::{rmsprop_step, OptimizerState, RmsPropConfig};
use crate::sampler::{materialize, ContrastivePair, PairSpec};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: RmsPropConfig,
    /// Impostor cosine loss becomes `max(0, C)`.
    pub cosine_clamp: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::CrossEntropy,
            batch_size: 128,
            epochs: 30,
            seed: 0,
            optimizer: RmsPropConfig::default(),
            cosine_clamp: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(NpcError::InvalidConfig("batch size and epochs must be positive".into()));
        }
        if !(o.lr > 0.0 && o.lr.is_finite()) || !(o.weight_decay >= 0.0) || !(o.eps > 0.0) {
            return Err(NpcError::InvalidConfig(format!("bad optimizer settings {o:?}")));
        }
        if !(0.0..1.0).contains(&o.decay_rate) {
            return Err(NpcError::InvalidConfig(format!("decay rate {} outside [0, 1)", o.decay_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// Absent when no validation pairs were given.
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` of the best validation accuracy (train accuracy
    /// without validation data). Equal accuracies go to the lower loss,
    /// then to the earlier epoch.
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }

    /// One tab-separated row per epoch with a header line.
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let mut s = String::from("epoch\ttrain_loss\ttrain_acc\tval_loss\tval_acc\n");
        for e in &self.epochs {
            s += &format!(
                "{}\t{:.6}\t{:.6}\t{}\t{}\n",
                e.epoch,
                e.train_loss,
                e.train_accuracy,
                opt(e.val_loss),
                opt(e.val_accuracy)
            );
        }
        s
    }
}

/// Random access to labelled pairs.
pub trait PairSource<S> {
    fn len(&self) -> usize;

    fn pair(&self, index: usize) -> Result<ContrastivePair<S>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: Scalar> PairSource<S> for [ContrastivePair<S>] {
    fn len(&self) -> usize {
        <[ContrastivePair<S>]>::len(self)
    }

    fn pair(&self, index: usize) -> Result<ContrastivePair<S>> {
        Ok(self[index].clone())
    }
}

/// Pair specs resolved lazily against a feature store.
pub struct SpecSource<'a, S> {
    pub specs: &'a [PairSpec],
    pub store: &'a HashMap<String, FeatureMatrix<S>>,
}

impl<S: Scalar> PairSource<S> for SpecSource<'_, S> {
    fn len(&self) -> usize {
        self.specs.len()
    }

    fn pair(&self, index: usize) -> Result<ContrastivePair<S>> {
        materialize(&self.specs[index], self.store)
    }
}

pub struct TrainOutcome<S> {
    /// Parameters from the best epoch.
    pub best: ModelParams<S>,
    /// Parameters and optimizer state after the last epoch.
    pub last: ModelParams<S>,
    pub optimizer: OptimizerState<S>,
    pub report: TrainReport,
}

/// Mean loss, accuracy and per-pair results under inference mode.
#[derive(Clone, Debug)]
pub struct EvalSummary<S> {
    pub loss: f64,
    pub accuracy: f64,
    pub pairs: Vec<PairEval<S>>,
}

fn fetch<S: Scalar>(
    source: &(impl PairSource<S> + ?Sized),
    indices: &[usize],
) -> Result<Vec<ContrastivePair<S>>> {
    indices.iter().map(|&i| source.pair(i)).collect()
}

pub fn evaluate_pairs<S: Scalar>(
    params: &ModelParams<S>,
    source: &(impl PairSource<S> + ?Sized),
    loss: LossKind,
    clamp: bool,
    batch_size: usize,
) -> Result<EvalSummary<S>> {
    if source.is_empty() {
        return Err(NpcError::EmptyData("no pairs to evaluate".into()));
    }
    let idx: Vec<usize> = (0..source.len()).collect();
    let mut pairs = Vec::with_capacity(idx.len());
    let (mut total, mut correct) = (0.0, 0usize);
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch = fetch(source, chunk)?;
        let x1: Vec<_> = batch.iter().map(|p| &p.x1).collect();
        let x2: Vec<_> = batch.iter().map(|p| &p.x2).collect();
        let y: Vec<_> = batch.iter().map(|p| p.label).collect();
        for (e, label) in evaluate_pair_batch(params, &x1, &x2, &y, loss, clamp)?.into_iter().zip(&y) {
            total += e.loss.as_f64();
            correct += usize::from(e.predicted == *label);
            pairs.push(e);
        }
    }
    let n = pairs.len() as f64;
    Ok(EvalSummary {
        loss: total / n,
        accuracy: correct as f64 / n,
        pairs,
    })
}

/// One optimizer step on a fixed batch; returns the batch loss measured
/// before the update.
pub fn train_step<S: Scalar>(
    params: &mut ModelParams<S>,
    optimizer: &mut OptimizerState<S>,
    batch: &[ContrastivePair<S>],
    config: &TrainConfig,
    batch_index: usize,
) -> Result<(f64, usize)> {
    let x1: Vec<_> = batch.iter().map(|p| &p.x1).collect();
    let x2: Vec<_> = batch.iter().map(|p| &p.x2).collect();
    let y: Vec<_> = batch.iter().map(|p| p.label).collect();
    let out = pair_loss_and_grads(params, &x1, &x2, &y, config.loss, config.cosine_clamp)?;
    if !out.loss.is_finite() {
        return Err(NpcError::NonFiniteLoss { batch: batch_index });
    }
    let grads: Vec<_> = out.grads.iter().collect();
    let mut slots = params.trainable_mut();
    rmsprop_step(&mut slots, &grads, optimizer, &config.optimizer)?;
    Ok((out.loss.as_f64(), out.correct))
}

/// Seeded-shuffle epoch loop with model selection on validation accuracy.
/// `progress` sees each epoch's statistics as they complete.
pub fn train<S: Scalar>(
    initial: ModelParams<S>,
    train_pairs: &(impl PairSource<S> + ?Sized),
    validation: &(impl PairSource<S> + ?Sized),
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<TrainOutcome<S>> {
    config.validate()?;
    if train_pairs.is_empty() {
        return Err(NpcError::EmptyData("no training pairs".into()));
    }
    let mut params = initial;
    let mut optimizer = OptimizerState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<((f64, f64), usize, ModelParams<S>)> = None;
    let mut batch_index = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let batch = fetch(train_pairs, chunk)?;
            let (loss, ok) = train_step(&mut params, &mut optimizer, &batch, config, batch_index)?;
            loss_sum += loss * chunk.len() as f64;
            correct += ok;
            batch_index += 1;
        }
        let n = order.len() as f64;
        let val = if validation.is_empty() {
            None
        } else {
            Some(evaluate_pairs(
                &params,
                validation,
                config.loss,
                config.cosine_clamp,
                config.batch_size,
            )?)
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss: val.as_ref().map(|v| v.loss),
            val_accuracy: val.as_ref().map(|v| v.accuracy),
        };
        let score = match (stats.val_accuracy, stats.val_loss) {
            (Some(a), Some(l)) => (a, l),
            _ => (stats.train_accuracy, stats.train_loss),
        };
        let better = |b: &(f64, f64)| score.0 > b.0 || (score.0 == b.0 && score.1 < b.1);
        if best.as_ref().map_or(true, |(b, _, _)| better(b)) {
            best = Some((score, epoch, params.clone()));
        }
        progress(&stats);
        epochs.push(stats);
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best: best_params,
        last: params,
        optimizer,
        report: TrainReport { epochs, best_epoch },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ArchitectureSpec, ConvLayerSpec};
    use crate::sampler::PairLabel;
    use crate::tensor::Tensor;
    use rand::Rng;

    fn arch() -> ArchitectureSpec {
        ArchitectureSpec {
            input_frames: 8,
            input_dim: 4,
            convs: vec![ConvLayerSpec { kernel: (3, 3), channels: 3, pool_after: false }],
            embedding_dim: 6,
            embedding_activation: true,
            classifier_head: true,
        }
    }

    /// Genuine pairs draw both windows around one level, impostors around
    /// two different levels.
    fn toy_pairs(n: usize, seed: u64) -> Vec<ContrastivePair<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let win = |level: f64, rng: &mut ChaCha8Rng| {
            Tensor::from_fn(&[8, 4], |i| level * ((i % 4) as f64 - 1.5) + rng.gen_range(-0.2..0.2))
        };
        (0..n)
            .map(|i| {
                let a = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let genuine = i % 2 == 0;
                let b = if genuine { a } else { -a };
                ContrastivePair {
                    x1: win(a, &mut rng),
                    x2: win(b, &mut rng),
                    label: if genuine { PairLabel::Genuine } else { PairLabel::Impostor },
                }
            })
            .collect()
    }

    #[test]
    fn deterministic_report() {
        let data = toy_pairs(40, 1);
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let run = || {
            let p = build_model::<f64>(&arch(), 2).unwrap();
            train(p, data.as_slice(), &data[..10], &cfg, |_| {}).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.report, b.report);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn empty_training_set_rejected() {
        let p = build_model::<f64>(&arch(), 2).unwrap();
        let none: &[ContrastivePair<f64>] = &[];
        assert!(matches!(
            train(p, none, none, &TrainConfig::default(), |_| {}),
            Err(NpcError::EmptyData(_))
        ));
    }

    #[test]
    fn learns_separable_toy_pairs() {
        let data = toy_pairs(200, 3);
        let cfg = TrainConfig {
            batch_size: 16,
            epochs: 15,
            seed: 1,
            optimizer: RmsPropConfig { lr: 3e-3, ..RmsPropConfig::default() },
            ..TrainConfig::default()
        };
        let p = build_model::<f64>(&arch(), 4).unwrap();
        let out = train(p, &data[..160], &data[160..], &cfg, |_| {}).unwrap();
        let best = out.report.best();
        assert!(best.val_accuracy.unwrap() >= 0.95, "{:?}", out.report);
        let tsv = out.report.to_tsv();
        assert_eq!(tsv.lines().count(), 16);
    }

    #[test]
    fn non_finite_inputs_abort_with_batch_index() {
        let mut data = toy_pairs(8, 4);
        data.iter_mut().for_each(|p| p.x1.fill(f64::NAN));
        let p = build_model::<f64>(&arch(), 2).unwrap();
        let cfg = TrainConfig { batch_size: 4, epochs: 1, ..TrainConfig::default() };
        let r = train(p, data.as_slice(), &data[..0], &cfg, |_| {});
        assert!(matches!(r, Err(NpcError::NonFiniteLoss { batch: 0 })), "{:?}", r.err());
    }
}
