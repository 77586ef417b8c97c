use super::head::{
    classify_pair, cosine_decision, cosine_loss_grad, cosine_similarity, cross_entropy_from_logits,
    l1_distance,
};
use super::params::ModelParams;
use crate::error::{NpcError, Result};
use crate::nn::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, leaky_relu_backward, leaky_relu_forward, maxpool2x2_backward,
    maxpool2x2_forward, BatchNormParams, BnCache, ConvCache, DenseCache, LeakyCache, Mode,
    PoolCache, LEAKY_SLOPE,
};
use crate::sampler::PairLabel;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    CrossEntropy,
    Cosine,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "xent",
            LossKind::Cosine => "cosine",
        }
    }
}

/// Trunk outputs for a batch, both `N x D`.
#[derive(Clone, Debug)]
pub struct TrunkOutput<S> {
    /// Dense pre-activation output: the exported embedding.
    pub embedding: Tensor<S>,
    /// What the distance layer sees: the embedding after batch norm and
    /// leaky ReLU, or the embedding itself when that stage is disabled.
    pub output: Tensor<S>,
}

struct StageCache<S> {
    conv: ConvCache<S>,
    bn: BnCache<S>,
    act: LeakyCache<S>,
    pool: Option<PoolCache>,
}

pub struct TrunkCache<S> {
    stages: Vec<StageCache<S>>,
    terminal_shape: Vec<usize>,
    dense: DenseCache<S>,
    embed: Option<(BnCache<S>, LeakyCache<S>)>,
}

/// Accepts one `d x m` window or an `N x d x m` batch; returns `N x 1 x d x m`.
fn as_input_batch<S: Scalar>(params: &ModelParams<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
    let (d, m) = (params.arch.input_frames, params.arch.input_dim);
    let n = match x.shape() {
        [a, b] if (*a, *b) == (d, m) => 1,
        [n, a, b] if (*a, *b) == (d, m) => *n,
        s => {
            return Err(NpcError::shape(format!("trunk expects {d}x{m} windows, got {s:?}")));
        }
    };
    if n == 0 {
        return Err(NpcError::shape("empty trunk batch"));
    }
    x.clone().reshape(&[n, 1, d, m])
}

fn run_trunk<S: Scalar>(
    params: &ModelParams<S>,
    bns: &mut [BatchNormParams<S>],
    x: &Tensor<S>,
    mode: Mode,
) -> Result<(TrunkOutput<S>, Option<TrunkCache<S>>)> {
    let slope = S::c(LEAKY_SLOPE);
    let mut h = as_input_batch(params, x)?;
    let n = h.dim(0);
    let train = mode == Mode::Train;
    let mut stages = Vec::with_capacity(params.convs.len());
    for (i, (block, spec)) in params.convs.iter().zip(&params.arch.convs).enumerate() {
        let (y, conv) = conv2d_forward(&h, &block.kernels, &block.bias)?;
        let (y, bn) = batchnorm_forward(&y, &mut bns[i], mode)?;
        let (y, act) = leaky_relu_forward(&y, slope);
        let (y, pool) = if spec.pool_after {
            let (p, c) = maxpool2x2_forward(&y)?;
            (p, Some(c))
        } else {
            (y, None)
        };
        if train {
            stages.push(StageCache {
                conv,
                bn: bn.expect("train mode returns a cache"),
                act,
                pool,
            });
        }
        h = y;
    }
    let terminal_shape = h.shape().to_vec();
    let flat = h.reshape(&[n, terminal_shape[1..].iter().product()])?;
    let (embedding, dense) = dense_forward(&flat, &params.embed_weights, &params.embed_bias)?;
    let (output, embed) = match &params.embed_bn {
        Some(_) => {
            let k = params.convs.len();
            let (y, bn) = batchnorm_forward(&embedding, &mut bns[k], mode)?;
            let (y, act) = leaky_relu_forward(&y, slope);
            (y, bn.map(|b| (b, act)))
        }
        None => (embedding.clone(), None),
    };
    let out = TrunkOutput { embedding, output };
    let cache = train.then_some(TrunkCache {
        stages,
        terminal_shape,
        dense,
        embed,
    });
    Ok((out, cache))
}

/// Training-graph forward: batch statistics, running estimates updated.
pub fn trunk_forward_train<S: Scalar>(
    params: &mut ModelParams<S>,
    x: &Tensor<S>,
) -> Result<(TrunkOutput<S>, TrunkCache<S>)> {
    let mut bns = params.batchnorms();
    let (out, cache) = run_trunk(params, &mut bns, x, Mode::Train)?;
    params.store_running_stats(&bns);
    Ok((out, cache.expect("train mode returns a cache")))
}

/// Inference forward with running statistics; parameters are untouched.
pub fn trunk_forward_eval<S: Scalar>(params: &ModelParams<S>, x: &Tensor<S>) -> Result<TrunkOutput<S>> {
    let mut bns = params.batchnorms();
    Ok(run_trunk(params, &mut bns, x, Mode::Eval)?.0)
}

/// Gradients for every trunk parameter, in `ModelParams::trainable` order
/// (the head is not included).
pub fn trunk_backward<S: Scalar>(
    params: &ModelParams<S>,
    cache: &TrunkCache<S>,
    grad_output: &Tensor<S>,
) -> Result<Vec<Tensor<S>>> {
    let mut embed_grads = Vec::new();
    let grad_embedding = match (&cache.embed, &params.embed_bn) {
        (Some((bn_cache, act)), Some(bn)) => {
            let g = leaky_relu_backward(act, grad_output)?;
            let g = batchnorm_backward(bn_cache, &bn.gamma, &g)?;
            embed_grads.push(g.gamma);
            embed_grads.push(g.beta);
            g.input
        }
        _ => grad_output.clone(),
    };
    let dense = dense_backward(&cache.dense, &params.embed_weights, &grad_embedding)?;
    let mut grad = dense.input.reshape(&cache.terminal_shape)?;
    let mut conv_grads = Vec::with_capacity(4 * cache.stages.len());
    for (block, stage) in params.convs.iter().zip(&cache.stages).rev() {
        if let Some(pool) = &stage.pool {
            grad = maxpool2x2_backward(pool, &grad)?;
        }
        let g = leaky_relu_backward(&stage.act, &grad)?;
        let bn = batchnorm_backward(&stage.bn, &block.bn.gamma, &g)?;
        let conv = conv2d_backward(&stage.conv, &block.kernels, &bn.input)?;
        conv_grads.push([conv.kernels, conv.bias, bn.gamma, bn.beta]);
        grad = conv.input;
    }
    let mut out: Vec<Tensor<S>> = conv_grads.into_iter().rev().flatten().collect();
    out.push(dense.weights);
    out.push(dense.bias);
    out.extend(embed_grads);
    Ok(out)
}

/// Loss, accuracy count and full gradient list for one batch of pairs.
#[derive(Clone, Debug)]
pub struct PairBatchOutcome<S> {
    /// Mean loss over the batch.
    pub loss: S,
    pub correct: usize,
    /// Aligned with `ModelParams::trainable`.
    pub grads: Vec<Tensor<S>>,
}

/// Per-pair evaluation result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEval<S> {
    pub loss: S,
    /// `p1` for cross-entropy models, the cosine for cosine models.
    pub score: S,
    pub predicted: PairLabel,
}

fn stack_pairs<S: Scalar>(x1: &[&Tensor<S>], x2: &[&Tensor<S>]) -> Result<Tensor<S>> {
    if x1.len() != x2.len() || x1.is_empty() {
        return Err(NpcError::shape(format!(
            "pair batch with {} left and {} right windows",
            x1.len(),
            x2.len()
        )));
    }
    let shape = x1[0].shape().to_vec();
    let mut data = Vec::with_capacity(2 * x1.len() * x1[0].len());
    for x in x1.iter().chain(x2) {
        if x.shape() != shape.as_slice() {
            return Err(NpcError::shape(format!(
                "pair windows {:?} and {:?} differ",
                shape,
                x.shape()
            )));
        }
        data.extend_from_slice(x.data());
    }
    let mut full = vec![2 * x1.len()];
    full.extend(&shape);
    Tensor::from_vec(&full, data)
}

fn check_loss_head<S: Scalar>(params: &ModelParams<S>, loss: LossKind) -> Result<()> {
    match (loss, params.head.is_some()) {
        (LossKind::CrossEntropy, false) => Err(NpcError::InvalidConfig(
            "cross-entropy training needs a classifier head".into(),
        )),
        (LossKind::Cosine, true) => Err(NpcError::InvalidConfig(
            "cosine training uses no classifier head".into(),
        )),
        _ => Ok(()),
    }
}

/// Forward and backward over a batch of pairs. Both twins run as one
/// `2B` batch so they share batch-norm statistics.
pub fn pair_loss_and_grads<S: Scalar>(
    params: &mut ModelParams<S>,
    x1: &[&Tensor<S>],
    x2: &[&Tensor<S>],
    labels: &[PairLabel],
    loss: LossKind,
    clamp: bool,
) -> Result<PairBatchOutcome<S>> {
    check_loss_head(params, loss)?;
    if labels.len() != x1.len() {
        return Err(NpcError::shape("label count differs from pair count"));
    }
    let b = labels.len();
    let x = stack_pairs(x1, x2)?;
    let (out, cache) = trunk_forward_train(params, &x)?;
    let o = &out.output;
    let dim = o.dim(1);
    let inv_b = S::one() / S::from_usize(b).unwrap();
    let mut grad_o = Tensor::<S>::zeros(o.shape());
    let mut total = S::zero();
    let mut correct = 0;
    let mut head_grads = Vec::new();
    match loss {
        LossKind::CrossEntropy => {
            let head = params.head.as_ref().expect("checked above");
            let mut dw = vec![S::zero(); 2 * dim];
            let mut db = [S::zero(); 2];
            for i in 0..b {
                let (o1, o2) = (o.row(i), o.row(b + i));
                let l = l1_distance(o1, o2)?;
                let s = classify_pair(&l, head)?;
                total += cross_entropy_from_logits(s.g1, s.g2, labels[i]);
                correct += usize::from(s.predicted() == labels[i]);
                let y2 = if labels[i] == PairLabel::Impostor { S::one() } else { S::zero() };
                let dg = [(s.p1 - (S::one() - y2)) * inv_b, (s.p2 - y2) * inv_b];
                for r in 0..2 {
                    db[r] += dg[r];
                    for k in 0..dim {
                        dw[r * dim + k] += dg[r] * l[k];
                    }
                }
                let gd = grad_o.data_mut();
                for k in 0..dim {
                    let dl = dg[0] * head.weights.row(0)[k] + dg[1] * head.weights.row(1)[k];
                    let diff = o1[k] - o2[k];
                    let sign = if diff > S::zero() {
                        S::one()
                    } else if diff < S::zero() {
                        -S::one()
                    } else {
                        S::zero()
                    };
                    gd[i * dim + k] = dl * sign;
                    gd[(b + i) * dim + k] = -dl * sign;
                }
            }
            head_grads.push(Tensor::from_vec(&[2, dim], dw)?);
            head_grads.push(Tensor::from_vec(&[2], db.to_vec())?);
        }
        LossKind::Cosine => {
            for i in 0..b {
                let (l, c, g1, g2) = cosine_loss_grad(o.row(i), o.row(b + i), labels[i], clamp)?;
                total += l;
                correct += usize::from(cosine_decision(c) == labels[i]);
                let gd = grad_o.data_mut();
                for k in 0..dim {
                    gd[i * dim + k] = g1[k] * inv_b;
                    gd[(b + i) * dim + k] = g2[k] * inv_b;
                }
            }
        }
    }
    let mut grads = trunk_backward(params, &cache, &grad_o)?;
    grads.extend(head_grads);
    Ok(PairBatchOutcome {
        loss: total * inv_b,
        correct,
        grads,
    })
}

/// Inference-mode scoring of a batch of pairs.
pub fn evaluate_pair_batch<S: Scalar>(
    params: &ModelParams<S>,
    x1: &[&Tensor<S>],
    x2: &[&Tensor<S>],
    labels: &[PairLabel],
    loss: LossKind,
    clamp: bool,
) -> Result<Vec<PairEval<S>>> {
    check_loss_head(params, loss)?;
    if labels.len() != x1.len() {
        return Err(NpcError::shape("label count differs from pair count"));
    }
    let b = labels.len();
    let x = stack_pairs(x1, x2)?;
    let out = trunk_forward_eval(params, &x)?;
    let o = &out.output;
    (0..b)
        .map(|i| {
            let (o1, o2) = (o.row(i), o.row(b + i));
            let y = labels[i];
            Ok(match loss {
                LossKind::CrossEntropy => {
                    let head = params.head.as_ref().expect("checked above");
                    let s = classify_pair(&l1_distance(o1, o2)?, head)?;
                    PairEval {
                        loss: cross_entropy_from_logits(s.g1, s.g2, y),
                        score: s.p1,
                        predicted: s.predicted(),
                    }
                }
                LossKind::Cosine => {
                    let c = cosine_similarity(o1, o2)?;
                    let l = match y {
                        PairLabel::Genuine => S::one() - c,
                        PairLabel::Impostor if clamp => c.max(S::zero()),
                        PairLabel::Impostor => c,
                    };
                    PairEval {
                        loss: l,
                        score: c,
                        predicted: cosine_decision(c),
                    }
                }
            })
        })
        .collect()
}
