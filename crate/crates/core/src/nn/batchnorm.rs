//! Batch normalization over `N x C x ...` activations.
//!
//! Statistics are per channel, pooled over the batch axis and every
//! trailing (spatial) axis, so the same code serves dense `N x F` inputs
//! and convolutional `N x C x H x W` maps.

use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
/// Weight kept on the old running statistic per training step.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams<S> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub running_mean: Tensor<S>,
    pub running_var: Tensor<S>,
}

impl<S: Scalar> BatchNormParams<S> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], S::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], S::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Clone, Debug)]
pub struct BnCache<S> {
    normalized: Tensor<S>,
    inv_std: Vec<S>,
}

impl<S: Scalar> BnCache<S> {
    /// The pre-affine standardized values.
    pub fn normalized(&self) -> &Tensor<S> {
        &self.normalized
    }
}

#[derive(Clone, Debug)]
pub struct BnGrads<S> {
    pub input: Tensor<S>,
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
}

fn layout(shape: &[usize], channels: usize) -> Result<(usize, usize)> {
    if shape.len() < 2 || shape[1] != channels {
        return Err(NpcError::shape(format!(
            "batch-norm over {channels} channels got input {shape:?}"
        )));
    }
    Ok((shape[0], shape[2..].iter().product()))
}

/// Train mode standardizes with batch statistics and folds them into the
/// running estimates (biased variance for normalization, unbiased for the
/// running estimate); eval mode uses the running estimates only and
/// returns no cache.
pub fn batchnorm_forward<S: Scalar>(
    input: &Tensor<S>,
    params: &mut BatchNormParams<S>,
    mode: Mode,
) -> Result<(Tensor<S>, Option<BnCache<S>>)> {
    let c = params.channels();
    let (n, spatial) = layout(input.shape(), c)?;
    let eps = S::c(BN_EPS);
    let x = input.data();
    let mut out = vec![S::zero(); x.len()];

    match mode {
        Mode::Eval => {
            for ch in 0..c {
                let inv = (params.running_var.data()[ch] + eps).sqrt().recip();
                let (mu, g, b) = (
                    params.running_mean.data()[ch],
                    params.gamma.data()[ch],
                    params.beta.data()[ch],
                );
                for s in 0..n {
                    let base = (s * c + ch) * spatial;
                    for k in base..base + spatial {
                        out[k] = g * (x[k] - mu) * inv + b;
                    }
                }
            }
            Ok((Tensor::from_vec(input.shape(), out)?, None))
        }
        Mode::Train => {
            if n < 2 {
                return Err(NpcError::DegenerateBatch(n));
            }
            let m = S::from_usize(n * spatial).unwrap();
            let momentum = S::c(BN_MOMENTUM);
            let mut normalized = vec![S::zero(); x.len()];
            let mut inv_std = Vec::with_capacity(c);
            for ch in 0..c {
                let idx = |s: usize| (s * c + ch) * spatial;
                let mut sum = S::zero();
                for s in 0..n {
                    sum += x[idx(s)..idx(s) + spatial].iter().copied().sum();
                }
                let mean = sum / m;
                let mut sq = S::zero();
                for s in 0..n {
                    for v in &x[idx(s)..idx(s) + spatial] {
                        let d = *v - mean;
                        sq += d * d;
                    }
                }
                let var = sq / m;
                let inv = (var + eps).sqrt().recip();
                let (g, b) = (params.gamma.data()[ch], params.beta.data()[ch]);
                for s in 0..n {
                    for k in idx(s)..idx(s) + spatial {
                        let xh = (x[k] - mean) * inv;
                        normalized[k] = xh;
                        out[k] = g * xh + b;
                    }
                }
                inv_std.push(inv);
                let unbiased = sq / (m - S::one());
                let rm = &mut params.running_mean.data_mut()[ch];
                *rm = momentum * *rm + (S::one() - momentum) * mean;
                let rv = &mut params.running_var.data_mut()[ch];
                *rv = momentum * *rv + (S::one() - momentum) * unbiased;
            }
            Ok((
                Tensor::from_vec(input.shape(), out)?,
                Some(BnCache {
                    normalized: Tensor::from_vec(input.shape(), normalized)?,
                    inv_std,
                }),
            ))
        }
    }
}

pub fn batchnorm_backward<S: Scalar>(
    cache: &BnCache<S>,
    gamma: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<BnGrads<S>> {
    let c = gamma.len();
    if grad_out.shape() != cache.normalized.shape() {
        return Err(NpcError::shape("batch-norm grad shape differs from forward"));
    }
    let (n, spatial) = layout(grad_out.shape(), c)?;
    let m = S::from_usize(n * spatial).unwrap();
    let xh = cache.normalized.data();
    let gy = grad_out.data();
    let mut dx = vec![S::zero(); gy.len()];
    let mut dgamma = vec![S::zero(); c];
    let mut dbeta = vec![S::zero(); c];
    for ch in 0..c {
        let idx = |s: usize| (s * c + ch) * spatial;
        let (mut sum_g, mut sum_gx) = (S::zero(), S::zero());
        for s in 0..n {
            for k in idx(s)..idx(s) + spatial {
                sum_g += gy[k];
                sum_gx += gy[k] * xh[k];
            }
        }
        dgamma[ch] = sum_gx;
        dbeta[ch] = sum_g;
        // dx = gamma * inv_std / m * (m * g - sum(g) - xhat * sum(g * xhat))
        let scale = gamma.data()[ch] * cache.inv_std[ch] / m;
        for s in 0..n {
            for k in idx(s)..idx(s) + spatial {
                dx[k] = scale * (m * gy[k] - sum_g - xh[k] * sum_gx);
            }
        }
    }
    Ok(BnGrads {
        input: Tensor::from_vec(grad_out.shape(), dx)?,
        gamma: Tensor::from_vec(&[c], dgamma)?,
        beta: Tensor::from_vec(&[c], dbeta)?,
    })
}
