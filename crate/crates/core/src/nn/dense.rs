use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct DenseCache<S> {
    input: Tensor<S>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<S> {
    pub input: Tensor<S>,
    pub weights: Tensor<S>,
    pub bias: Tensor<S>,
}

/// `y = x W^T + b` for `x: batch x in`, `W: out x in`.
pub fn dense_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<(Tensor<S>, DenseCache<S>)> {
    if input.rank() != 2 || weights.rank() != 2 || input.dim(1) != weights.dim(1) {
        return Err(NpcError::shape(format!(
            "dense: input {:?} vs weights {:?}",
            input.shape(),
            weights.shape()
        )));
    }
    let (n, fan_in, fan_out) = (input.dim(0), input.dim(1), weights.dim(0));
    if bias.len() != fan_out {
        return Err(NpcError::shape(format!(
            "dense: bias has {} entries, expected {fan_out}",
            bias.len()
        )));
    }
    let mut out = Vec::with_capacity(n * fan_out);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    S::gemm(
        n,
        fan_in,
        fan_out,
        S::one(),
        input.data(),
        (fan_in, 1),
        weights.data(),
        (1, fan_in),
        S::one(),
        &mut out,
        (fan_out, 1),
    );
    Ok((
        Tensor::from_vec(&[n, fan_out], out)?,
        DenseCache {
            input: input.clone(),
        },
    ))
}

pub fn dense_backward<S: Scalar>(
    cache: &DenseCache<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<DenseGrads<S>> {
    let (n, fan_in) = (cache.input.dim(0), cache.input.dim(1));
    let fan_out = weights.dim(0);
    if grad_out.shape() != [n, fan_out] {
        return Err(NpcError::shape(format!(
            "dense grad {:?}, expected [{n}, {fan_out}]",
            grad_out.shape()
        )));
    }
    let mut dw = vec![S::zero(); fan_out * fan_in];
    // dW = gy^T x
    S::gemm(
        fan_out,
        n,
        fan_in,
        S::one(),
        grad_out.data(),
        (1, fan_out),
        cache.input.data(),
        (fan_in, 1),
        S::zero(),
        &mut dw,
        (fan_in, 1),
    );
    let mut dx = vec![S::zero(); n * fan_in];
    S::gemm(
        n,
        fan_out,
        fan_in,
        S::one(),
        grad_out.data(),
        (fan_out, 1),
        weights.data(),
        (fan_in, 1),
        S::zero(),
        &mut dx,
        (fan_in, 1),
    );
    let mut db = vec![S::zero(); fan_out];
    for row in grad_out.data().chunks(fan_out) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += *g;
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(&[n, fan_in], dx)?,
        weights: Tensor::from_vec(&[fan_out, fan_in], dw)?,
        bias: Tensor::from_vec(&[fan_out], db)?,
    })
}

/// Learnable parameters of a `fan_in -> fan_out` affine layer.
pub fn dense_param_count(fan_in: usize, fan_out: usize) -> usize {
    fan_out * fan_in + fan_out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor::from_fn(&[3, 4], |i| i as f64 - 5.0);
        let w = Tensor::from_fn(&[4, 4], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        let (y, _) = dense_forward(&x, &w, &Tensor::zeros(&[4])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn embedding_layer_parameter_count() {
        assert_eq!(dense_param_count(3200, 512), 1_638_912);
    }

    #[test]
    fn shape_mismatch_reported() {
        let x = Tensor::<f64>::zeros(&[2, 3]);
        let w = Tensor::<f64>::zeros(&[4, 5]);
        assert!(dense_forward(&x, &w, &Tensor::zeros(&[4])).is_err());
    }
}
