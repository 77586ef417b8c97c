use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct LeakyCache<S> {
    input: Tensor<S>,
    slope: S,
}

/// `x` for `x > 0`, `slope * x` otherwise.
pub fn leaky_relu_forward<S: Scalar>(input: &Tensor<S>, slope: S) -> (Tensor<S>, LeakyCache<S>) {
    let out = Tensor::from_fn(input.shape(), |i| {
        let x = input.data()[i];
        if x > S::zero() {
            x
        } else {
            slope * x
        }
    });
    (
        out,
        LeakyCache {
            input: input.clone(),
            slope,
        },
    )
}

/// The subgradient at exactly zero is `slope`.
pub fn leaky_relu_backward<S: Scalar>(cache: &LeakyCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    if grad_out.shape() != cache.input.shape() {
        return Err(NpcError::shape("leaky relu grad shape differs from forward"));
    }
    Ok(Tensor::from_fn(grad_out.shape(), |i| {
        let g = grad_out.data()[i];
        if cache.input.data()[i] > S::zero() {
            g
        } else {
            cache.slope * g
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (y, _) = leaky_relu_forward(&x, LEAKY_SLOPE);
        assert_eq!(y.data(), &[-0.01, 0.0, 2.0]);
    }

    #[test]
    fn positive_input_is_identity() {
        let x = Tensor::from_fn(&[5], |i| i as f64 + 0.5);
        let (y, _) = leaky_relu_forward(&x, LEAKY_SLOPE);
        assert_eq!(y, x);
    }

    #[test]
    fn zero_uses_slope_subgradient() {
        let x = Tensor::from_vec(&[2], vec![0.0f64, 1.0]).unwrap();
        let (_, cache) = leaky_relu_forward(&x, 0.01);
        let g = leaky_relu_backward(&cache, &Tensor::full(&[2], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.01, 1.0]);
    }
}
