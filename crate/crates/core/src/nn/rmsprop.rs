//! RMSProp with L2 weight decay folded into the gradient.
//!
//! ```text
//! g <- g + weight_decay * w
//! a <- decay * a + (1 - decay) * g^2
//! w <- w - lr * g / sqrt(a + eps)
//! ```

use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub decay_rate: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            decay_rate: 0.99,
            eps: 1e-8,
            weight_decay: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState<S> {
    pub accumulators: Vec<Tensor<S>>,
    pub step: u64,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new() -> Self {
        Self {
            accumulators: Vec::new(),
            step: 0,
        }
    }
}

/// Applies one update in place. Nothing is modified when an error is
/// returned; `NonFiniteGradient` carries the offending parameter index.
pub fn rmsprop_step<S: Scalar>(
    params: &mut [&mut Tensor<S>],
    grads: &[&Tensor<S>],
    state: &mut OptimizerState<S>,
    config: &RmsPropConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(NpcError::shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(NpcError::shape(format!(
                "parameter #{i} {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if !g.is_finite() {
            return Err(NpcError::NonFiniteGradient(format!("#{i}")));
        }
    }
    if state.accumulators.is_empty() {
        state.accumulators = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
    } else if state.accumulators.len() != params.len()
        || state
            .accumulators
            .iter()
            .zip(params.iter())
            .any(|(a, p)| a.shape() != p.shape())
    {
        return Err(NpcError::shape("optimizer state does not match parameters"));
    }

    let lr = S::c(config.lr);
    let rho = S::c(config.decay_rate);
    let eps = S::c(config.eps);
    let wd = S::c(config.weight_decay);
    let one_minus_rho = S::one() - rho;
    for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut state.accumulators) {
        for ((w, &gi), a) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(acc.data_mut().iter_mut())
        {
            let grad = gi + wd * *w;
            *a = rho * *a + one_minus_rho * grad * grad;
            *w -= lr * grad / (*a + eps).sqrt();
        }
    }
    state.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut w = Tensor::from_fn(&[4], |i| i as f64);
        let before = w.clone();
        let g = Tensor::zeros(&[4]);
        let mut st = OptimizerState::new();
        let cfg = RmsPropConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        rmsprop_step(&mut [&mut w], &[&g], &mut st, &cfg).unwrap();
        assert_eq!(w, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut w = Tensor::full(&[1], 0.0f64);
        let g = Tensor::full(&[1], 1.0);
        let mut st = OptimizerState::new();
        let cfg = RmsPropConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        rmsprop_step(&mut [&mut w], &[&g], &mut st, &cfg).unwrap();
        assert!((st.accumulators[0].data()[0] - 0.01).abs() < 1e-15);
        let expected = -1e-4 / (0.01f64 + 1e-8).sqrt();
        assert!((w.data()[0] - expected).abs() < 1e-18);
        assert!((w.data()[0].abs() / 1e-4 - 10.0).abs() < 1e-4);
    }

    #[test]
    fn descends_on_quadratic() {
        let mut w = Tensor::full(&[1], 0.8f64);
        let mut st = OptimizerState::new();
        let cfg = RmsPropConfig::default();
        let f = |x: f64| x * x;
        let before = f(w.data()[0]);
        let g = Tensor::full(&[1], 2.0 * w.data()[0]);
        rmsprop_step(&mut [&mut w], &[&g], &mut st, &cfg).unwrap();
        assert!(f(w.data()[0]) < before);
    }

    #[test]
    fn non_finite_gradient_leaves_parameters_untouched() {
        let mut w = Tensor::full(&[2], 1.0f64);
        let g = Tensor::from_vec(&[2], vec![0.5, f64::NAN]).unwrap();
        let mut st = OptimizerState::new();
        let err = rmsprop_step(&mut [&mut w], &[&g], &mut st, &RmsPropConfig::default());
        assert!(matches!(err, Err(NpcError::NonFiniteGradient(_))));
        assert_eq!(w.data(), &[1.0, 1.0]);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut w = Tensor::full(&[2], 1.0f64);
        let g = Tensor::full(&[3], 0.0);
        let mut st = OptimizerState::new();
        assert!(rmsprop_step(&mut [&mut w], &[&g], &mut st, &RmsPropConfig::default()).is_err());
    }
}
