use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureSpec;
use crate::error::{NpcError, Result};
use crate::nn::BatchNormParams;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock<S> {
    pub kernels: Tensor<S>,
    pub bias: Tensor<S>,
    pub bn: BatchNormParams<S>,
}

/// The `2 x D` weights `w_{i,k}` and biases `b_i` over the L1 distance.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead<S> {
    pub weights: Tensor<S>,
    pub bias: Tensor<S>,
}

/// All learnable arrays of the shared trunk plus the classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    pub arch: ArchitectureSpec,
    pub convs: Vec<ConvBlock<S>>,
    pub embed_weights: Tensor<S>,
    pub embed_bias: Tensor<S>,
    pub embed_bn: Option<BatchNormParams<S>>,
    pub head: Option<ClassifierHead<S>>,
}

fn uniform_fan_in<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Tensor::from_fn(shape, |_| S::c(rng.sample(dist)))
}

/// Deterministic initialization: weights uniform in `±1/sqrt(fan_in)`,
/// biases zero, batch-norm scale one and shift zero, running stats (0, 1).
pub fn build_model<S: Scalar>(arch: &ArchitectureSpec, seed: u64) -> Result<ModelParams<S>> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_in = 1;
    let mut convs = Vec::with_capacity(arch.convs.len());
    for c in &arch.convs {
        let fan_in = c_in * c.kernel.0 * c.kernel.1;
        convs.push(ConvBlock {
            kernels: uniform_fan_in(&mut rng, &[c.channels, c_in, c.kernel.0, c.kernel.1], fan_in),
            bias: Tensor::zeros(&[c.channels]),
            bn: BatchNormParams::new(c.channels),
        });
        c_in = c.channels;
    }
    let flat = arch.flatten_len()?;
    let d = arch.embedding_dim;
    let embed_weights = uniform_fan_in(&mut rng, &[d, flat], flat);
    let head = arch.classifier_head.then(|| ClassifierHead {
        weights: uniform_fan_in(&mut rng, &[2, d], d),
        bias: Tensor::zeros(&[2]),
    });
    Ok(ModelParams {
        arch: arch.clone(),
        convs,
        embed_weights,
        embed_bias: Tensor::zeros(&[d]),
        embed_bn: arch.embedding_activation.then(|| BatchNormParams::new(d)),
        head,
    })
}

impl<S: Scalar> ModelParams<S> {
    /// Trainable tensors in a fixed order shared by gradients and the
    /// optimizer state.
    pub fn trainable(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.kernels"), &c.kernels));
            out.push((format!("conv{i}.bias"), &c.bias));
            out.push((format!("conv{i}.bn.gamma"), &c.bn.gamma));
            out.push((format!("conv{i}.bn.beta"), &c.bn.beta));
        }
        out.push(("embed.weights".into(), &self.embed_weights));
        out.push(("embed.bias".into(), &self.embed_bias));
        if let Some(bn) = &self.embed_bn {
            out.push(("embed.bn.gamma".into(), &bn.gamma));
            out.push(("embed.bn.beta".into(), &bn.beta));
        }
        if let Some(h) = &self.head {
            out.push(("head.weights".into(), &h.weights));
            out.push(("head.bias".into(), &h.bias));
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
            out.push(&mut c.bn.gamma);
            out.push(&mut c.bn.beta);
        }
        out.push(&mut self.embed_weights);
        out.push(&mut self.embed_bias);
        if let Some(bn) = &mut self.embed_bn {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        if let Some(h) = &mut self.head {
            out.push(&mut h.weights);
            out.push(&mut h.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.trainable().iter().map(|(_, t)| t.len()).sum()
    }

    /// Every stored tensor, trainable or not, by name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = self.trainable();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.bn.running_mean"), &c.bn.running_mean));
            out.push((format!("conv{i}.bn.running_var"), &c.bn.running_var));
        }
        if let Some(bn) = &self.embed_bn {
            out.push(("embed.bn.running_mean".into(), &bn.running_mean));
            out.push(("embed.bn.running_var".into(), &bn.running_var));
        }
        out
    }

    /// Overwrites the tensor called `name`; shapes must agree.
    pub fn set_named(&mut self, name: &str, value: Tensor<S>) -> Result<()> {
        let slot = self.named_slot(name)?;
        if slot.shape() != value.shape() {
            return Err(NpcError::shape(format!(
                "`{name}` expects {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    fn named_slot(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        let unknown = || NpcError::CorruptFile(format!("unknown tensor `{name}`"));
        let bn_slot = |bn: &'_ mut BatchNormParams<S>, field: &str| -> Option<*mut Tensor<S>> {
            Some(match field {
                "gamma" => &mut bn.gamma as *mut _,
                "beta" => &mut bn.beta as *mut _,
                "running_mean" => &mut bn.running_mean as *mut _,
                "running_var" => &mut bn.running_var as *mut _,
                _ => return None,
            })
        };
        let ptr: Option<*mut Tensor<S>> = if let Some(rest) = name.strip_prefix("conv") {
            let (idx, field) = rest.split_once('.').ok_or_else(unknown)?;
            let i: usize = idx.parse().map_err(|_| unknown())?;
            let block = self.convs.get_mut(i).ok_or_else(unknown)?;
            match field {
                "kernels" => Some(&mut block.kernels as *mut _),
                "bias" => Some(&mut block.bias as *mut _),
                f => f.strip_prefix("bn.").and_then(|f| bn_slot(&mut block.bn, f)),
            }
        } else if let Some(field) = name.strip_prefix("embed.") {
            match field {
                "weights" => Some(&mut self.embed_weights as *mut _),
                "bias" => Some(&mut self.embed_bias as *mut _),
                f => match (&mut self.embed_bn, f.strip_prefix("bn.")) {
                    (Some(bn), Some(f)) => bn_slot(bn, f),
                    _ => None,
                },
            }
        } else if let Some(field) = name.strip_prefix("head.") {
            match (&mut self.head, field) {
                (Some(h), "weights") => Some(&mut h.weights as *mut _),
                (Some(h), "bias") => Some(&mut h.bias as *mut _),
                _ => None,
            }
        } else {
            None
        };
        // SAFETY: each pointer comes from a unique borrow of `self` that
        // ended above; the returned reference inherits `&mut self`.
        ptr.map(|p| unsafe { &mut *p }).ok_or_else(unknown)
    }

    /// Batch-norm layers in forward order: convs, then the embedding.
    pub(crate) fn batchnorms(&self) -> Vec<BatchNormParams<S>> {
        let mut v: Vec<_> = self.convs.iter().map(|c| c.bn.clone()).collect();
        if let Some(bn) = &self.embed_bn {
            v.push(bn.clone());
        }
        v
    }

    pub(crate) fn store_running_stats(&mut self, bns: &[BatchNormParams<S>]) {
        for (c, b) in self.convs.iter_mut().zip(bns) {
            c.bn.running_mean = b.running_mean.clone();
            c.bn.running_var = b.running_var.clone();
        }
        if let (Some(bn), Some(b)) = (&mut self.embed_bn, bns.get(self.convs.len())) {
            bn.running_mean = b.running_mean.clone();
            bn.running_var = b.running_var.clone();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        let bn = |b: &BatchNormParams<S>| BatchNormParams {
            gamma: b.gamma.cast(),
            beta: b.beta.cast(),
            running_mean: b.running_mean.cast(),
            running_var: b.running_var.cast(),
        };
        ModelParams {
            arch: self.arch.clone(),
            convs: self
                .convs
                .iter()
                .map(|c| ConvBlock {
                    kernels: c.kernels.cast(),
                    bias: c.bias.cast(),
                    bn: bn(&c.bn),
                })
                .collect(),
            embed_weights: self.embed_weights.cast(),
            embed_bias: self.embed_bias.cast(),
            embed_bn: self.embed_bn.as_ref().map(bn),
            head: self.head.as_ref().map(|h| ClassifierHead {
                weights: h.weights.cast(),
                bias: h.bias.cast(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        let a = ArchitectureSpec::default();
        let p: ModelParams<f64> = build_model(&a, 9).unwrap();
        let q: ModelParams<f64> = build_model(&a, 9).unwrap();
        assert_eq!(p, q);
        let r: ModelParams<f64> = build_model(&a, 10).unwrap();
        assert_ne!(p.embed_weights, r.embed_weights);
    }

    #[test]
    fn counted_parameters_match_architecture_formula() {
        let a = ArchitectureSpec::default();
        let p: ModelParams<f32> = build_model(&a, 0).unwrap();
        assert_eq!(p.param_count(), a.param_count().unwrap());
        assert_eq!(p.param_count(), 1_680_482);
    }

    #[test]
    fn initialization_ranges() {
        let p: ModelParams<f64> = build_model(&ArchitectureSpec::default(), 1).unwrap();
        let bound = 1.0 / 3200f64.sqrt();
        assert!(p.embed_weights.data().iter().all(|v| v.abs() <= bound));
        assert!(p.embed_bias.data().iter().all(|v| *v == 0.0));
        let bn = &p.convs[0].bn;
        assert!(bn.gamma.data().iter().all(|v| *v == 1.0));
        assert!(bn.running_var.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn set_named_checks_shape_and_name() {
        let mut p: ModelParams<f64> = build_model(&ArchitectureSpec::default(), 1).unwrap();
        assert!(p.set_named("head.bias", Tensor::full(&[2], 0.5)).is_ok());
        assert_eq!(p.head.as_ref().unwrap().bias.data(), &[0.5, 0.5]);
        assert!(p.set_named("head.bias", Tensor::zeros(&[3])).is_err());
        assert!(p.set_named("conv9.bias", Tensor::zeros(&[3])).is_err());
        assert!(p.set_named("conv1.bn.running_var", Tensor::full(&[32], 2.0)).is_ok());
        assert_eq!(p.convs[1].bn.running_var.data()[0], 2.0);
    }
}
