//! Non-overlapping 2x2 max pooling with stride 2.

use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Argmax of every pooling window as a flat offset into its input plane.
#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<u32>,
}

impl PoolCache {
    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

fn planes(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(NpcError::shape("pooling needs at least H x W"));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let count = shape[..shape.len() - 2].iter().product();
    Ok((count, h, w))
}

/// Ties resolve to the first maximal element in row-major window order.
pub fn maxpool2x2_forward<S: Scalar>(input: &Tensor<S>) -> Result<(Tensor<S>, PoolCache)> {
    let (count, h, w) = planes(input.shape())?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NpcError::OddExtent {
            height: h,
            width: w,
        });
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(count * ho * wo);
    let mut argmax = Vec::with_capacity(count * ho * wo);
    for plane in input.data().chunks(h * w) {
        for i in 0..ho {
            for j in 0..wo {
                let candidates = [
                    (2 * i) * w + 2 * j,
                    (2 * i) * w + 2 * j + 1,
                    (2 * i + 1) * w + 2 * j,
                    (2 * i + 1) * w + 2 * j + 1,
                ];
                let mut best = candidates[0];
                for &c in &candidates[1..] {
                    if plane[c] > plane[best] {
                        best = c;
                    }
                }
                out.push(plane[best]);
                argmax.push(best as u32);
            }
        }
    }
    let mut shape = input.shape().to_vec();
    let r = shape.len();
    shape[r - 2] = ho;
    shape[r - 1] = wo;
    Ok((
        Tensor::from_vec(&shape, out)?,
        PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each upstream gradient to its window's argmax; zeros elsewhere.
pub fn maxpool2x2_backward<S: Scalar>(cache: &PoolCache, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    if grad_out.len() != cache.argmax.len() {
        return Err(NpcError::shape(format!(
            "pool grad has {} entries, forward produced {}",
            grad_out.len(),
            cache.argmax.len()
        )));
    }
    let (_, h, w) = planes(&cache.input_shape)?;
    let per_out = (h / 2) * (w / 2);
    let mut grad = Tensor::zeros(&cache.input_shape);
    let data = grad.data_mut();
    for (p, (gy, idx)) in grad_out
        .data()
        .chunks(per_out)
        .zip(cache.argmax.chunks(per_out))
        .enumerate()
    {
        let base = p * h * w;
        for (g, &i) in gy.iter().zip(idx) {
            data[base + i as usize] += *g;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_spatial_extent() {
        let x = Tensor::<f64>::zeros(&[32, 90, 30]);
        let (y, _) = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.shape(), &[32, 45, 15]);
    }

    #[test]
    fn odd_extent_rejected() {
        let x = Tensor::<f64>::zeros(&[1, 5, 4]);
        assert!(matches!(
            maxpool2x2_forward(&x),
            Err(NpcError::OddExtent { height: 5, width: 4 })
        ));
    }

    #[test]
    fn constant_input_picks_first_index() {
        let x = Tensor::<f64>::full(&[1, 4, 4], 3.0);
        let (y, cache) = maxpool2x2_forward(&x).unwrap();
        assert!(y.data().iter().all(|v| *v == 3.0));
        assert_eq!(cache.argmax(), &[0, 2, 8, 10]);
    }

    #[test]
    fn backward_routes_to_argmax() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![1.0, 5.0, 2.0, 3.0]).unwrap();
        let (_, cache) = maxpool2x2_forward(&x).unwrap();
        let g = maxpool2x2_backward(&cache, &Tensor::full(&[1, 1, 1], 2.5)).unwrap();
        assert_eq!(g.data(), &[0.0, 2.5, 0.0, 0.0]);
    }
}
