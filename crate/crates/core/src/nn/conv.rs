//! Valid (unpadded), stride-1 2-D convolution via im2col + GEMM.

use rayon::prelude::*;

use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Saved forward state: the layer input, which backward re-expands.
#[derive(Clone, Debug)]
pub struct ConvCache<S> {
    input: Tensor<S>,
    batched: bool,
}

#[derive(Clone, Debug)]
pub struct ConvGrads<S> {
    pub input: Tensor<S>,
    pub kernels: Tensor<S>,
    pub bias: Tensor<S>,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
}

impl Geometry {
    fn ho(&self) -> usize {
        self.h - self.kh + 1
    }
    fn wo(&self) -> usize {
        self.w - self.kw + 1
    }
    fn patch(&self) -> usize {
        self.c_in * self.kh * self.kw
    }
    fn positions(&self) -> usize {
        self.ho() * self.wo()
    }
}

fn as_batch<S: Scalar>(input: &Tensor<S>) -> Result<(usize, bool)> {
    match input.rank() {
        3 => Ok((1, false)),
        4 => Ok((input.dim(0), true)),
        r => Err(NpcError::shape(format!(
            "conv input must be CxHxW or NxCxHxW, got rank {r}"
        ))),
    }
}

fn geometry<S: Scalar>(input: &Tensor<S>, kernels: &Tensor<S>, batched: bool) -> Result<Geometry> {
    let s = input.shape();
    let (c_in, h, w) = if batched {
        (s[1], s[2], s[3])
    } else {
        (s[0], s[1], s[2])
    };
    if kernels.rank() != 4 {
        return Err(NpcError::shape("kernels must be C_out x C_in x kh x kw"));
    }
    let k = kernels.shape();
    if k[1] != c_in {
        return Err(NpcError::shape(format!(
            "kernel expects {} input channels, input has {c_in}",
            k[1]
        )));
    }
    if h < k[2] || w < k[3] {
        return Err(NpcError::shape(format!(
            "input {h}x{w} smaller than kernel {}x{}",
            k[2], k[3]
        )));
    }
    Ok(Geometry {
        c_in,
        h,
        w,
        c_out: k[0],
        kh: k[2],
        kw: k[3],
    })
}

/// Expands one `C x H x W` sample into a `(C*kh*kw) x (Ho*Wo)` matrix.
fn im2col<S: Scalar>(x: &[S], g: &Geometry, cols: &mut [S]) {
    let (ho, wo, p) = (g.ho(), g.wo(), g.positions());
    for ci in 0..g.c_in {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for a in 0..g.kh {
            for b in 0..g.kw {
                let row = (ci * g.kh + a) * g.kw + b;
                let dst = &mut cols[row * p..(row + 1) * p];
                for i in 0..ho {
                    let src = &plane[(i + a) * g.w + b..(i + a) * g.w + b + wo];
                    dst[i * wo..(i + 1) * wo].copy_from_slice(src);
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back onto a `C x H x W` gradient buffer.
fn col2im<S: Scalar>(cols: &[S], g: &Geometry, dx: &mut [S]) {
    let (ho, wo, p) = (g.ho(), g.wo(), g.positions());
    for ci in 0..g.c_in {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for a in 0..g.kh {
            for b in 0..g.kw {
                let row = (ci * g.kh + a) * g.kw + b;
                let src = &cols[row * p..(row + 1) * p];
                for i in 0..ho {
                    let dst = &mut plane[(i + a) * g.w + b..(i + a) * g.w + b + wo];
                    for (d, s) in dst.iter_mut().zip(&src[i * wo..(i + 1) * wo]) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// `out[c,i,j] = bias[c] + sum_{ci,a,b} input[ci,i+a,j+b] * kernels[c,ci,a,b]`.
///
/// Accepts a single `C_in x H x W` sample or an `N x C_in x H x W` batch and
/// returns an output of matching rank.
pub fn conv2d_forward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<(Tensor<S>, ConvCache<S>)> {
    let (n, batched) = as_batch(input)?;
    let g = geometry(input, kernels, batched)?;
    if bias.len() != g.c_out {
        return Err(NpcError::shape(format!(
            "bias has {} entries, expected {}",
            bias.len(),
            g.c_out
        )));
    }
    let (k, p) = (g.patch(), g.positions());
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * p;
    let mut out = vec![S::zero(); n * out_len];
    out.par_chunks_mut(out_len)
        .zip(input.data().par_chunks(in_len))
        .for_each_init(
            || vec![S::zero(); k * p],
            |cols, (y, x)| {
                im2col(x, &g, cols);
                S::gemm(
                    g.c_out,
                    k,
                    p,
                    S::one(),
                    kernels.data(),
                    (k, 1),
                    cols,
                    (p, 1),
                    S::zero(),
                    y,
                    (p, 1),
                );
                for (c, chunk) in y.chunks_mut(p).enumerate() {
                    let b = bias.data()[c];
                    chunk.iter_mut().for_each(|v| *v += b);
                }
            },
        );
    let shape = if batched {
        vec![n, g.c_out, g.ho(), g.wo()]
    } else {
        vec![g.c_out, g.ho(), g.wo()]
    };
    Ok((
        Tensor::from_vec(&shape, out)?,
        ConvCache {
            input: input.clone(),
            batched,
        },
    ))
}

pub fn conv2d_backward<S: Scalar>(
    cache: &ConvCache<S>,
    kernels: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<ConvGrads<S>> {
    let input = &cache.input;
    let n = if cache.batched { input.dim(0) } else { 1 };
    let g = geometry(input, kernels, cache.batched)?;
    let expected = if cache.batched {
        vec![n, g.c_out, g.ho(), g.wo()]
    } else {
        vec![g.c_out, g.ho(), g.wo()]
    };
    if grad_out.shape() != expected.as_slice() {
        return Err(NpcError::shape(format!(
            "grad_out {:?} does not match forward output {expected:?}",
            grad_out.shape()
        )));
    }
    let (k, p) = (g.patch(), g.positions());
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * p;

    let per_sample: Vec<(Vec<S>, Vec<S>, Vec<S>)> = input
        .data()
        .par_chunks(in_len)
        .zip(grad_out.data().par_chunks(out_len))
        .map(|(x, gy)| {
            let mut cols = vec![S::zero(); k * p];
            im2col(x, &g, &mut cols);
            let mut dk = vec![S::zero(); g.c_out * k];
            // dK = gy * cols^T
            S::gemm(
                g.c_out,
                p,
                k,
                S::one(),
                gy,
                (p, 1),
                &cols,
                (1, p),
                S::zero(),
                &mut dk,
                (k, 1),
            );
            let db: Vec<S> = gy.chunks(p).map(|c| c.iter().copied().sum()).collect();
            // dcols = K^T * gy, reusing the im2col buffer
            S::gemm(
                k,
                g.c_out,
                p,
                S::one(),
                kernels.data(),
                (1, k),
                gy,
                (p, 1),
                S::zero(),
                &mut cols,
                (p, 1),
            );
            let mut dx = vec![S::zero(); in_len];
            col2im(&cols, &g, &mut dx);
            (dx, dk, db)
        })
        .collect();

    // Sequential reduction keeps the result independent of scheduling.
    let mut grad_kernels = Tensor::zeros(kernels.shape());
    let mut grad_bias = Tensor::zeros(&[g.c_out]);
    let mut grad_input = Vec::with_capacity(n * in_len);
    for (dx, dk, db) in per_sample {
        for (a, b) in grad_kernels.data_mut().iter_mut().zip(&dk) {
            *a += *b;
        }
        for (a, b) in grad_bias.data_mut().iter_mut().zip(&db) {
            *a += *b;
        }
        grad_input.extend(dx);
    }
    Ok(ConvGrads {
        input: Tensor::from_vec(input.shape(), grad_input)?,
        kernels: grad_kernels,
        bias: grad_bias,
    })
}
