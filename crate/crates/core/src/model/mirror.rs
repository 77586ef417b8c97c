use super::params::ModelParams;
use crate::error::{NpcError, Result};
use crate::scalar::Scalar;

/// How closely the two classifier rows mirror each other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorStats {
    /// Mean over k of `|w1k + w2k|`.
    pub mean_abs_sum: f64,
    /// Population standard deviation of `|w1k + w2k|`.
    pub std_abs_sum: f64,
    pub cosine: f64,
    pub b1: f64,
    pub b2: f64,
}

pub fn weight_mirror_stats<S: Scalar>(params: &ModelParams<S>) -> Result<MirrorStats> {
    let head = params.head.as_ref().ok_or(NpcError::WrongLossKind)?;
    let w1: Vec<f64> = head.weights.row(0).iter().map(|v| v.as_f64()).collect();
    let w2: Vec<f64> = head.weights.row(1).iter().map(|v| v.as_f64()).collect();
    let sums: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| (a + b).abs()).collect();
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let dot: f64 = w1.iter().zip(&w2).map(|(a, b)| a * b).sum();
    let n1 = w1.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2 = w2.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(MirrorStats {
        mean_abs_sum: mean,
        std_abs_sum: var.sqrt(),
        cosine: dot / (n1 * n2),
        b1: head.bias.data()[0].as_f64(),
        b2: head.bias.data()[1].as_f64(),
    })
}
