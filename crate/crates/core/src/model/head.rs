use super::params::ClassifierHead;
use crate::error::{NpcError, Result};
use crate::sampler::PairLabel;
use crate::scalar::Scalar;

/// `|e1 - e2|` elementwise.
pub fn l1_distance<S: Scalar>(e1: &[S], e2: &[S]) -> Result<Vec<S>> {
    if e1.len() != e2.len() {
        return Err(NpcError::shape(format!(
            "l1 distance over {} and {} entries",
            e1.len(),
            e2.len()
        )));
    }
    Ok(e1.iter().zip(e2).map(|(a, b)| (*a - *b).abs()).collect())
}

/// Logits and two-way softmax. `p1` is the genuine probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairScores<S> {
    pub g1: S,
    pub g2: S,
    pub p1: S,
    pub p2: S,
}

impl<S: Scalar> PairScores<S> {
    /// Ties go to genuine.
    pub fn predicted(&self) -> PairLabel {
        if self.p1 >= self.p2 {
            PairLabel::Genuine
        } else {
            PairLabel::Impostor
        }
    }
}

/// `g_i = sum_k w_{i,k} L_k + b_i` followed by a stable softmax.
pub fn classify_pair<S: Scalar>(l: &[S], head: &ClassifierHead<S>) -> Result<PairScores<S>> {
    let d = head.weights.dim(1);
    if l.len() != d {
        return Err(NpcError::shape(format!("distance has {} entries, head expects {d}", l.len())));
    }
    let logit = |i: usize| {
        head.weights
            .row(i)
            .iter()
            .zip(l)
            .fold(head.bias.data()[i], |acc, (w, x)| acc + *w * *x)
    };
    let (g1, g2) = (logit(0), logit(1));
    let (p1, p2) = softmax2(g1, g2);
    Ok(PairScores { g1, g2, p1, p2 })
}

pub(crate) fn softmax2<S: Scalar>(g1: S, g2: S) -> (S, S) {
    let m = g1.max(g2);
    let (a, b) = ((g1 - m).exp(), (g2 - m).exp());
    let z = a + b;
    (a / z, b / z)
}

/// `-(1 - y) ln p1 - y ln p2`.
pub fn cross_entropy_loss<S: Scalar>(p1: S, p2: S, y: PairLabel) -> S {
    match y {
        PairLabel::Genuine => -p1.ln(),
        PairLabel::Impostor => -p2.ln(),
    }
}

/// The same loss from logits, as `logsumexp(g) - g_y`.
pub fn cross_entropy_from_logits<S: Scalar>(g1: S, g2: S, y: PairLabel) -> S {
    let m = g1.max(g2);
    let lse = m + ((g1 - m).exp() + (g2 - m).exp()).ln();
    match y {
        PairLabel::Genuine => lse - g1,
        PairLabel::Impostor => lse - g2,
    }
}

fn norm<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, x| acc + *x * *x).sqrt()
}

pub fn cosine_similarity<S: Scalar>(e1: &[S], e2: &[S]) -> Result<S> {
    if e1.len() != e2.len() {
        return Err(NpcError::shape("cosine over vectors of different length"));
    }
    let (n1, n2) = (norm(e1), norm(e2));
    if n1 == S::zero() || n2 == S::zero() {
        return Err(NpcError::ZeroNormEmbedding);
    }
    let dot = e1.iter().zip(e2).fold(S::zero(), |acc, (a, b)| acc + *a * *b);
    Ok(dot / (n1 * n2))
}

/// `1 - C` for genuine pairs, `C` (or `max(0, C)` when clamped) for
/// impostors.
pub fn cosine_loss<S: Scalar>(e1: &[S], e2: &[S], y: PairLabel, clamp: bool) -> Result<S> {
    let c = cosine_similarity(e1, e2)?;
    Ok(match y {
        PairLabel::Genuine => S::one() - c,
        PairLabel::Impostor if clamp => c.max(S::zero()),
        PairLabel::Impostor => c,
    })
}

/// Decision rule for cosine-trained models.
pub fn cosine_decision<S: Scalar>(c: S) -> PairLabel {
    if c > S::c(0.5) {
        PairLabel::Genuine
    } else {
        PairLabel::Impostor
    }
}

/// Loss and its gradients with respect to both embeddings.
pub(crate) fn cosine_loss_grad<S: Scalar>(
    e1: &[S],
    e2: &[S],
    y: PairLabel,
    clamp: bool,
) -> Result<(S, S, Vec<S>, Vec<S>)> {
    let c = cosine_similarity(e1, e2)?;
    let (loss, dl_dc) = match y {
        PairLabel::Genuine => (S::one() - c, -S::one()),
        PairLabel::Impostor if clamp && c <= S::zero() => (S::zero(), S::zero()),
        PairLabel::Impostor => (c, S::one()),
    };
    let (n1, n2) = (norm(e1), norm(e2));
    // dC/de1 = e2 / (|e1||e2|) - C e1 / |e1|^2
    let grad = |a: &[S], b: &[S], na: S| -> Vec<S> {
        a.iter()
            .zip(b)
            .map(|(x, z)| dl_dc * (*z / (n1 * n2) - c * *x / (na * na)))
            .collect()
    };
    Ok((loss, c, grad(e1, e2, n1), grad(e2, e1, n2)))
}
