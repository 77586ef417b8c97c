//! Detection error trade-off summaries over scored trials.
//!
//! Thresholds are swept over `min - 1`, every midpoint between distinct
//! sorted scores, and `max + 1`. A trial is accepted when its score is at
//! or above the threshold, so `FRR = P(target < thr)` and
//! `FAR = P(nontarget >= thr)`.

use crate::error::{NpcError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcfParams {
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            p_target: 0.01,
            c_miss: 1.0,
            c_fa: 1.0,
        }
    }
}

impl DcfParams {
    /// Cost of the better trivial system, used for normalization.
    pub fn default_cost(&self) -> f64 {
        (self.c_miss * self.p_target).min(self.c_fa * (1.0 - self.p_target))
    }

    pub fn normalized_cost(&self, frr: f64, far: f64) -> f64 {
        (self.c_miss * self.p_target * frr + self.c_fa * (1.0 - self.p_target) * far)
            / self.default_cost()
    }
}

/// `(threshold, FRR, FAR)` at every sweep point, thresholds ascending.
pub fn error_rate_curve(scores: &[f64], targets: &[bool]) -> Result<Vec<(f64, f64, f64)>> {
    if scores.len() != targets.len() || scores.iter().any(|s| !s.is_finite()) {
        return Err(NpcError::DegenerateTrials);
    }
    let n_tar = targets.iter().filter(|t| **t).count();
    let n_non = targets.len() - n_tar;
    if n_tar == 0 || n_non == 0 {
        return Err(NpcError::DegenerateTrials);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (nt, nn) = (n_tar as f64, n_non as f64);
    let lo = scores[order[0]] - 1.0;
    let mut curve = vec![(lo, 0.0, 1.0)];
    // below the running threshold: targets rejected, nontargets rejected
    let (mut tar_below, mut non_below) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if targets[order[i]] {
                tar_below += 1;
            } else {
                non_below += 1;
            }
            i += 1;
        }
        let thr = if i < order.len() {
            0.5 * (s + scores[order[i]])
        } else {
            s + 1.0
        };
        curve.push((thr, tar_below as f64 / nt, (n_non - non_below) as f64 / nn));
    }
    Ok(curve)
}

/// Equal error rate, linearly interpolated where `FAR - FRR` changes sign.
pub fn compute_eer(scores: &[f64], targets: &[bool]) -> Result<EerResult> {
    let curve = error_rate_curve(scores, targets)?;
    Ok(eer_from_curve(&curve))
}

pub(crate) fn eer_from_curve(curve: &[(f64, f64, f64)]) -> EerResult {
    for w in curve.windows(2) {
        let (t0, frr0, far0) = w[0];
        let (t1, frr1, far1) = w[1];
        let (d0, d1) = (far0 - frr0, far1 - frr1);
        if d0 == 0.0 {
            return EerResult { eer: frr0, threshold: t0 };
        }
        if d0 > 0.0 && d1 <= 0.0 {
            let a = d0 / (d0 - d1);
            return EerResult {
                eer: frr0 + a * (frr1 - frr0),
                threshold: t0 + a * (t1 - t0),
            };
        }
    }
    let (t, frr, _) = *curve.last().expect("curve is never empty");
    EerResult { eer: frr, threshold: t }
}

/// Minimum normalized detection cost over the sweep.
pub fn compute_min_dcf(scores: &[f64], targets: &[bool], params: &DcfParams) -> Result<f64> {
    let curve = error_rate_curve(scores, targets)?;
    Ok(curve
        .iter()
        .map(|&(_, frr, far)| params.normalized_cost(frr, far))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores() {
        let s = [0.9, 0.8, 0.1, 0.2];
        let t = [true, true, false, false];
        let e = compute_eer(&s, &t).unwrap();
        assert_eq!(e.eer, 0.0);
        assert!(e.threshold > 0.2 && e.threshold < 0.8);
        assert_eq!(compute_min_dcf(&s, &t, &DcfParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn identical_distributions() {
        let s = [0.1, 0.5, 0.9, 0.1, 0.5, 0.9];
        let t = [true, true, true, false, false, false];
        assert!((compute_eer(&s, &t).unwrap().eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn endpoints() {
        let s = [0.3, 0.7, 0.5];
        let t = [true, false, true];
        let c = error_rate_curve(&s, &t).unwrap();
        let p = DcfParams::default();
        assert_eq!((c[0].1, c[0].2), (0.0, 1.0));
        assert!((p.normalized_cost(0.0, 1.0) - 99.0).abs() < 1e-9);
        assert_eq!(*c.last().map(|(_, frr, far)| (frr, far)).as_ref().unwrap(), (&1.0, &0.0));
    }

    #[test]
    fn degenerate() {
        assert!(matches!(compute_eer(&[0.1], &[true]), Err(NpcError::DegenerateTrials)));
        assert!(matches!(
            compute_min_dcf(&[0.1, f64::NAN], &[true, false], &DcfParams::default()),
            Err(NpcError::DegenerateTrials)
        ));
    }
}
