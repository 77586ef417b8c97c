use std::fmt::Write;

use super::experiment::AccuracyTable;
use super::metrics::{compute_eer, compute_min_dcf, DcfParams, EerResult};
use crate::error::Result;

/// Plain-text accuracy table, one block per feature type.
pub fn identification_text(title: &str, tables: &[(&str, &AccuracyTable)]) -> String {
    let mut s = format!("# {title}\n");
    for (name, t) in tables {
        let cap = t
            .max_queries_per_utterance
            .map_or("all test frames".to_string(), |c| format!("<= {c} test frames per utterance"));
        let _ = writeln!(
            s,
            "\n[{name}] repeats={} heldout_per_speaker={} ({cap})",
            t.repeats, t.heldout_per_speaker
        );
        for c in &t.cells {
            let reps: Vec<String> = c.per_repeat.iter().map(|a| format!("{a:.4}")).collect();
            let _ = writeln!(
                s,
                "  enroll={:<3} mean_accuracy={:.4}  repeats=[{}]",
                c.enroll_count,
                c.mean,
                reps.join(", ")
            );
        }
    }
    s
}

/// `feature,enroll_count,repeat,accuracy` rows; repeat `mean` holds the
/// average.
pub fn identification_csv(tables: &[(&str, &AccuracyTable)]) -> String {
    let mut s = String::from("feature,enroll_count,repeat,accuracy\n");
    for (name, t) in tables {
        for c in &t.cells {
            for (r, a) in c.per_repeat.iter().enumerate() {
                let _ = writeln!(s, "{name},{},{r},{a:.6}", c.enroll_count);
            }
            let _ = writeln!(s, "{name},{},mean,{:.6}", c.enroll_count, c.mean);
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub targets: usize,
    pub nontargets: usize,
    pub eer: EerResult,
    pub min_dcf: f64,
    pub dcf: DcfParams,
}

impl VerificationReport {
    pub fn from_scores(scores: &[f64], targets: &[bool], dcf: DcfParams) -> Result<Self> {
        let n_tar = targets.iter().filter(|t| **t).count();
        Ok(Self {
            targets: n_tar,
            nontargets: targets.len() - n_tar,
            eer: compute_eer(scores, targets)?,
            min_dcf: compute_min_dcf(scores, targets, &dcf)?,
            dcf,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "# verification (cosine scoring)\ntrials={} targets={} nontargets={}\nEER={:.4}% threshold={:.6}\nminDCF(p_target={}, c_miss={}, c_fa={})={:.4}\n",
            self.targets + self.nontargets,
            self.targets,
            self.nontargets,
            100.0 * self.eer.eer,
            self.eer.threshold,
            self.dcf.p_target,
            self.dcf.c_miss,
            self.dcf.c_fa,
            self.min_dcf
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\ntargets,{}\nnontargets,{}\neer,{:.6}\neer_threshold,{:.6}\nmin_dcf,{:.6}\np_target,{}\n",
            self.targets, self.nontargets, self.eer.eer, self.eer.threshold, self.min_dcf, self.dcf.p_target
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::AccuracyCell;

    #[test]
    fn csv_lists_every_repeat() {
        let t = AccuracyTable {
            cells: vec![AccuracyCell { enroll_count: 2, per_repeat: vec![0.5, 1.0], mean: 0.75 }],
            repeats: 2,
            heldout_per_speaker: 5,
            max_queries_per_utterance: Some(2000),
        };
        let csv = identification_csv(&[("mfcc", &t)]);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("mfcc,2,mean,0.750000"));
        assert!(identification_text("frame id", &[("mfcc", &t)]).contains("<= 2000"));
    }

    #[test]
    fn verification_text() {
        let r = VerificationReport::from_scores(&[0.9, 0.1], &[true, false], DcfParams::default()).unwrap();
        assert_eq!(r.eer.eer, 0.0);
        assert!(r.to_text().contains("EER=0.0000%"));
        assert!(r.to_csv().starts_with("metric,value\n"));
    }
}
