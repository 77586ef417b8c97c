use std::collections::HashMap;
use std::fmt;

use crate::error::{NpcError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialSpec {
    pub left: String,
    pub right: String,
    pub target: bool,
}

impl fmt::Display for TrialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.target { "target" } else { "nontarget" };
        write!(f, "{}\t{}\t{kind}", self.left, self.right)
    }
}

/// Parses `uttA<TAB>uttB<TAB>target|nontarget` lines; blank lines and `#`
/// comments are skipped.
pub fn parse_trials(text: &str, origin: &str) -> Result<Vec<TrialSpec>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| NpcError::Parse {
            path: origin.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let target = match fields[2] {
            "target" => true,
            "nontarget" => false,
            other => return Err(err(format!("trial kind `{other}` is neither target nor nontarget"))),
        };
        out.push(TrialSpec {
            left: fields[0].to_string(),
            right: fields[1].to_string(),
            target,
        });
    }
    Ok(out)
}

pub fn format_trials(trials: &[TrialSpec]) -> String {
    trials.iter().map(|t| format!("{t}\n")).collect()
}

/// Cosine similarity in double precision.
pub fn cosine_score<S: Scalar>(a: &[S], b: &[S]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(NpcError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(NpcError::ZeroNormVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Cosine score per trial against utterance-level vectors.
pub fn score_trials<S: Scalar>(
    trials: &[TrialSpec],
    vectors: &HashMap<String, Vec<S>>,
) -> Result<Vec<f64>> {
    let get = |id: &String| vectors.get(id).ok_or_else(|| NpcError::MissingFeatures(id.clone()));
    trials
        .iter()
        .map(|t| cosine_score(get(&t.left)?, get(&t.right)?))
        .collect()
}
