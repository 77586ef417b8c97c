use rayon::prelude::*;

use crate::error::{NpcError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Row vectors with a speaker label and an utterance (group) id each.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVectorSet<S> {
    pub vectors: Tensor<S>,
    pub labels: Vec<String>,
    pub groups: Vec<String>,
}

impl<S: Scalar> LabeledVectorSet<S> {
    pub fn new(vectors: Tensor<S>, labels: Vec<String>, groups: Vec<String>) -> Result<Self> {
        if vectors.rank() != 2 || vectors.dim(0) != labels.len() || labels.len() != groups.len() {
            return Err(NpcError::shape(format!(
                "{:?} vectors with {} labels and {} groups",
                vectors.shape(),
                labels.len(),
                groups.len()
            )));
        }
        Ok(Self {
            vectors,
            labels,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim(1)
    }
}

fn squared_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| {
        let d = *x - *y;
        acc + d * d
    })
}

/// Index of the Euclidean nearest enrolled vector; the lowest index wins
/// ties.
pub fn nearest_index<S: Scalar>(enrolled: &LabeledVectorSet<S>, query: &[S]) -> Result<usize> {
    if enrolled.is_empty() {
        return Err(NpcError::EmptyEnrollment);
    }
    if query.len() != enrolled.dim() {
        return Err(NpcError::DimensionMismatch {
            expected: enrolled.dim(),
            got: query.len(),
        });
    }
    let mut best = (0, squared_distance(enrolled.vectors.row(0), query));
    for i in 1..enrolled.len() {
        let d = squared_distance(enrolled.vectors.row(i), query);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

pub fn knn1_classify<'a, S: Scalar>(enrolled: &'a LabeledVectorSet<S>, query: &[S]) -> Result<&'a str> {
    Ok(&enrolled.labels[nearest_index(enrolled, query)?])
}

/// `knn1_classify` over every row of `queries`, in parallel.
pub fn knn1_classify_rows<'a, S: Scalar>(
    enrolled: &'a LabeledVectorSet<S>,
    queries: &Tensor<S>,
) -> Result<Vec<&'a str>> {
    let n = if queries.rank() == 2 { queries.dim(0) } else { 0 };
    (0..n)
        .into_par_iter()
        .map(|i| knn1_classify(enrolled, queries.row(i)))
        .collect()
}
