//! Dot-product scoring of a predicted embedding against a candidate set and
//! the softmax normalization over that set.

use crate::error::{Error, Result};
use crate::linalg::{dot_wide, Real};
use crate::store::{EmbeddingMatrix, SentenceId};

/// Logits, log-partition and log-probabilities of one context against one
/// candidate set. Values are the `f64` accumulations of `f32` products.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResult {
    pub ids: Vec<SentenceId>,
    pub logits: Vec<f64>,
    pub log_partition: f64,
    pub log_probs: Vec<f64>,
}

/// Log-softmax of `logits`: returns `(log_partition, log_probs)`.
///
/// The log-probability of the arg-max entry is computed as
/// `-ln_1p(sum of the other shifted exponentials)`, which keeps it accurate
/// to full relative precision when it is close to zero.
pub fn log_softmax<T: Real>(logits: &[T]) -> (T, Vec<T>) {
    let (arg, max) = logits
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let rest: T = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    let log_sum = rest.ln_1p();
    let log_probs = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == arg { -log_sum } else { (v - max) - log_sum })
        .collect();
    (max + log_sum, log_probs)
}

pub fn score_candidates(
    h: &[f32],
    pool: &EmbeddingMatrix,
    ids: &[SentenceId],
) -> Result<ScoreResult> {
    if ids.is_empty() {
        return Err(Error::Domain("cannot score an empty candidate set".into()));
    }
    if h.len() != pool.dim() {
        return Err(Error::Dimension(format!(
            "predicted embedding has {} entries, pool rows have {}",
            h.len(),
            pool.dim()
        )));
    }
    for &id in ids {
        pool.check_id(id)?;
    }
    let logits: Vec<f64> = ids.iter().map(|&id| dot_wide(h, pool.row(id))).collect();
    let (log_partition, log_probs) = log_softmax(&logits);
    Ok(ScoreResult {
        ids: ids.to_vec(),
        logits,
        log_partition,
        log_probs,
    })
}
