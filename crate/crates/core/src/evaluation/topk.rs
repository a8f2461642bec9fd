//! Exact top-k maximum inner product search over a candidate pool.
//!
//! The pool is walked in fixed-size blocks; each block's logits are computed
//! into a scratch buffer and then offered to a bounded heap whose root is the
//! worst candidate kept so far. Sharding splits the pool into contiguous
//! ranges, selects per shard and merges; the `(logit desc, id asc)` order is
//! total, so every sharding yields the same result.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::metrics::rank_order;
use crate::linalg::dot_wide;
use crate::store::{EmbeddingMatrix, SentenceId};

const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    logit: f64,
    id: SentenceId,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Worse candidates compare greater, so the heap root is the one to evict.
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order((self.logit, self.id), (other.logit, other.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn select(h: &[f32], matrix: &EmbeddingMatrix, ids: &[SentenceId], k: usize) -> Vec<Entry> {
    let mut heap = BinaryHeap::with_capacity(k + 1);
    let mut scratch = [0f64; BLOCK];
    for block in ids.chunks(BLOCK) {
        for (s, &id) in scratch.iter_mut().zip(block) {
            *s = dot_wide(h, matrix.row(id));
        }
        for (&logit, &id) in scratch.iter().zip(block) {
            let e = Entry { logit, id };
            if heap.len() < k {
                heap.push(e);
            } else if e < *heap.peek().unwrap() {
                *heap.peek_mut().unwrap() = e;
            }
        }
    }
    heap.into_vec()
}

fn finish(mut entries: Vec<Entry>, k: usize) -> Vec<(SentenceId, f64)> {
    entries.sort_unstable();
    entries.truncate(k);
    entries.into_iter().map(|e| (e.id, e.logit)).collect()
}

fn check(h: &[f32], matrix: &EmbeddingMatrix, ids: &[SentenceId], k: usize) -> Result<()> {
    if k == 0 || k > ids.len() {
        return Err(Error::Domain(format!(
            "k = {k} outside 1..={} candidates",
            ids.len()
        )));
    }
    if h.len() != matrix.dim() {
        return Err(Error::Dimension(format!(
            "query has {} entries, pool rows have {}",
            h.len(),
            matrix.dim()
        )));
    }
    ids.iter().try_for_each(|&id| matrix.check_id(id))
}

/// The `k` best `(id, logit)` pairs among `ids`, best first.
pub fn topk_scores(
    h: &[f32],
    matrix: &EmbeddingMatrix,
    ids: &[SentenceId],
    k: usize,
) -> Result<Vec<(SentenceId, f64)>> {
    check(h, matrix, ids, k)?;
    Ok(finish(select(h, matrix, ids, k), k))
}

/// [`topk_scores`] with the pool split into `shards` ranges scored in
/// parallel.
pub fn topk_scores_sharded(
    h: &[f32],
    matrix: &EmbeddingMatrix,
    ids: &[SentenceId],
    k: usize,
    shards: usize,
) -> Result<Vec<(SentenceId, f64)>> {
    check(h, matrix, ids, k)?;
    let shard_len = ids.len().div_ceil(shards.max(1)).max(1);
    let merged: Vec<Entry> = ids
        .par_chunks(shard_len)
        .map(|chunk| select(h, matrix, chunk, k.min(chunk.len())))
        .flatten_iter()
        .collect();
    Ok(finish(merged, k))
}
