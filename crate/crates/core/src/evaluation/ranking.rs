use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::metrics::{rank_among, rank_order, QueryRank, RankReport};
use crate::linalg::dot_wide;
use crate::model::{predict_batch, ModelConfig, ModelParams};
use crate::store::{CorpusIndex, EmbeddingMatrix, SentenceId};

const PREDICT_CHUNK: usize = 128;

/// A context and the id of its true next sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub context: Vec<SentenceId>,
    pub target: SentenceId,
}

/// Queries and the candidate pool they are ranked against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingTask {
    pub queries: Vec<Query>,
    pub pool: Vec<SentenceId>,
}

pub fn queries_from_corpus(corpus: &CorpusIndex) -> Vec<Query> {
    corpus
        .examples()
        .map(|(context, target)| Query {
            context: context.to_vec(),
            target,
        })
        .collect()
}

/// Eval-mode predictions for many contexts. Chunks run in parallel; each
/// chunk is an independent forward pass so the output does not depend on
/// scheduling.
pub fn predict_contexts<'a, I>(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    matrix: &EmbeddingMatrix,
    contexts: I,
) -> Result<Vec<Vec<f32>>>
where
    I: IntoIterator<Item = &'a [SentenceId]>,
{
    let contexts: Vec<&[SentenceId]> = contexts.into_iter().collect();
    for c in &contexts {
        for &id in *c {
            matrix.check_id(id)?;
        }
        if c.len() * matrix.dim() != config.input_dim {
            return Err(Error::Dimension(format!(
                "context of {} sentences x dim {} does not match input_dim {}",
                c.len(),
                matrix.dim(),
                config.input_dim
            )));
        }
    }
    let out_dim = config.output_dim;
    let chunks: Vec<Result<Vec<Vec<f32>>>> = contexts
        .par_chunks(PREDICT_CHUNK)
        .map(|chunk| {
            let mut input = Vec::with_capacity(chunk.len() * config.input_dim);
            for c in chunk {
                for &id in *c {
                    input.extend_from_slice(matrix.row(id));
                }
            }
            let out = predict_batch(params, config, &input)?;
            Ok(out.chunks_exact(out_dim).map(<[f32]>::to_vec).collect())
        })
        .collect();
    let mut all = Vec::with_capacity(contexts.len());
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

/// Rank of the true candidate and the top-1 candidate of one query.
pub fn rank_query(
    h: &[f32],
    matrix: &EmbeddingMatrix,
    pool: &[SentenceId],
    target: SentenceId,
) -> Result<(usize, SentenceId, f64)> {
    let logits: Vec<f64> = pool.iter().map(|&id| dot_wide(h, matrix.row(id))).collect();
    let rank = rank_among(&logits, pool, target)?;
    let (top_logit, top_id) = logits
        .iter()
        .copied()
        .zip(pool.iter().copied())
        .min_by(|&a, &b| rank_order(a, b))
        .expect("pool contains the target");
    Ok((rank, top_id, top_logit))
}

pub fn eval_ranking(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    matrix: &EmbeddingMatrix,
    task: &RankingTask,
    ks: &[usize],
) -> Result<RankReport> {
    if task.queries.is_empty() {
        return Err(Error::Domain("no ranking queries".into()));
    }
    for &id in &task.pool {
        matrix.check_id(id)?;
    }
    let predictions = predict_contexts(
        params,
        config,
        matrix,
        task.queries.iter().map(|q| q.context.as_slice()),
    )?;
    let rows: Vec<Result<QueryRank>> = task
        .queries
        .par_iter()
        .zip(predictions.par_iter())
        .enumerate()
        .map(|(i, (q, h))| {
            let (rank, top1_id, top1_logit) = rank_query(h, matrix, &task.pool, q.target)?;
            Ok(QueryRank {
                query: i,
                true_id: q.target,
                rank,
                top1_id,
                top1_logit,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RankReport::from_queries(rows, task.pool.len(), ks))
}

/// Fraction of queries whose true sentence outscores one distractor drawn
/// for it, ties counted against the model.
pub fn pairwise_accuracy(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    matrix: &EmbeddingMatrix,
    queries: &[Query],
    distractors: &[SentenceId],
) -> Result<f64> {
    if queries.len() != distractors.len() || queries.is_empty() {
        return Err(Error::Domain(
            "need one distractor per query and at least one query".into(),
        ));
    }
    let preds = predict_contexts(params, config, matrix, queries.iter().map(|q| q.context.as_slice()))?;
    let correct = queries
        .iter()
        .zip(&preds)
        .zip(distractors)
        .filter(|((q, h), &d)| dot_wide(h, matrix.row(q.target)) > dot_wide(h, matrix.row(d)))
        .count();
    Ok(correct as f64 / queries.len() as f64)
}
