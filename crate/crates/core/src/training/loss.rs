//! Sampled-softmax objective and the context-sentence auxiliary loss.
//!
//! For one example with prediction `h` the objective is
//! `-log p(true | {true} + distractors) - weight * log p(true | {true} + context)`,
//! averaged over the batch. Candidate embeddings are constants.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Real};
use crate::model::{backward_batch, forward_batch, DropoutMasks, ModelConfig, ModelParams};
use crate::scoring::log_softmax;
use crate::store::{EmbeddingMatrix, SentenceId};

/// Read access to embedding rows in the graph's scalar type.
pub trait RowSource<T> {
    fn dim(&self) -> usize;
    fn row(&self, id: SentenceId) -> &[T];
}

impl RowSource<f32> for EmbeddingMatrix {
    fn dim(&self) -> usize {
        EmbeddingMatrix::dim(self)
    }

    fn row(&self, id: SentenceId) -> &[f32] {
        EmbeddingMatrix::row(self, id)
    }
}

/// Embedding rows converted to another scalar type.
#[derive(Debug, Clone)]
pub struct CastRows<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> CastRows<T> {
    pub fn new(matrix: &EmbeddingMatrix) -> Self {
        Self {
            dim: matrix.dim(),
            data: matrix.as_slice().iter().map(|&v| T::from(v).unwrap()).collect(),
        }
    }
}

impl<T> RowSource<T> for CastRows<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, id: SentenceId) -> &[T] {
        let i = id as usize * self.dim;
        &self.data[i..i + self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub context: Vec<SentenceId>,
    pub target: SentenceId,
    /// Excludes `target`.
    pub distractors: Vec<SentenceId>,
}

/// `-log p(candidates[0])` under a softmax over `e_i . h`, and optionally the
/// gradient w.r.t. `h` scaled by `scale`, added into `dh`.
fn softmax_nll<T: Real>(h: &[T], candidates: &[&[T]], grad: Option<(T, &mut [T])>) -> T {
    let logits: Vec<T> = candidates.iter().map(|e| dot(e, h)).collect();
    let (_, log_probs) = log_softmax(&logits);
    if let Some((scale, dh)) = grad {
        for (i, (e, lp)) in candidates.iter().zip(&log_probs).enumerate() {
            let target = if i == 0 { T::one() } else { T::zero() };
            let coef = lp.exp() - target;
            if coef != T::zero() {
                axpy(scale * coef, e, dh);
            }
        }
    }
    -log_probs[0]
}

/// Negative log-likelihood of the true embedding against itself plus the
/// distractors.
pub fn nll_loss<T: Real>(h: &[T], true_emb: &[T], distractor_embs: &[&[T]]) -> T {
    let mut cands = Vec::with_capacity(distractor_embs.len() + 1);
    cands.push(true_emb);
    cands.extend_from_slice(distractor_embs);
    softmax_nll(h, &cands, None)
}

/// Gradient of [`nll_loss`] with respect to `h`.
pub fn nll_loss_grad<T: Real>(h: &[T], true_emb: &[T], distractor_embs: &[&[T]]) -> (T, Vec<T>) {
    let mut cands = Vec::with_capacity(distractor_embs.len() + 1);
    cands.push(true_emb);
    cands.extend_from_slice(distractor_embs);
    let mut dh = vec![T::zero(); h.len()];
    let loss = softmax_nll(h, &cands, Some((T::one(), &mut dh)));
    (loss, dh)
}

/// Same objective with the context sentences as the only distractors
/// (candidate set of size `t + 1`).
pub fn cs_loss<T: Real>(h: &[T], true_emb: &[T], context_embs: &[&[T]]) -> T {
    nll_loss(h, true_emb, context_embs)
}

/// Mean over the batch of `nll + cs_weight * cs`, with the gradient of that
/// mean accumulated into `grads` when given.
pub fn batch_objective<T: Real, S: RowSource<T>>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    rows: &S,
    examples: &[TrainExample],
    cs_weight: T,
    masks: &DropoutMasks<T>,
    grads: Option<&mut ModelParams<T>>,
) -> Result<T> {
    if examples.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let dim = rows.dim();
    if config.output_dim != dim {
        return Err(Error::Dimension(format!(
            "model output_dim {} differs from embedding dim {dim}",
            config.output_dim
        )));
    }
    let mut inputs = Vec::with_capacity(examples.len() * config.input_dim);
    for ex in examples {
        if ex.context.len() * dim != config.input_dim {
            return Err(Error::Dimension(format!(
                "context of {} sentences does not fill input_dim {}",
                ex.context.len(),
                config.input_dim
            )));
        }
        for &id in &ex.context {
            inputs.extend_from_slice(rows.row(id));
        }
    }
    let cache = forward_batch(params, config, &inputs, masks)?;
    let batch = T::from_usize(examples.len()).unwrap();
    let scale = T::one() / batch;
    let want_grad = grads.is_some();
    let mut d_out = if want_grad {
        vec![T::zero(); examples.len() * dim]
    } else {
        Vec::new()
    };
    let mut total = T::zero();
    for (b, ex) in examples.iter().enumerate() {
        let h = cache.row(b, dim);
        let mut cands: Vec<&[T]> = Vec::with_capacity(ex.distractors.len() + 1);
        cands.push(rows.row(ex.target));
        cands.extend(ex.distractors.iter().map(|&id| rows.row(id)));
        let dh = want_grad.then(|| &mut d_out[b * dim..(b + 1) * dim]);
        let mut loss = softmax_nll(h, &cands, dh.map(|d| (scale, d)));
        if cs_weight != T::zero() {
            cands.truncate(1);
            cands.extend(ex.context.iter().map(|&id| rows.row(id)));
            let dh = want_grad.then(|| &mut d_out[b * dim..(b + 1) * dim]);
            loss = loss + cs_weight * softmax_nll(h, &cands, dh.map(|d| (scale * cs_weight, d)));
        }
        total = total + loss;
    }
    if let Some(grads) = grads {
        backward_batch(params, config, &cache, masks, &d_out, grads);
    }
    Ok(total * scale)
}

/// Objective of a single example.
pub fn total_loss<T: Real, S: RowSource<T>>(
    example: &TrainExample,
    params: &ModelParams<T>,
    config: &ModelConfig,
    rows: &S,
    cs_weight: T,
) -> Result<T> {
    batch_objective(
        params,
        config,
        rows,
        std::slice::from_ref(example),
        cs_weight,
        &DropoutMasks::none(),
        None,
    )
}

/// Gradients of the batch objective for every parameter tensor, with the
/// dropout masks held fixed.
pub fn backward<T: Real, S: RowSource<T>>(
    examples: &[TrainExample],
    params: &ModelParams<T>,
    config: &ModelConfig,
    rows: &S,
    cs_weight: T,
    masks: &DropoutMasks<T>,
) -> Result<(T, ModelParams<T>)> {
    let mut grads = ModelParams::zeros(config);
    let loss = batch_objective(params, config, rows, examples, cs_weight, masks, Some(&mut grads))?;
    Ok((loss, grads))
}
