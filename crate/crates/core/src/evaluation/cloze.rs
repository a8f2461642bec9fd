use crate::error::Result;
use crate::evaluation::ranking::predict_contexts;
use crate::linalg::dot_wide;
use crate::model::{ModelConfig, ModelParams};
use crate::store::{ClozeEvalSet, EmbeddingMatrix, Ending};

#[derive(Debug, Clone, PartialEq)]
pub struct ClozeReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Items whose two endings scored equal (decided as `a`).
    pub ties: usize,
}

/// The ending with the larger logit `e . h`; exact ties choose `a`.
pub fn cloze_decision(h: &[f32], ending_a: &[f32], ending_b: &[f32]) -> (Ending, bool) {
    let a = dot_wide(h, ending_a);
    let b = dot_wide(h, ending_b);
    if a >= b {
        (Ending::A, a == b)
    } else {
        (Ending::B, false)
    }
}

pub fn eval_cloze(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    matrix: &EmbeddingMatrix,
    set: &ClozeEvalSet,
) -> Result<ClozeReport> {
    set.validate_against(matrix)?;
    let preds = predict_contexts(
        params,
        config,
        matrix,
        set.items.iter().map(|it| it.context.as_slice()),
    )?;
    let mut correct = 0;
    let mut ties = 0;
    for (item, h) in set.items.iter().zip(&preds) {
        let (pick, tie) = cloze_decision(h, matrix.row(item.ending_a), matrix.row(item.ending_b));
        ties += usize::from(tie);
        correct += usize::from(pick == item.label);
    }
    let total = set.items.len();
    Ok(ClozeReport {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        correct,
        total,
        ties,
    })
}
