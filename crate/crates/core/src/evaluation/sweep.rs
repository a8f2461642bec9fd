//! Distractor-count sweep: one model per training-distractor count, each
//! ranked on the same pool.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluation::metrics::DEFAULT_KS;
use crate::evaluation::ranking::{eval_ranking, RankingTask};
use crate::model::ModelConfig;
use crate::store::{CorpusIndex, EmbeddingMatrix};
use crate::training::config::TrainConfig;
use crate::training::trainer::{train, Validation};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub num_distractors: usize,
    pub median_rank: f64,
    pub mean_rank: f64,
    pub p_at_10: f64,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub num_distractors: usize,
    pub outcome: std::result::Result<SweepRow, String>,
}

/// Trains and evaluates every grid value with the template's seed and step
/// budget. A failing cell is recorded and the sweep continues.
pub fn sweep_distractors(
    matrix: &EmbeddingMatrix,
    corpus: &CorpusIndex,
    model: &ModelConfig,
    template: &TrainConfig,
    grid: &[usize],
    task: &RankingTask,
) -> Result<Vec<SweepCell>> {
    if grid.is_empty() {
        return Err(Error::Domain("empty distractor grid".into()));
    }
    let cells = grid
        .iter()
        .map(|&n| {
            let cfg = TrainConfig {
                num_distractors: n,
                ..template.clone()
            };
            let outcome = train(matrix, corpus, model, &cfg, &Validation::None)
                .and_then(|out| eval_ranking(&out.params, model, matrix, task, &DEFAULT_KS))
                .map(|r| SweepRow {
                    num_distractors: n,
                    median_rank: r.median_rank,
                    mean_rank: r.mean_rank,
                    p_at_10: r.precision(10).unwrap_or(0.0),
                    mrr: r.mrr,
                })
                .map_err(|e| e.to_string());
            SweepCell {
                num_distractors: n,
                outcome,
            }
        })
        .collect();
    Ok(cells)
}

/// `N median_rank mean_rank p_at_10 mrr`, tab-separated with a header line.
/// Failed cells appear as `#`-comment lines.
pub fn sweep_table(cells: &[SweepCell]) -> String {
    let mut out = String::from("N\tmedian_rank\tmean_rank\tp_at_10\tmrr\n");
    for c in cells {
        match &c.outcome {
            Ok(r) => writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.num_distractors, r.median_rank, r.mean_rank, r.p_at_10, r.mrr
            )
            .unwrap(),
            Err(e) => writeln!(out, "# {} failed: {e}", c.num_distractors).unwrap(),
        }
    }
    out
}

/// Whitespace-separated columns for plotting rank against distractor count
/// on a log axis.
pub fn sweep_plot_data(cells: &[SweepCell]) -> String {
    let mut out = String::from("# N median_rank mean_rank\n");
    for r in cells.iter().filter_map(|c| c.outcome.as_ref().ok()) {
        writeln!(out, "{} {} {}", r.num_distractors, r.median_rank, r.mean_rank).unwrap();
    }
    out
}
