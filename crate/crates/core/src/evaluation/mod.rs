//! Cloze accuracy, large-pool ranking and the distractor-count sweep.

pub mod cloze;
pub mod metrics;
pub mod ranking;
pub mod sweep;
pub mod topk;

pub use cloze::{cloze_decision, eval_cloze, ClozeReport};
pub use metrics::{rank_of_true, QueryRank, RankReport, DEFAULT_KS};
pub use ranking::{eval_ranking, pairwise_accuracy, predict_contexts, queries_from_corpus, Query, RankingTask};
pub use sweep::{sweep_distractors, sweep_plot_data, sweep_table, SweepCell, SweepRow};
pub use topk::{topk_scores, topk_scores_sharded};
