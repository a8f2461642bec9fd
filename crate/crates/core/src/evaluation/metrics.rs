use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scoring::ScoreResult;
use crate::store::SentenceId;

/// Total order on `(logit, id)` candidates: higher logit first, ties broken
/// toward the lower id. `Less` means `a` ranks ahead of `b`.
#[inline]
pub fn rank_order(a: (f64, SentenceId), b: (f64, SentenceId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// 1-based rank of `true_id` among `(logit, id)` pairs.
pub fn rank_among(logits: &[f64], ids: &[SentenceId], true_id: SentenceId) -> Result<usize> {
    let pos = ids
        .iter()
        .position(|&id| id == true_id)
        .ok_or_else(|| Error::Domain(format!("true id {true_id} is not a candidate")))?;
    let t = logits[pos];
    let ahead = logits
        .iter()
        .zip(ids)
        .filter(|&(&l, &id)| l > t || (l == t && id < true_id))
        .count();
    Ok(ahead + 1)
}

pub fn rank_of_true(scores: &ScoreResult, true_id: SentenceId) -> Result<usize> {
    rank_among(&scores.logits, &scores.ids, true_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRank {
    pub query: usize,
    pub true_id: SentenceId,
    pub rank: usize,
    pub top1_id: SentenceId,
    pub top1_logit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub pool_size: usize,
    pub queries: Vec<QueryRank>,
    pub precision_at: Vec<(usize, f64)>,
    pub mrr: f64,
    pub median_rank: f64,
    pub mean_rank: f64,
}

pub const DEFAULT_KS: [usize; 2] = [1, 10];

impl RankReport {
    pub fn from_queries(queries: Vec<QueryRank>, pool_size: usize, ks: &[usize]) -> Self {
        let n = queries.len() as f64;
        let ranks: Vec<usize> = queries.iter().map(|q| q.rank).collect();
        let precision_at = ks
            .iter()
            .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
            .collect();
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
        let mean_rank = ranks.iter().sum::<usize>() as f64 / n;
        Self {
            pool_size,
            precision_at,
            mrr,
            median_rank: median(&ranks),
            mean_rank,
            queries,
        }
    }

    pub fn precision(&self, k: usize) -> Option<f64> {
        self.precision_at.iter().find(|(kk, _)| *kk == k).map(|p| p.1)
    }

    /// Tab-separated per-query lines followed by `#`-prefixed summary lines.
    pub fn to_text(&self) -> String {
        let mut out = String::from("query\ttrue_id\trank\ttop1_id\ttop1_logit\n");
        for q in &self.queries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                q.query, q.true_id, q.rank, q.top1_id, q.top1_logit
            )
            .unwrap();
        }
        writeln!(out, "#summary\tqueries\t{}", self.queries.len()).unwrap();
        writeln!(out, "#summary\tpool_size\t{}", self.pool_size).unwrap();
        for (k, p) in &self.precision_at {
            writeln!(out, "#summary\tp_at_{k}\t{p}").unwrap();
        }
        writeln!(out, "#summary\tmrr\t{}", self.mrr).unwrap();
        writeln!(out, "#summary\tmedian_rank\t{}", self.median_rank).unwrap();
        writeln!(out, "#summary\tmean_rank\t{}", self.mean_rank).unwrap();
        out
    }
}

/// Median of integer ranks; mean of the two middle values for even counts.
pub fn median(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        return f64::NAN;
    }
    let mut s = ranks.to_vec();
    s.sort_unstable();
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m] as f64
    } else {
        (s[m - 1] + s[m]) as f64 / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::log_softmax;

    fn scores(ids: Vec<u32>, logits: Vec<f64>) -> ScoreResult {
        let (log_partition, log_probs) = log_softmax(&logits);
        ScoreResult {
            ids,
            logits,
            log_partition,
            log_probs,
        }
    }

    #[test]
    fn maximum_has_rank_one() {
        let s = scores(vec![0, 1, 2], vec![3.0, 2.0, 1.0]);
        assert_eq!(rank_of_true(&s, 0).unwrap(), 1);
    }

    #[test]
    fn ties_break_toward_lower_id() {
        let s = scores(vec![0, 1, 2], vec![3.0, 2.0, 2.0]);
        assert_eq!(rank_of_true(&s, 2).unwrap(), 3);
        assert_eq!(rank_of_true(&s, 1).unwrap(), 2);
    }

    #[test]
    fn absent_true_id() {
        let s = scores(vec![0, 1], vec![1.0, 2.0]);
        assert!(matches!(rank_of_true(&s, 5), Err(Error::Domain(_))));
    }

    fn q(rank: usize) -> QueryRank {
        QueryRank {
            query: 0,
            true_id: 0,
            rank,
            top1_id: 0,
            top1_logit: 0.0,
        }
    }

    #[test]
    fn mrr_by_definition() {
        let r = RankReport::from_queries(vec![q(1), q(4)], 10, &DEFAULT_KS);
        assert!((r.mrr - 0.625).abs() < 1e-15);
        assert_eq!(r.precision(10), Some(1.0));
        assert_eq!(r.precision(1), Some(0.5));
        assert_eq!(r.median_rank, 2.5);
    }

    #[test]
    fn singleton_pools() {
        let r = RankReport::from_queries(vec![q(1), q(1), q(1)], 1, &DEFAULT_KS);
        assert_eq!((r.precision(10), r.mrr, r.median_rank), (Some(1.0), 1.0, 1.0));
    }

    #[test]
    fn report_text_has_footer() {
        let r = RankReport::from_queries(vec![q(2)], 5, &DEFAULT_KS);
        let t = r.to_text();
        assert!(t.starts_with("query\ttrue_id\trank"));
        assert!(t.contains("#summary\tmrr\t0.5\n"));
    }
}
