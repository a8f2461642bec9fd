use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::store::SentenceId;

/// Draws `n` distinct ids uniformly without replacement from `pool \ exclude`.
///
/// Small draws use rejection sampling over pool indices; draws that would
/// cover more than half of the eligible ids fall back to a partial shuffle of
/// the filtered pool.
pub fn sample_distractors<R: Rng + ?Sized>(
    rng: &mut R,
    pool: &[SentenceId],
    n: usize,
    exclude: &HashSet<SentenceId>,
) -> Result<Vec<SentenceId>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let lower_bound = pool.len().saturating_sub(exclude.len());
    if n * 2 <= lower_bound {
        let mut chosen = HashSet::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let id = pool[rng.gen_range(0..pool.len())];
            if !exclude.contains(&id) && chosen.insert(id) {
                out.push(id);
            }
        }
        return Ok(out);
    }
    let mut seen = HashSet::with_capacity(pool.len());
    let mut eligible: Vec<SentenceId> = pool
        .iter()
        .copied()
        .filter(|id| !exclude.contains(id) && seen.insert(*id))
        .collect();
    if eligible.len() < n {
        return Err(Error::Domain(format!(
            "cannot draw {n} distractors from {} eligible candidates",
            eligible.len()
        )));
    }
    let (picked, _) = eligible.partial_shuffle(rng, n);
    Ok(picked.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_draw_is_empty() {
        let mut r = rng::stream(0, "s");
        assert!(sample_distractors(&mut r, &[1, 2, 3], 0, &HashSet::new())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn forced_by_exclusion() {
        let mut r = rng::stream(0, "s");
        let ex: HashSet<_> = [3].into_iter().collect();
        let mut got = sample_distractors(&mut r, &[1, 2, 3, 4, 5], 4, &ex).unwrap();
        got.sort();
        assert_eq!(got, vec![1, 2, 4, 5]);
    }

    #[test]
    fn insufficient_pool() {
        let mut r = rng::stream(0, "s");
        let ex: HashSet<_> = [3].into_iter().collect();
        assert!(matches!(
            sample_distractors(&mut r, &[1, 2, 3], 3, &ex),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn distinct_and_excluded_on_large_pools() {
        let pool: Vec<u32> = (0..10_000).collect();
        let ex: HashSet<_> = (0..50).collect();
        let mut r = rng::stream(4, "s");
        let got = sample_distractors(&mut r, &pool, 1000, &ex).unwrap();
        let set: HashSet<_> = got.iter().collect();
        assert_eq!(set.len(), 1000);
        assert!(got.iter().all(|id| *id >= 50));
    }

    #[test]
    fn deterministic_given_rng_state() {
        let pool: Vec<u32> = (0..500).collect();
        let a = sample_distractors(&mut rng::stream(9, "s"), &pool, 20, &HashSet::new()).unwrap();
        let b = sample_distractors(&mut rng::stream(9, "s"), &pool, 20, &HashSet::new()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_draws_are_uniform() {
        // 10^4 draws over 10 ids: each count ~ Binomial(10^4, 0.1), sd = 30
        let pool: Vec<u32> = (0..10).collect();
        let mut r = rng::stream(1, "uniform");
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            counts[sample_distractors(&mut r, &pool, 1, &HashSet::new()).unwrap()[0] as usize] += 1;
        }
        let sd = (10_000.0f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 5.0 * sd, "{counts:?}");
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
        // 9 degrees of freedom; p < 1e-6 beyond ~ 45
        assert!(chi2 < 45.0, "chi2 = {chi2}");
    }
}
