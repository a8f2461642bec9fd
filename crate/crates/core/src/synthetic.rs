//! Synthetic corpora with a known next-sentence rule.
//!
//! Context sentences are standard normal vectors. The sentence at position
//! `context_len` is a fixed random linear map of the concatenated context
//! plus isotropic Gaussian noise whose expected norm is `noise_ratio` times
//! the norm of the mapped signal. Any later positions are standard normal.

use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::store::{CorpusIndex, EmbeddingMatrix, SentenceId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub stories: usize,
    pub dim: usize,
    pub sentences_per_story: usize,
    pub context_len: usize,
    pub noise_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            stories: 5_000,
            dim: 64,
            sentences_per_story: 5,
            context_len: 4,
            noise_ratio: 0.1,
            seed: 0,
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<(EmbeddingMatrix, CorpusIndex)> {
    let (d, t, k) = (spec.dim, spec.context_len, spec.sentences_per_story);
    if d == 0 || t == 0 || t >= k {
        return Err(Error::Config(
            "synthetic corpus needs dim > 0 and 0 < context_len < sentences_per_story".into(),
        ));
    }
    if spec.noise_ratio.is_nan() || spec.noise_ratio < 0.0 {
        return Err(Error::Config("noise_ratio must be non-negative".into()));
    }
    let mut map_rng = rng::stream(spec.seed, "synthetic-map");
    let mut rng = rng::stream(spec.seed, "synthetic-rows");
    let in_dim = t * d;
    let w = Normal::new(0.0, (1.0 / in_dim as f64).sqrt()).unwrap();
    let map: Vec<f64> = (0..d * in_dim).map(|_| w.sample(&mut map_rng)).collect();

    let mut data = Vec::with_capacity(spec.stories * k * d);
    let mut stories = Vec::with_capacity(spec.stories);
    let mut context = vec![0f64; in_dim];
    for s in 0..spec.stories {
        for c in context.iter_mut() {
            *c = StandardNormal.sample(&mut rng);
        }
        data.extend(context.iter().map(|&v| v as f32));
        let signal: Vec<f64> = map
            .chunks_exact(in_dim)
            .map(|row| row.iter().zip(&context).map(|(a, b)| a * b).sum())
            .collect();
        let norm = signal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sigma = spec.noise_ratio * norm / (d as f64).sqrt();
        for v in signal {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push((v + sigma * z) as f32);
        }
        for _ in (t + 1) * d..k * d {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(z as f32);
        }
        let base = (s * k) as SentenceId;
        stories.push((0..k as SentenceId).map(|p| base + p).collect());
    }
    let matrix = EmbeddingMatrix::new(d, data)?;
    let index = CorpusIndex::new(k, t, stories)?;
    Ok((matrix, index))
}

/// Splits off the last `held_out` stories.
pub fn split(corpus: &CorpusIndex, held_out: usize) -> Result<(CorpusIndex, CorpusIndex)> {
    if held_out > corpus.stories.len() {
        return Err(Error::Domain(format!(
            "cannot hold out {held_out} of {} stories",
            corpus.stories.len()
        )));
    }
    let cut = corpus.stories.len() - held_out;
    let make = |stories: &[Vec<SentenceId>]| {
        CorpusIndex::new(corpus.sentences_per_story, corpus.context_len, stories.to_vec())
    };
    Ok((make(&corpus.stories[..cut])?, make(&corpus.stories[cut..])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let spec = SyntheticSpec {
            stories: 20,
            dim: 8,
            ..SyntheticSpec::default()
        };
        let (m, idx) = generate(&spec).unwrap();
        assert_eq!((m.count(), m.dim()), (100, 8));
        assert_eq!(idx.stories[3], vec![15, 16, 17, 18, 19]);
        assert_eq!(generate(&spec).unwrap().0, m);
    }

    #[test]
    fn noise_ratio_controls_residual() {
        let spec = SyntheticSpec {
            stories: 400,
            dim: 32,
            noise_ratio: 0.0,
            ..SyntheticSpec::default()
        };
        let (clean, _) = generate(&spec).unwrap();
        let (noisy, _) = generate(&SyntheticSpec {
            noise_ratio: 0.1,
            ..spec
        })
        .unwrap();
        // same streams: contexts identical, targets differ by the noise term
        let mut ratio = 0.0;
        for s in 0..400u32 {
            assert_eq!(clean.row(s * 5), noisy.row(s * 5));
            let a = clean.row(s * 5 + 4);
            let b = noisy.row(s * 5 + 4);
            let diff: f64 = a.iter().zip(b).map(|(x, y)| f64::from(x - y).powi(2)).sum();
            let sig: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum();
            ratio += (diff / sig).sqrt();
        }
        ratio /= 400.0;
        assert!((ratio - 0.1).abs() < 0.01, "mean noise ratio {ratio}");
    }
}
