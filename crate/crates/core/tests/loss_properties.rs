//! Loss and gradient invariants checked against 64-bit enumeration oracles.

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use slm_core::model::{init_params, Arch, DropoutMasks, ModelConfig, ModelParams};
use slm_core::rng;
use slm_core::store::EmbeddingMatrix;
use slm_core::training::{
    backward, batch_objective, cs_loss, nll_loss, total_loss, CastRows, TrainExample,
};

/// -log softmax(true) by direct enumeration in f64.
fn oracle_nll(h: &[f64], cands: &[&[f64]]) -> f64 {
    let logits: Vec<f64> = cands
        .iter()
        .map(|e| e.iter().zip(h).map(|(a, b)| a * b).sum())
        .collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    -(logits[0].exp() / z).ln()
}

fn vecs(n: usize, dim: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "loss-props");
    (0..n)
        .map(|_| (0..dim).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

#[test]
fn nll_matches_enumeration_for_several_pool_sizes() {
    for (i, n) in [2usize, 5, 100].into_iter().cycle().take(60).enumerate() {
        let all = vecs(n + 1, 12, 0.4, i as u64);
        let h = &all[0];
        let cands = refs(&all[1..]);
        let got = nll_loss(h, cands[0], &cands[1..]);
        let want = oracle_nll(h, &cands);
        assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
    }
}

proptest! {
    #[test]
    fn nll_is_invariant_to_distractor_order(seed in any::<u64>(), n in 2usize..20, rot in 0usize..20) {
        let all = vecs(n + 2, 6, 1.0, seed);
        let h = &all[0];
        let t = all[1].as_slice();
        let d = refs(&all[2..]);
        let mut perm = d.clone();
        perm.rotate_left(rot % d.len());
        perm.reverse();
        let a = nll_loss(h, t, &d);
        let b = nll_loss(h, t, &perm);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn adding_a_distractor_never_decreases_nll(seed in any::<u64>(), n in 1usize..20) {
        let all = vecs(n + 3, 6, 1.0, seed);
        let h = &all[0];
        let t = all[1].as_slice();
        let d = refs(&all[2..]);
        let fewer = nll_loss(h, t, &d[..d.len() - 1]);
        let more = nll_loss(h, t, &d);
        prop_assert!(more >= fewer);
    }

    #[test]
    fn argmax_survives_positive_rescaling_of_h(seed in any::<u64>(), c in 0.01f64..100.0) {
        let all = vecs(9, 5, 1.0, seed);
        let h = &all[0];
        let hs: Vec<f64> = h.iter().map(|v| v * c).collect();
        let cands = &all[1..];
        let argmax = |h: &[f64]| {
            (0..cands.len())
                .map(|i| (i, cands[i].iter().zip(h).map(|(a, b)| a * b).sum::<f64>()))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                .0
        };
        prop_assert_eq!(argmax(h), argmax(&hs));
    }
}

#[test]
fn cs_loss_against_enumeration_with_four_context_sentences() {
    let all = vecs(6, 8, 0.7, 99);
    let h = &all[0];
    let cands = refs(&all[1..]);
    let got = cs_loss(h, cands[0], &cands[1..]);
    assert_eq!(cands.len(), 5);
    assert!((got - oracle_nll(h, &cands)).abs() < 1e-6);
}

fn tiny(arch: Arch, dropout: f32) -> ModelConfig {
    ModelConfig {
        arch,
        input_dim: 6,
        hidden_dim: 4,
        num_layers: 2,
        num_residual_blocks: 1,
        output_dim: 3,
        dropout_rate: dropout,
    }
}

fn example_matrix() -> EmbeddingMatrix {
    let mut r = rng::stream(3, "matrix");
    let data = (0..60).map(|_| r.sample::<f64, _>(StandardNormal) as f32).collect();
    EmbeddingMatrix::new(3, data).unwrap()
}

fn ex() -> TrainExample {
    TrainExample {
        context: vec![0, 1],
        target: 2,
        distractors: vec![7, 8, 9, 10],
    }
}

#[test]
fn total_loss_combines_components() {
    let cfg = tiny(Arch::ResMlp, 0.0);
    let p: ModelParams<f64> = init_params(&cfg, 4).unwrap();
    let m = example_matrix();
    let rows = CastRows::<f64>::new(&m);
    use slm_core::training::RowSource;
    let e = ex();
    let ctx = [rows.row(0), rows.row(1)];
    let input: Vec<f64> = ctx.concat();
    let h = slm_core::model::forward(&p, &cfg, &[&input[..3], &input[3..]], slm_core::model::Mode::Eval)
        .unwrap()
        .h;
    let d: Vec<&[f64]> = e.distractors.iter().map(|&i| rows.row(i)).collect();
    let nll = nll_loss(&h, rows.row(2), &d);
    let cs = cs_loss(&h, rows.row(2), &ctx);
    assert_eq!(total_loss(&e, &p, &cfg, &rows, 0.0).unwrap(), nll);
    assert!((total_loss(&e, &p, &cfg, &rows, 1.0).unwrap() - (nll + cs)).abs() < 1e-12);
}

#[test]
fn large_logits_stay_finite_and_match_wide_oracle() {
    // h and candidates scaled so logits reach ~10^2 magnitude
    let all = vecs(40, 16, 4.5, 12);
    let h64 = &all[0];
    let cands = refs(&all[1..]);
    let h32: Vec<f32> = h64.iter().map(|&v| v as f32).collect();
    let c32: Vec<Vec<f32>> = all[1..].iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
    let c32r: Vec<&[f32]> = c32.iter().map(Vec::as_slice).collect();
    let max_logit = cands
        .iter()
        .map(|e| e.iter().zip(h64).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max);
    assert!(max_logit > 100.0, "{max_logit}");
    let l32 = nll_loss(&h32, c32r[0], &c32r[1..]);
    assert!(l32.is_finite());
    // 64-bit oracle with max shift (plain enumeration would overflow past 709)
    let logits: Vec<f64> = c32
        .iter()
        .map(|e| e.iter().zip(&h32).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum())
        .collect();
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    let want = lse - logits[0];
    assert!((f64::from(l32) - want).abs() <= 1e-4 * want.abs().max(1.0), "{l32} vs {want}");
}

#[test]
fn backward_is_deterministic_for_a_fixed_mask() {
    let cfg = tiny(Arch::Mlp, 0.5);
    let p: ModelParams<f64> = init_params(&cfg, 8).unwrap();
    let rows = CastRows::<f64>::new(&example_matrix());
    let masks = DropoutMasks::sample(&cfg, 1, &mut rng::stream(1, "mask"));
    let a = backward(&[ex()], &p, &cfg, &rows, 1.0, &masks).unwrap();
    let b = backward(&[ex()], &p, &cfg, &rows, 1.0, &masks).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identical_candidates_send_no_signal_through_nll() {
    // every candidate row identical: the nll gradient w.r.t. h vanishes,
    // so with cs weight 0 every parameter gradient is zero
    let cfg = tiny(Arch::ResMlp, 0.0);
    let p: ModelParams<f64> = init_params(&cfg, 8).unwrap();
    let mut data: Vec<f32> = vec![0.0; 60];
    for (i, v) in data.iter_mut().enumerate() {
        *v = if i < 6 { (i as f32) * 0.3 - 0.5 } else { [0.2, -0.4, 1.1][i % 3] };
    }
    let rows = CastRows::<f64>::new(&EmbeddingMatrix::new(3, data).unwrap());
    let (_, g) = backward(&[ex()], &p, &cfg, &rows, 0.0, &DropoutMasks::none()).unwrap();
    for t in g.tensors() {
        assert!(t.iter().all(|v| v.abs() < 1e-12), "{t:?}");
    }
    let loss = batch_objective(&p, &cfg, &rows, &[ex()], 0.0, &DropoutMasks::none(), None).unwrap();
    assert!((loss - 5f64.ln()).abs() < 1e-12);
}
