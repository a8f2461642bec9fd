//! Acceptance suite. Runs every criterion in sequence, prints one
//! `[PASS]`/`[FAIL]` line each and exits non-zero if any failed.
//!
//! Run with `cargo test -p slm-core --test acceptance -- --nocapture`
//! (output is printed either way). Set `SLM_ACCEPTANCE=<name>` to run a
//! single criterion.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use slm_core::checkpoint::encode_model;
use slm_core::evaluation::{
    eval_ranking, pairwise_accuracy, queries_from_corpus, topk_scores, topk_scores_sharded,
    RankingTask, DEFAULT_KS,
};
use slm_core::linalg::dot_wide;
use slm_core::model::{Arch, DropoutMasks, ModelConfig, ModelParams};
use slm_core::rng;
use slm_core::scoring::score_candidates;
use slm_core::store::{CorpusIndex, EmbeddingMatrix, SentenceId};
use slm_core::synthetic::{self, SyntheticSpec};
use slm_core::training::{
    backward, batch_objective, nll_loss, train, CastRows, DistractorMode, TrainConfig,
    TrainExample, Validation,
};

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, dim: usize, scale: f64) -> EmbeddingMatrix {
    let data = (0..rows * dim)
        .map(|_| (rng.sample::<f64, _>(StandardNormal) * scale) as f32)
        .collect();
    EmbeddingMatrix::new(dim, data).unwrap()
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

// ---------------------------------------------------------------- softmax

/// Brute-force enumeration: p_i = exp(l_i) / sum_j exp(l_j), all in f64,
/// logits as a plain sequential sum.
fn enumerate_log_probs(h: &[f32], rows: &[&[f32]]) -> (Vec<f64>, f64) {
    let logits: Vec<f64> = rows
        .iter()
        .map(|e| e.iter().zip(h).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum())
        .collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    (logits.iter().map(|l| (l.exp() / z).ln()).collect(), z.ln())
}

fn softmax_oracle() -> Outcome {
    let mut rng = rng::stream(101, "acceptance-softmax");
    let dim = 16;
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let n = [2, 5, 100][inst % 3];
        let pool = gaussian_matrix(&mut rng, n, dim, 0.5);
        let h: Vec<f32> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
            .collect();
        let ids: Vec<SentenceId> = (0..n as SentenceId).collect();
        let rows: Vec<&[f32]> = ids.iter().map(|&i| pool.row(i)).collect();
        let (oracle, oracle_z) = enumerate_log_probs(&h, &rows);

        let scored = score_candidates(&h, &pool, &ids).unwrap();
        worst = worst.max(rel_err(scored.log_partition, oracle_z, 1e-300));
        for (a, b) in scored.log_probs.iter().zip(&oracle) {
            worst = worst.max(rel_err(*a, *b, 1e-300));
        }

        let cast = CastRows::<f64>::new(&pool);
        use slm_core::training::RowSource;
        let h64: Vec<f64> = h.iter().map(|&v| f64::from(v)).collect();
        let distractors: Vec<&[f64]> = (1..n as SentenceId).map(|i| cast.row(i)).collect();
        let loss = nll_loss(&h64, cast.row(0), &distractors);
        worst = worst.max(rel_err(loss, -oracle[0], 1e-300));
    }
    Outcome {
        passed: worst < 1e-6,
        detail: format!("100 instances, N in {{2,5,100}}, max relative error {worst:.2e} (< 1e-6)"),
    }
}

// ---------------------------------------------------------------- gradients

struct GradInstance {
    config: ModelConfig,
    params: ModelParams<f64>,
    rows: CastRows<f64>,
    examples: Vec<TrainExample>,
    cs_weight: f64,
    masks: DropoutMasks<f64>,
}

fn grad_instance(i: usize) -> GradInstance {
    let mut r = rng::stream(i as u64, "acceptance-grad");
    let arch = if i.is_multiple_of(2) { Arch::Mlp } else { Arch::ResMlp };
    let depth = 1 + (i / 2) % 2;
    let config = ModelConfig {
        arch,
        input_dim: 6,
        hidden_dim: 4,
        num_layers: depth,
        num_residual_blocks: depth,
        output_dim: 3,
        dropout_rate: if i.is_multiple_of(3) { 0.0 } else { 0.3 },
    };
    let mut params: ModelParams<f64> = slm_core::model::init_params(&config, i as u64).unwrap();
    // perturb every tensor so norms and biases are not at their identity init
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += 0.3 * r.sample::<f64, _>(StandardNormal);
        }
    }
    let matrix = gaussian_matrix(&mut r, 30, 3, 1.0);
    // two examples; context of two sentences, N = 5 candidates
    let examples = vec![
        TrainExample {
            context: vec![0, 1],
            target: 2,
            distractors: vec![10, 11, 12, 13],
        },
        TrainExample {
            context: vec![3, 4],
            target: 5,
            distractors: vec![14, 15, 16, 17],
        },
    ];
    let masks = DropoutMasks::sample(&config, examples.len(), &mut r);
    GradInstance {
        config,
        params,
        rows: CastRows::new(&matrix),
        examples,
        cs_weight: if (i / 4).is_multiple_of(2) { 0.0 } else { 1.0 },
        masks,
    }
}

fn gradient_check() -> Outcome {
    const STEP: f64 = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut where_worst = String::new();
    for i in 0..20 {
        let g = grad_instance(i);
        let (_, analytic) = backward(&g.examples, &g.params, &g.config, &g.rows, g.cs_weight, &g.masks)
            .unwrap();
        let names = g.params.tensor_names();
        let analytic_t = analytic.tensors();
        let mut probe = g.params.clone();
        for (ti, name) in names.iter().enumerate() {
            for j in 0..analytic_t[ti].len() {
                let orig = probe.tensors()[ti][j];
                let mut eval = |v: f64| {
                    probe.tensors_mut()[ti][j] = v;
                    batch_objective(&probe, &g.config, &g.rows, &g.examples, g.cs_weight, &g.masks, None)
                        .unwrap()
                };
                let numeric = (eval(orig + STEP) - eval(orig - STEP)) / (2.0 * STEP);
                eval(orig);
                let e = rel_err(analytic_t[ti][j], numeric, 1e-6);
                checked += 1;
                if e > worst {
                    worst = e;
                    where_worst = format!("instance {i} {name}[{j}]");
                }
            }
        }
    }
    Outcome {
        passed: worst < 1e-4,
        detail: format!(
            "20 tiny models, {checked} parameters, max relative error {worst:.2e} at {where_worst} (< 1e-4)"
        ),
    }
}

// ---------------------------------------------------------------- top-k

fn naive_topk(h: &[f32], m: &EmbeddingMatrix, ids: &[SentenceId], k: usize) -> Vec<(SentenceId, f64)> {
    let mut all: Vec<(SentenceId, f64)> = ids.iter().map(|&id| (id, dot_wide(h, m.row(id)))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn topk_equivalence() -> Outcome {
    let mut rng = rng::stream(7, "acceptance-topk");
    let dim = 64;
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for &size in &[10usize, 1_000, 100_000] {
        let mut data: Vec<f32> = gaussian_matrix(&mut rng, size, dim, 1.0).as_slice().to_vec();
        // duplicate a tenth of the rows so the id tie rule is exercised
        for r in 0..size / 10 {
            let src = rng.gen_range(0..size);
            let dst = rng.gen_range(0..size);
            if src != dst && r % 2 == 0 {
                let row: Vec<f32> = data[src * dim..(src + 1) * dim].to_vec();
                data[dst * dim..(dst + 1) * dim].copy_from_slice(&row);
            }
        }
        let m = EmbeddingMatrix::new(dim, data).unwrap();
        let mut ids: Vec<SentenceId> = (0..size as SentenceId).collect();
        // scramble candidate order so traversal order differs from id order
        for i in (1..ids.len()).rev() {
            ids.swap(i, rng.gen_range(0..=i));
        }
        for q in 0..5 {
            let h: Vec<f32> = (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
                .collect();
            for &k in &[1usize, 10, 100, size] {
                let k = k.min(size);
                let want = naive_topk(&h, &m, &ids, k);
                let got = topk_scores(&h, &m, &ids, k).unwrap();
                let sharded = topk_scores_sharded(&h, &m, &ids, k, 7).unwrap();
                cases += 1;
                if got != want || sharded != want {
                    mismatches.push(format!("size {size} query {q} k {k}"));
                }
            }
        }
    }
    Outcome {
        passed: mismatches.is_empty(),
        detail: format!(
            "{cases} (pool, query, k) cases over pools of 10/1k/100k, single and 7-shard; mismatches: {}",
            if mismatches.is_empty() { "none".to_string() } else { mismatches.join(", ") }
        ),
    }
}

// ---------------------------------------------------------------- synthetic

pub const SYNTH_HELD_OUT: usize = 500;

fn synthetic_corpus() -> (EmbeddingMatrix, CorpusIndex, CorpusIndex, RankingTask) {
    let spec = SyntheticSpec {
        stories: 5_000,
        dim: 64,
        sentences_per_story: 5,
        context_len: 4,
        noise_ratio: 0.1,
        seed: 2024,
    };
    let (matrix, corpus) = synthetic::generate(&spec).unwrap();
    let (train_idx, held) = synthetic::split(&corpus, SYNTH_HELD_OUT).unwrap();
    let task = RankingTask {
        queries: queries_from_corpus(&held),
        pool: corpus.candidate_pool(4).unwrap(),
    };
    (matrix, train_idx, held, task)
}

fn synthetic_model() -> ModelConfig {
    ModelConfig {
        arch: Arch::ResMlp,
        input_dim: 4 * 64,
        hidden_dim: 256,
        num_layers: 1,
        num_residual_blocks: 1,
        output_dim: 64,
        dropout_rate: 0.1,
    }
}

fn synthetic_train_config(num_distractors: usize, steps: usize) -> TrainConfig {
    TrainConfig {
        num_distractors,
        distractor_mode: DistractorMode::Dynamic,
        cs_loss_weight: 1.0,
        learning_rate: 1e-3,
        batch_size: 64,
        max_steps: Some(steps),
        max_epochs: None,
        seed: 17,
        eval_every: 250,
        ..TrainConfig::default()
    }
}

fn synthetic_learning() -> Outcome {
    let (matrix, train_idx, _, task) = synthetic_corpus();
    let model = synthetic_model();
    let cfg = synthetic_train_config(256, 5_000);
    let out = train(&matrix, &train_idx, &model, &cfg, &Validation::None).unwrap();
    let report = eval_ranking(&out.params, &model, &matrix, &task, &DEFAULT_KS).unwrap();
    let p10 = report.precision(10).unwrap();

    let mut r = rng::stream(5, "acceptance-pairwise");
    let distractors: Vec<SentenceId> = task
        .queries
        .iter()
        .map(|q| loop {
            let d = task.pool[r.gen_range(0..task.pool.len())];
            if d != q.target {
                break d;
            }
        })
        .collect();
    let pairwise = pairwise_accuracy(&out.params, &model, &matrix, &task.queries, &distractors).unwrap();
    let first: f32 = out.log.step_losses[..10].iter().sum::<f32>() / 10.0;
    let n = out.log.step_losses.len();
    let last: f32 = out.log.step_losses[n - 10..].iter().sum::<f32>() / 10.0;
    Outcome {
        passed: p10 >= 0.5 && pairwise >= 0.9,
        detail: format!(
            "{} steps; P@10 {:.1}% over {} candidates (>= 50%), pairwise {:.1}% (>= 90%), MRR {:.3}, \
             median rank {}, loss {first:.3} -> {last:.3}",
            out.steps,
            100.0 * p10,
            task.pool.len(),
            100.0 * pairwise,
            report.mrr,
            report.median_rank
        ),
    }
}

fn distractor_trend() -> Outcome {
    let (matrix, train_idx, _, task) = synthetic_corpus();
    let model = synthetic_model();
    let mut medians = Vec::new();
    for n in [1usize, 1_000] {
        let cfg = synthetic_train_config(n, 1_500);
        let out = train(&matrix, &train_idx, &model, &cfg, &Validation::None).unwrap();
        let r = eval_ranking(&out.params, &model, &matrix, &task, &DEFAULT_KS).unwrap();
        medians.push((n, r.median_rank, r.precision(10).unwrap()));
    }
    Outcome {
        passed: medians[1].1 <= medians[0].1,
        detail: format!(
            "median rank with N-1=1: {} (P@10 {:.1}%), N-1=1000: {} (P@10 {:.1}%), 1500 steps each",
            medians[0].1,
            100.0 * medians[0].2,
            medians[1].1,
            100.0 * medians[1].2
        ),
    }
}

fn determinism() -> Outcome {
    let (matrix, train_idx, held, task) = synthetic_corpus();
    let model = synthetic_model();
    let cfg = TrainConfig {
        eval_every: 100,
        ..synthetic_train_config(256, 600)
    };
    let validation = Validation::Ranking(RankingTask {
        queries: queries_from_corpus(&held)[..100].to_vec(),
        pool: task.pool.clone(),
    });
    let run = || {
        let out = train(&matrix, &train_idx, &model, &cfg, &validation).unwrap();
        (
            encode_model(&out.params, &model).unwrap(),
            out.log.to_text(),
            out.log.step_losses.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        )
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = single.install(run);
    let b = single.install(run);
    let threaded = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
    let same = a == b && a == threaded;
    let distinct: HashSet<_> = a.2.iter().collect();
    Outcome {
        passed: same && distinct.len() > 1,
        detail: format!(
            "two single-threaded 600-step runs, seed {}: checkpoints {} bytes {}, loss logs {}; \
             4-thread run {}",
            cfg.seed,
            a.0.len(),
            if a.0 == b.0 { "identical" } else { "DIFFER" },
            if a.1 == b.1 && a.2 == b.2 { "identical" } else { "DIFFER" },
            if a == threaded { "matches" } else { "DIFFERS" }
        ),
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("softmax_oracle_equivalence", Duration::from_secs(10), softmax_oracle),
        ("gradient_correctness", Duration::from_secs(60), gradient_check),
        ("ranking_engine_equivalence", Duration::from_secs(60), topk_equivalence),
        ("synthetic_end_to_end_learning", Duration::from_secs(600), synthetic_learning),
        ("distractor_count_trend", Duration::from_secs(1200), distractor_trend),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let only = std::env::var("SLM_ACCEPTANCE").ok();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if only.as_deref().is_some_and(|o| o != name) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let ok = out.passed && in_time;
        failed += usize::from(!ok);
        println!(
            "[{}] {name}: {} [{:.1}s, budget {}s{}]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", OVER BUDGET" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
