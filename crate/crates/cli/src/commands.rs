use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use slm_core::checkpoint::{read_model, write_model, write_optimizer};
use slm_core::evaluation::{
    eval_cloze, eval_ranking, queries_from_corpus, sweep_distractors, sweep_plot_data,
    sweep_table, RankingTask,
};
use slm_core::model::{Arch, ModelConfig};
use slm_core::store::{
    parse_text_matrix, read_embeddings, write_embeddings, ClozeEvalSet, CorpusIndex,
    EmbeddingMatrix, SentenceId,
};
use slm_core::synthetic::{self, SyntheticSpec};
use slm_core::training::{train, TrainConfig, Validation};

use crate::manifest::RunManifest;
use crate::{
    Command, EvalClozeArgs, EvalCommand, EvalRankArgs, ImportArgs, ModelArgs, SweepArgs,
    SynthArgs, TrainArgs, TrainOverrides,
};

pub const EMBEDDINGS_FILE: &str = "embeddings.slmb";
pub const INDEX_FILE: &str = "index.tsv";
pub const CLOZE_FILE: &str = "cloze.tsv";
pub const CHECKPOINT_FILE: &str = "model.slmp";
pub const OPTIMIZER_FILE: &str = "optimizer.slmo";
pub const LOG_FILE: &str = "train_log.tsv";
pub const CLOZE_REPORT_FILE: &str = "cloze_report.tsv";
pub const RANK_REPORT_FILE: &str = "rank_report.tsv";
pub const SWEEP_FILE: &str = "sweep.tsv";
pub const SWEEP_PLOT_FILE: &str = "sweep_plot.dat";
pub const TRAIN_INDEX_FILE: &str = "train_index.tsv";
pub const HELD_OUT_INDEX_FILE: &str = "held_out_index.tsv";

/// 2 for malformed or inconsistent inputs, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let input = err
        .chain()
        .find_map(|e| e.downcast_ref::<slm_core::Error>())
        .is_some_and(slm_core::Error::is_input_error);
    if input {
        2
    } else {
        1
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Import(a) => import(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(EvalCommand::Cloze(a)) => eval_cloze_cmd(a),
        Command::Eval(EvalCommand::Rank(a)) => eval_rank_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_index(path: &Path, matrix: &EmbeddingMatrix) -> Result<CorpusIndex> {
    let idx = CorpusIndex::read(path).with_context(|| format!("index {}", path.display()))?;
    idx.validate_against(matrix)
        .with_context(|| format!("index {}", path.display()))?;
    Ok(idx)
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings(path).with_context(|| format!("embeddings {}", path.display()))
}

/// Target-position sentences of every index, in file order, without repeats.
fn merged_pool(paths: &[PathBuf], matrix: &EmbeddingMatrix) -> Result<Vec<SentenceId>> {
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for p in paths {
        let idx = load_index(p, matrix)?;
        for id in idx.candidate_pool(idx.context_len)? {
            if seen.insert(id) {
                pool.push(id);
            }
        }
    }
    Ok(pool)
}

fn import(a: ImportArgs) -> Result<()> {
    let mut m = RunManifest::new("import");
    let matrix = match (&a.embeddings, &a.text_matrix) {
        (Some(p), _) => {
            m.input(p)?;
            load_embeddings(p)?
        }
        (None, Some(p)) => {
            m.input(p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_text_matrix(&text).with_context(|| format!("text matrix {}", p.display()))?
        }
        (None, None) => bail!("one of --embeddings or --text-matrix is required"),
    };
    m.input(&a.index)?;
    let idx = load_index(&a.index, &matrix)?;
    let cloze = match &a.cloze {
        Some(p) => {
            m.input(p)?;
            let set = ClozeEvalSet::read(p).with_context(|| format!("cloze {}", p.display()))?;
            set.validate_against(&matrix)
                .with_context(|| format!("cloze {}", p.display()))?;
            Some(set)
        }
        None => None,
    };

    out_dir(&a.out)?;
    write_embeddings(&matrix, m.artifact(&a.out.join(EMBEDDINGS_FILE)))?;
    idx.write(m.artifact(&a.out.join(INDEX_FILE)))?;
    if let Some(set) = cloze {
        set.write(m.artifact(&a.out.join(CLOZE_FILE)))?;
    }
    m.set("count", matrix.count());
    m.set("dim", matrix.dim());
    m.set("stories", idx.stories.len());
    m.set("sentences_per_story", idx.sentences_per_story);
    m.set("context_len", idx.context_len);
    m.write(&a.out)?;
    println!(
        "imported {} x {} embeddings, {} stories",
        matrix.count(),
        matrix.dim(),
        idx.stories.len()
    );
    Ok(())
}

fn model_config(args: &ModelArgs, dim: usize, context_len: usize) -> ModelConfig {
    ModelConfig {
        arch: args.arch,
        input_dim: context_len * dim,
        hidden_dim: args.hidden_dim,
        num_layers: args.num_layers,
        num_residual_blocks: args.blocks,
        output_dim: dim,
        dropout_rate: args.dropout,
    }
}

fn train_config(path: &Path, o: &TrainOverrides) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::read(path).with_context(|| format!("config {}", path.display()))?;
    if let Some(v) = o.distractors {
        cfg.num_distractors = v;
    }
    if let Some(v) = o.distractor_mode {
        cfg.distractor_mode = v;
    }
    if let Some(v) = o.cs_loss_weight {
        cfg.cs_loss_weight = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.max_steps {
        cfg.max_steps = Some(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn record_model(m: &mut RunManifest, cfg: &ModelConfig) {
    m.set("arch", cfg.arch.as_str());
    m.set("input_dim", cfg.input_dim);
    m.set("hidden_dim", cfg.hidden_dim);
    match cfg.arch {
        Arch::Mlp => m.set("num_layers", cfg.num_layers),
        Arch::ResMlp => m.set("num_residual_blocks", cfg.num_residual_blocks),
    }
    m.set("output_dim", cfg.output_dim);
    m.set("dropout_rate", cfg.dropout_rate);
    m.set("parameter_count", cfg.parameter_count());
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut m = RunManifest::new("train");
    for p in [&a.config, &a.embeddings, &a.index] {
        m.input(p)?;
    }
    let cfg = train_config(&a.config, &a.overrides)?;
    let matrix = load_embeddings(&a.embeddings)?;
    let idx = load_index(&a.index, &matrix)?;
    let model = model_config(&a.model, matrix.dim(), idx.context_len);
    model.validate()?;

    let validation = if let Some(p) = &a.valid_index {
        m.input(p)?;
        let held = load_index(p, &matrix)?;
        let pool = merged_pool(&[a.index.clone(), p.clone()], &matrix)?;
        Validation::Ranking(RankingTask {
            queries: queries_from_corpus(&held),
            pool,
        })
    } else if let Some(p) = &a.valid_cloze {
        m.input(p)?;
        let set = ClozeEvalSet::read(p).with_context(|| format!("cloze {}", p.display()))?;
        set.validate_against(&matrix)
            .with_context(|| format!("cloze {}", p.display()))?;
        Validation::Cloze(set)
    } else {
        Validation::None
    };

    m.set_lines(&cfg.to_text());
    record_model(&mut m, &model);
    m.set("validation_metric", validation.metric_name());
    m.seed = Some(cfg.seed);

    let out = train(&matrix, &idx, &model, &cfg, &validation)?;
    out_dir(&a.out)?;
    write_model(&out.params, &model, m.artifact(&a.out.join(CHECKPOINT_FILE)))?;
    write_optimizer(&out.optimizer, &model, m.artifact(&a.out.join(OPTIMIZER_FILE)))?;
    let log = m.artifact(&a.out.join(LOG_FILE));
    fs::write(&log, out.log.to_text()).with_context(|| format!("writing {}", log.display()))?;
    m.set("steps_run", out.steps);
    m.set("stopped_early", out.stopped_early);
    if let Some((step, value)) = out.best {
        m.set("best_step", step);
        m.set("best_metric", value);
    }
    m.write(&a.out)?;
    let last = out.log.records.last();
    println!(
        "trained {} steps; final loss {}",
        out.steps,
        last.map_or(f64::NAN, |r| r.loss)
    );
    Ok(())
}

fn eval_cloze_cmd(a: EvalClozeArgs) -> Result<()> {
    let mut m = RunManifest::new("eval cloze");
    for p in [&a.checkpoint, &a.embeddings, &a.cloze] {
        m.input(p)?;
    }
    let (model, params) =
        read_model(&a.checkpoint).with_context(|| format!("checkpoint {}", a.checkpoint.display()))?;
    let matrix = load_embeddings(&a.embeddings)?;
    let set = ClozeEvalSet::read(&a.cloze).with_context(|| format!("cloze {}", a.cloze.display()))?;
    let rep = eval_cloze(&params, &model, &matrix, &set)
        .with_context(|| format!("cloze {}", a.cloze.display()))?;

    out_dir(&a.out)?;
    let path = m.artifact(&a.out.join(CLOZE_REPORT_FILE));
    let text = format!(
        "accuracy\t{}\ncorrect\t{}\ntotal\t{}\nties\t{}\n",
        rep.accuracy, rep.correct, rep.total, rep.ties
    );
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    record_model(&mut m, &model);
    m.write(&a.out)?;
    println!("cloze accuracy {} ({}/{})", rep.accuracy, rep.correct, rep.total);
    Ok(())
}

fn eval_rank_cmd(a: EvalRankArgs) -> Result<()> {
    let mut m = RunManifest::new("eval rank");
    for p in [&a.checkpoint, &a.embeddings, &a.index].into_iter().chain(&a.pool) {
        m.input(p)?;
    }
    let (model, params) =
        read_model(&a.checkpoint).with_context(|| format!("checkpoint {}", a.checkpoint.display()))?;
    let matrix = load_embeddings(&a.embeddings)?;
    let idx = load_index(&a.index, &matrix)?;
    let task = RankingTask {
        queries: queries_from_corpus(&idx),
        pool: merged_pool(&a.pool, &matrix)?,
    };
    let rep = eval_ranking(&params, &model, &matrix, &task, &a.k)?;

    out_dir(&a.out)?;
    let path = m.artifact(&a.out.join(RANK_REPORT_FILE));
    fs::write(&path, rep.to_text()).with_context(|| format!("writing {}", path.display()))?;
    record_model(&mut m, &model);
    m.set("pool_size", rep.pool_size);
    m.set("k", a.k.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    m.write(&a.out)?;
    for (k, p) in &rep.precision_at {
        println!("p_at_{k}\t{p}");
    }
    println!("mrr\t{}\nmedian_rank\t{}\nmean_rank\t{}", rep.mrr, rep.median_rank, rep.mean_rank);
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut m = RunManifest::new("sweep");
    for p in [&a.config, &a.embeddings, &a.index, &a.query_index]
        .into_iter()
        .chain(&a.pool)
    {
        m.input(p)?;
    }
    let cfg = train_config(&a.config, &a.overrides)?;
    let matrix = load_embeddings(&a.embeddings)?;
    let idx = load_index(&a.index, &matrix)?;
    let held = load_index(&a.query_index, &matrix)?;
    let model = model_config(&a.model, matrix.dim(), idx.context_len);
    model.validate()?;
    let task = RankingTask {
        queries: queries_from_corpus(&held),
        pool: merged_pool(&a.pool, &matrix)?,
    };
    let cells = sweep_distractors(&matrix, &idx, &model, &cfg, &a.grid, &task)?;

    out_dir(&a.out)?;
    let table = m.artifact(&a.out.join(SWEEP_FILE));
    fs::write(&table, sweep_table(&cells)).with_context(|| format!("writing {}", table.display()))?;
    let plot = m.artifact(&a.out.join(SWEEP_PLOT_FILE));
    fs::write(&plot, sweep_plot_data(&cells)).with_context(|| format!("writing {}", plot.display()))?;
    m.set_lines(&cfg.to_text());
    m.config.remove("num_distractors");
    m.set("grid", a.grid.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    record_model(&mut m, &model);
    m.seed = Some(cfg.seed);
    m.write(&a.out)?;

    let failed: Vec<_> = cells.iter().filter(|c| c.outcome.is_err()).collect();
    for c in &failed {
        eprintln!("cell N-1={} failed: {}", c.num_distractors, c.outcome.as_ref().unwrap_err());
    }
    if !failed.is_empty() {
        bail!("{} of {} sweep cells failed", failed.len(), cells.len());
    }
    print!("{}", fs::read_to_string(&table)?);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut m = RunManifest::new("synth");
    let spec = SyntheticSpec {
        stories: a.stories,
        dim: a.dim,
        sentences_per_story: a.sentences_per_story,
        context_len: a.context_len,
        noise_ratio: a.noise_ratio,
        seed: a.seed,
    };
    let (matrix, idx) = synthetic::generate(&spec)?;
    let (train_idx, held) = synthetic::split(&idx, a.held_out)?;

    out_dir(&a.out)?;
    write_embeddings(&matrix, m.artifact(&a.out.join(EMBEDDINGS_FILE)))?;
    train_idx.write(m.artifact(&a.out.join(TRAIN_INDEX_FILE)))?;
    held.write(m.artifact(&a.out.join(HELD_OUT_INDEX_FILE)))?;
    m.set("stories", a.stories);
    m.set("dim", a.dim);
    m.set("sentences_per_story", a.sentences_per_story);
    m.set("context_len", a.context_len);
    m.set("noise_ratio", a.noise_ratio);
    m.set("held_out", a.held_out);
    m.seed = Some(a.seed);
    m.write(&a.out)?;
    println!(
        "wrote {} sentences ({} train / {} held-out stories)",
        matrix.count(),
        train_idx.stories.len(),
        held.stories.len()
    );
    Ok(())
}
