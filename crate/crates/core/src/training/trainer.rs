//! The training loop: batched sampled-softmax steps with Adam, periodic
//! validation and early stopping.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::evaluation::cloze::eval_cloze;
use crate::evaluation::metrics::DEFAULT_KS;
use crate::evaluation::ranking::{eval_ranking, RankingTask};
use crate::model::{init_params, DropoutMasks, ModelConfig, ModelParams};
use crate::rng;
use crate::store::{ClozeEvalSet, CorpusIndex, EmbeddingMatrix, SentenceId};
use crate::training::adam::{adam_step, OptimizerState};
use crate::training::config::{DistractorMode, TrainConfig};
use crate::training::loss::{batch_objective, TrainExample};
use crate::training::sampler::sample_distractors;

/// Held-out data scored every `eval_every` steps. Higher metric is better.
#[derive(Debug, Clone)]
pub enum Validation {
    None,
    Cloze(ClozeEvalSet),
    /// P@10 of held-out truths against a pool.
    Ranking(RankingTask),
}

impl Validation {
    pub fn metric_name(&self) -> &'static str {
        match self {
            Validation::None => "none",
            Validation::Cloze(_) => "cloze_accuracy",
            Validation::Ranking(_) => "p_at_10",
        }
    }

    fn evaluate(
        &self,
        params: &ModelParams<f32>,
        config: &ModelConfig,
        matrix: &EmbeddingMatrix,
    ) -> Result<Option<f64>> {
        match self {
            Validation::None => Ok(None),
            Validation::Cloze(set) => Ok(Some(eval_cloze(params, config, matrix, set)?.accuracy)),
            Validation::Ranking(task) => {
                let r = eval_ranking(params, config, matrix, task, &DEFAULT_KS)?;
                Ok(r.precision(10))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    /// Mean batch loss since the previous record.
    pub loss: f64,
    pub metric_name: String,
    pub metric_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// Batch loss of every step.
    pub step_losses: Vec<f32>,
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    /// One `step\tloss\tmetric_name\tmetric_value` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let value = r
                .metric_value
                .map_or_else(|| "nan".to_string(), |v| v.to_string());
            writeln!(out, "{}\t{}\t{}\t{}", r.step, r.loss, r.metric_name, value).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-on-validation parameters, or the final ones without validation.
    pub params: ModelParams<f32>,
    pub optimizer: OptimizerState<f32>,
    pub log: TrainingLog,
    pub steps: usize,
    pub best: Option<(usize, f64)>,
    pub stopped_early: bool,
}

/// Produces each batch's distractor lists.
pub struct DistractorSampler {
    mode: DistractorMode,
    n: usize,
    pool: Vec<SentenceId>,
    fixed: Vec<SentenceId>,
    rng: rng::SeededRng,
}

impl DistractorSampler {
    /// `slack` extra ids are drawn for the static list so each example can
    /// still find `n` after excluding its own context and truth.
    pub fn new(
        mode: DistractorMode,
        n: usize,
        pool: Vec<SentenceId>,
        slack: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng::stream(seed, "distractors");
        let fixed = match mode {
            DistractorMode::Static => {
                let size = (n + slack).min(pool.len());
                sample_distractors(&mut rng, &pool, size, &HashSet::new())?
            }
            DistractorMode::Dynamic => Vec::new(),
        };
        Ok(Self {
            mode,
            n,
            pool,
            fixed,
            rng,
        })
    }

    /// Distractors for one example, never containing an id of `exclude`.
    pub fn draw(&mut self, exclude: &HashSet<SentenceId>) -> Result<Vec<SentenceId>> {
        match self.mode {
            DistractorMode::Dynamic => sample_distractors(&mut self.rng, &self.pool, self.n, exclude),
            DistractorMode::Static => {
                let picked: Vec<SentenceId> = self
                    .fixed
                    .iter()
                    .copied()
                    .filter(|id| !exclude.contains(id))
                    .take(self.n)
                    .collect();
                if picked.len() < self.n {
                    return Err(Error::Domain(format!(
                        "static distractor set leaves {} of {} candidates after exclusions",
                        picked.len(),
                        self.n
                    )));
                }
                Ok(picked)
            }
        }
    }

    pub fn draw_batch(
        &mut self,
        batch: &[(&[SentenceId], SentenceId)],
    ) -> Result<Vec<TrainExample>> {
        batch
            .iter()
            .map(|&(context, target)| {
                let exclude: HashSet<SentenceId> =
                    context.iter().copied().chain([target]).collect();
                Ok(TrainExample {
                    context: context.to_vec(),
                    target,
                    distractors: self.draw(&exclude)?,
                })
            })
            .collect()
    }
}

fn check_shapes(matrix: &EmbeddingMatrix, corpus: &CorpusIndex, model: &ModelConfig) -> Result<()> {
    model.validate()?;
    if model.input_dim != corpus.context_len * matrix.dim() {
        return Err(Error::Config(format!(
            "input_dim {} != context_len {} x embedding dim {}",
            model.input_dim,
            corpus.context_len,
            matrix.dim()
        )));
    }
    if model.output_dim != matrix.dim() {
        return Err(Error::Config(format!(
            "output_dim {} != embedding dim {}",
            model.output_dim,
            matrix.dim()
        )));
    }
    corpus.validate_against(matrix)
}

pub fn train(
    matrix: &EmbeddingMatrix,
    corpus: &CorpusIndex,
    model: &ModelConfig,
    config: &TrainConfig,
    validation: &Validation,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_shapes(matrix, corpus, model)?;
    if corpus.stories.is_empty() {
        return Err(Error::Domain("training corpus has no stories".into()));
    }
    let examples: Vec<(&[SentenceId], SentenceId)> = corpus.examples().collect();
    let pool = corpus.candidate_pool(corpus.context_len)?;
    let mut sampler = DistractorSampler::new(
        config.distractor_mode,
        config.num_distractors,
        pool,
        corpus.context_len + 1,
        config.seed,
    )?;
    let mut shuffle_rng = rng::stream(config.seed, "shuffle");
    let mut dropout_rng = rng::stream(config.seed, "dropout");

    let mut params: ModelParams<f32> = init_params(model, config.seed)?;
    let mut grads = ModelParams::zeros(model);
    let mut state = OptimizerState::new(model);
    let adam = config.adam();
    let cs_weight = config.cs_loss_weight as f32;

    let mut log = TrainingLog::default();
    let mut window = (0.0f64, 0usize);
    let mut best: Option<(usize, f64)> = None;
    let mut best_params: Option<ModelParams<f32>> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut step = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let max_steps = config.max_steps.unwrap_or(usize::MAX);
    let max_epochs = config.max_epochs.unwrap_or(usize::MAX);

    let record = |step: usize,
                      window: &mut (f64, usize),
                      log: &mut TrainingLog,
                      params: &ModelParams<f32>|
     -> Result<Option<f64>> {
        let value = validation.evaluate(params, model, matrix)?;
        log.records.push(LogRecord {
            step,
            loss: window.0 / window.1.max(1) as f64,
            metric_name: validation.metric_name().to_string(),
            metric_value: value,
        });
        *window = (0.0, 0);
        Ok(value)
    };

    'epochs: for _ in 0..max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            if step >= max_steps {
                break 'epochs;
            }
            let batch: Vec<(&[SentenceId], SentenceId)> =
                chunk.iter().map(|&i| examples[i]).collect();
            let train_examples = sampler.draw_batch(&batch)?;
            let masks = DropoutMasks::sample(model, batch.len(), &mut dropout_rng);
            grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
            let loss = batch_objective(
                &params,
                model,
                matrix,
                &train_examples,
                cs_weight,
                &masks,
                Some(&mut grads),
            )?;
            step += 1;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    batch_ids: batch.iter().map(|b| b.1).collect(),
                });
            }
            adam_step(&mut params, &grads, &mut state, &adam);
            log.step_losses.push(loss);
            window.0 += f64::from(loss);
            window.1 += 1;

            if step % config.eval_every == 0 {
                if let Some(v) = record(step, &mut window, &mut log, &params)? {
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((step, v));
                        best_params = Some(params.clone());
                        since_best = 0;
                    } else {
                        since_best += 1;
                        if since_best >= config.patience {
                            stopped_early = true;
                            break 'epochs;
                        }
                    }
                }
            }
        }
    }
    if window.1 > 0 {
        if let Some(v) = record(step, &mut window, &mut log, &params)? {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((step, v));
                best_params = Some(params.clone());
            }
        }
    }

    Ok(TrainOutcome {
        params: best_params.unwrap_or(params),
        optimizer: state,
        log,
        steps: step,
        best,
        stopped_early,
    })
}
