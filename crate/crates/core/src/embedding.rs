//! IP-embedding: ingredient target/context vectors trained with negative sampling.
//!
//! Every ingredient owns two `d`-dimensional vectors, one used when it is
//! the ingredient being predicted (`target`) and one used when it is part of
//! the surrounding recipe (`context`). A context is summarised by the mean of
//! its context vectors and ingredients are scored by the dot product of that
//! mean with their target vector.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, IngredientId};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::persist;
use crate::predictor::{rank_scores, validate_given, IngredientPredictor};

pub const MODEL_KIND: &str = "nutrec-embedding";

/// Logistic function evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(z)`, finite for every finite `z`.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    z.min(0.0) - (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSampling {
    /// Uniform over every ingredient except the target.
    Uniform,
    /// Proportional to corpus frequency raised to 0.75, target excluded.
    Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTrainConfig {
    pub dim: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    /// Learning rate reached, linearly, at the end of training.
    pub final_learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
    pub sampling: NegativeSampling,
}

impl Default for EmbeddingTrainConfig {
    fn default() -> Self {
        EmbeddingTrainConfig {
            dim: 150,
            negatives: 5,
            learning_rate: 0.025,
            final_learning_rate: 0.0001,
            regularization: 1e-5,
            epochs: 20,
            seed: 0,
            sampling: NegativeSampling::Uniform,
        }
    }
}

impl EmbeddingTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::Config("at least one negative sample is required".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and non-negative".into()));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::Config("regularization must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn learning_rate_at(&self, progress: f64) -> f64 {
        let end = self.final_learning_rate.min(self.learning_rate);
        self.learning_rate + (end - self.learning_rate) * progress.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    dim: usize,
    vocab_size: usize,
    vocab_hash: String,
    /// `vocab_size x dim`, row-major.
    target: Vec<f64>,
    /// `vocab_size x dim`, row-major.
    context: Vec<f64>,
}

/// Exact gradient of one regularised sample term
/// `log σ(c·v_t) + Σ log σ(-c·v_x) - λ/2 (|v_t|² + Σ|v_x|² + Σ|v'_c|²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub target: Vec<f64>,
    /// One entry per listed negative, in order.
    pub negatives: Vec<Vec<f64>>,
    /// One entry per distinct context ingredient, in order.
    pub context: Vec<Vec<f64>>,
}

/// One (target, context, negatives) triple visited during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub target: IngredientId,
    pub context: Vec<IngredientId>,
    pub negatives: Vec<IngredientId>,
}

impl EmbeddingModel {
    pub fn zeros(vocab_size: usize, dim: usize, vocab_hash: impl Into<String>) -> Self {
        EmbeddingModel {
            dim,
            vocab_size,
            vocab_hash: vocab_hash.into(),
            target: vec![0.0; vocab_size * dim],
            context: vec![0.0; vocab_size * dim],
        }
    }

    /// Build a model from explicit row-major matrices.
    pub fn from_parts(
        dim: usize,
        vocab_hash: impl Into<String>,
        target: Vec<f64>,
        context: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || !target.len().is_multiple_of(dim) || target.len() != context.len() {
            return Err(Error::Config(format!(
                "embedding matrices of {} and {} values do not fit dimension {dim}",
                target.len(),
                context.len()
            )));
        }
        if target.iter().chain(&context).any(|v| !v.is_finite()) {
            return Err(Error::Config("embedding entries must be finite".into()));
        }
        Ok(EmbeddingModel {
            dim,
            vocab_size: target.len() / dim,
            vocab_hash: vocab_hash.into(),
            target,
            context,
        })
    }

    /// Targets uniform in `[-0.5/d, 0.5/d]`, contexts zero.
    pub fn initialized(vocab_size: usize, dim: usize, vocab_hash: impl Into<String>, rng: &mut impl Rng) -> Self {
        let mut model = Self::zeros(vocab_size, dim, vocab_hash);
        let half = 0.5 / dim as f64;
        for v in &mut model.target {
            *v = rng.random_range(-half..=half);
        }
        model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn target_row(&self, id: IngredientId) -> &[f64] {
        &self.target[id.index() * self.dim..(id.index() + 1) * self.dim]
    }

    pub fn context_row(&self, id: IngredientId) -> &[f64] {
        &self.context[id.index() * self.dim..(id.index() + 1) * self.dim]
    }

    pub fn target_row_mut(&mut self, id: IngredientId) -> &mut [f64] {
        &mut self.target[id.index() * self.dim..(id.index() + 1) * self.dim]
    }

    pub fn context_row_mut(&mut self, id: IngredientId) -> &mut [f64] {
        &mut self.context[id.index() * self.dim..(id.index() + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.target.iter().chain(&self.context).all(|v| v.is_finite())
    }

    fn check_id(&self, id: IngredientId) -> Result<()> {
        if id.index() >= self.vocab_size {
            return Err(Error::IngredientOutOfRange { id: id.index(), vocab_size: self.vocab_size });
        }
        Ok(())
    }

    /// Mean of the context vectors of the distinct ingredients in `context`.
    pub fn context_vector(&self, context: &[IngredientId]) -> Result<Vec<f64>> {
        let context = validate_given(context, self.vocab_size).map_err(|e| match e {
            Error::Empty(_) => Error::Empty("context"),
            other => other,
        })?;
        let mut mean = vec![0.0; self.dim];
        for &id in &context {
            axpy(1.0, self.context_row(id), &mut mean);
        }
        let inv = 1.0 / context.len() as f64;
        mean.iter_mut().for_each(|v| *v *= inv);
        Ok(mean)
    }

    fn check_sample(&self, target: IngredientId, negatives: &[IngredientId]) -> Result<()> {
        self.check_id(target)?;
        for &n in negatives {
            self.check_id(n)?;
            if n == target {
                return Err(Error::TargetInNegatives(target.index()));
            }
        }
        Ok(())
    }

    /// `log σ(c·v_target) + Σ_neg log σ(-c·v_neg)`; always `<= 0`.
    pub fn negative_sampling_loss(
        &self,
        target: IngredientId,
        context: &[IngredientId],
        negatives: &[IngredientId],
    ) -> Result<f64> {
        self.check_sample(target, negatives)?;
        let c = self.context_vector(context)?;
        let positive = log_sigmoid(dot(&c, self.target_row(target)));
        let negative: f64 = negatives
            .iter()
            .map(|&n| log_sigmoid(-dot(&c, self.target_row(n))))
            .sum();
        Ok(positive + negative)
    }

    /// Exact gradient of the regularised sample term. The context gradient
    /// carries the `1/|context|` factor from averaging.
    pub fn sample_gradient(
        &self,
        target: IngredientId,
        context: &[IngredientId],
        negatives: &[IngredientId],
        lambda: f64,
    ) -> Result<SampleGradient> {
        self.check_sample(target, negatives)?;
        let distinct = validate_given(context, self.vocab_size)?;
        let c = self.context_vector(&distinct)?;

        let v_t = self.target_row(target);
        let g_t = 1.0 - sigmoid(dot(&c, v_t));
        let mut d_c: Vec<f64> = v_t.iter().map(|v| g_t * v).collect();
        let d_target = c.iter().zip(v_t).map(|(ci, vi)| g_t * ci - lambda * vi).collect();

        let mut d_negatives = Vec::with_capacity(negatives.len());
        for &n in negatives {
            let v_x = self.target_row(n);
            let s = sigmoid(dot(&c, v_x));
            axpy(-s, v_x, &mut d_c);
            d_negatives.push(c.iter().zip(v_x).map(|(ci, vi)| -s * ci - lambda * vi).collect());
        }

        let inv = 1.0 / distinct.len() as f64;
        let d_context = distinct
            .iter()
            .map(|&id| {
                d_c.iter()
                    .zip(self.context_row(id))
                    .map(|(g, v)| inv * g - lambda * v)
                    .collect()
            })
            .collect();
        Ok(SampleGradient { target: d_target, negatives: d_negatives, context: d_context })
    }

    /// One stochastic gradient-ascent step with the update rules
    ///
    /// ```text
    /// v_t  += lr * ((1 - σ(c·v_t)) c - λ v_t)
    /// v_x  += lr * (-σ(c·v_x) c - λ v_x)                      for each negative x
    /// v'_c += lr * ((1 - σ(c·v_t)) v_t - Σ_x σ(c·v_x) v_x - λ v'_c)  for each context c
    /// ```
    ///
    /// All sigmoids and the context update use the vectors as they were
    /// before the step. The context update applies the gradient with respect
    /// to the mean `c` to every member, without the `1/|context|` factor.
    pub fn sgd_step(
        &mut self,
        target: IngredientId,
        context: &[IngredientId],
        negatives: &[IngredientId],
        lr: f64,
        lambda: f64,
    ) -> Result<()> {
        self.check_sample(target, negatives)?;
        let context = validate_given(context, self.vocab_size)?;
        let c = self.context_vector(&context)?;
        let mut scratch = StepScratch::new(self.dim);
        scratch.c.copy_from_slice(&c);
        self.apply_step(target, &context, negatives, lr, lambda, &mut scratch);
        Ok(())
    }

    /// Update with `scratch.c` already holding the context mean.
    fn apply_step(
        &mut self,
        target: IngredientId,
        context: &[IngredientId],
        negatives: &[IngredientId],
        lr: f64,
        lambda: f64,
        scratch: &mut StepScratch,
    ) {
        let StepScratch { c, grad_c, old } = scratch;
        grad_c.iter_mut().for_each(|v| *v = 0.0);

        let mut update = |model: &mut Self, id: IngredientId, label: f64| {
            let row = model.target_row_mut(id);
            let g = label - sigmoid(dot(c, row));
            old.copy_from_slice(row);
            for (v, ci) in row.iter_mut().zip(c.iter()) {
                *v += lr * (g * ci - lambda * *v);
            }
            axpy(g, old, grad_c);
        };
        update(self, target, 1.0);
        for &n in negatives {
            update(self, n, 0.0);
        }
        for &id in context {
            for (v, g) in self.context_row_mut(id).iter_mut().zip(grad_c.iter()) {
                *v += lr * (g - lambda * *v);
            }
        }
    }

    /// Sum of the sample terms minus `λ/2 |Θ|²` over every parameter.
    pub fn map_objective(&self, samples: &[TrainingSample], lambda: f64) -> Result<f64> {
        let mut total = 0.0;
        for s in samples {
            total += self.negative_sampling_loss(s.target, &s.context, &s.negatives)?;
        }
        let sq: f64 = self.target.iter().chain(&self.context).map(|v| v * v).sum();
        Ok(total - 0.5 * lambda * sq)
    }

    /// Full-softmax probability of `target` given `context`; a reference
    /// scorer, not used in training.
    pub fn softmax_probability(&self, target: IngredientId, context: &[IngredientId]) -> Result<f64> {
        self.check_id(target)?;
        let c = self.context_vector(context)?;
        let logits: Vec<f64> = (0..self.vocab_size)
            .map(|i| dot(&c, self.target_row(IngredientId(i))))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        Ok((logits[target.index()] - max).exp() / z)
    }

    /// The `top_n` ingredients outside `given`, by `c·v_i`.
    pub fn predict_missing(&self, given: &[IngredientId], top_n: usize) -> Result<Vec<(IngredientId, f64)>> {
        if top_n < 1 {
            return Err(Error::Config("top_n must be at least 1".into()));
        }
        self.rank(given, top_n)
    }

    /// Cosine neighbours of `query` among the target vectors.
    pub fn similar_ingredients(&self, query: IngredientId, top_n: usize) -> Result<Vec<(IngredientId, f64)>> {
        self.check_id(query)?;
        let q = self.target_row(query);
        let q_norm = norm(q);
        if q_norm == 0.0 {
            return Err(Error::ZeroNorm(query.index()));
        }
        let sims: Vec<f64> = (0..self.vocab_size)
            .map(|i| {
                let row = self.target_row(IngredientId(i));
                let n = norm(row);
                if n == 0.0 {
                    0.0
                } else {
                    dot(q, row) / (q_norm * n)
                }
            })
            .collect();
        Ok(rank_scores(&sims, &[query], top_n))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        persist::save(path, MODEL_KIND, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: Self = persist::load(path, MODEL_KIND)?;
        Self::from_parts(model.dim, model.vocab_hash, model.target, model.context)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        persist::to_bytes(MODEL_KIND, self)
    }
}

impl IngredientPredictor for EmbeddingModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        let c = self.context_vector(given)?;
        Ok(self.target.chunks_exact(self.dim).map(|row| dot(&c, row)).collect())
    }
}

struct StepScratch {
    c: Vec<f64>,
    grad_c: Vec<f64>,
    old: Vec<f64>,
}

impl StepScratch {
    fn new(dim: usize) -> Self {
        StepScratch { c: vec![0.0; dim], grad_c: vec![0.0; dim], old: vec![0.0; dim] }
    }
}

/// Draws negatives for one target, never the target itself.
struct NegativeSampler {
    vocab_size: usize,
    weighted: Option<WeightedIndex<f64>>,
}

impl NegativeSampler {
    fn new(corpus: &Corpus, sampling: NegativeSampling) -> Self {
        let weighted = match sampling {
            NegativeSampling::Uniform => None,
            NegativeSampling::Frequency => {
                let mut counts = vec![0.0f64; corpus.vocab_size()];
                for r in corpus.recipes() {
                    for id in r.ingredients() {
                        counts[id.index()] += 1.0;
                    }
                }
                WeightedIndex::new(counts.iter().map(|c| c.powf(0.75))).ok()
            }
        };
        NegativeSampler { vocab_size: corpus.vocab_size(), weighted }
    }

    fn draw_uniform(&self, target: IngredientId, rng: &mut impl Rng) -> IngredientId {
        let raw = rng.random_range(0..self.vocab_size - 1);
        IngredientId(if raw >= target.index() { raw + 1 } else { raw })
    }

    fn fill(&self, target: IngredientId, out: &mut [IngredientId], rng: &mut impl Rng) {
        for slot in out.iter_mut() {
            *slot = match &self.weighted {
                None => self.draw_uniform(target, rng),
                Some(dist) => (0..64)
                    .map(|_| IngredientId(dist.sample(rng)))
                    .find(|&id| id != target)
                    .unwrap_or_else(|| self.draw_uniform(target, rng)),
            };
        }
    }
}

/// Train on every recipe of `corpus` (normally the train split).
///
/// Each epoch visits recipes in corpus order and every ingredient of a
/// recipe as the target, with the remaining ingredients as context and
/// fresh negatives per visit. The learning rate decays linearly from
/// `learning_rate` to `final_learning_rate` over all visits.
pub fn train_embedding(corpus: &Corpus, cfg: &EmbeddingTrainConfig) -> Result<EmbeddingModel> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if corpus.vocab_size() < 2 {
        return Err(Error::Degenerate("negative sampling needs at least two ingredients".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = EmbeddingModel::initialized(corpus.vocab_size(), cfg.dim, corpus.vocab_hash(), &mut rng);
    let sampler = NegativeSampler::new(corpus, cfg.sampling);

    let visits_per_epoch: usize = corpus.recipes().iter().map(|r| r.len()).sum();
    let total = (visits_per_epoch * cfg.epochs).max(1) as f64;
    let mut visited = 0usize;

    let mut scratch = StepScratch::new(cfg.dim);
    let mut negatives = vec![IngredientId(0); cfg.negatives];
    let mut context: Vec<IngredientId> = Vec::new();
    for _ in 0..cfg.epochs {
        for recipe in corpus.recipes() {
            let ids: Vec<IngredientId> = recipe.ingredients().collect();
            for (a, &target) in ids.iter().enumerate() {
                context.clear();
                context.extend(ids.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, id)| *id));
                sampler.fill(target, &mut negatives, &mut rng);

                scratch.c.iter_mut().for_each(|v| *v = 0.0);
                for &id in &context {
                    axpy(1.0, model.context_row(id), &mut scratch.c);
                }
                let inv = 1.0 / context.len() as f64;
                scratch.c.iter_mut().for_each(|v| *v *= inv);

                let lr = cfg.learning_rate_at(visited as f64 / total);
                model.apply_step(target, &context, &negatives, lr, cfg.regularization, &mut scratch);
                visited += 1;
            }
        }
    }
    Ok(model)
}
