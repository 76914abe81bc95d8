//! Amount predictor: a dense one-hidden-layer ReLU network from a binary
//! ingredient-presence vector to grams for every ingredient.
//!
//! Training minimises the mean absolute error between the raw (linear)
//! output and the recipe's gram vector, zeros included. Inference clamps the
//! output at zero.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{recipe_nutrients, Corpus, IngredientId, NutrientTable, Recipe};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::nutrition::who_score;
use crate::par;
use crate::persist;
use crate::predictor::{validate_given, IngredientPredictor};

pub const MODEL_KIND: &str = "nutrec-amounts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmountTrainConfig {
    pub hidden_size: usize,
    /// Mini-batch size as a percentage of the training set.
    pub batch_fraction: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AmountTrainConfig {
    fn default() -> Self {
        AmountTrainConfig {
            hidden_size: 512,
            batch_fraction: 9.0,
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 100,
            seed: 0,
        }
    }
}

impl AmountTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size < 1 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 100.0) {
            return Err(Error::Config("batch fraction must be in (0, 100]".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn batch_size(&self, n: usize) -> usize {
        ((self.batch_fraction / 100.0 * n as f64).round() as usize).clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmountModel {
    vocab_size: usize,
    hidden: usize,
    vocab_hash: String,
    /// `vocab_size x hidden`
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// `hidden x vocab_size`
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Parameter-shaped buffer, used for gradients and momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct AmountParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl AmountParams {
    fn zeros_like(model: &AmountModel) -> Self {
        AmountParams {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

struct Forward {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    raw: Vec<f64>,
}

impl AmountModel {
    pub fn zeros(vocab_size: usize, hidden: usize, vocab_hash: impl Into<String>) -> Self {
        AmountModel {
            vocab_size,
            hidden,
            vocab_hash: vocab_hash.into(),
            w1: vec![0.0; vocab_size * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * vocab_size],
            b2: vec![0.0; vocab_size],
        }
    }

    pub fn from_parts(
        vocab_size: usize,
        hidden: usize,
        vocab_hash: impl Into<String>,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        if w1.len() != vocab_size * hidden
            || b1.len() != hidden
            || w2.len() != hidden * vocab_size
            || b2.len() != vocab_size
        {
            return Err(Error::Config(format!(
                "weight shapes do not match a {vocab_size}-{hidden}-{vocab_size} network"
            )));
        }
        if [&w1, &b1, &w2, &b2].iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(Error::Config("amount network weights must be finite".into()));
        }
        Ok(AmountModel { vocab_size, hidden, vocab_hash: vocab_hash.into(), w1, b1, w2, b2 })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn initialized(vocab_size: usize, hidden: usize, vocab_hash: impl Into<String>, rng: &mut impl Rng) -> Self {
        let mut model = Self::zeros(vocab_size, hidden, vocab_hash);
        let limit = (6.0 / (vocab_size + hidden) as f64).sqrt();
        for v in model.w1.iter_mut().chain(model.w2.iter_mut()) {
            *v = rng.random_range(-limit..=limit);
        }
        model
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn params(&self) -> AmountParams {
        AmountParams { w1: self.w1.clone(), b1: self.b1.clone(), w2: self.w2.clone(), b2: self.b2.clone() }
    }

    pub fn set_params(&mut self, p: AmountParams) {
        assert_eq!(p.w1.len(), self.w1.len());
        assert_eq!(p.w2.len(), self.w2.len());
        self.w1 = p.w1;
        self.b1 = p.b1;
        self.w2 = p.w2;
        self.b2 = p.b2;
    }

    /// Scale the output layer; the raw output scales linearly with it.
    pub fn scale_output_layer(&mut self, factor: f64) {
        self.w2.iter_mut().for_each(|v| *v *= factor);
        self.b2.iter_mut().for_each(|v| *v *= factor);
    }

    fn forward_ids(&self, present: impl Iterator<Item = usize>) -> Forward {
        let h = self.hidden;
        let mut pre = self.b1.clone();
        for i in present {
            axpy(1.0, &self.w1[i * h..(i + 1) * h], &mut pre);
        }
        let hidden: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();
        let mut raw = self.b2.clone();
        for (k, &a) in hidden.iter().enumerate() {
            if a != 0.0 {
                axpy(a, &self.w2[k * self.vocab_size..(k + 1) * self.vocab_size], &mut raw);
            }
        }
        Forward { pre, hidden, raw }
    }

    /// Linear output before the clamp.
    pub fn raw_output(&self, present: &[IngredientId]) -> Result<Vec<f64>> {
        let present = validate_given(present, self.vocab_size)?;
        Ok(self.forward_ids(present.iter().map(|id| id.index())).raw)
    }

    /// Predicted grams for all `m` ingredients given the present set.
    pub fn predict_amounts(&self, present: &[IngredientId]) -> Result<Vec<f64>> {
        let mut out = self.raw_output(present)?;
        out.iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(out)
    }

    /// Mean absolute error of the raw output over all `m` positions,
    /// averaged over `recipes`. This is the training loss.
    pub fn training_loss(&self, recipes: &[&Recipe]) -> f64 {
        self.batch_gradient(recipes).0
    }

    /// Training loss and its (sub)gradient over `recipes`, with
    /// `sign(0) = 0` at the MAE kink and `ReLU'(0) = 0`.
    pub fn batch_gradient(&self, recipes: &[&Recipe]) -> (f64, AmountParams) {
        let (m, h) = (self.vocab_size, self.hidden);
        let mut grad = AmountParams::zeros_like(self);
        if recipes.is_empty() {
            return (0.0, grad);
        }
        let scale = 1.0 / (m as f64 * recipes.len() as f64);

        struct Example {
            pre: Vec<f64>,
            hidden: Vec<f64>,
            out_grad: Vec<f64>,
            loss: f64,
        }
        let examples: Vec<Example> = par::map(recipes, |r| {
            let f = self.forward_ids(r.ingredients().map(IngredientId::index));
            let mut target = vec![0.0; m];
            for e in r.entries() {
                target[e.ingredient.index()] = e.grams;
            }
            let mut loss = 0.0;
            let out_grad = f
                .raw
                .iter()
                .zip(&target)
                .map(|(o, y)| {
                    let d = o - y;
                    loss += d.abs();
                    scale * if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 }
                })
                .collect();
            Example { pre: f.pre, hidden: f.hidden, out_grad, loss: loss * scale }
        });
        let loss = examples.iter().map(|e| e.loss).sum();

        par::for_each_row_mut(&mut grad.w2, m, |k, row| {
            for ex in &examples {
                if ex.hidden[k] != 0.0 {
                    axpy(ex.hidden[k], &ex.out_grad, row);
                }
            }
        });
        for ex in &examples {
            axpy(1.0, &ex.out_grad, &mut grad.b2);
        }

        let pre_grads: Vec<Vec<f64>> = par::map(&examples, |ex| {
            (0..h)
                .map(|k| {
                    if ex.pre[k] > 0.0 {
                        dot(&self.w2[k * m..(k + 1) * m], &ex.out_grad)
                    } else {
                        0.0
                    }
                })
                .collect()
        });
        for (r, dz) in recipes.iter().zip(&pre_grads) {
            axpy(1.0, dz, &mut grad.b1);
            for id in r.ingredients() {
                axpy(1.0, dz, &mut grad.w1[id.index() * h..(id.index() + 1) * h]);
            }
        }
        (loss, grad)
    }

    fn descend(&mut self, grad: &AmountParams, velocity: &mut AmountParams, lr: f64, momentum: f64) {
        let pairs = [
            (&mut self.w1, &grad.w1, &mut velocity.w1),
            (&mut self.b1, &grad.b1, &mut velocity.b1),
            (&mut self.w2, &grad.w2, &mut velocity.w2),
            (&mut self.b2, &grad.b2, &mut velocity.b2),
        ];
        for (param, g, vel) in pairs {
            for ((p, gi), v) in param.iter_mut().zip(g.iter()).zip(vel.iter_mut()) {
                *v = momentum * *v - lr * gi;
                *p += *v;
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        persist::save(path, MODEL_KIND, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = persist::load(path, MODEL_KIND)?;
        Self::from_parts(m.vocab_size, m.hidden, m.vocab_hash, m.w1, m.b1, m.w2, m.b2)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        persist::to_bytes(MODEL_KIND, self)
    }
}

/// IP-MLP: ranks ingredients by their predicted amount.
impl IngredientPredictor for AmountModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        self.predict_amounts(given)
    }
}

/// Train on the recipes of `corpus`, restricted to recipes whose WHO score
/// exceeds `min_who` when given.
pub fn train_amounts(
    corpus: &Corpus,
    table: &NutrientTable,
    cfg: &AmountTrainConfig,
    min_who: Option<u8>,
) -> Result<AmountModel> {
    cfg.validate()?;
    corpus.check_compatible(table)?;
    let mut recipes: Vec<&Recipe> = corpus.recipes().iter().collect();
    if let Some(min) = min_who {
        let mut kept = Vec::with_capacity(recipes.len());
        for r in recipes {
            if who_score(&recipe_nutrients(r, table)?).value() > min {
                kept.push(r);
            }
        }
        recipes = kept;
        if recipes.is_empty() {
            return Err(Error::Degenerate(format!("no training recipe has a WHO score above {min}")));
        }
    }
    if recipes.is_empty() {
        return Err(Error::Empty("training corpus"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = AmountModel::initialized(corpus.vocab_size(), cfg.hidden_size, corpus.vocab_hash(), &mut rng);
    let mut velocity = AmountParams::zeros_like(&model);
    let batch = cfg.batch_size(recipes.len());
    let mut order: Vec<usize> = (0..recipes.len()).collect();
    let mut buf: Vec<&Recipe> = Vec::with_capacity(batch);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            buf.clear();
            buf.extend(chunk.iter().map(|&i| recipes[i]));
            let (_, grad) = model.batch_gradient(&buf);
            model.descend(&grad, &mut velocity, cfg.learning_rate, cfg.momentum);
        }
    }
    Ok(model)
}

/// Mean over recipes of the mean absolute error across all `m` positions
/// of the clamped prediction; absent ingredients count as 0 g.
pub fn eval_mae(model: &AmountModel, recipes: &[Recipe]) -> Result<f64> {
    if recipes.is_empty() {
        return Err(Error::Empty("recipe list"));
    }
    let m = model.vocab_size;
    let per_recipe = par::map(recipes, |r| -> Result<f64> {
        let ids: Vec<IngredientId> = r.ingredients().collect();
        let pred = model.predict_amounts(&ids)?;
        let mut err: f64 = pred.iter().sum();
        for e in r.entries() {
            let p = pred[e.ingredient.index()];
            err += (p - e.grams).abs() - p;
        }
        Ok(err / m as f64)
    });
    let mut total = 0.0;
    for v in per_recipe {
        total += v?;
    }
    Ok(total / recipes.len() as f64)
}
