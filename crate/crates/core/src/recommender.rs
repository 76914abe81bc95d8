//! Greedy pseudo-recipe construction toward daily nutrient targets, and
//! retrieval of the most similar corpus recipes.

use serde::{Deserialize, Serialize};

use crate::amounts::AmountModel;
use crate::corpus::{entries_nutrients, recipe_nutrients, Corpus, IngredientId, NutrientTable, NutrientVector, Recipe};
use crate::error::{Error, Result};
use crate::nutrition::{default_targets, who_score};
use crate::par;
use crate::predictor::{validate_given, IngredientPredictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendConfig {
    /// Maximum number of ingredients added to the initial set.
    pub n: usize,
    /// Number of recipes returned.
    pub k: usize,
    /// Weight of the amount cosine against the set Jaccard, in `[0, 1]`.
    pub cos_weight: f64,
    /// How many of the predictor's top candidates are scored per greedy step.
    pub candidate_pool: usize,
    pub targets: NutrientVector,
    /// Multiplies the targets, e.g. to aim at a single meal instead of a day.
    pub target_scale: f64,
    /// Relative squared error per nutrient instead of raw grams.
    pub normalized_mse: bool,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            n: 5,
            k: 10,
            cos_weight: 0.9,
            candidate_pool: 20,
            targets: default_targets(),
            target_scale: 1.0,
            normalized_mse: false,
        }
    }
}

impl RecommendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cos_weight) {
            return Err(Error::Config("cosine weight must be in [0, 1]".into()));
        }
        if self.candidate_pool < 1 {
            return Err(Error::Config("candidate pool must be at least 1".into()));
        }
        if !(self.target_scale > 0.0 && self.target_scale.is_finite()) {
            return Err(Error::Config("target scale must be positive".into()));
        }
        if !self.targets.is_valid() {
            return Err(Error::Config("targets must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn effective_targets(&self) -> NutrientVector {
        self.targets.scaled(self.target_scale)
    }

    fn mse(&self, predicted: &NutrientVector) -> f64 {
        let targets = self.effective_targets();
        if self.normalized_mse {
            normalized_mse(&targets, predicted)
        } else {
            candidate_mse(&targets, predicted)
        }
    }
}

/// Mean squared difference over the seven macro-nutrients; energy is ignored.
pub fn candidate_mse(targets: &NutrientVector, predicted: &NutrientVector) -> f64 {
    let (t, p) = (targets.macros(), predicted.macros());
    t.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64
}

/// Like [`candidate_mse`] but each difference is divided by its target
/// (left unscaled where the target is zero).
pub fn normalized_mse(targets: &NutrientVector, predicted: &NutrientVector) -> f64 {
    let (t, p) = (targets.macros(), predicted.macros());
    t.iter()
        .zip(&p)
        .map(|(a, b)| {
            let d = if *a > 0.0 { (a - b) / a } else { a - b };
            d * d
        })
        .sum::<f64>()
        / t.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRecipe {
    /// Initial ingredients first, then additions in greedy order.
    pub ingredients: Vec<IngredientId>,
    /// Grams per member, aligned with `ingredients`.
    pub amounts: Vec<f64>,
    pub nutrients: NutrientVector,
    pub initial_len: usize,
    /// MSE of the initial set before any addition.
    pub initial_mse: f64,
    /// MSE after each accepted addition.
    pub mse_trace: Vec<f64>,
}

impl PseudoRecipe {
    pub fn added(&self) -> &[IngredientId] {
        &self.ingredients[self.initial_len..]
    }

    pub fn final_mse(&self) -> f64 {
        self.mse_trace.last().copied().unwrap_or(self.initial_mse)
    }

    pub fn entries(&self) -> impl Iterator<Item = (IngredientId, f64)> + '_ {
        self.ingredients.iter().copied().zip(self.amounts.iter().copied())
    }
}

/// Predicted member amounts and their nutrient totals. Outputs for
/// ingredients outside `set` are dropped.
fn set_profile(set: &[IngredientId], amounts: &AmountModel, table: &NutrientTable) -> Result<(Vec<f64>, NutrientVector)> {
    let all = amounts.predict_amounts(set)?;
    let grams: Vec<f64> = set.iter().map(|id| all[id.index()]).collect();
    let nutrients = entries_nutrients(set.iter().copied().zip(grams.iter().copied()), table)?;
    Ok((grams, nutrients))
}

fn check_vocab(ip: &impl IngredientPredictor, amounts: &AmountModel, table: &NutrientTable) -> Result<()> {
    let m = table.len();
    if ip.vocab_size() != m || amounts.vocab_size() != m {
        return Err(Error::Incompatible(format!(
            "vocabulary sizes differ: table {m}, predictor {}, amount model {}",
            ip.vocab_size(),
            amounts.vocab_size()
        )));
    }
    Ok(())
}

fn best_candidate(
    set: &[IngredientId],
    current_mse: f64,
    ip: &impl IngredientPredictor,
    amounts: &AmountModel,
    table: &NutrientTable,
    cfg: &RecommendConfig,
) -> Result<Option<(IngredientId, f64)>> {
    let candidates = ip.rank(set, cfg.candidate_pool)?;
    let scored = par::map(&candidates, |&(cand, _)| -> Result<(IngredientId, f64)> {
        let mut with = set.to_vec();
        with.push(cand);
        let (_, nutrients) = set_profile(&with, amounts, table)?;
        Ok((cand, cfg.mse(&nutrients)))
    });
    let mut best: Option<(IngredientId, f64)> = None;
    for item in scored {
        let (cand, mse) = item?;
        let better = match best {
            None => true,
            Some((b, bm)) => mse.total_cmp(&bm).then(cand.cmp(&b)).is_lt(),
        };
        if better {
            best = Some((cand, mse));
        }
    }
    Ok(best.filter(|(_, mse)| *mse < current_mse))
}

/// The candidate among the predictor's top `candidate_pool` whose inclusion
/// gives the lowest MSE, if it beats the current set.
pub fn find_best_ingredient(
    set: &[IngredientId],
    ip: &impl IngredientPredictor,
    amounts: &AmountModel,
    table: &NutrientTable,
    cfg: &RecommendConfig,
) -> Result<Option<(IngredientId, f64)>> {
    cfg.validate()?;
    check_vocab(ip, amounts, table)?;
    let set = validate_given(set, table.len())?;
    let (_, nutrients) = set_profile(&set, amounts, table)?;
    best_candidate(&set, cfg.mse(&nutrients), ip, amounts, table, cfg)
}

/// Grow `initial` by up to `n` greedy additions, stopping once no candidate
/// lowers the MSE.
pub fn build_pseudo_recipe(
    initial: &[IngredientId],
    ip: &impl IngredientPredictor,
    amounts: &AmountModel,
    table: &NutrientTable,
    cfg: &RecommendConfig,
) -> Result<PseudoRecipe> {
    cfg.validate()?;
    check_vocab(ip, amounts, table)?;
    let mut set = validate_given(initial, table.len())?;
    let initial_len = set.len();
    let (_, nutrients) = set_profile(&set, amounts, table)?;
    let initial_mse = cfg.mse(&nutrients);
    let mut current = initial_mse;
    let mut mse_trace = Vec::new();
    for _ in 0..cfg.n {
        match best_candidate(&set, current, ip, amounts, table, cfg)? {
            Some((cand, mse)) => {
                set.push(cand);
                current = mse;
                mse_trace.push(mse);
            }
            None => break,
        }
    }
    let (amounts, nutrients) = set_profile(&set, amounts, table)?;
    Ok(PseudoRecipe { ingredients: set, amounts, nutrients, initial_len, initial_mse, mse_trace })
}

/// `cos_weight * cosine(amounts) + (1 - cos_weight) * jaccard(sets)` for two
/// ingredient-amount lists. Cosine is 0 when either amount vector is zero.
pub fn similarity_of_entries(a: &[(IngredientId, f64)], b: &[(IngredientId, f64)], cos_weight: f64) -> f64 {
    let mut dot = 0.0;
    let mut shared = 0usize;
    for (ia, ga) in a {
        if let Some((_, gb)) = b.iter().find(|(ib, _)| ib == ia) {
            dot += ga * gb;
            shared += 1;
        }
    }
    let na: f64 = a.iter().map(|(_, g)| g * g).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|(_, g)| g * g).sum::<f64>().sqrt();
    let cosine = if na > 0.0 && nb > 0.0 { dot / (na * nb) } else { 0.0 };
    let union = a.len() + b.len() - shared;
    let jaccard = if union > 0 { shared as f64 / union as f64 } else { 0.0 };
    (cos_weight * cosine + (1.0 - cos_weight) * jaccard).clamp(0.0, 1.0)
}

pub fn similarity(pseudo: &PseudoRecipe, recipe: &Recipe, cos_weight: f64) -> f64 {
    let a: Vec<(IngredientId, f64)> = pseudo.entries().collect();
    let b: Vec<(IngredientId, f64)> = recipe.entries().iter().map(|e| (e.ingredient, e.grams)).collect();
    similarity_of_entries(&a, &b, cos_weight)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecipe {
    /// Position in the corpus.
    pub index: usize,
    pub id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendations {
    pub results: Vec<RankedRecipe>,
    /// Set when `k` exceeded the corpus size and every recipe was returned.
    pub truncated: bool,
}

/// Top-`k` corpus recipes by similarity to the pseudo-recipe, ties by
/// ascending recipe id.
pub fn recommend(pseudo: &PseudoRecipe, corpus: &Corpus, cfg: &RecommendConfig) -> Result<Recommendations> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let m = corpus.vocab_size();
    let mut dense = vec![0.0; m];
    let mut member = vec![false; m];
    for (id, grams) in pseudo.entries() {
        if id.index() >= m {
            return Err(Error::IngredientOutOfRange { id: id.index(), vocab_size: m });
        }
        dense[id.index()] = grams;
        member[id.index()] = true;
    }
    let pseudo_norm = dense.iter().map(|g| g * g).sum::<f64>().sqrt();
    let pseudo_len = pseudo.ingredients.len();

    let sims = par::map(corpus.recipes(), |r| {
        let (mut dot, mut sq, mut shared) = (0.0, 0.0, 0usize);
        for e in r.entries() {
            let i = e.ingredient.index();
            dot += dense[i] * e.grams;
            sq += e.grams * e.grams;
            shared += member[i] as usize;
        }
        let norm = sq.sqrt();
        let cosine = if pseudo_norm > 0.0 && norm > 0.0 { dot / (pseudo_norm * norm) } else { 0.0 };
        let jaccard = shared as f64 / (pseudo_len + r.len() - shared) as f64;
        (cfg.cos_weight * cosine + (1.0 - cfg.cos_weight) * jaccard).clamp(0.0, 1.0)
    });
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let recipes = corpus.recipes();
    order.sort_unstable_by(|&a, &b| sims[b].total_cmp(&sims[a]).then_with(|| recipes[a].id.cmp(&recipes[b].id)));
    let truncated = cfg.k > corpus.len();
    order.truncate(cfg.k);
    let results = order
        .into_iter()
        .map(|i| RankedRecipe { index: i, id: recipes[i].id.clone(), similarity: sims[i] })
        .collect();
    Ok(Recommendations { results, truncated })
}

/// The full pipeline: build the pseudo-recipe, then retrieve.
pub fn nutrec_recommend(
    initial: &[IngredientId],
    ip: &impl IngredientPredictor,
    amounts: &AmountModel,
    corpus: &Corpus,
    table: &NutrientTable,
    cfg: &RecommendConfig,
) -> Result<(PseudoRecipe, Recommendations)> {
    let pseudo = build_pseudo_recipe(initial, ip, amounts, table, cfg)?;
    let recs = recommend(&pseudo, corpus, cfg)?;
    Ok((pseudo, recs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportIngredient {
    pub name: String,
    pub grams: f64,
    pub added: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRecipeReport {
    pub ingredients: Vec<ReportIngredient>,
    pub nutrients: NutrientVector,
    pub who_score: u8,
    pub initial_mse: f64,
    pub mse_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResult {
    pub rank: usize,
    pub recipe_id: String,
    pub similarity: f64,
    pub who_score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationReport {
    pub query: Vec<String>,
    pub config: RecommendConfig,
    pub pseudo_recipe: PseudoRecipeReport,
    pub results: Vec<ReportResult>,
    pub truncated: bool,
}

impl RecommendationReport {
    pub fn new(
        pseudo: &PseudoRecipe,
        recs: &Recommendations,
        corpus: &Corpus,
        table: &NutrientTable,
        cfg: &RecommendConfig,
    ) -> Result<Self> {
        let name = |id: IngredientId| table.name(id).unwrap_or("?").to_string();
        let ingredients = pseudo
            .entries()
            .enumerate()
            .map(|(i, (id, grams))| ReportIngredient { name: name(id), grams, added: i >= pseudo.initial_len })
            .collect();
        let mut results = Vec::with_capacity(recs.results.len());
        for (rank, r) in recs.results.iter().enumerate() {
            let nv = recipe_nutrients(&corpus.recipes()[r.index], table)?;
            results.push(ReportResult {
                rank: rank + 1,
                recipe_id: r.id.clone(),
                similarity: r.similarity,
                who_score: who_score(&nv).value(),
            });
        }
        Ok(RecommendationReport {
            query: pseudo.ingredients[..pseudo.initial_len].iter().map(|&id| name(id)).collect(),
            config: cfg.clone(),
            pseudo_recipe: PseudoRecipeReport {
                ingredients,
                nutrients: pseudo.nutrients,
                who_score: who_score(&pseudo.nutrients).value(),
                initial_mse: pseudo.initial_mse,
                mse_trace: pseudo.mse_trace.clone(),
            },
            results,
            truncated: recs.truncated,
        })
    }
}
