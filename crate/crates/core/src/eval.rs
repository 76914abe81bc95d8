//! Offline evaluation: leave-one-out ingredient ranking, amount MAE sweeps,
//! and the mean WHO score of recommendations seeded by frequent itemsets.

use std::collections::HashMap;
use std::io::Write;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amounts::{eval_mae, train_amounts, AmountModel, AmountTrainConfig};
use crate::corpus::{recipe_nutrients, Corpus, IngredientId, NutrientTable, Recipe};
use crate::error::{Error, Result};
use crate::nutrition::who_score;
use crate::par;
use crate::predictor::{rank_of, validate_given, IngredientPredictor};
use crate::recommender::{build_pseudo_recipe, recommend, RecommendConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTrial {
    pub recipe_id: String,
    pub removed: IngredientId,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    /// Percent of trials with the removed ingredient ranked 10 or better.
    pub pct_top10: f64,
    pub mean_rank: f64,
    pub median_rank: f64,
    pub trials: Vec<RankTrial>,
}

impl RankMetrics {
    pub fn from_trials(trials: Vec<RankTrial>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Empty("rank trials"));
        }
        let n = trials.len() as f64;
        let mut ranks: Vec<usize> = trials.iter().map(|t| t.rank).collect();
        ranks.sort_unstable();
        let mid = ranks.len() / 2;
        let median_rank = if ranks.len() % 2 == 1 {
            ranks[mid] as f64
        } else {
            (ranks[mid - 1] + ranks[mid]) as f64 / 2.0
        };
        Ok(RankMetrics {
            pct_top10: 100.0 * ranks.iter().filter(|&&r| r <= 10).count() as f64 / n,
            mean_rank: ranks.iter().sum::<usize>() as f64 / n,
            median_rank,
            trials,
        })
    }
}

/// Removal RNG for the `index`-th recipe: one ChaCha stream per recipe so
/// the draw does not depend on evaluation order.
fn removal_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Remove one seeded-random ingredient per recipe and rank it given the rest.
pub fn eval_missing_ingredient(
    predictor: &impl IngredientPredictor,
    recipes: &[Recipe],
    seed: u64,
) -> Result<RankMetrics> {
    let m = predictor.vocab_size();
    let trials = par::map_indexed(recipes, |i, r| -> Result<RankTrial> {
        let ids: Vec<IngredientId> = r.ingredients().collect();
        if ids.len() < 2 {
            return Err(Error::Degenerate(format!("recipe `{}` has fewer than 2 ingredients", r.id)));
        }
        let removed = ids[removal_rng(seed, i).random_range(0..ids.len())];
        let given: Vec<IngredientId> = ids.iter().copied().filter(|&g| g != removed).collect();
        let given = validate_given(&given, m)?;
        if removed.index() >= m {
            return Err(Error::IngredientOutOfRange { id: removed.index(), vocab_size: m });
        }
        let scores = predictor.scores(&given)?;
        Ok(RankTrial { recipe_id: r.id.clone(), removed, rank: rank_of(&scores, &given, removed) })
    });
    RankMetrics::from_trials(trials.into_iter().collect::<Result<_>>()?)
}

/// Uniformly random scores, reproducible for a given seed and input set.
#[derive(Debug, Clone)]
pub struct RandomRanker {
    pub vocab_size: usize,
    pub seed: u64,
}

impl IngredientPredictor for RandomRanker {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        // FNV-1a over the ids keys the stream to the query
        let key = given
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, id| (h ^ id.index() as u64).wrapping_mul(0x0100_0000_01b3));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ key);
        Ok((0..self.vocab_size).map(|_| rng.random::<f64>()).collect())
    }
}

/// Negated scores: the worst ranking the wrapped predictor can give.
pub struct Reversed<P>(pub P);

impl<P: IngredientPredictor> IngredientPredictor for Reversed<P> {
    fn vocab_size(&self) -> usize {
        self.0.vocab_size()
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        Ok(self.0.scores(given)?.into_iter().map(|s| -s).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequentItemsets {
    /// `(sorted ingredient set, support)`, most frequent first.
    pub sets: Vec<(Vec<IngredientId>, usize)>,
    /// Fewer than the requested number of sets reached support 2.
    pub short: bool,
}

/// The `count` most frequent `set_size`-subsets with support at least 2,
/// ties broken by lexicographic id order.
pub fn top_frequent_itemsets(corpus: &Corpus, set_size: usize, count: usize) -> Result<FrequentItemsets> {
    if set_size < 2 {
        return Err(Error::Config("frequent set size must be at least 2".into()));
    }
    let mut support: HashMap<Vec<usize>, usize> = HashMap::new();
    for ids in corpus.incidence() {
        for subset in ids.into_iter().combinations(set_size) {
            *support.entry(subset).or_default() += 1;
        }
    }
    let mut sets: Vec<(Vec<usize>, usize)> = support.into_iter().filter(|(_, s)| *s >= 2).collect();
    sets.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let short = sets.len() < count;
    sets.truncate(count);
    Ok(FrequentItemsets {
        sets: sets.into_iter().map(|(s, n)| (s.into_iter().map(IngredientId).collect(), n)).collect(),
        short,
    })
}

fn recipe_who(corpus: &Corpus, table: &NutrientTable) -> Result<Vec<u8>> {
    par::map(corpus.recipes(), |r| recipe_nutrients(r, table).map(|nv| who_score(&nv).value()))
        .into_iter()
        .collect()
}

fn baseline_from_scores(corpus: &Corpus, scores: &[u8], set: &[IngredientId]) -> Result<f64> {
    let (mut sum, mut n) = (0u64, 0u64);
    for (r, &s) in corpus.recipes().iter().zip(scores) {
        if set.iter().all(|&id| r.contains(id)) {
            sum += s as u64;
            n += 1;
        }
    }
    if n == 0 {
        let ids = set.iter().map(|id| id.to_string()).join(",");
        return Err(Error::Degenerate(format!("no recipe contains the ingredient set {{{ids}}}")));
    }
    Ok(sum as f64 / n as f64)
}

/// Mean WHO score of all recipes containing `set`.
pub fn random_draw_baseline(corpus: &Corpus, set: &[IngredientId], table: &NutrientTable) -> Result<f64> {
    baseline_from_scores(corpus, &recipe_who(corpus, table)?, set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutrecEvalConfig {
    pub recommend: RecommendConfig,
    pub cos_grid: Vec<f64>,
    /// Average per-set means instead of pooling every recommendation.
    pub per_set_mean: bool,
}

impl Default for NutrecEvalConfig {
    fn default() -> Self {
        NutrecEvalConfig {
            recommend: RecommendConfig::default(),
            cos_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            per_set_mean: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhoCell {
    pub predictor: String,
    pub cos_weight: f64,
    pub mean_who: f64,
    pub recommendations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhoReport {
    pub cells: Vec<WhoCell>,
    /// Mean over seed sets of the mean WHO of recipes containing the set.
    pub baseline_mean_who: f64,
    pub seed_sets: usize,
    pub min_who: Option<u8>,
}

impl WhoReport {
    pub fn cell(&self, predictor: &str, cos_weight: f64) -> Option<&WhoCell> {
        self.cells.iter().find(|c| c.predictor == predictor && c.cos_weight == cos_weight)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            predictor: &'a str,
            cos_weight: f64,
            mean_who: f64,
            baseline_mean_who: f64,
            recommendations: usize,
        }
        let mut w = csv::Writer::from_writer(writer);
        for c in &self.cells {
            w.serialize(Row {
                predictor: &c.predictor,
                cos_weight: c.cos_weight,
                mean_who: c.mean_who,
                baseline_mean_who: self.baseline_mean_who,
                recommendations: c.recommendations,
            })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// For every predictor and cosine weight: build a pseudo-recipe from each
/// seed set, retrieve `k` recipes from `corpus`, and average their WHO
/// scores. The pseudo-recipe does not depend on the cosine weight, so it is
/// built once per predictor and seed.
pub fn eval_nutrec(
    corpus: &Corpus,
    seed_sets: &[Vec<IngredientId>],
    predictors: &[(&str, &dyn IngredientPredictor)],
    amounts: &AmountModel,
    table: &NutrientTable,
    cfg: &NutrecEvalConfig,
    min_who: Option<u8>,
) -> Result<WhoReport> {
    if seed_sets.is_empty() {
        return Err(Error::Empty("seed sets"));
    }
    cfg.recommend.validate()?;
    for &w in &cfg.cos_grid {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Config(format!("cosine weight {w} outside [0, 1]")));
        }
    }
    let who = recipe_who(corpus, table)?;
    let mut baseline = 0.0;
    for set in seed_sets {
        baseline += baseline_from_scores(corpus, &who, set)?;
    }
    let baseline_mean_who = baseline / seed_sets.len() as f64;

    let mut cells = Vec::with_capacity(predictors.len() * cfg.cos_grid.len());
    for &(name, ip) in predictors {
        // per seed: WHO scores of the retrieved recipes for each grid weight
        let per_seed = par::map(seed_sets, |set| -> Result<Vec<Vec<u8>>> {
            let pseudo = build_pseudo_recipe(set, &ip, amounts, table, &cfg.recommend)?;
            cfg.cos_grid
                .iter()
                .map(|&w| {
                    let rc = RecommendConfig { cos_weight: w, ..cfg.recommend.clone() };
                    let recs = recommend(&pseudo, corpus, &rc)?;
                    Ok(recs.results.iter().map(|r| who[r.index]).collect())
                })
                .collect()
        });
        let per_seed: Vec<Vec<Vec<u8>>> = per_seed.into_iter().collect::<Result<_>>()?;
        for (g, &w) in cfg.cos_grid.iter().enumerate() {
            let lists = per_seed.iter().map(|s| &s[g]);
            let recommendations: usize = lists.clone().map(Vec::len).sum();
            let mean_who = if cfg.per_set_mean {
                lists.map(|l| mean_u8(l)).sum::<f64>() / seed_sets.len() as f64
            } else {
                lists.flatten().map(|&s| s as f64).sum::<f64>() / recommendations as f64
            };
            cells.push(WhoCell { predictor: name.to_string(), cos_weight: w, mean_who, recommendations });
        }
    }
    Ok(WhoReport { cells, baseline_mean_who, seed_sets: seed_sets.len(), min_who })
}

fn mean_u8(values: &[u8]) -> f64 {
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmountSweepRow {
    pub hidden_size: usize,
    pub batch_fraction: f64,
    pub train_mae: f64,
    pub validation_mae: f64,
}

/// Train one amount model per (hidden size, batch fraction) pair and report
/// train and validation MAE.
pub fn sweep_amounts(
    train: &Corpus,
    validation: &Corpus,
    table: &NutrientTable,
    base: &AmountTrainConfig,
    hidden_sizes: &[usize],
    batch_fractions: &[f64],
) -> Result<Vec<AmountSweepRow>> {
    let mut rows = Vec::with_capacity(hidden_sizes.len() * batch_fractions.len());
    for &hidden_size in hidden_sizes {
        for &batch_fraction in batch_fractions {
            let cfg = AmountTrainConfig { hidden_size, batch_fraction, ..base.clone() };
            let model = train_amounts(train, table, &cfg, None)?;
            rows.push(AmountSweepRow {
                hidden_size,
                batch_fraction,
                train_mae: eval_mae(&model, train.recipes())?,
                validation_mae: eval_mae(&model, validation.recipes())?,
            });
        }
    }
    Ok(rows)
}

/// Serialise rows with a header line to CSV.
pub fn write_csv_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
