//! The ingredient-predictor abstraction shared by IP-embedding and the baselines.

use std::cmp::Ordering;

use crate::corpus::IngredientId;
use crate::error::{Error, Result};

/// Scores every ingredient in the vocabulary for compatibility with a
/// partial ingredient set. Higher is better.
pub trait IngredientPredictor: Sync {
    fn vocab_size(&self) -> usize;

    /// One score per vocabulary entry. `given` has been validated by the caller
    /// or by [`IngredientPredictor::rank`].
    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>>;

    /// The `top_n` best ingredients not in `given`.
    fn rank(&self, given: &[IngredientId], top_n: usize) -> Result<Vec<(IngredientId, f64)>> {
        let given = validate_given(given, self.vocab_size())?;
        let scores = self.scores(&given)?;
        Ok(rank_scores(&scores, &given, top_n))
    }
}

impl<P: IngredientPredictor + ?Sized> IngredientPredictor for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        (**self).scores(given)
    }
}

/// Distinct, in-range, non-empty; first-occurrence order kept.
pub fn validate_given(given: &[IngredientId], vocab_size: usize) -> Result<Vec<IngredientId>> {
    if given.is_empty() {
        return Err(Error::Empty("ingredient set"));
    }
    let mut out: Vec<IngredientId> = Vec::with_capacity(given.len());
    for &id in given {
        if id.index() >= vocab_size {
            return Err(Error::IngredientOutOfRange { id: id.index(), vocab_size });
        }
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// Descending by score, ties broken by ascending id.
#[inline]
pub fn ranking_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Sort all ingredients outside `exclude` by score and keep the first `top_n`.
pub fn rank_scores(scores: &[f64], exclude: &[IngredientId], top_n: usize) -> Vec<(IngredientId, f64)> {
    let mut excluded = vec![false; scores.len()];
    for id in exclude {
        if let Some(slot) = excluded.get_mut(id.index()) {
            *slot = true;
        }
    }
    let mut ranked: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded[*i])
        .map(|(i, &s)| (i, s))
        .collect();
    ranked.sort_unstable_by(|a, b| ranking_order(*a, *b));
    ranked.truncate(top_n);
    ranked.into_iter().map(|(i, s)| (IngredientId(i), s)).collect()
}

/// 1-based position of `target` in the full ranking of [`rank_scores`].
pub fn rank_of(scores: &[f64], exclude: &[IngredientId], target: IngredientId) -> usize {
    let t = (target.index(), scores[target.index()]);
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != t.0 && !exclude.iter().any(|e| e.index() == *i))
        .filter(|(i, s)| ranking_order((*i, **s), t) == Ordering::Less)
        .count();
    ahead + 1
}
