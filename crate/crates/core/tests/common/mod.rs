//! Random instance generators and brute-force reference implementations.
//! The oracles deliberately avoid the library's helpers so a shared bug
//! cannot hide.
#![allow(dead_code)]

pub mod checks;
pub mod pipeline;

use std::collections::BTreeSet;

use nutrec::amounts::AmountModel;
use nutrec::corpus::{Corpus, IngredientId, NutrientTable, NutrientVector, Recipe};
use nutrec::embedding::EmbeddingModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn id(i: usize) -> IngredientId {
    IngredientId(i)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_nutrients(rng: &mut ChaCha8Rng) -> NutrientVector {
    let protein = rng.random_range(0.0..30.0);
    let carbohydrates = rng.random_range(0.0..80.0);
    let sugars = rng.random_range(0.0..=carbohydrates);
    let fat = rng.random_range(0.0..40.0);
    let saturated_fat = rng.random_range(0.0..=fat);
    NutrientVector {
        protein,
        carbohydrates,
        sugars,
        fat,
        saturated_fat,
        sodium: rng.random_range(0.0..2.0),
        fiber: rng.random_range(0.0..15.0),
        energy: 4.0 * (protein + carbohydrates) + 9.0 * fat,
    }
}

pub fn random_table(m: usize, rng: &mut ChaCha8Rng) -> NutrientTable {
    NutrientTable::from_rows((0..m).map(|i| (format!("ing{i:02}"), random_nutrients(rng)))).unwrap()
}

/// Up to `max_recipes` recipes of 2..=6 distinct ingredients over `m`, with
/// integer gram amounts (so ties in similarity are common).
pub fn random_corpus(m: usize, n: usize, table: &NutrientTable, rng: &mut ChaCha8Rng) -> Corpus {
    let recipes = (0..n)
        .map(|r| {
            let size = rng.random_range(2..=6.min(m));
            let mut ids = BTreeSet::new();
            while ids.len() < size {
                ids.insert(rng.random_range(0..m));
            }
            let entries: Vec<(IngredientId, f64)> =
                ids.into_iter().map(|i| (id(i), rng.random_range(1..=20) as f64 * 10.0)).collect();
            Recipe::new(format!("r{r:02}"), entries).unwrap()
        })
        .collect();
    Corpus::new(recipes, table).unwrap()
}

pub fn random_instance(seed: u64) -> (NutrientTable, Corpus, ChaCha8Rng) {
    let mut rng = rng(seed);
    let m = rng.random_range(6..=15);
    let n = rng.random_range(5..=30);
    let table = random_table(m, &mut rng);
    let corpus = random_corpus(m, n, &table, &mut rng);
    (table, corpus, rng)
}

/// Distinct random ingredient set of the given size.
pub fn random_set(m: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<IngredientId> {
    let mut out = Vec::new();
    while out.len() < size {
        let i = id(rng.random_range(0..m));
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

pub fn random_embedding(m: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingModel {
    let target = (0..m * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let context = (0..m * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingModel::from_parts(dim, "random", target, context).unwrap()
}

/// Random network whose outputs land in a realistic gram range.
pub fn random_amount_model(m: usize, hidden: usize, rng: &mut ChaCha8Rng) -> AmountModel {
    let w1 = (0..m * hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b1 = (0..hidden).map(|_| rng.random_range(-0.5..0.5)).collect();
    let w2 = (0..hidden * m).map(|_| rng.random_range(-40.0..80.0)).collect();
    let b2 = (0..m).map(|_| rng.random_range(-20.0..60.0)).collect();
    AmountModel::from_parts(m, hidden, "random", w1, b1, w2, b2).unwrap()
}

/// Full ranking of every id outside `exclude`: descending score, ascending id.
pub fn oracle_sort(scores: &[f64], exclude: &[IngredientId]) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..scores.len())
        .filter(|i| !exclude.iter().any(|e| e.0 == *i))
        .map(|i| (i, scores[i]))
        .collect();
    // insertion sort keeps the oracle independent of the library comparator
    for k in 1..all.len() {
        let mut j = k;
        while j > 0 && {
            let (a, b) = (all[j - 1], all[j]);
            a.1 < b.1 || (a.1 == b.1 && a.0 > b.0)
        } {
            all.swap(j - 1, j);
            j -= 1;
        }
    }
    all
}

/// Ours must be a prefix of the oracle's full ranking. Where oracle scores
/// lie within `tol` of a neighbour, any order among them is accepted, since
/// rounding can legitimately reorder exact ties.
pub fn ranking_matches<K: PartialEq + std::fmt::Debug>(
    ours: &[(K, f64)],
    oracle: &[(K, f64)],
    tol: f64,
) -> Result<(), String> {
    if ours.len() > oracle.len() {
        return Err(format!("length {} exceeds {}", ours.len(), oracle.len()));
    }
    for (k, ((ok, os), (ek, es))) in ours.iter().zip(oracle).enumerate() {
        if (os - es).abs() > tol * (1.0 + es.abs()) {
            return Err(format!("position {k}: score {os} vs {es}"));
        }
        let near_tie = |j: usize| oracle.get(j).is_some_and(|(_, s)| (s - es).abs() <= tol * (1.0 + es.abs()));
        let tied = (k > 0 && near_tie(k - 1)) || near_tie(k + 1);
        if !tied && ok != ek {
            return Err(format!("position {k}: {ok:?} vs {ek:?}"));
        }
    }
    Ok(())
}

pub fn oracle_embedding_scores(model: &EmbeddingModel, given: &[IngredientId], m: usize) -> Vec<f64> {
    let d = model.dim();
    let mut c = vec![0.0; d];
    for g in given {
        for (k, v) in model.context_row(*g).iter().enumerate() {
            c[k] += v;
        }
    }
    for v in &mut c {
        *v /= given.len() as f64;
    }
    (0..m).map(|i| (0..d).map(|k| model.target_row(id(i))[k] * c[k]).sum()).collect()
}

/// Sum of pairwise co-occurrence counts, counted straight from the recipes.
pub fn oracle_graph_scores(corpus: &Corpus, given: &[IngredientId], m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| {
            given
                .iter()
                .filter(|g| g.0 != i)
                .map(|g| corpus.recipes().iter().filter(|r| r.contains(id(i)) && r.contains(*g)).count() as f64)
                .sum()
        })
        .collect()
}

/// Non-negative least squares `min |x - w H|` by enumerating every support
/// set of the `c <= 3` factors and solving the normal equations exactly.
pub fn oracle_nnls(h: &[f64], c: usize, m: usize, x: &[f64]) -> Vec<f64> {
    let row = |k: usize| &h[k * m..(k + 1) * m];
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let objective = |w: &[f64]| {
        (0..m)
            .map(|j| {
                let v: f64 = (0..c).map(|k| w[k] * h[k * m + j]).sum();
                (x[j] - v) * (x[j] - v)
            })
            .sum::<f64>()
    };
    let mut best = vec![0.0; c];
    let mut best_obj = objective(&best);
    for mask in 1u32..(1 << c) {
        let s: Vec<usize> = (0..c).filter(|k| mask & (1 << k) != 0).collect();
        let n = s.len();
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for (p, &kp) in s.iter().enumerate() {
            b[p] = dotp(row(kp), x);
            for (q, &kq) in s.iter().enumerate() {
                a[p * n + q] = dotp(row(kp), row(kq));
            }
        }
        let Some(sol) = cramer(&a, &b, n) else { continue };
        if sol.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut w = vec![0.0; c];
        for (p, &k) in s.iter().enumerate() {
            w[k] = sol[p];
        }
        let obj = objective(&w);
        if obj < best_obj - 1e-12 {
            best_obj = obj;
            best = w;
        }
    }
    best
}

fn det(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => unimplemented!("oracle supports up to 3 factors"),
    }
}

/// Cramer's rule; `None` for a (near-)singular system.
fn cramer(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let d = det(a, n);
    let scale: f64 = a.iter().map(|v| v.abs()).fold(0.0, f64::max).powi(n as i32);
    if d.abs() <= 1e-12 * scale.max(1e-300) {
        return None;
    }
    Some(
        (0..n)
            .map(|col| {
                let mut m = a.to_vec();
                for r in 0..n {
                    m[r * n + col] = b[r];
                }
                det(&m, n) / d
            })
            .collect(),
    )
}

/// Support of every `size`-subset of `0..m`, enumerated over the whole
/// vocabulary rather than over recipe contents.
pub fn oracle_frequent_sets(corpus: &Corpus, m: usize, size: usize, count: usize) -> Vec<(Vec<usize>, usize)> {
    fn subsets(m: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            subsets(m, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    subsets(m, size, 0, &mut Vec::new(), &mut all);
    let mut counted: Vec<(Vec<usize>, usize)> = all
        .into_iter()
        .map(|s| {
            let n = corpus.recipes().iter().filter(|r| s.iter().all(|&i| r.contains(id(i)))).count();
            (s, n)
        })
        .filter(|(_, n)| *n >= 2)
        .collect();
    // subsets were generated in lexicographic order; a stable sort on support keeps it
    counted.sort_by(|a, b| b.1.cmp(&a.1));
    counted.truncate(count);
    counted
}

pub fn oracle_nutrients(entries: &[(IngredientId, f64)], table: &NutrientTable) -> [f64; 7] {
    let mut out = [0.0; 7];
    for (i, g) in entries {
        let p = table.per_100g(*i).unwrap();
        let per = [p.protein, p.carbohydrates, p.sugars, p.fat, p.saturated_fat, p.sodium, p.fiber];
        for k in 0..7 {
            out[k] += per[k] * g / 100.0;
        }
    }
    out
}

pub fn oracle_mse(targets: &NutrientVector, got: [f64; 7]) -> f64 {
    let t = [
        targets.protein,
        targets.carbohydrates,
        targets.sugars,
        targets.fat,
        targets.saturated_fat,
        targets.sodium,
        targets.fiber,
    ];
    (0..7).map(|k| (t[k] - got[k]).powi(2)).sum::<f64>() / 7.0
}

/// MSE of `set` with amounts from the network's clamped output, read member by member.
pub fn oracle_set_mse(set: &[IngredientId], model: &AmountModel, table: &NutrientTable, targets: &NutrientVector) -> f64 {
    let out = model.predict_amounts(set).unwrap();
    let entries: Vec<(IngredientId, f64)> = set.iter().map(|&i| (i, out[i.0])).collect();
    oracle_mse(targets, oracle_nutrients(&entries, table))
}

/// Cosine over amount maps plus Jaccard over key sets, from scratch.
pub fn oracle_similarity(a: &[(IngredientId, f64)], b: &[(IngredientId, f64)], w: f64) -> f64 {
    let ka: BTreeSet<usize> = a.iter().map(|(i, _)| i.0).collect();
    let kb: BTreeSet<usize> = b.iter().map(|(i, _)| i.0).collect();
    let union: BTreeSet<usize> = ka.union(&kb).copied().collect();
    let get = |v: &[(IngredientId, f64)], k: usize| v.iter().find(|(i, _)| i.0 == k).map_or(0.0, |(_, g)| *g);
    let dotp: f64 = union.iter().map(|&k| get(a, k) * get(b, k)).sum();
    let na = union.iter().map(|&k| get(a, k).powi(2)).sum::<f64>().sqrt();
    let nb = union.iter().map(|&k| get(b, k).powi(2)).sum::<f64>().sqrt();
    let cos = if na == 0.0 || nb == 0.0 { 0.0 } else { dotp / (na * nb) };
    let jac = ka.intersection(&kb).count() as f64 / union.len() as f64;
    w * cos + (1.0 - w) * jac
}

/// Two-loop MAE: every recipe, every vocabulary position.
pub fn oracle_mae(model: &AmountModel, recipes: &[Recipe], m: usize) -> f64 {
    let mut total = 0.0;
    for r in recipes {
        let ids: Vec<IngredientId> = r.ingredients().collect();
        let pred = model.predict_amounts(&ids).unwrap();
        let mut err = 0.0;
        for j in 0..m {
            err += (pred[j] - r.grams(id(j))).abs();
        }
        total += err / m as f64;
    }
    total / recipes.len() as f64
}
