//! Competitor ingredient predictors: co-occurrence graph (IP-graph),
//! amount-network ranking (IP-MLP) and non-negative matrix factorisation
//! with least-squares fold-in (IP-NMF).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amounts::AmountModel;
use crate::corpus::{Corpus, IngredientId};
use crate::error::{Error, Result};
use crate::linalg::nnls_gram;
use crate::par;
use crate::predictor::{validate_given, IngredientPredictor};

/// Symmetric co-occurrence counts over the training recipes; zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceGraph {
    vocab_size: usize,
    weights: Vec<u32>,
}

impl CooccurrenceGraph {
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn weight(&self, a: IngredientId, b: IngredientId) -> u32 {
        self.weights[a.index() * self.vocab_size + b.index()]
    }
}

pub fn build_cooccurrence_graph(corpus: &Corpus) -> CooccurrenceGraph {
    let m = corpus.vocab_size();
    let mut weights = vec![0u32; m * m];
    for recipe in corpus.recipes() {
        let ids: Vec<usize> = recipe.ingredients().map(IngredientId::index).collect();
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                weights[a * m + b] += 1;
                weights[b * m + a] += 1;
            }
        }
    }
    CooccurrenceGraph { vocab_size: m, weights }
}

/// score(i) = sum of edge weights from i to every given ingredient.
impl IngredientPredictor for CooccurrenceGraph {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        let m = self.vocab_size;
        let mut scores = vec![0.0; m];
        for g in given {
            let row = &self.weights[g.index() * m..(g.index() + 1) * m];
            for (s, &w) in scores.iter_mut().zip(row) {
                *s += w as f64;
            }
        }
        Ok(scores)
    }
}

pub fn ipgraph_predict(
    graph: &CooccurrenceGraph,
    given: &[IngredientId],
    top_n: usize,
) -> Result<Vec<(IngredientId, f64)>> {
    graph.rank(given, top_n)
}

pub fn ipmlp_predict(
    model: &AmountModel,
    given: &[IngredientId],
    top_n: usize,
) -> Result<Vec<(IngredientId, f64)>> {
    model.rank(given, top_n)
}

/// Binary recipe-ingredient matrix stored as sorted column lists per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: Vec<Vec<usize>>,
    cols: usize,
}

impl BinaryMatrix {
    pub fn new(mut rows: Vec<Vec<usize>>, cols: usize) -> Result<Self> {
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if row.last().is_some_and(|&j| j >= cols) {
                return Err(Error::Config(format!("column index out of range for {cols} columns")));
            }
        }
        Ok(BinaryMatrix { rows, cols })
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        BinaryMatrix { rows: corpus.incidence(), cols: corpus.vocab_size() }
    }

    /// From a dense 0/1 matrix given row by row.
    pub fn from_dense(dense: &[Vec<u8>]) -> Result<Self> {
        let cols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0).map(|(j, _)| j).collect())
            .collect();
        Self::new(rows, cols)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub factors: usize,
    pub iterations: usize,
    /// Stop once the relative drop in reconstruction error falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig { factors: 2, iterations: 200, tolerance: 1e-6, seed: 0 }
    }
}

/// `X ≈ W H` with `W: u x c`, `H: c x m`, all entries non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfFactors {
    rows: usize,
    cols: usize,
    factors: usize,
    w: Vec<f64>,
    h: Vec<f64>,
    /// Frobenius error `|X - WH|` after initialisation and after every iteration.
    errors: Vec<f64>,
}

const MU_EPS: f64 = 1e-12;

impl NmfFactors {
    pub fn from_parts(rows: usize, cols: usize, factors: usize, w: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if w.len() != rows * factors || h.len() != factors * cols {
            return Err(Error::Config("factor shapes do not match".into()));
        }
        if w.iter().chain(&h).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("factors must be finite and non-negative".into()));
        }
        Ok(NmfFactors { rows, cols, factors, w, h, errors: Vec::new() })
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn error_trace(&self) -> &[f64] {
        &self.errors
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }

    /// Row `r` of `W H`.
    pub fn reconstruct_row(&self, r: usize) -> Vec<f64> {
        let (c, m) = (self.factors, self.cols);
        let mut out = vec![0.0; m];
        for k in 0..c {
            let wk = self.w[r * c + k];
            for (o, hk) in out.iter_mut().zip(&self.h[k * m..(k + 1) * m]) {
                *o += wk * hk;
            }
        }
        out
    }

    pub fn reconstruction_error(&self, x: &BinaryMatrix) -> f64 {
        reconstruction_error(x, &self.w, &self.h, self.factors)
    }

    /// Non-negative coefficients `w` minimising `|x - w H|` for the binary
    /// indicator `x` of `given`.
    pub fn fold_in(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        let (c, m) = (self.factors, self.cols);
        if self.h.iter().all(|v| *v == 0.0) {
            return Err(Error::Degenerate("NMF basis H is all zero".into()));
        }
        let gram: Vec<f64> = (0..c)
            .flat_map(|a| {
                (0..c).map(move |b| {
                    let ha = &self.h[a * m..(a + 1) * m];
                    let hb = &self.h[b * m..(b + 1) * m];
                    ha.iter().zip(hb).map(|(x, y)| x * y).sum::<f64>()
                })
            })
            .collect();
        let f: Vec<f64> = (0..c)
            .map(|k| given.iter().map(|g| self.h[k * m + g.index()]).sum())
            .collect();
        Ok(nnls_gram(&gram, &f, c))
    }
}

impl IngredientPredictor for NmfFactors {
    fn vocab_size(&self) -> usize {
        self.cols
    }

    fn scores(&self, given: &[IngredientId]) -> Result<Vec<f64>> {
        let given = validate_given(given, self.cols)?;
        let w = self.fold_in(&given)?;
        let m = self.cols;
        let mut scores = vec![0.0; m];
        for (k, wk) in w.iter().enumerate() {
            for (s, hk) in scores.iter_mut().zip(&self.h[k * m..(k + 1) * m]) {
                *s += wk * hk;
            }
        }
        Ok(scores)
    }
}

pub fn ipnmf_predict(
    factors: &NmfFactors,
    given: &[IngredientId],
    top_n: usize,
) -> Result<Vec<(IngredientId, f64)>> {
    factors.rank(given, top_n)
}

fn reconstruction_error(x: &BinaryMatrix, w: &[f64], h: &[f64], c: usize) -> f64 {
    let m = x.cols;
    let per_row: Vec<f64> = par::map_indexed(&x.rows, |r, cols| {
        let wr = &w[r * c..(r + 1) * c];
        let mut next = cols.iter().peekable();
        let mut sq = 0.0;
        for j in 0..m {
            let v: f64 = (0..c).map(|k| wr[k] * h[k * m + j]).sum();
            let target = if next.peek() == Some(&&j) {
                next.next();
                1.0
            } else {
                0.0
            };
            sq += (target - v) * (target - v);
        }
        sq
    });
    per_row.iter().sum::<f64>().sqrt()
}

/// Frobenius NMF by Lee-Seung multiplicative updates (H first, then W),
/// starting from a seeded uniform non-negative initialisation. The error is
/// non-increasing across iterations.
pub fn nmf_factorize(x: &BinaryMatrix, cfg: &NmfConfig) -> Result<NmfFactors> {
    let (u, m, c) = (x.n_rows(), x.n_cols(), cfg.factors);
    if c < 1 || c > u.min(m) {
        return Err(Error::Config(format!(
            "number of factors {c} must be in [1, {}]",
            u.min(m)
        )));
    }
    let nnz: usize = x.rows.iter().map(Vec::len).sum();
    let scale = 2.0 * (nnz as f64 / (u * m) as f64 / c as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w: Vec<f64> = (0..u * c).map(|_| scale * rng.random::<f64>()).collect();
    let mut h: Vec<f64> = (0..c * m).map(|_| scale * rng.random::<f64>()).collect();

    let mut errors = vec![reconstruction_error(x, &w, &h, c)];
    for _ in 0..cfg.iterations {
        // H <- H * (Wᵀ X) / (Wᵀ W H)
        let wtw = gram_rows(&w, u, c);
        let mut wtx = vec![0.0; c * m];
        for (r, cols) in x.rows.iter().enumerate() {
            for k in 0..c {
                let wrk = w[r * c + k];
                for &j in cols {
                    wtx[k * m + j] += wrk;
                }
            }
        }
        let h_old = h.clone();
        for k in 0..c {
            for j in 0..m {
                let denom: f64 = (0..c).map(|l| wtw[k * c + l] * h_old[l * m + j]).sum();
                h[k * m + j] = h_old[k * m + j] * wtx[k * m + j] / (denom + MU_EPS);
            }
        }

        // W <- W * (X Hᵀ) / (W H Hᵀ)
        let hht: Vec<f64> = (0..c)
            .flat_map(|a| {
                let h = &h;
                (0..c).map(move |b| (0..m).map(|j| h[a * m + j] * h[b * m + j]).sum::<f64>())
            })
            .collect();
        par::for_each_row_mut(&mut w, c, |r, wr| {
            let old = wr.to_vec();
            for k in 0..c {
                let num: f64 = x.rows[r].iter().map(|&j| h[k * m + j]).sum();
                let denom: f64 = (0..c).map(|l| old[l] * hht[l * c + k]).sum();
                wr[k] = old[k] * num / (denom + MU_EPS);
            }
        });

        let err = reconstruction_error(x, &w, &h, c);
        let prev = *errors.last().unwrap();
        errors.push(err);
        if err == 0.0 || (prev - err) <= cfg.tolerance * prev {
            break;
        }
    }
    Ok(NmfFactors { rows: u, cols: m, factors: c, w, h, errors })
}

/// `Aᵀ A` for a row-major `n x c` matrix.
fn gram_rows(a: &[f64], n: usize, c: usize) -> Vec<f64> {
    let mut g = vec![0.0; c * c];
    for r in 0..n {
        let row = &a[r * c..(r + 1) * c];
        for k in 0..c {
            for l in 0..c {
                g[k * c + l] += row[k] * row[l];
            }
        }
    }
    g
}
