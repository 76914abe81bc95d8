//! Small dense helpers: row-major matrices, a pivoted solver and NNLS.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solve the `n x n` row-major system `a x = b` by Gaussian elimination with
/// partial pivoting. `None` if a pivot vanishes.
pub(crate) fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[pivot * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            x.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}

/// Lawson-Hanson active-set NNLS on the normal equations:
/// minimise `0.5 wᵀ G w - wᵀ f` subject to `w >= 0`, where `G = A Aᵀ`
/// (`n x n`, row-major) and `f = A x`.
pub(crate) fn nnls_gram(gram: &[f64], f: &[f64], n: usize) -> Vec<f64> {
    let tol = 1e-12 * gram.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut w = vec![0.0; n];
    let mut passive = vec![false; n];
    let gradient = |w: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| f[i] - dot(&gram[i * n..(i + 1) * n], w))
            .collect()
    };

    for _ in 0..(3 * n + 10) {
        let g = gradient(&w);
        let candidate = (0..n)
            .filter(|&i| !passive[i] && g[i] > tol)
            .max_by(|&i, &j| g[i].total_cmp(&g[j]));
        let Some(enter) = candidate else { break };
        passive[enter] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let k = idx.len();
            let sub: Vec<f64> = idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| gram[i * n + j]))
                .collect();
            let rhs: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
            let Some(z_sub) = solve(&sub, &rhs, k) else {
                // Dependent column entered; drop it and stop growing the set.
                passive[enter] = false;
                return w;
            };
            let mut z = vec![0.0; n];
            for (&i, &v) in idx.iter().zip(&z_sub) {
                z[i] = v;
            }
            if idx.iter().all(|&i| z[i] > 0.0) {
                w = z;
                break;
            }
            // Step back towards w until the first passive coefficient hits zero.
            let alpha = idx
                .iter()
                .filter(|&&i| z[i] <= 0.0)
                .map(|&i| {
                    let d = w[i] - z[i];
                    if d > 0.0 { w[i] / d } else { 0.0 }
                })
                .fold(f64::INFINITY, f64::min);
            for i in 0..n {
                w[i] += alpha * (z[i] - w[i]);
                if passive[i] && w[i] <= tol {
                    w[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    w
}
