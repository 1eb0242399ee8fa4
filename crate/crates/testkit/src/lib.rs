//! Brute-force reference implementations for the test suites.
//!
//! Everything here is written straight from the textbook definitions with
//! plain loops, and shares no code with the library under test.

pub mod corpus;
pub mod mock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn avg(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson r from its definition.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (avg(x), avg(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Kendall tau-b by enumerating every pair.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx == 0.0 || dy == 0.0 {
                continue;
            }
            if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (concordant - discordant) as f64 / (((n0 - tied_x) as f64) * ((n0 - tied_y) as f64)).sqrt()
}

/// Additive smoothing then `sum p ln(p / q)`.
pub fn kl(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let n = p.len() as f64;
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    let mut d = 0.0;
    for i in 0..p.len() {
        let a = (p[i] + eps) / (sp + n * eps);
        let b = (q[i] + eps) / (sq + n * eps);
        d += a * (a / b).ln();
    }
    d
}

/// Slope, intercept and R² (as 1 - SSE/SST) of y on x.
pub fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (avg(x), avg(y));
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    let slope = num / den;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for i in 0..x.len() {
        let e = y[i] - intercept - slope * x[i];
        sse += e * e;
        sst += (y[i] - my) * (y[i] - my);
    }
    (slope, intercept, 1.0 - sse / sst)
}

/// Gaussian elimination with partial pivoting on a dense `n × n` system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// OLS with intercept via the normal equations `[1 X]ᵀ[1 X] β = [1 X]ᵀ y`.
/// Returns `(intercept, coefficients)`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let p = x[0].len() + 1;
    let row = |r: usize| std::iter::once(1.0).chain(x[r].iter().copied()).collect::<Vec<f64>>();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for r in 0..x.len() {
        let v = row(r);
        for i in 0..p {
            b[i] += v[i] * y[r];
            for j in 0..p {
                a[i][j] += v[i] * v[j];
            }
        }
    }
    let beta = gauss_solve(a, b);
    (beta[0], beta[1..].to_vec())
}

/// Indices of the k nearest rows by Euclidean distance, ties to the
/// lower index, optionally skipping one row.
pub fn nearest(train: &[Vec<f64>], query: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Mean of reverse-scored answered members when at least half answered.
pub fn subscale_score(values: &[Option<i32>], reversed: &[bool], min: i32, max: i32) -> Option<f64> {
    let mut total = 0.0;
    let mut answered = 0;
    for (v, &rev) in values.iter().zip(reversed) {
        if let Some(v) = v {
            total += f64::from(if rev { min + max - v } else { *v });
            answered += 1;
        }
    }
    (answered > 0 && 2 * answered >= values.len()).then(|| total / answered as f64)
}

/// Vector of `n` uniform values in `[lo, hi)`.
pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random probability vector, with some exact zeros when `sparse`.
pub fn distribution(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Posterior mean of `f` for `z_i = l_i f[k_i] + N(0, v_i)` and
/// `f ~ N(0, cov)` with two factors, by midpoint quadrature on a grid.
pub fn posterior_mean_2d(cov: [[f64; 2]; 2], items: &[(usize, f64, f64)], z: &[f64], half_width: f64, steps: usize) -> [f64; 2] {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
    let h = 2.0 * half_width / steps as f64;
    let (mut w, mut m0, mut m1) = (0.0, 0.0, 0.0);
    for i in 0..steps {
        let a = -half_width + (i as f64 + 0.5) * h;
        for j in 0..steps {
            let b = -half_width + (j as f64 + 0.5) * h;
            let f = [a, b];
            let mut log = -0.5 * (a * (inv[0][0] * a + inv[0][1] * b) + b * (inv[1][0] * a + inv[1][1] * b));
            for (&(k, l, v), &zi) in items.iter().zip(z) {
                let e = zi - l * f[k];
                log -= 0.5 * e * e / v;
            }
            let d = log.exp();
            w += d;
            m0 += d * a;
            m1 += d * b;
        }
    }
    [m0 / w, m1 / w]
}
