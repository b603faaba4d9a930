//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use cfcondense::cf::FrequencyBatch;
use cfcondense::Matrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn freq_batch(rng: &mut ChaCha8Rng, count: usize, dim: usize, scale: f64) -> FrequencyBatch<f64> {
    FrequencyBatch::from_matrix(uniform_matrix(rng, count, dim, scale))
}

/// Brute-force empirical characteristic function via complex exponentials.
pub fn complex_cf(points: &Matrix<f64>, t: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for z in points.iter_rows() {
        let phase: f64 = z.iter().zip(t).map(|(a, b)| a * b).sum();
        acc += Complex64::new(0.0, phase).exp();
    }
    acc / points.rows() as f64
}

/// Mean over frequencies of `|cf_a(t) - cf_b(t)|^2` computed in complex arithmetic.
pub fn complex_cfd(a: &Matrix<f64>, b: &Matrix<f64>, freqs: &FrequencyBatch<f64>) -> f64 {
    let k = freqs.count();
    (0..k)
        .map(|i| (complex_cf(a, freqs.freqs.row(i)) - complex_cf(b, freqs.freqs.row(i))).norm_sqr())
        .sum::<f64>()
        / k as f64
}

/// Naive double-loop Gaussian-kernel MMD (biased).
pub fn naive_mmd(x: &Matrix<f64>, y: &Matrix<f64>, bw: f64) -> f64 {
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (-d2 / (2.0 * bw * bw)).exp()
    };
    let mean = |p: &Matrix<f64>, q: &Matrix<f64>| {
        let mut s = 0.0;
        for a in p.iter_rows() {
            for b in q.iter_rows() {
                s += k(a, b);
            }
        }
        s / (p.rows() * q.rows()) as f64
    };
    mean(x, x) + mean(y, y) - 2.0 * mean(x, y)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference(x: &Matrix<f64>, h: f64, mut f: impl FnMut(&Matrix<f64>) -> f64) -> Matrix<f64> {
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let orig = x.get(i, j);
            probe.set(i, j, orig + h);
            let up = f(&probe);
            probe.set(i, j, orig - h);
            let down = f(&probe);
            probe.set(i, j, orig);
            grad.set(i, j, (up - down) / (2.0 * h));
        }
    }
    grad
}

/// Largest componentwise relative error, with magnitudes below `floor`
/// treated as `floor` so that near-zero components compare absolutely.
pub fn max_relative_error(analytic: &Matrix<f64>, numeric: &Matrix<f64>, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Textbook kernel herding over rows of `points` with a linear kernel.
pub fn reference_herding(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    let d = points[0].len();
    let mut mu = vec![0.0; d];
    for p in points {
        for (m, v) in mu.iter_mut().zip(p) {
            *m += v / n as f64;
        }
    }
    let mut w = mu.clone();
    let mut chosen = Vec::new();
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let score: f64 = w.iter().zip(p).map(|(a, b)| a * b).sum();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (i, _) = best.unwrap();
        chosen.push(i);
        for ((wj, mj), pj) in w.iter_mut().zip(&mu).zip(&points[i]) {
            *wj += mj - pj;
        }
    }
    chosen
}

/// Recall@K by fully sorting every gallery item, ties by index.
pub fn brute_force_recall(query: &Matrix<f64>, gallery: &Matrix<f64>, relevant: &[Vec<bool>], k: usize) -> f64 {
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    let mut hits = 0;
    for (q, row) in query.iter_rows().enumerate() {
        let mut scored: Vec<(f64, usize)> = gallery.iter_rows().enumerate().map(|(g, x)| (cos(row, x), g)).collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        if scored.iter().take(k).any(|&(_, g)| relevant[q][g]) {
            hits += 1;
        }
    }
    hits as f64 / query.rows() as f64
}
