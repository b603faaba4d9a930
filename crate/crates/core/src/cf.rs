//! Empirical characteristic functions and the characteristic function discrepancy (CFD).
//!
//! For a frequency `t` the empirical CF of a point set `Z` is
//! `phi(t) = mean_n exp(i t.z_n)`. The per-frequency discrepancy is written in
//! amplitude/phase form
//!
//! ```text
//! alpha (|phi_x| - |phi_y|)^2 + beta 2 |phi_x| |phi_y| (1 - cos(arg phi_x - arg phi_y))
//! ```
//!
//! which equals `|phi_x - phi_y|^2` when `alpha == beta == 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{compensated_sum, median, pairwise_sum, squared_distance};
use crate::scalar::Scalar;

/// `K` frequency vectors drawn i.i.d. from `N(0, sigma^2 I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyBatch<T> {
    pub freqs: Matrix<T>,
    pub sigma: T,
}

impl<T: Scalar> FrequencyBatch<T> {
    pub fn count(&self) -> usize {
        self.freqs.rows()
    }

    pub fn dim(&self) -> usize {
        self.freqs.cols()
    }

    /// Wraps explicit frequencies (e.g. hand-picked for tests).
    pub fn from_matrix(freqs: Matrix<T>) -> Self {
        FrequencyBatch {
            freqs,
            sigma: T::nan(),
        }
    }
}

pub fn sample_frequencies<T: Scalar>(dim: usize, count: usize, sigma: T, seed: u64) -> Result<FrequencyBatch<T>> {
    if count == 0 {
        return Err(Error::config("freq_count", "must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::config("dim", "must be at least 1"));
    }
    if !(sigma.is_finite() && sigma > T::zero()) {
        return Err(Error::config("sigma_t", "must be finite and positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..dim * count)
        .map(|_| sigma * T::of(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    Ok(FrequencyBatch {
        freqs: Matrix::from_vec(count, dim, values)?,
        sigma,
    })
}

/// Empirical CF evaluated at each frequency of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCf<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> EmpiricalCf<T> {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn amplitude(&self, k: usize) -> T {
        self.re[k].hypot(self.im[k])
    }

    pub fn phase(&self, k: usize) -> T {
        self.im[k].atan2(self.re[k])
    }
}

fn check_dims<T: Scalar>(points: &Matrix<T>, freqs: &FrequencyBatch<T>) -> Result<()> {
    if points.cols() != freqs.dim() {
        return Err(Error::DimensionMismatch {
            expected: freqs.dim(),
            found: points.cols(),
        });
    }
    if points.rows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: (1, freqs.dim()),
            found: points.shape(),
        });
    }
    Ok(())
}

/// Evaluates `exp(i t_k . z_n)` for every frequency and hands each frequency's
/// `(sin, cos)` rows to `visit`.
fn for_each_frequency<T: Scalar>(points: &Matrix<T>, freqs: &FrequencyBatch<T>, mut visit: impl FnMut(usize, &[T], &[T])) {
    let (n, dim) = points.shape();
    // column-major copy so the projection loop runs over contiguous points
    let mut columns = vec![T::zero(); n * dim];
    for (i, z) in points.iter_rows().enumerate() {
        for (d, &v) in z.iter().enumerate() {
            columns[d * n + i] = v;
        }
    }
    let mut theta = vec![T::zero(); n];
    let mut sin_buf = vec![T::zero(); n];
    let mut cos_buf = vec![T::zero(); n];
    for (k, t) in freqs.freqs.iter_rows().enumerate() {
        theta.iter_mut().for_each(|v| *v = T::zero());
        for (d, &td) in t.iter().enumerate() {
            for (acc, &z) in theta.iter_mut().zip(&columns[d * n..(d + 1) * n]) {
                *acc += td * z;
            }
        }
        T::fast_sin_cos_slice(&theta, &mut sin_buf, &mut cos_buf);
        visit(k, &sin_buf, &cos_buf);
    }
}

fn cf_unchecked<T: Scalar>(points: &Matrix<T>, freqs: &FrequencyBatch<T>, mut keep: Option<(&mut Matrix<T>, &mut Matrix<T>)>) -> EmpiricalCf<T> {
    let n = T::of_usize(points.rows());
    let mut re = Vec::with_capacity(freqs.count());
    let mut im = Vec::with_capacity(freqs.count());
    for_each_frequency(points, freqs, |k, sin, cos| {
        re.push(pairwise_sum(cos) / n);
        im.push(pairwise_sum(sin) / n);
        if let Some((sins, coss)) = keep.as_mut() {
            sins.row_mut(k).copy_from_slice(sin);
            coss.row_mut(k).copy_from_slice(cos);
        }
    });
    EmpiricalCf { re, im }
}

pub fn empirical_cf<T: Scalar>(points: &Matrix<T>, freqs: &FrequencyBatch<T>) -> Result<EmpiricalCf<T>> {
    check_dims(points, freqs)?;
    Ok(cf_unchecked(points, freqs, None))
}

/// Relative weights of the amplitude and phase parts of the discrepancy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfdWeights<T> {
    pub amplitude: T,
    pub phase: T,
}

impl<T: Scalar> Default for CfdWeights<T> {
    fn default() -> Self {
        CfdWeights {
            amplitude: T::one(),
            phase: T::one(),
        }
    }
}

/// Per-frequency discrepancy in amplitude/phase form.
pub fn cfd_term<T: Scalar>(x: (T, T), y: (T, T), weights: CfdWeights<T>) -> T {
    let amp_x = x.0.hypot(x.1);
    let amp_y = y.0.hypot(y.1);
    let dphase = x.1.atan2(x.0) - y.1.atan2(y.0);
    let two = T::of(2.0);
    let damp = amp_x - amp_y;
    weights.amplitude * damp * damp + weights.phase * two * amp_x * amp_y * (T::one() - dphase.cos())
}

/// Per-frequency discrepancies between two empirical CFs.
pub fn cfd_terms<T: Scalar>(a: &EmpiricalCf<T>, b: &EmpiricalCf<T>, weights: CfdWeights<T>) -> Vec<T> {
    (0..a.len())
        .map(|k| cfd_term((a.re[k], a.im[k]), (b.re[k], b.im[k]), weights))
        .collect()
}

fn check_pair<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, freqs: &FrequencyBatch<T>) -> Result<()> {
    check_dims(real, freqs)?;
    check_dims(syn, freqs)
}

pub fn cfd<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, freqs: &FrequencyBatch<T>) -> Result<T> {
    cfd_weighted(real, syn, freqs, CfdWeights::default())
}

pub fn cfd_weighted<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, freqs: &FrequencyBatch<T>, weights: CfdWeights<T>) -> Result<T> {
    check_pair(real, syn, freqs)?;
    let a = empirical_cf(real, freqs)?;
    let b = empirical_cf(syn, freqs)?;
    let terms = cfd_terms(&a, &b, weights);
    Ok(compensated_sum(terms) / T::of_usize(freqs.count()))
}

pub fn cfd_grad<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, freqs: &FrequencyBatch<T>) -> Result<Matrix<T>> {
    cfd_with_grad(real, syn, freqs, CfdWeights::default()).map(|(_, g)| g)
}

/// CFD value and its gradient with respect to every synthetic coordinate.
///
/// With `R, I` the real/imaginary parts of the CFs and `A` the amplitudes, the
/// per-frequency term expands to
/// `alpha A_x^2 + alpha A_y^2 + 2 (beta - alpha) A_x A_y - 2 beta (R_x R_y + I_x I_y)`,
/// so `d/dR_y = 2 alpha R_y + 2 (beta - alpha) A_x R_y / A_y - 2 beta R_x` (same for `I_y`).
/// At `A_y == 0` the non-smooth middle part contributes zero.
pub fn cfd_with_grad<T: Scalar>(
    real: &Matrix<T>,
    syn: &Matrix<T>,
    freqs: &FrequencyBatch<T>,
    weights: CfdWeights<T>,
) -> Result<(T, Matrix<T>)> {
    check_pair(real, syn, freqs)?;
    let k_count = freqs.count();
    let mut sins = Matrix::zeros(k_count, syn.rows());
    let mut coss = Matrix::zeros(k_count, syn.rows());
    let a = cf_unchecked(real, freqs, None);
    let b = cf_unchecked(syn, freqs, Some((&mut sins, &mut coss)));
    let value = compensated_sum(cfd_terms(&a, &b, weights)) / T::of_usize(k_count);

    let two = T::of(2.0);
    let (alpha, beta) = (weights.amplitude, weights.phase);
    let scale = T::one() / (T::of_usize(k_count) * T::of_usize(syn.rows()));
    let mut grad = Matrix::zeros(syn.rows(), syn.cols());
    for (k, t) in freqs.freqs.iter_rows().enumerate() {
        let amp_x = a.amplitude(k);
        let amp_y = b.amplitude(k);
        let ratio = if amp_y > T::zero() && alpha != beta {
            (beta - alpha) * amp_x / amp_y
        } else {
            T::zero()
        };
        let g_re = two * (alpha * b.re[k] + ratio * b.re[k] - beta * a.re[k]);
        let g_im = two * (alpha * b.im[k] + ratio * b.im[k] - beta * a.im[k]);
        let (sin_k, cos_k) = (sins.row(k), coss.row(k));
        for m in 0..syn.rows() {
            let coef = scale * (cos_k[m] * g_im - sin_k[m] * g_re);
            for (g, &tj) in grad.row_mut(m).iter_mut().zip(t) {
                *g += coef * tj;
            }
        }
    }
    Ok((value, grad))
}

/// Median Euclidean distance over all pairs of rows (zero pairs are kept).
pub fn median_pairwise_distance<T: Scalar>(points: &Matrix<T>) -> Option<T> {
    let n = points.rows();
    if n < 2 {
        return None;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(squared_distance(points.row(i), points.row(j)).sqrt());
        }
    }
    Some(median(&mut dists))
}
