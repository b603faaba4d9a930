//! Gaussian-kernel maximum mean discrepancy (biased V-statistic) and its gradient.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{compensated_sum, squared_distance};
use crate::scalar::Scalar;

fn check<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, bandwidth: T) -> Result<()> {
    if real.cols() != syn.cols() {
        return Err(Error::DimensionMismatch {
            expected: real.cols(),
            found: syn.cols(),
        });
    }
    if real.rows() == 0 || syn.rows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: (1, real.cols()),
            found: (real.rows().min(syn.rows()), real.cols()),
        });
    }
    if !(bandwidth.is_finite() && bandwidth > T::zero()) {
        return Err(Error::config("mmd_bandwidth", "must be finite and positive"));
    }
    Ok(())
}

fn kernel_mean<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, inv_two_bw2: T) -> T {
    let terms = a
        .iter_rows()
        .flat_map(|x| b.iter_rows().map(move |y| (-squared_distance(x, y) * inv_two_bw2).exp()));
    compensated_sum(terms) / T::of_usize(a.rows() * b.rows())
}

/// `mean K(r,r) + mean K(s,s) - 2 mean K(r,s)` with `K(x,y) = exp(-|x-y|^2 / (2 bw^2))`.
pub fn mmd<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, bandwidth: T) -> Result<T> {
    check(real, syn, bandwidth)?;
    let inv = T::one() / (T::of(2.0) * bandwidth * bandwidth);
    let value = kernel_mean(real, real, inv) + kernel_mean(syn, syn, inv) - T::of(2.0) * kernel_mean(real, syn, inv);
    Ok(value.max(T::zero()))
}

pub fn mmd_grad<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, bandwidth: T) -> Result<Matrix<T>> {
    mmd_with_grad(real, syn, bandwidth).map(|(_, g)| g)
}

/// MMD value and gradient with respect to the synthetic points.
///
/// `dK(x,y)/dx = -K(x,y) (x - y) / bw^2`; the synthetic self-term counts every
/// pair twice, the cross term carries the factor `-2`.
pub fn mmd_with_grad<T: Scalar>(real: &Matrix<T>, syn: &Matrix<T>, bandwidth: T) -> Result<(T, Matrix<T>)> {
    let value = mmd(real, syn, bandwidth)?;
    let bw2 = bandwidth * bandwidth;
    let inv = T::one() / (T::of(2.0) * bw2);
    let (n, m) = (T::of_usize(real.rows()), T::of_usize(syn.rows()));
    let self_coef = T::of(2.0) / (m * m * bw2);
    let cross_coef = T::of(2.0) / (n * m * bw2);
    let mut grad = Matrix::zeros(syn.rows(), syn.cols());
    for i in 0..syn.rows() {
        let s = syn.row(i);
        let g = grad.row_mut(i);
        for other in syn.iter_rows() {
            let k = (-squared_distance(s, other) * inv).exp();
            for ((gj, &sj), &oj) in g.iter_mut().zip(s).zip(other) {
                *gj -= self_coef * k * (sj - oj);
            }
        }
        for r in real.iter_rows() {
            let k = (-squared_distance(s, r) * inv).exp();
            for ((gj, &sj), &rj) in g.iter_mut().zip(s).zip(r) {
                *gj += cross_coef * k * (sj - rj);
            }
        }
    }
    Ok((value, grad))
}
