//! Cosine-ranked retrieval, Recall@K and a ridge-regression retrieval head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{dot, norm};
use crate::scalar::Scalar;

/// Query x gallery relevance judgements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relevance {
    queries: usize,
    gallery: usize,
    flags: Vec<bool>,
}

impl Relevance {
    pub fn new(queries: usize, gallery: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != queries * gallery {
            return Err(Error::ShapeMismatch {
                expected: (queries, gallery),
                found: (flags.len(), 1),
            });
        }
        Ok(Relevance { queries, gallery, flags })
    }

    /// Query `i` is relevant only to gallery item `i`.
    pub fn identity(n: usize) -> Self {
        let mut flags = vec![false; n * n];
        for i in 0..n {
            flags[i * n + i] = true;
        }
        Relevance { queries: n, gallery: n, flags }
    }

    /// Relevant when query and gallery labels agree.
    pub fn from_labels(query_labels: &[u32], gallery_labels: &[u32]) -> Self {
        let flags = query_labels
            .iter()
            .flat_map(|q| gallery_labels.iter().map(move |g| q == g))
            .collect();
        Relevance {
            queries: query_labels.len(),
            gallery: gallery_labels.len(),
            flags,
        }
    }

    pub fn is_relevant(&self, query: usize, item: usize) -> bool {
        self.flags[query * self.gallery + item]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.queries, self.gallery)
    }
}

fn cosine<T: Scalar>(a: &[T], a_norm: T, b: &[T], b_norm: T) -> T {
    if a_norm > T::zero() && b_norm > T::zero() {
        dot(a, b) / (a_norm * b_norm)
    } else {
        T::zero()
    }
}

/// Gallery indices ordered by descending cosine similarity to `query`;
/// ties keep the lower index first. Zero vectors score 0.
pub fn rank_gallery<T: Scalar>(query: &[T], gallery: &Matrix<T>) -> Vec<usize> {
    let qn = norm(query);
    let scores: Vec<T> = gallery.iter_rows().map(|g| cosine(query, qn, g, norm(g))).collect();
    let mut order: Vec<usize> = (0..gallery.rows()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Recall@K for several cut-offs at once: the fraction of queries with at
/// least one relevant item among the top K.
pub fn recall_at_ks<T: Scalar>(query: &Matrix<T>, gallery: &Matrix<T>, relevance: &Relevance, ks: &[usize]) -> Result<Vec<f64>> {
    if query.cols() != gallery.cols() {
        return Err(Error::DimensionMismatch {
            expected: query.cols(),
            found: gallery.cols(),
        });
    }
    if relevance.shape() != (query.rows(), gallery.rows()) {
        return Err(Error::ShapeMismatch {
            expected: (query.rows(), gallery.rows()),
            found: relevance.shape(),
        });
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0) {
        return Err(Error::config("k", format!("must be positive, got {bad}")));
    }
    if query.rows() == 0 {
        return Err(Error::InvalidDataset("no retrieval queries".into()));
    }
    let mut hits = vec![0usize; ks.len()];
    for (qi, q) in query.iter_rows().enumerate() {
        if !(0..gallery.rows()).any(|g| relevance.is_relevant(qi, g)) {
            return Err(Error::InvalidRelevance { query: qi });
        }
        let order = rank_gallery(q, gallery);
        let first = order.iter().position(|&g| relevance.is_relevant(qi, g)).unwrap_or(usize::MAX);
        for (h, &k) in hits.iter_mut().zip(ks) {
            if first < k {
                *h += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / query.rows() as f64).collect())
}

pub fn recall_at_k<T: Scalar>(query: &Matrix<T>, gallery: &Matrix<T>, relevance: &Relevance, k: usize) -> Result<f64> {
    Ok(recall_at_ks(query, gallery, relevance, &[k])?[0])
}

/// Solves `A x = b` for symmetric positive definite `A` (n x n, row-major)
/// with right-hand sides stored as the columns of `b` (n x m).
fn cholesky_solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::InvalidDataset("ridge system is not positive definite".into()));
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    let m = b.cols();
    let mut x = b.clone();
    for c in 0..m {
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

/// Affine map from one modality to another, fit by ridge regression. Used to
/// score retrieval heads trained on real or synthetic pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeHead<T> {
    /// (input dim + 1) x output dim; the last row is the intercept.
    pub coefficients: Matrix<T>,
}

impl<T: Scalar> RidgeHead<T> {
    pub fn fit(inputs: &Matrix<T>, targets: &Matrix<T>, ridge: f64) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::ShapeMismatch {
                expected: (inputs.rows(), targets.cols()),
                found: targets.shape(),
            });
        }
        if !(ridge.is_finite() && ridge > 0.0) {
            return Err(Error::config("ridge", "must be finite and positive"));
        }
        let (n, d, out) = (inputs.rows(), inputs.cols(), targets.cols());
        let p = d + 1;
        let mut gram = Matrix::zeros(p, p);
        let mut rhs = Matrix::zeros(p, out);
        let mut aug = vec![T::one(); p];
        for r in 0..n {
            aug[..d].copy_from_slice(inputs.row(r));
            let y = targets.row(r);
            for i in 0..p {
                for j in 0..=i {
                    let v = gram.get(i, j) + aug[i] * aug[j];
                    gram.set(i, j, v);
                }
                for (o, &yo) in y.iter().enumerate() {
                    let v = rhs.get(i, o) + aug[i] * yo;
                    rhs.set(i, o, v);
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                gram.set(j, i, gram.get(i, j));
            }
            if i < d {
                let v = gram.get(i, i) + T::of(ridge);
                gram.set(i, i, v);
            }
        }
        // Keep the intercept equation well posed when every input row is zero.
        let v = gram.get(d, d) + T::of(ridge * 1e-9);
        gram.set(d, d, v);
        Ok(RidgeHead {
            coefficients: cholesky_solve(&gram, &rhs)?,
        })
    }

    pub fn apply(&self, inputs: &Matrix<T>) -> Matrix<T> {
        let d = self.coefficients.rows() - 1;
        let out = self.coefficients.cols();
        let mut result = Matrix::zeros(inputs.rows(), out);
        for r in 0..inputs.rows() {
            let x = inputs.row(r);
            let dst = result.row_mut(r);
            dst.copy_from_slice(self.coefficients.row(d));
            for (i, &xi) in x.iter().enumerate() {
                for (o, &c) in dst.iter_mut().zip(self.coefficients.row(i)) {
                    *o += xi * c;
                }
            }
        }
        result
    }
}

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];
pub const DEFAULT_RIDGE: f64 = 1.0;

/// Recall in both directions between two paired modalities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScores {
    pub ks: Vec<usize>,
    pub a_to_b: Vec<f64>,
    pub b_to_a: Vec<f64>,
}

/// Fits `a -> b` and `b -> a` ridge heads on the training pairs, maps the test
/// queries, and ranks the opposite test modality with identity relevance.
pub fn paired_retrieval<T: Scalar>(
    train_a: &Matrix<T>,
    train_b: &Matrix<T>,
    test_a: &Matrix<T>,
    test_b: &Matrix<T>,
    ks: &[usize],
    ridge: f64,
) -> Result<RetrievalScores> {
    let relevance = Relevance::identity(test_a.rows());
    let ab = RidgeHead::fit(train_a, train_b, ridge)?;
    let ba = RidgeHead::fit(train_b, train_a, ridge)?;
    Ok(RetrievalScores {
        ks: ks.to_vec(),
        a_to_b: recall_at_ks(&ab.apply(test_a), test_b, &relevance, ks)?,
        b_to_a: recall_at_ks(&ba.apply(test_b), test_a, &relevance, ks)?,
    })
}
