//! Uni-modal, cross-modal and joint-modal alignment objectives and their gradients.
//!
//! All gradients are taken with respect to the synthetic batches only; real
//! embeddings are constants.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cf::{cfd_with_grad, CfdWeights, FrequencyBatch};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mmd::mmd_with_grad;
use crate::numeric::{dot, norm};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_uni: f64,
    pub lambda_cross: f64,
    pub lambda_joint: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_uni: 1.0,
            lambda_cross: 0.5,
            lambda_joint: 0.5,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_uni: f64, lambda_cross: f64, lambda_joint: f64) -> Self {
        LossWeights {
            lambda_uni,
            lambda_cross,
            lambda_joint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("weights.lambda_uni", self.lambda_uni),
            ("weights.lambda_cross", self.lambda_cross),
            ("weights.lambda_joint", self.lambda_joint),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        if self.lambda_uni == 0.0 && self.lambda_cross == 0.0 && self.lambda_joint == 0.0 {
            return Err(Error::config("weights", "at least one weight must be positive"));
        }
        Ok(())
    }

    /// Cross/joint terms need a modality pair.
    pub fn validate_for_modalities(&self, modality_count: usize) -> Result<()> {
        self.validate()?;
        if modality_count < 2 {
            if self.lambda_cross != 0.0 {
                return Err(Error::config("weights.lambda_cross", "must be 0 for single-modality data"));
            }
            if self.lambda_joint != 0.0 {
                return Err(Error::config("weights.lambda_joint", "must be 0 for single-modality data"));
            }
        }
        Ok(())
    }
}

/// Scalar summary of one loss evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub uni_per_modality: Vec<f64>,
    pub cross: f64,
    pub joint: f64,
    pub total: f64,
    pub rho_cross: f64,
    pub rho_joint: f64,
}

impl LossBreakdown {
    pub fn uni(&self) -> f64 {
        self.uni_per_modality.iter().sum()
    }

    /// Element-wise sum, used to aggregate per-class breakdowns.
    pub fn accumulate(&mut self, other: &LossBreakdown) {
        if self.uni_per_modality.is_empty() {
            self.uni_per_modality = vec![0.0; other.uni_per_modality.len()];
        }
        for (a, b) in self.uni_per_modality.iter_mut().zip(&other.uni_per_modality) {
            *a += b;
        }
        self.cross += other.cross;
        self.joint += other.joint;
        self.total += other.total;
        self.rho_cross += other.rho_cross;
        self.rho_joint += other.rho_joint;
    }
}

/// What to do when an interaction vector has zero norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    #[default]
    Error,
    /// Contribute loss 0 with zero gradient and log a warning.
    Skip,
}

/// Distance used for the uni-modal term.
#[derive(Clone, Copy, Debug)]
pub enum UniDistance<'a, T> {
    Cfd {
        freqs: &'a FrequencyBatch<T>,
        weights: CfdWeights<T>,
    },
    Mmd {
        bandwidth: T,
    },
}

/// Form of the cross-modal term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossMode {
    /// `1 - cos(mean(real_a * real_v), mean(syn_a * syn_v))`.
    #[default]
    Cosine,
    /// Experimental: CFD between real and synthetic interaction vectors.
    InteractionCfd,
}

/// Loss of a single modality pair together with gradients for both synthetic sides.
#[derive(Clone, Debug)]
pub struct PairLoss<T> {
    pub loss: T,
    pub rho: T,
    pub grad_a: Matrix<T>,
    pub grad_v: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct LossOutput<T> {
    pub breakdown: LossBreakdown,
    /// One gradient per synthetic modality, already weighted.
    pub grads: Vec<Matrix<T>>,
}

fn check_modalities<T: Scalar>(real: &[Matrix<T>], syn: &[Matrix<T>]) -> Result<()> {
    if real.len() != syn.len() {
        return Err(Error::ModalityCountMismatch {
            expected: real.len(),
            found: syn.len(),
        });
    }
    if real.is_empty() {
        return Err(Error::ModalityCountMismatch { expected: 1, found: 0 });
    }
    let dim = real[0].cols();
    for m in real.iter().chain(syn) {
        if m.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.cols(),
            });
        }
    }
    Ok(())
}

/// Sum over modalities of the uni-modal distance, with per-modality gradients.
pub fn uni_modal_loss_with<T: Scalar>(
    real: &[Matrix<T>],
    syn: &[Matrix<T>],
    distance: UniDistance<'_, T>,
) -> Result<(Vec<T>, Vec<Matrix<T>>)> {
    check_modalities(real, syn)?;
    let mut values = Vec::with_capacity(real.len());
    let mut grads = Vec::with_capacity(real.len());
    for (r, s) in real.iter().zip(syn) {
        let (v, g) = match distance {
            UniDistance::Cfd { freqs, weights } => cfd_with_grad(r, s, freqs, weights)?,
            UniDistance::Mmd { bandwidth } => mmd_with_grad(r, s, bandwidth)?,
        };
        values.push(v);
        grads.push(g);
    }
    Ok((values, grads))
}

/// `sum_m cfd(real_m, syn_m)` and the gradient for every synthetic modality.
pub fn uni_modal_loss<T: Scalar>(real: &[Matrix<T>], syn: &[Matrix<T>], freqs: &FrequencyBatch<T>) -> Result<(T, Vec<Matrix<T>>)> {
    let (values, grads) = uni_modal_loss_with(
        real,
        syn,
        UniDistance::Cfd {
            freqs,
            weights: CfdWeights::default(),
        },
    )?;
    Ok((values.into_iter().fold(T::zero(), |a, b| a + b), grads))
}

/// Row-wise Hadamard product.
pub fn interaction_vectors<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            found: b.shape(),
        });
    }
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| x * y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

fn check_pair_shapes<T: Scalar>(ra: &Matrix<T>, rv: &Matrix<T>, sa: &Matrix<T>, sv: &Matrix<T>) -> Result<()> {
    if ra.shape() != rv.shape() {
        return Err(Error::ShapeMismatch {
            expected: ra.shape(),
            found: rv.shape(),
        });
    }
    if sa.shape() != sv.shape() {
        return Err(Error::ShapeMismatch {
            expected: sa.shape(),
            found: sv.shape(),
        });
    }
    if ra.cols() != sa.cols() {
        return Err(Error::DimensionMismatch {
            expected: ra.cols(),
            found: sa.cols(),
        });
    }
    if ra.rows() == 0 || sa.rows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: (1, ra.cols()),
            found: (ra.rows().min(sa.rows()), ra.cols()),
        });
    }
    Ok(())
}

/// Cosine of `x` and `y` plus its gradients with respect to both arguments.
fn cosine_with_grads<T: Scalar>(x: &[T], y: &[T], term: &'static str) -> Result<(T, Vec<T>, Vec<T>)> {
    let nx = norm(x);
    let ny = norm(y);
    if nx == T::zero() || ny == T::zero() {
        return Err(Error::DegenerateInteraction { term });
    }
    let rho = dot(x, y) / (nx * ny);
    let inv = T::one() / (nx * ny);
    let gx = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi * inv - rho * xi / (nx * nx))
        .collect();
    let gy = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| xi * inv - rho * yi / (ny * ny))
        .collect();
    Ok((rho, gx, gy))
}

fn interaction_mean<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Vec<T>> {
    Ok(interaction_vectors(a, b)?.col_means())
}

/// Cross-modal alignment: `1 - cos(u, w)` with `u`, `w` the batch-mean interaction vectors.
pub fn cross_modal_loss<T: Scalar>(ra: &Matrix<T>, rv: &Matrix<T>, sa: &Matrix<T>, sv: &Matrix<T>) -> Result<PairLoss<T>> {
    check_pair_shapes(ra, rv, sa, sv)?;
    let u = interaction_mean(ra, rv)?;
    let w = interaction_mean(sa, sv)?;
    let (rho, _, drho_dw) = cosine_with_grads(&u, &w, "cross")?;
    let inv_b = T::one() / T::of_usize(sa.rows());
    let mut grad_a = Matrix::zeros(sa.rows(), sa.cols());
    let mut grad_v = Matrix::zeros(sv.rows(), sv.cols());
    for j in 0..sa.rows() {
        let (a_row, v_row) = (sa.row(j), sv.row(j));
        for (d, &g) in drho_dw.iter().enumerate() {
            let dl = -g * inv_b;
            grad_a.row_mut(j)[d] = dl * v_row[d];
            grad_v.row_mut(j)[d] = dl * a_row[d];
        }
    }
    Ok(PairLoss {
        loss: T::one() - rho,
        rho,
        grad_a,
        grad_v,
    })
}

/// Experimental cross-modal variant: CFD between real and synthetic interaction vectors.
pub fn cross_modal_cfd_loss<T: Scalar>(
    ra: &Matrix<T>,
    rv: &Matrix<T>,
    sa: &Matrix<T>,
    sv: &Matrix<T>,
    freqs: &FrequencyBatch<T>,
) -> Result<PairLoss<T>> {
    check_pair_shapes(ra, rv, sa, sv)?;
    let real = interaction_vectors(ra, rv)?;
    let syn = interaction_vectors(sa, sv)?;
    let (loss, g) = cfd_with_grad(&real, &syn, freqs, CfdWeights::default())?;
    let grad_a = interaction_vectors(&g, sv)?;
    let grad_v = interaction_vectors(&g, sa)?;
    Ok(PairLoss {
        loss,
        rho: T::one() - loss,
        grad_a,
        grad_v,
    })
}

/// Joint-modal alignment: `1 - cos(mean(ra) * mean(sv), mean(rv) * mean(sa))`.
pub fn joint_modal_loss<T: Scalar>(ra: &Matrix<T>, rv: &Matrix<T>, sa: &Matrix<T>, sv: &Matrix<T>) -> Result<PairLoss<T>> {
    check_pair_shapes(ra, rv, sa, sv)?;
    let (ea, ev) = (ra.col_means(), rv.col_means());
    let (sa_mean, sv_mean) = (sa.col_means(), sv.col_means());
    let p: Vec<T> = ea.iter().zip(&sv_mean).map(|(&x, &y)| x * y).collect();
    let q: Vec<T> = ev.iter().zip(&sa_mean).map(|(&x, &y)| x * y).collect();
    let (rho, drho_dp, drho_dq) = cosine_with_grads(&p, &q, "joint")?;
    let inv_b = T::one() / T::of_usize(sa.rows());
    // p depends on the synthetic v-mean, q on the synthetic a-mean.
    let row_a: Vec<T> = drho_dq.iter().zip(&ev).map(|(&g, &e)| -g * e * inv_b).collect();
    let row_v: Vec<T> = drho_dp.iter().zip(&ea).map(|(&g, &e)| -g * e * inv_b).collect();
    let mut grad_a = Matrix::zeros(sa.rows(), sa.cols());
    let mut grad_v = Matrix::zeros(sv.rows(), sv.cols());
    for j in 0..sa.rows() {
        grad_a.row_mut(j).copy_from_slice(&row_a);
        grad_v.row_mut(j).copy_from_slice(&row_v);
    }
    Ok(PairLoss {
        loss: T::one() - rho,
        rho,
        grad_a,
        grad_v,
    })
}

/// Options for [`total_loss_with`].
#[derive(Clone, Copy, Debug)]
pub struct LossOptions<'a, T> {
    pub uni: UniDistance<'a, T>,
    pub cross_mode: CrossMode,
    /// Frequencies for [`CrossMode::InteractionCfd`]; ignored otherwise.
    pub cross_freqs: Option<&'a FrequencyBatch<T>>,
    pub degenerate: DegeneratePolicy,
}

fn pair_term<T: Scalar>(
    result: Result<PairLoss<T>>,
    policy: DegeneratePolicy,
    rows: usize,
    dim: usize,
) -> Result<PairLoss<T>> {
    match (result, policy) {
        (Err(Error::DegenerateInteraction { term }), DegeneratePolicy::Skip) => {
            warn!("zero-norm interaction vector in {term} term; contributing 0");
            Ok(PairLoss {
                loss: T::zero(),
                rho: T::one(),
                grad_a: Matrix::zeros(rows, dim),
                grad_v: Matrix::zeros(rows, dim),
            })
        }
        (r, _) => r,
    }
}

/// Weighted combination of all three objectives.
///
/// With more than two modalities the cross and joint terms are averaged over all
/// unordered modality pairs; with one modality they are skipped and their weights must be 0.
pub fn total_loss_with<T: Scalar>(
    real: &[Matrix<T>],
    syn: &[Matrix<T>],
    weights: &LossWeights,
    options: LossOptions<'_, T>,
) -> Result<LossOutput<T>> {
    check_modalities(real, syn)?;
    weights.validate_for_modalities(real.len())?;
    let (lu, lc, lj) = (
        T::of(weights.lambda_uni),
        T::of(weights.lambda_cross),
        T::of(weights.lambda_joint),
    );

    let mut grads: Vec<Matrix<T>> = syn.iter().map(|s| Matrix::zeros(s.rows(), s.cols())).collect();
    let mut uni_values = vec![T::zero(); real.len()];
    if weights.lambda_uni != 0.0 {
        let (values, uni_grads) = uni_modal_loss_with(real, syn, options.uni)?;
        uni_values = values;
        for (g, ug) in grads.iter_mut().zip(&uni_grads) {
            g.add_scaled(ug, lu);
        }
    }

    let pairs: Vec<(usize, usize)> = (0..real.len())
        .flat_map(|i| (i + 1..real.len()).map(move |j| (i, j)))
        .collect();
    let (mut cross, mut rho_cross, mut joint, mut rho_joint) = (T::zero(), T::one(), T::zero(), T::one());
    if !pairs.is_empty() {
        let inv_pairs = T::one() / T::of_usize(pairs.len());
        let (mut c_sum, mut rc_sum, mut j_sum, mut rj_sum) = (T::zero(), T::zero(), T::zero(), T::zero());
        for &(i, j) in &pairs {
            let (rows, dim) = syn[i].shape();
            if weights.lambda_cross != 0.0 {
                let raw = match options.cross_mode {
                    CrossMode::Cosine => cross_modal_loss(&real[i], &real[j], &syn[i], &syn[j]),
                    CrossMode::InteractionCfd => {
                        let freqs = options
                            .cross_freqs
                            .ok_or_else(|| Error::config("cross_mode", "interaction_cfd requires frequencies"))?;
                        cross_modal_cfd_loss(&real[i], &real[j], &syn[i], &syn[j], freqs)
                    }
                };
                let term = pair_term(raw, options.degenerate, rows, dim)?;
                c_sum += term.loss;
                rc_sum += term.rho;
                grads[i].add_scaled(&term.grad_a, lc * inv_pairs);
                grads[j].add_scaled(&term.grad_v, lc * inv_pairs);
            } else {
                rc_sum += T::one();
            }
            if weights.lambda_joint != 0.0 {
                let raw = joint_modal_loss(&real[i], &real[j], &syn[i], &syn[j]);
                let term = pair_term(raw, options.degenerate, rows, dim)?;
                j_sum += term.loss;
                rj_sum += term.rho;
                grads[i].add_scaled(&term.grad_a, lj * inv_pairs);
                grads[j].add_scaled(&term.grad_v, lj * inv_pairs);
            } else {
                rj_sum += T::one();
            }
        }
        cross = c_sum * inv_pairs;
        rho_cross = rc_sum * inv_pairs;
        joint = j_sum * inv_pairs;
        rho_joint = rj_sum * inv_pairs;
    }

    let uni_sum = uni_values.iter().fold(T::zero(), |a, &b| a + b);
    let total = lu * uni_sum + lc * cross + lj * joint;
    let breakdown = LossBreakdown {
        uni_per_modality: uni_values.iter().map(|v| v.to_f64_lossy()).collect(),
        cross: cross.to_f64_lossy(),
        joint: joint.to_f64_lossy(),
        total: total.to_f64_lossy(),
        rho_cross: rho_cross.to_f64_lossy(),
        rho_joint: rho_joint.to_f64_lossy(),
    };
    Ok(LossOutput { breakdown, grads })
}

/// Total loss with CFD uni-modal matching and cosine cross/joint terms.
/// Degenerate interactions are reported as errors.
pub fn total_loss<T: Scalar>(
    real: &[Matrix<T>],
    syn: &[Matrix<T>],
    freqs: &FrequencyBatch<T>,
    weights: &LossWeights,
) -> Result<LossOutput<T>> {
    total_loss_with(
        real,
        syn,
        weights,
        LossOptions {
            uni: UniDistance::Cfd {
                freqs,
                weights: CfdWeights::default(),
            },
            cross_mode: CrossMode::Cosine,
            cross_freqs: None,
            degenerate: DegeneratePolicy::Error,
        },
    )
}
