//! Row-wise optimizers over the synthetic matrices. State is kept per row, and a
//! row's state only advances on iterations where that row was sampled.

use crate::condense::config::{CondenseConfig, OptimizerKind};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub enum RowOptimizer<T> {
    SgdMomentum {
        lr: T,
        momentum: T,
        velocity: Matrix<T>,
    },
    Adam {
        lr: T,
        beta1: T,
        beta2: T,
        eps: T,
        first: Matrix<T>,
        second: Matrix<T>,
        steps: Vec<i32>,
    },
}

impl<T: Scalar> RowOptimizer<T> {
    pub fn new(config: &CondenseConfig, rows: usize, cols: usize) -> Self {
        match config.optimizer {
            OptimizerKind::SgdMomentum => RowOptimizer::SgdMomentum {
                lr: T::of(config.syn_lr),
                momentum: T::of(config.momentum),
                velocity: Matrix::zeros(rows, cols),
            },
            OptimizerKind::Adam => RowOptimizer::Adam {
                lr: T::of(config.syn_lr),
                beta1: T::of(config.adam_betas.0),
                beta2: T::of(config.adam_betas.1),
                eps: T::of(config.adam_eps),
                first: Matrix::zeros(rows, cols),
                second: Matrix::zeros(rows, cols),
                steps: vec![0; rows],
            },
        }
    }

    /// Applies one step to `params.row(row)` given its gradient.
    pub fn step_row(&mut self, params: &mut Matrix<T>, row: usize, grad: &[T]) {
        match self {
            RowOptimizer::SgdMomentum { lr, momentum, velocity } => {
                let v = velocity.row_mut(row);
                let p = params.row_mut(row);
                for ((pj, vj), &gj) in p.iter_mut().zip(v.iter_mut()).zip(grad) {
                    *vj = *momentum * *vj + gj;
                    *pj -= *lr * *vj;
                }
            }
            RowOptimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                first,
                second,
                steps,
            } => {
                steps[row] += 1;
                let t = steps[row];
                let c1 = T::one() - beta1.powi(t);
                let c2 = T::one() - beta2.powi(t);
                let m = first.row_mut(row);
                let s = second.row_mut(row);
                let p = params.row_mut(row);
                for (((pj, mj), sj), &gj) in p.iter_mut().zip(m.iter_mut()).zip(s.iter_mut()).zip(grad) {
                    *mj = *beta1 * *mj + (T::one() - *beta1) * gj;
                    *sj = *beta2 * *sj + (T::one() - *beta2) * gj * gj;
                    let m_hat = *mj / c1;
                    let s_hat = *sj / c2;
                    *pj -= *lr * m_hat / (s_hat.sqrt() + *eps);
                }
            }
        }
    }
}
