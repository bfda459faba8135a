//! Dense Adam and Adagrad over the model's parameter blocks.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    Adagrad,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam {
        lr: f64,
        t: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
    Adagrad {
        lr: f64,
        acc: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    /// State sized for blocks of the given lengths.
    pub fn new(kind: OptimizerKind, lr: f64, sizes: &[usize]) -> Self {
        let zeros = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        match kind {
            OptimizerKind::Adam => Optimizer::Adam { lr, t: 0, m: zeros(), v: zeros() },
            OptimizerKind::Adagrad => Optimizer::Adagrad { lr, acc: zeros() },
        }
    }

    /// Applies one update to every block.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) {
        match self {
            Optimizer::Adam { lr, t, m, v } => {
                *t += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(*t);
                let bc2 = 1.0 - ADAM_BETA2.powi(*t);
                for (b, p) in params.iter_mut().enumerate() {
                    let (mb, vb, gb) = (&mut m[b], &mut v[b], &grads[b]);
                    for i in 0..p.len() {
                        let g = gb[i];
                        mb[i] = ADAM_BETA1 * mb[i] + (1.0 - ADAM_BETA1) * g;
                        vb[i] = ADAM_BETA2 * vb[i] + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = mb[i] / bc1;
                        let v_hat = vb[i] / bc2;
                        p[i] -= *lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
            Optimizer::Adagrad { lr, acc } => {
                for (b, p) in params.iter_mut().enumerate() {
                    let (ab, gb) = (&mut acc[b], &grads[b]);
                    for i in 0..p.len() {
                        let g = gb[i];
                        ab[i] += g * g;
                        p[i] -= *lr * g / (ab[i].sqrt() + ADAGRAD_EPS);
                    }
                }
            }
        }
    }
}
