//! Gaussian-kernel SVM fit by pairwise dual coordinate ascent
//! (simplified SMO) to a KKT tolerance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, BlackBox, Label};
use crate::error::{AuditError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfSvm {
    support: Vec<Point>,
    /// alpha_i * y_i per support vector.
    coeffs: Vec<f64>,
    bias: f64,
    gamma: f64,
}

#[derive(Debug, Clone)]
pub struct SvmParams {
    pub c: f64,
    /// Kernel width; `None` defaults to 1/d.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_passes: 5,
        }
    }
}

fn kernel(a: &Point, b: &Point, gamma: f64) -> f64 {
    let sq: f64 = a
        .0
        .iter()
        .zip(b.0.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (-gamma * sq).exp()
}

pub fn train_rbf_svm<R: Rng + ?Sized>(
    points: &[Point],
    labels: &[Label],
    params: &SvmParams,
    rng: &mut R,
) -> Result<RbfSvm> {
    let n_classes = check_training_data(points, labels)?;
    if n_classes > 2 {
        return Err(AuditError::InvalidInput(
            "RBF-SVM requires binary labels".into(),
        ));
    }
    let n = points.len();
    let gamma = params.gamma.unwrap_or(1.0 / points[0].dim() as f64);
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel(&points[i], &points[j], gamma)).collect())
        .collect();
    let mut alpha = vec![0.0f64; n];
    let mut b = 0.0f64;
    let decision = |alpha: &[f64], b: f64, i: usize| -> f64 {
        (0..n).map(|j| alpha[j] * y[j] * k[j][i]).sum::<f64>() + b
    };
    let c = params.c;
    let mut passes = 0usize;
    let mut sweeps = 0usize;
    while passes < params.max_passes && sweeps < 1000 {
        sweeps += 1;
        let mut changed = 0usize;
        for i in 0..n {
            let ei = decision(&alpha, b, i) - y[i];
            if (y[i] * ei < -params.tol && alpha[i] < c) || (y[i] * ei > params.tol && alpha[i] > 0.0)
            {
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let ej = decision(&alpha, b, j) - y[j];
                let (ai_old, aj_old) = (alpha[i], alpha[j]);
                let (lo, hi) = if (y[i] - y[j]).abs() > 1e-12 {
                    ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
                } else {
                    ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
                };
                if lo >= hi {
                    continue;
                }
                let eta = 2.0 * k[i][j] - k[i][i] - k[j][j];
                if eta >= 0.0 {
                    continue;
                }
                let mut aj = aj_old - y[j] * (ei - ej) / eta;
                aj = aj.clamp(lo, hi);
                if (aj - aj_old).abs() < 1e-5 {
                    continue;
                }
                let ai = ai_old + y[i] * y[j] * (aj_old - aj);
                alpha[i] = ai;
                alpha[j] = aj;
                let b1 = b - ei - y[i] * (ai - ai_old) * k[i][i] - y[j] * (aj - aj_old) * k[i][j];
                let b2 = b - ej - y[i] * (ai - ai_old) * k[i][j] - y[j] * (aj - aj_old) * k[j][j];
                b = if ai > 0.0 && ai < c {
                    b1
                } else if aj > 0.0 && aj < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };
                changed += 1;
            }
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }
    let mut support = Vec::new();
    let mut coeffs = Vec::new();
    for i in 0..n {
        if alpha[i] > 1e-8 {
            support.push(points[i].clone());
            coeffs.push(alpha[i] * y[i]);
        }
    }
    Ok(RbfSvm {
        support,
        coeffs,
        bias: b,
        gamma,
    })
}

impl RbfSvm {
    pub fn decision_value(&self, p: &Point) -> f64 {
        self.support
            .iter()
            .zip(self.coeffs.iter())
            .map(|(s, c)| c * kernel(s, p, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

impl BlackBox for RbfSvm {
    fn predict(&self, p: &Point) -> Label {
        (self.decision_value(p) >= 0.0) as Label
    }
}
