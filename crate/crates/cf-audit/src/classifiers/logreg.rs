//! Binary logistic regression fit by full-batch gradient descent on the
//! mean log-loss. The gradient is exposed so tests can check it against
//! central finite differences.

use serde::{Deserialize, Serialize};

use super::{check_training_data, BlackBox, Label};
use crate::error::{AuditError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogReg {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean log-loss of (weights, bias) on the data.
pub fn logreg_loss(points: &[Point], labels: &[Label], weights: &[f64], bias: f64) -> f64 {
    let n = points.len() as f64;
    points
        .iter()
        .zip(labels.iter())
        .map(|(p, &y)| {
            let z = p.0.iter().zip(weights.iter()).map(|(x, w)| x * w).sum::<f64>() + bias;
            let p1 = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
            if y == 1 {
                -p1.ln()
            } else {
                -(1.0 - p1).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Gradient of [`logreg_loss`] with respect to (weights, bias).
pub fn logreg_gradient(
    points: &[Point],
    labels: &[Label],
    weights: &[f64],
    bias: f64,
) -> (Vec<f64>, f64) {
    let n = points.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (p, &y) in points.iter().zip(labels.iter()) {
        let z = p.0.iter().zip(weights.iter()).map(|(x, w)| x * w).sum::<f64>() + bias;
        let err = sigmoid(z) - y as f64;
        for (g, x) in gw.iter_mut().zip(p.0.iter()) {
            *g += err * x;
        }
        gb += err;
    }
    for g in gw.iter_mut() {
        *g /= n;
    }
    (gw, gb / n)
}

pub fn train_logreg(points: &[Point], labels: &[Label], lr: f64, iters: usize) -> Result<LogReg> {
    let n_classes = check_training_data(points, labels)?;
    if n_classes > 2 {
        return Err(AuditError::InvalidInput(
            "logistic regression requires binary labels".into(),
        ));
    }
    let dim = points[0].dim();
    let mut model = LogReg {
        weights: vec![0.0; dim],
        bias: 0.0,
    };
    for _ in 0..iters {
        let (gw, gb) = logreg_gradient(points, labels, &model.weights, model.bias);
        for (w, g) in model.weights.iter_mut().zip(gw.iter()) {
            *w -= lr * g;
        }
        model.bias -= lr * gb;
    }
    Ok(model)
}

impl LogReg {
    pub fn probability(&self, p: &Point) -> f64 {
        let z = p
            .0
            .iter()
            .zip(self.weights.iter())
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }
}

impl BlackBox for LogReg {
    fn predict(&self, p: &Point) -> Label {
        (self.probability(p) >= 0.5) as Label
    }

    fn predict_confidence(&self, p: &Point) -> Option<Vec<f64>> {
        let p1 = self.probability(p);
        Some(vec![1.0 - p1, p1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_two_points() {
        let points = vec![Point(vec![-1.0]), Point(vec![1.0])];
        let labels = vec![0, 1];
        let m = train_logreg(&points, &labels, 1.0, 500).unwrap();
        assert_eq!(m.predict(&points[0]), 0);
        assert_eq!(m.predict(&points[1]), 1);
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let points: Vec<Point> = (0..40)
            .map(|_| Point(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
            .collect();
        let labels: Vec<Label> = points.iter().map(|p| (p.0[0] + p.0[2] > 0.1) as Label).collect();
        let h = 1e-6;
        for _ in 0..20 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: f64 = rng.gen_range(-1.0..1.0);
            let (gw, gb) = logreg_gradient(&points, &labels, &w, b);
            for i in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[i] += h;
                wm[i] -= h;
                let fd = (logreg_loss(&points, &labels, &wp, b)
                    - logreg_loss(&points, &labels, &wm, b))
                    / (2.0 * h);
                assert!((fd - gw[i]).abs() < 1e-5, "dim {i}: fd {fd} vs {g}", g = gw[i]);
            }
            let fd_b = (logreg_loss(&points, &labels, &w, b + h)
                - logreg_loss(&points, &labels, &w, b - h))
                / (2.0 * h);
            assert!((fd_b - gb).abs() < 1e-5);
        }
    }

    #[test]
    fn non_binary_labels_error() {
        let points = vec![Point(vec![0.0]), Point(vec![1.0]), Point(vec![2.0])];
        assert!(train_logreg(&points, &[0, 1, 2], 0.1, 10).is_err());
    }
}
