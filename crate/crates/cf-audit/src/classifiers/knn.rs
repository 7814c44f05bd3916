//! k-nearest-neighbors over the stored training set.

use serde::{Deserialize, Serialize};

use super::{argmax_label, check_training_data, BlackBox, Label};
use crate::error::{AuditError, Result};
use crate::geometry::{dist, Point};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    points: Vec<Point>,
    labels: Vec<Label>,
    n_classes: usize,
}

pub fn train_knn(points: &[Point], labels: &[Label], k: usize) -> Result<Knn> {
    let n_classes = check_training_data(points, labels)?;
    if k == 0 || k > points.len() {
        return Err(AuditError::InvalidInput(format!(
            "k must be in 1..={}, got {k}",
            points.len()
        )));
    }
    Ok(Knn {
        k,
        points: points.to_vec(),
        labels: labels.to_vec(),
        n_classes,
    })
}

impl Knn {
    fn neighbor_counts(&self, p: &Point) -> Vec<f64> {
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, q)| (dist(p, q), i))
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut counts = vec![0.0; self.n_classes];
        for &(_, i) in order.iter().take(self.k) {
            counts[self.labels[i] as usize] += 1.0;
        }
        counts
    }
}

impl BlackBox for Knn {
    fn predict(&self, p: &Point) -> Label {
        argmax_label(&self.neighbor_counts(p))
    }

    fn predict_confidence(&self, p: &Point) -> Option<Vec<f64>> {
        Some(
            self.neighbor_counts(p)
                .into_iter()
                .map(|c| c / self.k as f64)
                .collect(),
        )
    }
}
