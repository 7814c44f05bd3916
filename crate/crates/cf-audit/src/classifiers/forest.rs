//! Random forest: bootstrapped CART trees with per-split feature subsets
//! and majority vote.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree, DecisionTree, TreeParams};
use super::{argmax_label, check_training_data, BlackBox, Label};
use crate::error::{AuditError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

#[derive(Debug, Clone)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of features considered per split.
    pub feature_frac: f64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: None,
            min_leaf: 1,
            feature_frac: 1.0,
            bootstrap: true,
        }
    }
}

pub fn train_forest<R: Rng + ?Sized>(
    points: &[Point],
    labels: &[Label],
    params: &ForestParams,
    rng: &mut R,
) -> Result<RandomForest> {
    let n_classes = check_training_data(points, labels)?;
    if params.n_trees == 0 {
        return Err(AuditError::InvalidInput("n_trees must be > 0".into()));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        feature_frac: params.feature_frac,
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let (pts, lbs): (Vec<Point>, Vec<Label>) = if params.bootstrap {
            (0..points.len())
                .map(|_| {
                    let i = rng.gen_range(0..points.len());
                    (points[i].clone(), labels[i])
                })
                .unzip()
        } else {
            (points.to_vec(), labels.to_vec())
        };
        trees.push(train_tree(&pts, &lbs, &tree_params, rng)?);
    }
    Ok(RandomForest { trees, n_classes })
}

impl RandomForest {
    fn votes(&self, p: &Point) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for t in &self.trees {
            counts[t.predict(p) as usize] += 1.0;
        }
        counts
    }
}

impl BlackBox for RandomForest {
    fn predict(&self, p: &Point) -> Label {
        argmax_label(&self.votes(p))
    }

    fn predict_confidence(&self, p: &Point) -> Option<Vec<f64>> {
        let n = self.trees.len() as f64;
        Some(self.votes(p).into_iter().map(|c| c / n).collect())
    }
}
