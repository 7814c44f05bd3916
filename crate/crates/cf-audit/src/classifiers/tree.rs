//! CART-style decision tree with Gini splitting.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_label, check_training_data, BlackBox, Label};
use crate::error::Result;
use crate::geometry::Point;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        label: Label,
        /// Class frequencies at the leaf, used as the confidence vector.
        class_freq: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of features considered per split; 1.0 means all.
    pub feature_frac: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            feature_frac: 1.0,
        }
    }
}

pub fn train_tree<R: Rng + ?Sized>(
    points: &[Point],
    labels: &[Label],
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    let n_classes = check_training_data(points, labels)?;
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        n_classes,
    };
    let idx: Vec<usize> = (0..points.len()).collect();
    tree.grow(points, labels, idx, 0, params, rng);
    Ok(tree)
}

impl DecisionTree {
    fn grow<R: Rng + ?Sized>(
        &mut self,
        points: &[Point],
        labels: &[Label],
        idx: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &i in &idx {
            counts[labels[i] as usize] += 1.0;
        }
        let total: f64 = idx.len() as f64;
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_done = params.max_depth.map_or(false, |d| depth >= d);
        let mut best: Option<(f64, usize, f64)> = None;
        if !pure && !depth_done && idx.len() >= 2 * params.min_leaf {
            let dim = points[0].dim();
            let features: Vec<usize> = if params.feature_frac >= 1.0 {
                (0..dim).collect()
            } else {
                let k = ((params.feature_frac * dim as f64).ceil() as usize).clamp(1, dim);
                let mut all: Vec<usize> = (0..dim).collect();
                all.shuffle(rng);
                let mut sel: Vec<usize> = all.into_iter().take(k).collect();
                sel.sort_unstable();
                sel
            };
            for &f in &features {
                let mut vals: Vec<(f64, Label)> =
                    idx.iter().map(|&i| (points[i].0[f], labels[i])).collect();
                vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let mut left = vec![0.0; self.n_classes];
                let mut right = counts.clone();
                for s in 0..vals.len() - 1 {
                    left[vals[s].1 as usize] += 1.0;
                    right[vals[s].1 as usize] -= 1.0;
                    if vals[s].0 == vals[s + 1].0 {
                        continue;
                    }
                    let nl = (s + 1) as f64;
                    let nr = total - nl;
                    if (nl as usize) < params.min_leaf || (nr as usize) < params.min_leaf {
                        continue;
                    }
                    let gini = |c: &[f64], n: f64| 1.0 - c.iter().map(|x| (x / n).powi(2)).sum::<f64>();
                    let score = nl / total * gini(&left, nl) + nr / total * gini(&right, nr);
                    let threshold = 0.5 * (vals[s].0 + vals[s + 1].0);
                    let better = match best {
                        None => true,
                        Some((bs, bf, bt)) => {
                            score < bs - 1e-12
                                || ((score - bs).abs() <= 1e-12 && (f, threshold) < (bf, bt))
                        }
                    };
                    if better {
                        best = Some((score, f, threshold));
                    }
                }
            }
        }
        match best {
            None => {
                let label = argmax_label(&counts);
                let class_freq: Vec<f64> = counts.iter().map(|c| c / total).collect();
                self.nodes.push(Node::Leaf { label, class_freq });
                self.nodes.len() - 1
            }
            Some((_, feature, threshold)) => {
                let (li, ri): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| points[i].0[feature] <= threshold);
                let left = self.grow(points, labels, li, depth + 1, params, rng);
                let right = self.grow(points, labels, ri, depth + 1, params, rng);
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
                self.nodes.len() - 1
            }
        }
    }

    fn leaf(&self, p: &Point) -> &Node {
        let mut node = self.nodes.last().expect("trained tree has nodes");
        loop {
            match node {
                Node::Leaf { .. } => return node,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if p.0[*feature] <= *threshold {
                        &self.nodes[*left]
                    } else {
                        &self.nodes[*right]
                    };
                }
            }
        }
    }

    /// Root-to-leaf paths of the tree as (feature, threshold, go_left)
    /// constraint lists, one per leaf, with the leaf label.
    pub fn leaf_paths(&self) -> Vec<(Vec<(usize, f64, bool)>, Label)> {
        let mut out = Vec::new();
        let root = self.nodes.len() - 1;
        let mut stack: Vec<(usize, Vec<(usize, f64, bool)>)> = vec![(root, Vec::new())];
        while let Some((ni, path)) = stack.pop() {
            match &self.nodes[ni] {
                Node::Leaf { label, .. } => out.push((path, *label)),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let mut lp = path.clone();
                    lp.push((*feature, *threshold, true));
                    stack.push((*left, lp));
                    let mut rp = path;
                    rp.push((*feature, *threshold, false));
                    stack.push((*right, rp));
                }
            }
        }
        out
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

impl BlackBox for DecisionTree {
    fn predict(&self, p: &Point) -> Label {
        match self.leaf(p) {
            Node::Leaf { label, .. } => *label,
            _ => unreachable!(),
        }
    }

    fn predict_confidence(&self, p: &Point) -> Option<Vec<f64>> {
        match self.leaf(p) {
            Node::Leaf { class_freq, .. } => Some(class_freq.clone()),
            _ => unreachable!(),
        }
    }
}
