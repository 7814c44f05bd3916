//! The opaque prediction interface and built-in trainable model families.
//!
//! Audit code only ever touches a model through [`BlackBox`]: a label per
//! point, plus an optional per-class confidence vector (vote fractions for
//! forests, leaf frequencies for trees). Ties anywhere break toward the
//! lowest class id.

mod forest;
mod knn;
mod logreg;
mod svm;
mod tree;

pub use forest::{train_forest, ForestParams, RandomForest};
pub use knn::{train_knn, Knn};
pub use logreg::{logreg_gradient, logreg_loss, train_logreg, LogReg};
pub use svm::{train_rbf_svm, RbfSvm, SvmParams};
pub use tree::{train_tree, DecisionTree, TreeParams};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::geometry::Point;

/// Class id drawn from the training label set.
pub type Label = u32;

/// Opaque prediction interface: the only way audit code touches a model.
pub trait BlackBox: Send + Sync {
    fn predict(&self, p: &Point) -> Label;

    /// Per-class probability vector, when the model supports it.
    fn predict_confidence(&self, _p: &Point) -> Option<Vec<f64>> {
        None
    }
}

/// Adapter turning a plain function into a [`BlackBox`].
pub struct FnBlackBox<F: Fn(&Point) -> Label + Send + Sync>(pub F);

impl<F: Fn(&Point) -> Label + Send + Sync> BlackBox for FnBlackBox<F> {
    fn predict(&self, p: &Point) -> Label {
        (self.0)(p)
    }
}

/// A trained model of any built-in family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum TrainedModel {
    Tree(DecisionTree),
    Forest(RandomForest),
    Knn(Knn),
    LogReg(LogReg),
    RbfSvm(RbfSvm),
}

impl BlackBox for TrainedModel {
    fn predict(&self, p: &Point) -> Label {
        match self {
            TrainedModel::Tree(m) => m.predict(p),
            TrainedModel::Forest(m) => m.predict(p),
            TrainedModel::Knn(m) => m.predict(p),
            TrainedModel::LogReg(m) => m.predict(p),
            TrainedModel::RbfSvm(m) => m.predict(p),
        }
    }

    fn predict_confidence(&self, p: &Point) -> Option<Vec<f64>> {
        match self {
            TrainedModel::Tree(m) => m.predict_confidence(p),
            TrainedModel::Forest(m) => m.predict_confidence(p),
            TrainedModel::Knn(m) => m.predict_confidence(p),
            TrainedModel::LogReg(m) => m.predict_confidence(p),
            TrainedModel::RbfSvm(m) => m.predict_confidence(p),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    library_version: String,
    model: TrainedModel,
}

const MODEL_FORMAT_VERSION: u32 = 1;

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            library_version: crate::VERSION.to_string(),
            model: self.clone(),
        };
        fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(AuditError::Data(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file.model)
    }
}

/// Fraction of points whose prediction matches the given labels.
pub fn accuracy(model: &dyn BlackBox, points: &[Point], labels: &[Label]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let hits = points
        .iter()
        .zip(labels.iter())
        .filter(|(p, &l)| model.predict(p) == l)
        .count();
    hits as f64 / points.len() as f64
}

pub(crate) fn check_training_data(points: &[Point], labels: &[Label]) -> Result<usize> {
    if points.is_empty() {
        return Err(AuditError::InvalidInput("empty training data".into()));
    }
    if points.len() != labels.len() {
        return Err(AuditError::InvalidInput(
            "points/labels length mismatch".into(),
        ));
    }
    Ok(*labels.iter().max().unwrap() as usize + 1)
}

/// Highest-count class with ties broken toward the lowest class id.
pub(crate) fn argmax_label(counts: &[f64]) -> Label {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as Label
}
