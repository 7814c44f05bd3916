//! Dataset generation, CSV ingestion, train/test splits and
//! standardization.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classifiers::Label;
use crate::error::{AuditError, Result};
use crate::geometry::Point;

/// An immutable dataset of standardized-or-raw numeric features and
/// integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub points: Vec<Point>,
    pub labels: Vec<Label>,
    pub feature_names: Vec<String>,
    /// Set once `standardize` has been applied.
    pub standardization: Option<StandardizeParams>,
}

/// Per-feature mean and standard deviation computed on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizeParams {
    pub fn apply(&self, p: &Point) -> Point {
        Point(
            p.0.iter()
                .zip(self.mean.iter().zip(self.std.iter()))
                .map(|(x, (m, s))| (x - m) / s)
                .collect(),
        )
    }

    pub fn invert(&self, p: &Point) -> Point {
        Point(
            p.0.iter()
                .zip(self.mean.iter().zip(self.std.iter()))
                .map(|(x, (m, s))| x * s + m)
                .collect(),
        )
    }
}

/// Two interleaving half-circles with Gaussian coordinate noise.
pub fn make_half_moons<R: Rng + ?Sized>(n: usize, noise_std: f64, rng: &mut R) -> Dataset {
    let n0 = n / 2 + n % 2;
    let n1 = n / 2;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n0 {
        let t = PI * i as f64 / (n0.max(2) - 1) as f64;
        let (mut x, mut y) = (t.cos(), t.sin());
        x += noise_std * rng.sample::<f64, _>(StandardNormal);
        y += noise_std * rng.sample::<f64, _>(StandardNormal);
        points.push(Point(vec![x, y]));
        labels.push(0);
    }
    for i in 0..n1 {
        let t = PI * i as f64 / (n1.max(2) - 1) as f64;
        let (mut x, mut y) = (1.0 - t.cos(), 0.5 - t.sin());
        x += noise_std * rng.sample::<f64, _>(StandardNormal);
        y += noise_std * rng.sample::<f64, _>(StandardNormal);
        points.push(Point(vec![x, y]));
        labels.push(1);
    }
    Dataset {
        name: "half-moons".into(),
        points,
        labels,
        feature_names: vec!["x0".into(), "x1".into()],
        standardization: None,
    }
}

/// How the target column is turned into a binary label.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum TargetRule {
    /// Column already holds 0/1 values.
    AsIs,
    /// 1 where the numeric target is >= its median.
    MedianSplit,
    /// 1 where the numeric target is >= the threshold.
    Threshold(f64),
    /// 1 where the (string) target equals the given class, 0 elsewhere.
    OneVsRest(String),
}

/// Load a CSV with a header row: numeric feature columns plus one target
/// column binarized per `rule`. Rows with missing values are dropped.
pub fn load_csv(path: &Path, target: &str, rule: &TargetRule) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| AuditError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| AuditError::Data(format!("bad header in {}: {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| AuditError::Data(format!("target column '{target}' not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    let mut dropped = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let mut features = Vec::with_capacity(feature_names.len());
        let mut missing = false;
        let mut target_value = String::new();
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if col == target_idx {
                if field.is_empty() {
                    missing = true;
                }
                target_value = field.to_string();
                continue;
            }
            if field.is_empty() {
                missing = true;
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(AuditError::Data(format!(
                        "non-numeric feature cell at row {}, column '{}': '{}'",
                        row_no + 2,
                        headers[col],
                        field
                    )))
                }
            }
        }
        if missing {
            dropped += 1;
            continue;
        }
        rows.push((features, target_value));
    }
    if rows.is_empty() {
        return Err(AuditError::Data(format!(
            "no usable rows in {} ({dropped} dropped)",
            path.display()
        )));
    }

    let labels: Vec<Label> = match rule {
        TargetRule::AsIs => rows
            .iter()
            .map(|(_, t)| {
                t.parse::<f64>()
                    .ok()
                    .map(|v| (v != 0.0) as Label)
                    .ok_or_else(|| AuditError::Data(format!("non-numeric target '{t}'")))
            })
            .collect::<Result<_>>()?,
        TargetRule::MedianSplit => {
            let mut values: Vec<f64> = rows
                .iter()
                .map(|(_, t)| {
                    t.parse::<f64>()
                        .map_err(|_| AuditError::Data(format!("non-numeric target '{t}'")))
                })
                .collect::<Result<_>>()?;
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[sorted.len() / 2];
            values.drain(..).map(|v| (v >= median) as Label).collect()
        }
        TargetRule::Threshold(th) => rows
            .iter()
            .map(|(_, t)| {
                t.parse::<f64>()
                    .map(|v| (v >= *th) as Label)
                    .map_err(|_| AuditError::Data(format!("non-numeric target '{t}'")))
            })
            .collect::<Result<_>>()?,
        TargetRule::OneVsRest(class) => rows.iter().map(|(_, t)| (t == class) as Label).collect(),
    };

    Ok(Dataset {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "csv".into()),
        points: rows.into_iter().map(|(f, _)| Point(f)).collect(),
        labels,
        feature_names,
        standardization: None,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// Keep only the named feature columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Dataset> {
        let indices: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| AuditError::Data(format!("unknown feature '{n}'")))
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            name: self.name.clone(),
            points: self
                .points
                .iter()
                .map(|p| Point(indices.iter().map(|&i| p.0[i]).collect()))
                .collect(),
            labels: self.labels.clone(),
            feature_names: names.to_vec(),
            standardization: None,
        })
    }
}

/// Seeded shuffle split into `(train, test)` partitions.
pub fn split<R: Rng + ?Sized>(
    dataset: &Dataset,
    train_frac: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    let n_train = (train_frac * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(AuditError::Data(format!(
            "split leaves an empty side: {n_train}/{n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let take = |ids: &[usize], suffix: &str| Dataset {
        name: format!("{}-{suffix}", dataset.name),
        points: ids.iter().map(|&i| dataset.points[i].clone()).collect(),
        labels: ids.iter().map(|&i| dataset.labels[i]).collect(),
        feature_names: dataset.feature_names.clone(),
        standardization: dataset.standardization.clone(),
    };
    Ok((take(&idx[..n_train], "train"), take(&idx[n_train..], "test")))
}

/// Standardize both splits with parameters computed on the training split.
pub fn standardize(train: &Dataset, test: &Dataset) -> (Dataset, Dataset, StandardizeParams) {
    let dim = train.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in &train.points {
        for (m, x) in mean.iter_mut().zip(p.0.iter()) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut std = vec![0.0; dim];
    for p in &train.points {
        for (s, (x, m)) in std.iter_mut().zip(p.0.iter().zip(mean.iter())) {
            *s += (x - m) * (x - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let params = StandardizeParams { mean, std };
    let apply = |ds: &Dataset| Dataset {
        name: ds.name.clone(),
        points: ds.points.iter().map(|p| params.apply(p)).collect(),
        labels: ds.labels.clone(),
        feature_names: ds.feature_names.clone(),
        standardization: Some(params.clone()),
    };
    (apply(train), apply(test), params)
}

/// Named dataset sources resolvable through a manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub target: String,
    pub rule: TargetRule,
    /// Optional feature subset, applied after loading.
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DatasetManifest {
    pub datasets: BTreeMap<String, ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| AuditError::Data(format!("bad manifest: {e}")))
    }

    /// Load a named dataset, resolving relative paths against `data_dir`.
    pub fn load_dataset(&self, name: &str, data_dir: &Path) -> Result<Dataset> {
        let entry = self
            .datasets
            .get(name)
            .ok_or_else(|| AuditError::Data(format!("dataset '{name}' not in manifest")))?;
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            data_dir.join(&entry.path)
        };
        let mut ds = load_csv(&path, &entry.target, &entry.rule)?;
        if let Some(features) = &entry.features {
            ds = ds.select_features(features)?;
        }
        ds.name = name.to_string();
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    #[test]
    fn noiseless_half_moons_on_templates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = make_half_moons(50, 0.0, &mut rng);
        for (p, &l) in ds.points.iter().zip(ds.labels.iter()) {
            let on_template = if l == 0 {
                (p.0[0].powi(2) + p.0[1].powi(2) - 1.0).abs() < 1e-9 && p.0[1] >= -1e-9
            } else {
                ((p.0[0] - 1.0).powi(2) + (p.0[1] - 0.5).powi(2) - 1.0).abs() < 1e-9
                    && p.0[1] <= 0.5 + 1e-9
            };
            assert!(on_template, "{:?} label {l}", p.0);
        }
    }

    #[test]
    fn half_moons_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [10usize, 11, 100, 101] {
            let ds = make_half_moons(n, 0.1, &mut rng);
            let c1 = ds.labels.iter().filter(|&&l| l == 1).count() as i64;
            let c0 = ds.labels.len() as i64 - c1;
            assert!((c0 - c1).abs() <= 1);
        }
    }

    #[test]
    fn split_7_3() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = make_half_moons(10, 0.1, &mut rng);
        let (train, test) = split(&ds, 0.7, &mut rng).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);
    }

    #[test]
    fn split_partition_covers_exactly_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = make_half_moons(40, 0.1, &mut rng);
        let (train, test) = split(&ds, 0.7, &mut rng).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
        let mut all: Vec<String> = train
            .points
            .iter()
            .chain(test.points.iter())
            .map(|p| format!("{:?}", p.0))
            .collect();
        all.sort();
        let mut orig: Vec<String> = ds.points.iter().map(|p| format!("{:?}", p.0)).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn standardized_train_is_centered_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = make_half_moons(200, 0.2, &mut rng);
        let (train, test) = split(&ds, 0.7, &mut rng).unwrap();
        let (tr, _, params) = standardize(&train, &test);
        for f in 0..tr.dim() {
            let n = tr.len() as f64;
            let mean: f64 = tr.points.iter().map(|p| p.0[f]).sum::<f64>() / n;
            let var: f64 = tr.points.iter().map(|p| (p.0[f] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        // round trip is identity within 1e-9
        for p in &train.points {
            let back = params.invert(&params.apply(p));
            for (a, b) in back.0.iter().zip(p.0.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        // applying stored params reproduces train' bit-identically
        for (p, q) in train.points.iter().zip(tr.points.iter()) {
            assert_eq!(&params.apply(p), q);
        }
    }

    #[test]
    fn csv_non_numeric_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "a,b,target").unwrap();
        writeln!(f, "1.0,2.0,1").unwrap();
        writeln!(f, "1.0,oops,0").unwrap();
        let err = load_csv(&path, "target", &TargetRule::AsIs).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3") && msg.contains("'b'"), "{msg}");
    }

    #[test]
    fn csv_missing_target_column_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(load_csv(&path, "target", &TargetRule::AsIs).is_err());
    }

    #[test]
    fn csv_median_split_and_missing_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "a,y\n1,10\n2,20\n3,30\n4,\n").unwrap();
        let ds = load_csv(&path, "y", &TargetRule::MedianSplit).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels, vec![0, 1, 1]);
    }

    #[test]
    fn shipped_iris_loads_and_selects_petal_features() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../data/iris.csv");
        let ds = load_csv(&path, "species", &TargetRule::OneVsRest("versicolor".into())).unwrap();
        assert_eq!(ds.len(), 150);
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 50);
        let two = ds
            .select_features(&["petal_length".into(), "petal_width".into()])
            .unwrap();
        assert_eq!(two.dim(), 2);
    }
}
