//! Vulnerability Evaluation: audit whether the counterfactuals produced by
//! a generator are justified, restricted to instances whose local risk is
//! high enough for the audit to be informative.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{BlackBox, Label};
use crate::connect::{ClusterState, ClusterStatus};
use crate::error::{AuditError, Result};
use crate::generators::{Generator, GeneratorContext};
use crate::geometry::{dist, sample_ball, sample_layer, Ball, Point, SphericalLayer};
use crate::lra::{self, Anchor, LraParams};

#[derive(Debug, Clone)]
pub struct VeParams {
    /// Samples in the ball around the counterfactual.
    pub n: usize,
    pub max_layers: usize,
    pub layer_cap_factor: f64,
    /// Stall-decision window, in multiples of `n` drawn samples.
    pub stall_window: f64,
}

impl Default for VeParams {
    fn default() -> Self {
        VeParams {
            n: 2000,
            max_layers: 50,
            layer_cap_factor: 10.0,
            stall_window: 1.0,
        }
    }
}

/// Justification verdict for one counterfactual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VeResult {
    pub justified: bool,
    /// The anchor whose cluster the counterfactual joined, if any.
    pub witness: Option<Anchor>,
    pub epsilon: Option<f64>,
    pub layers_explored: usize,
}

/// Correctly predicted training instances of the *same* class as `f(e)`,
/// closest to `e` first.
fn same_class_anchors(
    e: &Point,
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
) -> Result<Vec<Anchor>> {
    let fe = f.predict(e);
    let mut list: Vec<Anchor> = train_points
        .iter()
        .zip(train_labels.iter())
        .enumerate()
        .filter(|(_, (z, &l))| l == fe && f.predict(z) == l)
        .map(|(index, (z, &l))| Anchor {
            index,
            point: z.clone(),
            label: l,
            distance: dist(e, z),
        })
        .collect();
    if list.is_empty() {
        return Err(AuditError::NoAnchor(format!(
            "no correctly predicted training instance of class {fe}"
        )));
    }
    list.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.index.cmp(&b.index))
    });
    Ok(list)
}

/// Decide whether `e` is justified: connected through an epsilon-chain of
/// same-predicted-class samples to a correctly predicted training
/// instance. Mirrors LRA but centered on `e`, which enters the cluster
/// structure as an ordinary member.
pub fn justification_check<R: Rng + ?Sized>(
    e: &Point,
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
    params: &VeParams,
    rng: &mut R,
) -> Result<VeResult> {
    if params.n < 2 {
        return Err(AuditError::InvalidInput(
            "justification check needs n >= 2".into(),
        ));
    }
    let anchors = same_class_anchors(e, f, train_points, train_labels)?;
    let b0 = anchors[0].clone();
    let r0 = b0.distance;
    if r0 == 0.0 {
        // e coincides with a correctly predicted training instance
        return Ok(VeResult {
            justified: true,
            witness: Some(b0),
            epsilon: None,
            layers_explored: 0,
        });
    }

    let fe = f.predict(e);
    let ball = Ball::new(e.clone(), r0)?;
    let samples = sample_ball(&ball, params.n, rng);
    let sample_labels: Vec<Label> = samples.iter().map(|p| f.predict(p)).collect();
    let mut points: Vec<Point> = samples
        .iter()
        .zip(sample_labels.iter())
        .filter(|(_, &l)| l == fe)
        .map(|(p, _)| p.clone())
        .collect();
    points.push(e.clone());
    let e_id = points.len() - 1;
    let eps = lra::chain_epsilon(&samples, &sample_labels, fe, &b0.point)?;
    let mut state = ClusterState::build(&points, std::slice::from_ref(&b0.point), eps);
    let mut witness_ids: Vec<(usize, Anchor)> = vec![(points.len(), b0.clone())];

    let lra_params = LraParams {
        n: params.n,
        max_layers: params.max_layers,
        layer_cap_factor: params.layer_cap_factor,
        stall_window: params.stall_window,
    };
    // same window semantics as the LRA iteration step: stall decisions are
    // made once a ball-worth of samples has been drawn, not per thin layer
    let dim = e.dim() as f64;
    let mut layers_explored = 0usize;
    let mut k = 1usize;
    let mut window_start = state.len();
    let mut window_drawn = 0usize;
    while state.status_of(e_id) == ClusterStatus::Growing
        && k < anchors.len()
        && layers_explored < params.max_layers
    {
        let r_in = anchors[k - 1].distance;
        let r_out = anchors[k].distance;
        let count = lra::layer_sample_count(&lra_params, dim, r0, r_in, r_out);
        let layer = SphericalLayer::new(e.clone(), r_in, r_out)?;
        let new_points: Vec<Point> = sample_layer(&layer, count, rng)
            .into_iter()
            .filter(|p| f.predict(p) == fe)
            .collect();
        let before = state.len();
        state.merge_new(
            &new_points,
            std::slice::from_ref(&anchors[k].point),
            eps,
        );
        witness_ids.push((before + new_points.len(), anchors[k].clone()));
        window_drawn += count;
        if window_drawn as f64 >= params.n as f64 * params.stall_window {
            state.stall_ungrown_since(window_start);
            window_start = state.len();
            window_drawn = 0;
        }
        layers_explored += 1;
        k += 1;
    }
    state.stall_all_growing();

    let justified = state.is_justified(e_id);
    let witness = if justified {
        witness_ids
            .iter()
            .find(|(id, _)| state.same_cluster(e_id, *id))
            .map(|(_, a)| a.clone())
    } else {
        None
    };
    Ok(VeResult {
        justified,
        witness,
        epsilon: Some(eps.value()),
        layers_explored,
    })
}

/// Per-generator outcome of a benchmark run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSummary {
    pub generator: String,
    /// Instances the generator was asked to explain.
    pub n_instances: usize,
    pub n_generated: usize,
    pub n_failed: usize,
    pub n_justified: usize,
    /// Mean justification over generated counterfactuals; absent when
    /// nothing was generated.
    pub j_bar: Option<f64>,
    pub failure_rate: f64,
    pub mean_queries: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VeBenchmark {
    pub n_candidates: usize,
    /// Instances with risk ratio strictly above the threshold.
    pub n_kept: usize,
    pub threshold: f64,
    pub summaries: Vec<GeneratorSummary>,
}

/// Run the full evaluation: filter instances by local risk, explain each
/// kept instance with every generator, and audit the counterfactuals.
#[allow(clippy::too_many_arguments)]
pub fn ve_benchmark<R: Rng>(
    instances: &[Point],
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
    generators: &[Box<dyn Generator>],
    lra_params: &LraParams,
    ve_params: &VeParams,
    threshold: f64,
    runs: usize,
    rng: &mut R,
) -> Result<VeBenchmark> {
    if generators.is_empty() || runs == 0 {
        return Err(AuditError::InvalidConfig(
            "ve benchmark needs at least one generator and one run".into(),
        ));
    }
    let mut kept: Vec<&Point> = Vec::new();
    for x in instances {
        let report = match lra::lra(x, f, train_points, train_labels, lra_params, rng) {
            Ok(r) => r,
            Err(AuditError::NoAnchor(_)) => continue,
            Err(e) => return Err(e),
        };
        if lra::scores(&report).r_x > threshold {
            kept.push(x);
        }
    }

    let mut summaries = Vec::with_capacity(generators.len());
    for g in generators {
        let mut n_generated = 0usize;
        let mut n_failed = 0usize;
        let mut n_justified = 0usize;
        let mut queries = 0u64;
        for &x in &kept {
            let budget = match lra::anchors(x, f, train_points, train_labels) {
                Ok(list) => list.0[0].distance,
                Err(_) => {
                    n_failed += runs;
                    continue;
                }
            };
            let ctx = GeneratorContext {
                train_points,
                train_labels,
                budget,
            };
            for _ in 0..runs {
                match g.generate(x, f, &ctx, rng) {
                    Ok(cf) => {
                        n_generated += 1;
                        queries += cf.queries;
                        let verdict = justification_check(
                            &cf.point,
                            f,
                            train_points,
                            train_labels,
                            ve_params,
                            rng,
                        )?;
                        if verdict.justified {
                            n_justified += 1;
                        }
                    }
                    Err(AuditError::NoCounterfactual(_)) | Err(AuditError::NoAnchor(_)) => {
                        n_failed += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let attempts = kept.len() * runs;
        summaries.push(GeneratorSummary {
            generator: g.name().to_string(),
            n_instances: kept.len(),
            n_generated,
            n_failed,
            n_justified,
            j_bar: (n_generated > 0).then(|| n_justified as f64 / n_generated as f64),
            failure_rate: if attempts == 0 {
                0.0
            } else {
                n_failed as f64 / attempts as f64
            },
            mean_queries: (n_generated > 0).then(|| queries as f64 / n_generated as f64),
        });
    }
    Ok(VeBenchmark {
        n_candidates: instances.len(),
        n_kept: kept.len(),
        threshold,
        summaries,
    })
}
