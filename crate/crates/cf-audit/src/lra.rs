//! Local Risk Assessment: estimate how much of the counterfactual region
//! around an instance is unjustified, by uniform ball/layer sampling and
//! ε-cluster bookkeeping against correctly predicted training anchors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{BlackBox, Label};
use crate::connect::{auto_epsilon, ClusterState, Epsilon};
use crate::error::{AuditError, Result};
use crate::geometry::{dist, sample_ball, sample_layer, Ball, Point, SphericalLayer};

/// A correctly predicted training instance of a class other than `f(x)`,
/// with its distance to the studied instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Anchor {
    pub index: usize,
    pub point: Point,
    pub label: Label,
    pub distance: f64,
}

/// Anchors sorted by non-decreasing distance (ties by training index).
#[derive(Debug, Clone)]
pub struct AnchorList(pub Vec<Anchor>);

/// Correctly predicted other-class training instances, closest first.
pub fn anchors(
    x: &Point,
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
) -> Result<AnchorList> {
    let fx = f.predict(x);
    let mut list: Vec<Anchor> = train_points
        .iter()
        .zip(train_labels.iter())
        .enumerate()
        .filter(|(_, (z, &l))| l != fx && f.predict(z) == l)
        .map(|(index, (z, &l))| Anchor {
            index,
            point: z.clone(),
            label: l,
            distance: dist(x, z),
        })
        .collect();
    if list.is_empty() {
        return Err(AuditError::NoAnchor(
            "no correctly predicted training instance of another class".into(),
        ));
    }
    list.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.index.cmp(&b.index))
    });
    Ok(AnchorList(list))
}

#[derive(Debug, Clone)]
pub struct LraParams {
    /// Number of uniform samples in the initial ball.
    pub n: usize,
    /// Hard cap on exploration layers.
    pub max_layers: usize,
    /// Per-layer sample count is volume-matched to the initial ball,
    /// capped at this multiple of `n`.
    pub layer_cap_factor: f64,
    /// Stall-decision window, in multiples of `n` drawn samples.
    pub stall_window: f64,
}

impl Default for LraParams {
    fn default() -> Self {
        LraParams {
            n: 2000,
            max_layers: 50,
            layer_cap_factor: 10.0,
            stall_window: 1.0,
        }
    }
}

/// Outcome of one LRA run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LraReport {
    /// Initial ball samples of the counterfactual class that ended justified.
    pub n_j: usize,
    /// ... and unjustified.
    pub n_u: usize,
    /// Total initial ball samples (`n`).
    pub n_samples: usize,
    pub epsilon: f64,
    pub layers_explored: usize,
    /// True when the initial ball held no counterfactual-class sample.
    pub empty_ball: bool,
    pub cf_label: Label,
    /// Per initial counterfactual-class sample: justified at the end?
    pub provenance: Vec<bool>,
}

/// Vulnerability indicator and risk ratio for one instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskScores {
    pub s_x: u8,
    pub r_x: f64,
}

pub fn scores(report: &LraReport) -> RiskScores {
    let total = report.n_j + report.n_u;
    RiskScores {
        s_x: (report.n_u > 0) as u8,
        r_x: if total == 0 {
            0.0
        } else {
            report.n_u as f64 / total as f64
        },
    }
}

/// One run of the Local Risk Assessment around `x`.
pub fn lra<R: Rng + ?Sized>(
    x: &Point,
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
    params: &LraParams,
    rng: &mut R,
) -> Result<LraReport> {
    if params.n < 2 {
        return Err(AuditError::InvalidInput(
            "lra needs n >= 2 (epsilon undefined otherwise)".into(),
        ));
    }
    let anchor_list = anchors(x, f, train_points, train_labels)?;
    let a0 = anchor_list.0[0].clone();
    let cf_label = a0.label;
    // later anchors are filtered to the counterfactual class fixed by a0
    let cf_anchors: Vec<&Anchor> = anchor_list.0.iter().filter(|a| a.label == cf_label).collect();
    let r0 = a0.distance;

    if r0 == 0.0 {
        return Ok(LraReport {
            n_j: 0,
            n_u: 0,
            n_samples: params.n,
            epsilon: 0.0,
            layers_explored: 0,
            empty_ball: true,
            cf_label,
            provenance: Vec::new(),
        });
    }

    // Definition step
    let ball = Ball::new(x.clone(), r0)?;
    let samples = sample_ball(&ball, params.n, rng);

    // Initial assessment
    let sample_labels: Vec<Label> = samples.iter().map(|p| f.predict(p)).collect();
    let cf_samples: Vec<Point> = samples
        .iter()
        .zip(sample_labels.iter())
        .filter(|(_, &l)| l == cf_label)
        .map(|(p, _)| p.clone())
        .collect();
    let m = cf_samples.len();
    if m == 0 {
        return Ok(LraReport {
            n_j: 0,
            n_u: 0,
            n_samples: params.n,
            epsilon: 0.0,
            layers_explored: 0,
            empty_ball: true,
            cf_label,
            provenance: Vec::new(),
        });
    }
    let eps = chain_epsilon(&samples, &sample_labels, cf_label, &a0.point)?;
    let mut state = ClusterState::build(&cf_samples, std::slice::from_ref(&a0.point), eps);

    // Iteration step. Layers between consecutive anchors can be arbitrarily
    // thin at matched density, so "not growing anymore" is judged over
    // windows of one ball-worth (n) of drawn samples, the unit one layer
    // round represents in Algorithm 1.
    let dim = x.dim() as f64;
    let mut layers_explored = 0usize;
    let mut k = 1usize;
    let mut window_start = state.len();
    let mut window_drawn = 0usize;
    while state.has_growing() && k < cf_anchors.len() && layers_explored < params.max_layers {
        let r_in = cf_anchors[k - 1].distance;
        let r_out = cf_anchors[k].distance;
        let count = layer_sample_count(params, dim, r0, r_in, r_out);
        let layer = SphericalLayer::new(x.clone(), r_in, r_out)?;
        let new_points: Vec<Point> = sample_layer(&layer, count, rng)
            .into_iter()
            .filter(|p| f.predict(p) == cf_label)
            .collect();
        state.merge_new(
            &new_points,
            std::slice::from_ref(&cf_anchors[k].point),
            eps,
        );
        window_drawn += count;
        if window_drawn as f64 >= params.n as f64 * params.stall_window {
            state.stall_ungrown_since(window_start);
            window_start = state.len();
            window_drawn = 0;
        }
        layers_explored += 1;
        k += 1;
    }
    // anchors exhausted or cap hit: still-growing clusters are non-connected
    state.stall_all_growing();

    let provenance: Vec<bool> = (0..m).map(|id| state.is_justified(id)).collect();
    let n_j = provenance.iter().filter(|&&j| j).count();
    Ok(LraReport {
        n_j,
        n_u: m - n_j,
        n_samples: params.n,
        epsilon: eps.value(),
        layers_explored,
        empty_ball: false,
        cf_label,
        provenance,
    })
}

/// How many same-class neighbors every ball sample is guaranteed to reach
/// within ε. Any ε-graph component therefore has more than this many
/// members, which rules out spurious micro-fragments caused by sampling
/// noise in regions that are in fact connected.
pub(crate) const CHAIN_NEIGHBORS: usize = 2;

/// Connectivity scale for the ε-chains. Chains only link points of one
/// predicted class, so the scale is calibrated per predicted-class group of
/// ball samples: the largest distance from a group member to its
/// `CHAIN_NEIGHBORS`-th nearest neighbor within the group (fewer when the
/// group is smaller). The counterfactual-class group additionally contains
/// the anchor `a0`, which is clustered with it. The plain
/// max-nearest-neighbor distance over the whole ball is kept as a floor,
/// and the result is nudged up one ulp so the defining pair itself links
/// under the strict `d < ε` rule.
pub(crate) fn chain_epsilon(
    samples: &[Point],
    labels: &[Label],
    cf_label: Label,
    a0: &Point,
) -> Result<Epsilon> {
    let k = CHAIN_NEIGHBORS;
    let floor = auto_epsilon(samples)?.value();
    let mut classes: Vec<Label> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut scale = floor;
    for class in classes {
        let mut group: Vec<&Point> = samples
            .iter()
            .zip(labels.iter())
            .filter(|(_, &l)| l == class)
            .map(|(p, _)| p)
            .collect();
        if class == cf_label {
            group.push(a0);
        }
        if group.len() < 2 {
            continue;
        }
        let kk = k.min(group.len() - 1);
        let mut best = vec![f64::INFINITY; kk];
        for (i, p) in group.iter().enumerate() {
            for b in best.iter_mut() {
                *b = f64::INFINITY;
            }
            for (j, q) in group.iter().enumerate() {
                if i == j {
                    continue;
                }
                let mut d = dist(p, q);
                // insertion into the running k smallest distances
                for b in best.iter_mut() {
                    if d < *b {
                        std::mem::swap(&mut d, b);
                    }
                }
            }
            scale = scale.max(best[kk - 1]);
        }
    }
    Epsilon::new(scale.next_up())
}

pub(crate) fn layer_sample_count(params: &LraParams, dim: f64, r0: f64, r_in: f64, r_out: f64) -> usize {
    if r_out <= r_in {
        return 0;
    }
    let ratio = (r_out / r0).powf(dim) - (r_in / r0).powf(dim);
    let raw = (params.n as f64 * ratio).min(params.n as f64 * params.layer_cap_factor);
    raw.ceil() as usize
}

/// Per-instance averages over repeated seeded runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceAggregate {
    pub instance: usize,
    pub mean_s: f64,
    pub mean_r: f64,
    pub mean_epsilon: f64,
    pub mean_layers: f64,
    pub empty_ball_runs: usize,
}

/// Test-set aggregate: `S̄` and `R̄` with a standard deviation across
/// instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub rows: Vec<InstanceAggregate>,
    pub s_bar: f64,
    pub r_bar: f64,
    pub r_std: f64,
    pub runs: usize,
}

pub fn aggregate<R: Rng + ?Sized>(
    test: &[Point],
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
    params: &LraParams,
    runs: usize,
    rng: &mut R,
) -> Result<AggregateReport> {
    if runs == 0 {
        return Err(AuditError::InvalidInput("runs must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(test.len());
    for (i, x) in test.iter().enumerate() {
        let mut s_sum = 0.0;
        let mut r_sum = 0.0;
        let mut eps_sum = 0.0;
        let mut layer_sum = 0.0;
        let mut empty = 0usize;
        for _ in 0..runs {
            let report = lra(x, f, train_points, train_labels, params, rng)?;
            let sc = scores(&report);
            s_sum += sc.s_x as f64;
            r_sum += sc.r_x;
            eps_sum += report.epsilon;
            layer_sum += report.layers_explored as f64;
            empty += report.empty_ball as usize;
        }
        let k = runs as f64;
        rows.push(InstanceAggregate {
            instance: i,
            mean_s: s_sum / k,
            mean_r: r_sum / k,
            mean_epsilon: eps_sum / k,
            mean_layers: layer_sum / k,
            empty_ball_runs: empty,
        });
    }
    let n = rows.len() as f64;
    let s_bar = rows.iter().map(|r| r.mean_s).sum::<f64>() / n;
    let r_bar = rows.iter().map(|r| r.mean_r).sum::<f64>() / n;
    let r_std = (rows.iter().map(|r| (r.mean_r - r_bar).powi(2)).sum::<f64>() / n).sqrt();
    Ok(AggregateReport {
        rows,
        s_bar,
        r_bar,
        r_std,
        runs,
    })
}

/// `R_x` as a function of the sample count, used to pick a saturation `n`.
pub fn n_sweep<R: Rng + ?Sized>(
    x: &Point,
    f: &dyn BlackBox,
    train_points: &[Point],
    train_labels: &[Label],
    n_grid: &[usize],
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let params = LraParams {
            n,
            ..LraParams::default()
        };
        let report = lra(x, f, train_points, train_labels, &params, rng)?;
        out.push((n, scores(&report).r_x));
    }
    Ok(out)
}
