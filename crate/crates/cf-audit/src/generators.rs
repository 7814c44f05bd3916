//! Post-hoc counterfactual explanation generators audited by VE:
//! Growing Spheres, HCLS (budget-constrained confidence maximization by
//! stochastic hill-climbing) and LORE-lite (local surrogate tree with
//! L0-minimal threshold edits).

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::classifiers::{train_tree, BlackBox, Label, TreeParams};
use crate::error::{AuditError, Result};
use crate::geometry::{dist, sample_ball, sample_layer, Ball, Point, SphericalLayer};

/// A generated counterfactual: `f(point) != f(source)` holds at return,
/// checked against the true model.
#[derive(Debug, Clone)]
pub struct Counterfactual {
    pub point: Point,
    pub source: Point,
    pub generator: String,
    /// Number of predict/confidence calls spent.
    pub queries: u64,
}

/// Wrapper counting every query to the underlying model.
pub struct QueryCounter<'a> {
    inner: &'a dyn BlackBox,
    count: AtomicU64,
}

impl<'a> QueryCounter<'a> {
    pub fn new(inner: &'a dyn BlackBox) -> Self {
        QueryCounter {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn queries(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

impl BlackBox for QueryCounter<'_> {
    fn predict(&self, p: &Point) -> Label {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(p)
    }

    fn predict_confidence(&self, p: &Point) -> Option<Vec<f64>> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.predict_confidence(p)
    }
}

#[derive(Debug, Clone)]
pub struct GsParams {
    /// Initial layer radius.
    pub eta: f64,
    /// Outer-radius growth factor per layer.
    pub growth: f64,
    /// Samples per layer.
    pub per_layer: usize,
    /// Give up once the outer radius exceeds this.
    pub max_radius: f64,
}

impl Default for GsParams {
    fn default() -> Self {
        GsParams {
            eta: 0.1,
            growth: 1.3,
            per_layer: 200,
            max_radius: 20.0,
        }
    }
}

/// Growing Spheres: expand spherical layers around `x` until an enemy
/// (label != f(x)) appears; if the first ball already holds enemies,
/// shrink first. Returns the closest enemy sampled in the terminal layer.
pub fn growing_spheres<R: Rng + ?Sized>(
    x: &Point,
    f: &dyn BlackBox,
    params: &GsParams,
    rng: &mut R,
) -> Result<Counterfactual> {
    let counter = QueryCounter::new(f);
    let fx = counter.predict(x);
    let closest_enemy = |pts: &[Point], counter: &QueryCounter| -> Option<Point> {
        pts.iter()
            .filter(|p| counter.predict(p) != fx)
            .min_by(|a, b| dist(a, x).partial_cmp(&dist(b, x)).unwrap())
            .cloned()
    };

    // shrink until the initial ball is enemy-free
    let mut eta = params.eta;
    let mut best_inner: Option<Point> = None;
    loop {
        let ball = Ball::new(x.clone(), eta)?;
        let pts = sample_ball(&ball, params.per_layer, rng);
        match closest_enemy(&pts, &counter) {
            Some(e) => {
                best_inner = Some(e);
                if eta < params.eta * 1e-4 {
                    break;
                }
                eta /= 2.0;
            }
            None => break,
        }
    }
    if let Some(e) = best_inner {
        // enemies persist arbitrarily close to x; return the closest seen
        return Ok(Counterfactual {
            point: e,
            source: x.clone(),
            generator: "gs".into(),
            queries: counter.queries(),
        });
    }

    let mut r_in = eta;
    loop {
        let r_out = r_in * params.growth;
        if r_out > params.max_radius {
            return Err(AuditError::NoCounterfactual(format!(
                "growing spheres radius cap {} exceeded",
                params.max_radius
            )));
        }
        let layer = SphericalLayer::new(x.clone(), r_in, r_out)?;
        let pts = sample_layer(&layer, params.per_layer, rng);
        if let Some(e) = closest_enemy(&pts, &counter) {
            return Ok(Counterfactual {
                point: e,
                source: x.clone(),
                generator: "gs".into(),
                queries: counter.queries(),
            });
        }
        r_in = r_out;
    }
}

#[derive(Debug, Clone)]
pub struct HclsParams {
    /// Maximum distance from `x` (the search ball radius).
    pub budget: f64,
    pub iters: usize,
}

/// Stochastic hill-climb over `B(x, budget)` maximizing the confidence of
/// the counterfactual class. Requires `predict_confidence`.
pub fn hcls<R: Rng + ?Sized>(
    x: &Point,
    f: &dyn BlackBox,
    params: &HclsParams,
    rng: &mut R,
) -> Result<Counterfactual> {
    if params.budget <= 0.0 {
        return Err(AuditError::InvalidInput("hcls budget must be > 0".into()));
    }
    if params.iters == 0 {
        return Err(AuditError::NoCounterfactual("hcls given zero iterations".into()));
    }
    let counter = QueryCounter::new(f);
    let fx = counter.predict(x);
    let enemy_confidence = |p: &Point| -> Result<f64> {
        let conf = counter.predict_confidence(p).ok_or_else(|| {
            AuditError::InvalidInput("hcls requires a model with predict_confidence".into())
        })?;
        Ok(conf
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != fx as usize)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max))
    };

    let dim = x.dim();
    let mut current = x.clone();
    let mut current_score = enemy_confidence(&current)?;
    let mut best: Option<(Point, f64)> = None;
    for i in 0..params.iters {
        // step size decays as the climb progresses
        let sigma = params.budget * (0.4 * (1.0 - i as f64 / params.iters as f64) + 0.05);
        let mut cand = Point(
            current
                .0
                .iter()
                .map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<f64>>(),
        );
        debug_assert_eq!(cand.dim(), dim);
        let d = dist(&cand, x);
        if d > params.budget {
            // project back onto the budget ball
            let scale = params.budget / d;
            cand = Point(
                cand.0
                    .iter()
                    .zip(x.0.iter())
                    .map(|(c, xc)| xc + (c - xc) * scale)
                    .collect(),
            );
        }
        let score = enemy_confidence(&cand)?;
        let flipped = counter.predict(&cand) != fx;
        if flipped && best.as_ref().map_or(true, |(_, s)| score > *s) {
            best = Some((cand.clone(), score));
        }
        if score > current_score {
            current = cand;
            current_score = score;
        }
    }
    match best {
        Some((point, _)) => Ok(Counterfactual {
            point,
            source: x.clone(),
            generator: "hcls".into(),
            queries: counter.queries(),
        }),
        None => Err(AuditError::NoCounterfactual(format!(
            "no class-flipping point within budget {} after {} iterations",
            params.budget, params.iters
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct LoreParams {
    /// Local neighborhood size (half factual, half counterfactual).
    pub pop: usize,
    pub tree_depth: usize,
    /// Threshold-crossing margin as a fraction of each feature's range
    /// over the training set.
    pub margin_frac: f64,
    /// Fallback when the surrogate counterfactual keeps failing the true
    /// model check.
    pub gs_fallback: GsParams,
}

impl Default for LoreParams {
    fn default() -> Self {
        LoreParams {
            pop: 600,
            tree_depth: 4,
            margin_frac: 0.01,
            gs_fallback: GsParams::default(),
        }
    }
}

/// LORE-lite: balanced local neighborhood by rejection sampling in a
/// growing ball, surrogate decision tree, and the L0-minimal enemy-leaf
/// edit of `x`, re-checked against the true model.
pub fn lore_lite<R: Rng + ?Sized>(
    x: &Point,
    f: &dyn BlackBox,
    train_points: &[Point],
    params: &LoreParams,
    rng: &mut R,
) -> Result<Counterfactual> {
    if params.pop == 0 {
        return Err(AuditError::InvalidInput("lore pop must be > 0".into()));
    }
    let counter = QueryCounter::new(f);
    let fx = counter.predict(x);
    let dim = x.dim();
    let want = (params.pop / 2).max(1);

    // initial scale: distance to the nearest training point predicted enemy
    let mut radius = train_points
        .iter()
        .filter(|z| counter.predict(z) != fx)
        .map(|z| dist(z, x))
        .fold(f64::INFINITY, f64::min);
    if !radius.is_finite() {
        radius = 1.0;
    }

    let mut same: Vec<Point> = Vec::new();
    let mut other: Vec<Point> = Vec::new();
    for _ in 0..20 {
        let ball = Ball::new(x.clone(), radius)?;
        for p in sample_ball(&ball, params.pop, rng) {
            if counter.predict(&p) == fx {
                same.push(p);
            } else {
                other.push(p);
            }
        }
        if same.len() >= want && other.len() >= want {
            break;
        }
        radius *= 2.0;
    }
    if other.is_empty() {
        return Err(AuditError::NoCounterfactual(
            "lore found no counterfactual-class neighborhood".into(),
        ));
    }
    same.truncate(want);
    other.truncate(want);
    let mut neigh_points: Vec<Point> = same;
    let mut neigh_labels: Vec<Label> = vec![fx; neigh_points.len()];
    for p in other {
        neigh_labels.push(counter.predict(&p));
        neigh_points.push(p);
    }

    let surrogate = train_tree(
        &neigh_points,
        &neigh_labels,
        &TreeParams {
            max_depth: Some(params.tree_depth),
            ..TreeParams::default()
        },
        rng,
    )?;

    // per-feature crossing margin from the training data ranges
    let delta: Vec<f64> = (0..dim)
        .map(|d| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for z in train_points {
                lo = lo.min(z.0[d]);
                hi = hi.max(z.0[d]);
            }
            let range = if hi > lo { hi - lo } else { 1.0 };
            params.margin_frac * range
        })
        .collect();

    // candidate edits: per enemy leaf, move x just past each violated
    // threshold; rank by (changed feature count, L2 distance)
    let mut candidates: Vec<(usize, f64, Point)> = Vec::new();
    for (path, label) in surrogate.leaf_paths() {
        if label == fx {
            continue;
        }
        // per-feature feasible interval implied by the path
        let mut lo = vec![f64::NEG_INFINITY; dim];
        let mut hi = vec![f64::INFINITY; dim];
        for (feature, threshold, go_left) in path {
            if go_left {
                hi[feature] = hi[feature].min(threshold - delta[feature]);
            } else {
                lo[feature] = lo[feature].max(threshold + delta[feature]);
            }
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            continue;
        }
        let edited = Point(
            x.0.iter()
                .enumerate()
                .map(|(d, &v)| v.clamp(lo[d], hi[d]))
                .collect::<Vec<f64>>(),
        );
        let changed = edited
            .0
            .iter()
            .zip(x.0.iter())
            .filter(|(a, b)| a != b)
            .count();
        candidates.push((changed, dist(&edited, x), edited));
    }
    if candidates.is_empty() {
        return Err(AuditError::NoCounterfactual(
            "surrogate tree has no counterfactual leaf".into(),
        ));
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));

    let mut failures = 0usize;
    for (_, _, cand) in &candidates {
        if counter.predict(cand) != fx {
            return Ok(Counterfactual {
                point: cand.clone(),
                source: x.clone(),
                generator: "lore".into(),
                queries: counter.queries(),
            });
        }
        failures += 1;
        if failures >= 3 {
            break;
        }
    }
    let queries_so_far = counter.queries();
    let mut cf = growing_spheres(x, f, &params.gs_fallback, rng)?;
    cf.generator = "lore".into();
    cf.queries += queries_so_far;
    Ok(cf)
}

/// Everything a registry generator may need beyond `x` and the model.
pub struct GeneratorContext<'a> {
    pub train_points: &'a [Point],
    pub train_labels: &'a [Label],
    /// Natural per-query scale: distance from x to its closest correctly
    /// predicted enemy training instance.
    pub budget: f64,
}

/// A named counterfactual generator selectable from CLI/config.
pub trait Generator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(
        &self,
        x: &Point,
        f: &dyn BlackBox,
        ctx: &GeneratorContext,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Counterfactual>;
}

pub struct GrowingSpheresGenerator;

impl Generator for GrowingSpheresGenerator {
    fn name(&self) -> &str {
        "gs"
    }

    fn generate(
        &self,
        x: &Point,
        f: &dyn BlackBox,
        ctx: &GeneratorContext,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Counterfactual> {
        let params = GsParams {
            eta: (ctx.budget * 0.1).max(1e-6),
            max_radius: ctx.budget * 4.0,
            ..GsParams::default()
        };
        growing_spheres(x, f, &params, rng)
    }
}

pub struct HclsGenerator {
    pub iters: usize,
}

impl Default for HclsGenerator {
    fn default() -> Self {
        HclsGenerator { iters: 400 }
    }
}

impl Generator for HclsGenerator {
    fn name(&self) -> &str {
        "hcls"
    }

    fn generate(
        &self,
        x: &Point,
        f: &dyn BlackBox,
        ctx: &GeneratorContext,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Counterfactual> {
        let params = HclsParams {
            budget: ctx.budget,
            iters: self.iters,
        };
        hcls(x, f, &params, rng)
    }
}

pub struct LoreLiteGenerator {
    pub params: LoreParams,
}

impl Default for LoreLiteGenerator {
    fn default() -> Self {
        LoreLiteGenerator {
            params: LoreParams::default(),
        }
    }
}

impl Generator for LoreLiteGenerator {
    fn name(&self) -> &str {
        "lore"
    }

    fn generate(
        &self,
        x: &Point,
        f: &dyn BlackBox,
        ctx: &GeneratorContext,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Counterfactual> {
        let mut params = self.params.clone();
        params.gs_fallback.eta = (ctx.budget * 0.1).max(1e-6);
        params.gs_fallback.max_radius = ctx.budget * 4.0;
        lore_lite(x, f, ctx.train_points, &params, rng)
    }
}

/// Look up a generator by its registry key ("gs", "hcls", "lore").
pub fn generator_by_name(name: &str) -> Result<Box<dyn Generator>> {
    match name {
        "gs" => Ok(Box::new(GrowingSpheresGenerator)),
        "hcls" => Ok(Box::new(HclsGenerator::default())),
        "lore" => Ok(Box::new(LoreLiteGenerator::default())),
        other => Err(AuditError::InvalidConfig(format!(
            "unknown generator '{other}' (expected gs, hcls or lore)"
        ))),
    }
}
