//! ε-chain machinery: auto-ε selection, ε-graph clustering and incremental
//! cluster merging across exploration layers.
//!
//! Two points are linked when their distance is strictly below ε; clusters
//! are the connected components of that graph. With `minPts = 2` this
//! coincides with DBSCAN clusters (singleton components are DBSCAN noise),
//! which is cross-checked against [`crate::oracles::dbscan_reference`] in the
//! test suite.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::geometry::{dist, Point};

/// Connectivity scale for ε-chains. Strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(AuditError::InvalidInput(format!(
                "epsilon must be finite and > 0, got {value}"
            )));
        }
        Ok(Epsilon(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Max over points of the distance to their nearest neighbor.
///
/// This is the ε used for a whole LRA/VE run, computed once on the initial
/// ball sample and frozen for later layers.
pub fn auto_epsilon(points: &[Point]) -> Result<Epsilon> {
    if points.len() < 2 {
        return Err(AuditError::InvalidInput(
            "auto_epsilon needs at least 2 points".into(),
        ));
    }
    let mut max_nn = 0.0f64;
    for i in 0..points.len() {
        let mut best = f64::INFINITY;
        for j in 0..points.len() {
            if i != j {
                let d = sq_dist(&points[i], &points[j]);
                if d < best {
                    best = d;
                }
            }
        }
        let best = best.sqrt();
        if best > max_nn {
            max_nn = best;
        }
    }
    Epsilon::new(max_nn)
}

#[inline]
fn sq_dist(a: &Point, b: &Point) -> f64 {
    a.0.iter()
        .zip(b.0.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

/// Lifecycle of a cluster during layer exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterStatus {
    /// Contains at least one anchor: every member is ε-justified.
    Justified,
    /// No anchor yet, still receiving members.
    Growing,
    /// Received no member in the last completed round; non-connected.
    Stalled,
}

/// Outcome of an incremental merge: which pre-existing clusters
/// (identified by their pre-merge root id) received new members.
#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub grew: Vec<(usize, bool)>,
}

/// Evolving partition of counterfactual-class samples and anchors into
/// ε-connected clusters.
#[derive(Debug, Clone)]
pub struct ClusterState {
    points: Vec<Point>,
    is_anchor: Vec<bool>,
    parent: Vec<usize>,
    rank: Vec<u8>,
    anchor_count: Vec<usize>,
    stalled: Vec<bool>,
}

/// ε-graph connected components of `points` (no anchors).
pub fn cluster(points: &[Point], eps: Epsilon) -> Result<ClusterState> {
    if points.is_empty() {
        return Err(AuditError::InvalidInput("cluster needs points".into()));
    }
    Ok(ClusterState::build(points, &[], eps))
}

impl ClusterState {
    /// Cluster `samples ∪ anchors` from scratch. Member ids are assigned
    /// in order: samples first, then anchors.
    pub fn build(samples: &[Point], anchors: &[Point], eps: Epsilon) -> Self {
        let mut state = ClusterState {
            points: Vec::with_capacity(samples.len() + anchors.len()),
            is_anchor: Vec::new(),
            parent: Vec::new(),
            rank: Vec::new(),
            anchor_count: Vec::new(),
            stalled: Vec::new(),
        };
        state.push_members(samples, false);
        state.push_members(anchors, true);
        let n = state.points.len();
        let links = collect_edges(&state.points, 0, n, eps);
        for (i, j) in links {
            state.union(i, j);
        }
        state
    }

    fn push_members(&mut self, pts: &[Point], anchor: bool) {
        for p in pts {
            let id = self.points.len();
            self.points.push(p.clone());
            self.is_anchor.push(anchor);
            self.parent.push(id);
            self.rank.push(0);
            self.anchor_count.push(anchor as usize);
            self.stalled.push(false);
        }
    }

    /// Add a round of new samples and anchors, linking them to any existing
    /// cluster within ε (transitively; a new point may bridge two clusters,
    /// which then merge with justified status dominant).
    pub fn merge_new(
        &mut self,
        new_points: &[Point],
        new_anchors: &[Point],
        eps: Epsilon,
    ) -> MergeOutcome {
        let old_len = self.points.len();
        let mut pre_roots: Vec<usize> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for id in 0..old_len {
            let r = self.find(id);
            seen.entry(r).or_insert_with(|| {
                pre_roots.push(r);
                pre_roots.len() - 1
            });
        }
        let mut grew = vec![false; pre_roots.len()];

        self.push_members(new_points, false);
        self.push_members(new_anchors, true);

        let edges = collect_edges(&self.points, old_len, self.points.len(), eps);
        // pre-merge root of every old member, before any union below
        let pre_root_of: Vec<usize> = (0..old_len).map(|id| self.find(id)).collect();
        for (i, j) in edges {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if lo < old_len {
                grew[seen[&pre_root_of[lo]]] = true;
            }
            self.union(lo, hi);
        }
        // a cluster that received members is growing again
        for (idx, r) in pre_roots.iter().enumerate() {
            if grew[idx] {
                let root = self.find(*r);
                self.stalled[root] = false;
            }
        }
        MergeOutcome {
            grew: pre_roots.iter().copied().zip(grew).collect(),
        }
    }

    /// Mark every pre-existing unjustified cluster that received no new
    /// member in `outcome` as stalled ("not growing anymore").
    pub fn stall_ungrown(&mut self, outcome: &MergeOutcome) {
        for &(rep, grew) in &outcome.grew {
            if !grew {
                let root = self.find(rep);
                if self.anchor_count[root] == 0 {
                    self.stalled[root] = true;
                }
            }
        }
    }

    /// Stall every unjustified cluster that absorbed no member added at or
    /// after `window_start`. Used to judge "not growing anymore" over an
    /// exploration window spanning several thin layers.
    pub fn stall_ungrown_since(&mut self, window_start: usize) {
        let grown: std::collections::HashSet<usize> = (window_start..self.points.len())
            .map(|id| self.find(id))
            .collect();
        for id in 0..window_start {
            let r = self.find(id);
            if self.anchor_count[r] == 0 && !grown.contains(&r) {
                self.stalled[r] = true;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> &Point {
        &self.points[id]
    }

    pub fn is_anchor_member(&self, id: usize) -> bool {
        self.is_anchor[id]
    }

    fn find(&mut self, mut id: usize) -> usize {
        while self.parent[id] != id {
            self.parent[id] = self.parent[self.parent[id]];
            id = self.parent[id];
        }
        id
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        if self.rank[big] == self.rank[small] {
            self.rank[big] += 1;
        }
        self.anchor_count[big] += self.anchor_count[small];
        // justified dominates; otherwise a cluster that merges is growing
        self.stalled[big] = self.stalled[big] && self.stalled[small];
    }

    pub fn is_justified(&mut self, id: usize) -> bool {
        let r = self.find(id);
        self.anchor_count[r] > 0
    }

    pub fn status_of(&mut self, id: usize) -> ClusterStatus {
        let r = self.find(id);
        if self.anchor_count[r] > 0 {
            ClusterStatus::Justified
        } else if self.stalled[r] {
            ClusterStatus::Stalled
        } else {
            ClusterStatus::Growing
        }
    }

    /// True while any cluster is still unjustified and not stalled.
    pub fn has_growing(&mut self) -> bool {
        let ids: Vec<usize> = (0..self.points.len()).collect();
        ids.into_iter()
            .any(|id| self.status_of(id) == ClusterStatus::Growing)
    }

    /// Mark every remaining growing cluster stalled (anchors exhausted or
    /// layer cap hit: still-growing clusters are considered non-connected).
    pub fn stall_all_growing(&mut self) {
        for id in 0..self.points.len() {
            let r = self.find(id);
            if self.anchor_count[r] == 0 {
                self.stalled[r] = true;
            }
        }
    }

    /// True if both members share a cluster.
    pub fn same_cluster(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Canonical partition: clusters as sorted id lists, sorted by first id.
    pub fn partition(&mut self) -> Vec<Vec<usize>> {
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for id in 0..self.points.len() {
            let r = self.find(id);
            groups.entry(r).or_default().push(id);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        for g in &mut out {
            g.sort_unstable();
        }
        out.sort_by_key(|g| g[0]);
        out
    }
}

/// Collect ε-graph edges among `points`, restricted to pairs where at least
/// one endpoint id is in `new_from..new_to` (pass `0, n` for all pairs).
/// Uses a uniform grid with cell size ε when it beats brute force.
fn collect_edges(points: &[Point], new_from: usize, new_to: usize, eps: Epsilon) -> Vec<(usize, usize)> {
    let n = points.len();
    let dim = if n > 0 { points[0].dim() } else { 0 };
    let eps_v = eps.value();
    let mut edges = Vec::new();
    let use_grid = n >= 1000 && dim <= 4 && 3usize.pow(dim as u32) < n;
    if use_grid {
        let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let key = |p: &Point| -> Vec<i64> {
            p.0.iter().map(|c| (c / eps_v).floor() as i64).collect()
        };
        for (id, p) in points.iter().enumerate() {
            grid.entry(key(p)).or_default().push(id);
        }
        let mut offsets: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..dim {
            let mut next = Vec::new();
            for o in &offsets {
                for dcell in -1i64..=1 {
                    let mut v = o.clone();
                    v.push(dcell);
                    next.push(v);
                }
            }
            offsets = next;
        }
        for i in new_from..new_to {
            let base = key(&points[i]);
            for off in &offsets {
                let cell: Vec<i64> = base.iter().zip(off.iter()).map(|(a, b)| a + b).collect();
                if let Some(ids) = grid.get(&cell) {
                    for &j in ids {
                        // take pairs (new, old) and each new-new pair once
                        let wanted = j < new_from || j < i;
                        if wanted && dist(&points[i], &points[j]) < eps_v {
                            edges.push((i, j));
                        }
                    }
                }
            }
        }
    } else {
        for i in new_from..new_to {
            // pairs with older members
            for j in 0..new_from {
                if dist(&points[i], &points[j]) < eps_v {
                    edges.push((i, j));
                }
            }
            // pairs among the new members
            for j in new_from..i {
                if dist(&points[i], &points[j]) < eps_v {
                    edges.push((i, j));
                }
            }
        }
    }
    edges
}
