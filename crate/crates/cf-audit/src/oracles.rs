//! Independent brute-force references used to validate the fast paths.
//!
//! Nothing here shares code with the production modules: the DBSCAN below is
//! the textbook O(n²) algorithm, and the synthetic geometries have
//! closed-form class regions and risk values.

use crate::classifiers::{BlackBox, Label};
use crate::error::{AuditError, Result};
use crate::geometry::{dist, Point};

/// Textbook DBSCAN. Returns one label per point: `Some(cluster)` or `None`
/// for noise. A point counts in its own ε-neighborhood; neighborhoods use
/// strict `d < eps` so the oracle matches the ε-chain definition.
pub fn dbscan_reference(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| dist(&points[i], &points[j]) < eps)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut cluster = 0usize;
    for i in 0..n {
        if visited[i] || !core[i] {
            continue;
        }
        // expand a new cluster from this core point
        let mut stack = vec![i];
        visited[i] = true;
        labels[i] = Some(cluster);
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(cluster);
                }
                if core[q] && !visited[q] {
                    visited[q] = true;
                    stack.push(q);
                }
            }
        }
        cluster += 1;
    }
    labels
}

/// Canonical partition from DBSCAN labels: clusters plus noise singletons,
/// shaped like [`crate::connect::ClusterState::partition`].
pub fn dbscan_partition(labels: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut clusters: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (id, l) in labels.iter().enumerate() {
        match l {
            Some(c) => clusters.entry(*c).or_default().push(id),
            None => out.push(vec![id]),
        }
    }
    out.extend(clusters.into_values());
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort_by_key(|g| g[0]);
    out
}

/// Analytically known classifiers used as stand-ins for trained models.
#[derive(Debug, Clone)]
pub enum SyntheticGeometry {
    /// `inside` label within `radius` of `center`, `outside` beyond.
    Radial {
        center: Point,
        radius: f64,
        inside: Label,
        outside: Label,
    },
    /// `ge` label where `coords[feature] >= threshold`, else `lt`.
    HalfPlane {
        feature: usize,
        threshold: f64,
        ge: Label,
        lt: Label,
    },
    /// 2-D construction: the counterfactual class consists of an isolated
    /// axis-aligned square pocket plus the half-plane `x0 >= halfplane_x`;
    /// everything else is the factual class.
    PocketInBall {
        pocket_center: Point,
        pocket_half_side: f64,
        halfplane_x: f64,
        counterfactual: Label,
        factual: Label,
    },
}

/// A [`BlackBox`] with closed-form class regions.
#[derive(Debug, Clone)]
pub struct GeometryBlackBox {
    geometry: SyntheticGeometry,
}

impl GeometryBlackBox {
    pub fn geometry(&self) -> &SyntheticGeometry {
        &self.geometry
    }
}

pub fn pocket_classifier(geometry: SyntheticGeometry) -> GeometryBlackBox {
    GeometryBlackBox { geometry }
}

impl BlackBox for GeometryBlackBox {
    fn predict(&self, p: &Point) -> Label {
        match &self.geometry {
            SyntheticGeometry::Radial {
                center,
                radius,
                inside,
                outside,
            } => {
                if dist(p, center) <= *radius {
                    *inside
                } else {
                    *outside
                }
            }
            SyntheticGeometry::HalfPlane {
                feature,
                threshold,
                ge,
                lt,
            } => {
                if p.0[*feature] >= *threshold {
                    *ge
                } else {
                    *lt
                }
            }
            SyntheticGeometry::PocketInBall {
                pocket_center,
                pocket_half_side,
                halfplane_x,
                counterfactual,
                factual,
            } => {
                let in_pocket = p
                    .0
                    .iter()
                    .zip(pocket_center.0.iter())
                    .all(|(c, pc)| (c - pc).abs() <= *pocket_half_side);
                if in_pocket || p.0[0] >= *halfplane_x {
                    *counterfactual
                } else {
                    *factual
                }
            }
        }
    }
}

/// Closed-form local risk for [`SyntheticGeometry::PocketInBall`]:
/// `vol(pocket ∩ ball) / vol(counterfactual region ∩ ball)` where the ball
/// is `B(x, radius)`. Supports the 2-D case with the pocket either fully
/// inside or fully outside the ball.
pub fn exact_risk(geometry: &SyntheticGeometry, x: &Point, radius: f64) -> Result<f64> {
    let SyntheticGeometry::PocketInBall {
        pocket_center,
        pocket_half_side,
        halfplane_x,
        ..
    } = geometry
    else {
        return Err(AuditError::InvalidInput(
            "exact_risk supports PocketInBall only".into(),
        ));
    };
    if x.dim() != 2 {
        return Err(AuditError::InvalidInput("exact_risk is 2-D only".into()));
    }
    let s = *pocket_half_side;
    // corner distances decide full containment / exclusion
    let corners = [
        (pocket_center.0[0] - s, pocket_center.0[1] - s),
        (pocket_center.0[0] - s, pocket_center.0[1] + s),
        (pocket_center.0[0] + s, pocket_center.0[1] - s),
        (pocket_center.0[0] + s, pocket_center.0[1] + s),
    ];
    let corner_d: Vec<f64> = corners
        .iter()
        .map(|(cx, cy)| ((cx - x.0[0]).powi(2) + (cy - x.0[1]).powi(2)).sqrt())
        .collect();
    let fully_inside = corner_d.iter().all(|&d| d <= radius);
    let center_d = dist(pocket_center, x);
    let fully_outside = center_d - s * std::f64::consts::SQRT_2 > radius;
    let pocket_area = if fully_inside {
        (2.0 * s) * (2.0 * s)
    } else if fully_outside {
        0.0
    } else {
        return Err(AuditError::InvalidInput(
            "pocket straddles the ball boundary; no closed form".into(),
        ));
    };
    // circular segment of the ball beyond the half-plane
    let h = halfplane_x - x.0[0];
    let segment_area = if h >= radius {
        0.0
    } else if h <= -radius {
        std::f64::consts::PI * radius * radius
    } else {
        radius * radius * (h / radius).acos() - h * (radius * radius - h * h).sqrt()
    };
    let cf_area = pocket_area + segment_area;
    if cf_area == 0.0 {
        return Ok(0.0);
    }
    Ok(pocket_area / cf_area)
}
