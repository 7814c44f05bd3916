//! Euclidean distance and uniform samplers over hyperballs and
//! hyperspherical layers.
//!
//! All samplers are rejection-free at any dimension: a direction is drawn as
//! a normalized Gaussian vector and the radius is drawn from the analytic
//! radial CDF `F(r) = (r^d - r_in^d) / (r_out^d - r_in^d)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// A point in standardized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance. Errors on dimension mismatch.
pub fn distance(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(AuditError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(dist(a, b))
}

/// Euclidean distance assuming equal dimensions (checked in debug builds).
#[inline]
pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.0.iter()
        .zip(b.0.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(AuditError::InvalidInput(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }
}

/// Region between two concentric spheres, `r_inner <= d(p, center) <= r_outer`.
#[derive(Debug, Clone)]
pub struct SphericalLayer {
    pub center: Point,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl SphericalLayer {
    pub fn new(center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(0.0 <= r_inner && r_inner <= r_outer) || !r_outer.is_finite() {
            return Err(AuditError::InvalidInput(format!(
                "invalid layer radii: inner {r_inner}, outer {r_outer}"
            )));
        }
        Ok(SphericalLayer {
            center,
            r_inner,
            r_outer,
        })
    }
}

/// Isotropic unit direction from a normalized Gaussian draw.
fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn point_at(center: &Point, dir: &[f64], r: f64) -> Point {
    Point(
        center
            .0
            .iter()
            .zip(dir.iter())
            .map(|(c, u)| c + r * u)
            .collect(),
    )
}

/// `n` points uniform over the volume of `ball`.
pub fn sample_ball<R: Rng + ?Sized>(ball: &Ball, n: usize, rng: &mut R) -> Vec<Point> {
    let layer = SphericalLayer {
        center: ball.center.clone(),
        r_inner: 0.0,
        r_outer: ball.radius,
    };
    sample_layer(&layer, n, rng)
}

/// `n` points uniform over the volume of `layer`.
pub fn sample_layer<R: Rng + ?Sized>(layer: &SphericalLayer, n: usize, rng: &mut R) -> Vec<Point> {
    let d = layer.center.dim() as f64;
    let lo = layer.r_inner.powf(d);
    let hi = layer.r_outer.powf(d);
    (0..n)
        .map(|_| {
            let dir = unit_direction(layer.center.dim(), rng);
            let u: f64 = rng.gen();
            let r = (u * (hi - lo) + lo).powf(1.0 / d);
            // clamp against float drift so bounds hold exactly
            let r = r.clamp(layer.r_inner, layer.r_outer);
            point_at(&layer.center, &dir, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn distance_identity_and_345() {
        let a = Point(vec![0.0, 0.0]);
        assert_eq!(distance(&a, &a).unwrap(), 0.0);
        let b = Point(vec![3.0, 4.0]);
        assert_eq!(distance(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn distance_matches_scalar_loop_oracle() {
        let mut r = rng(7);
        for _ in 0..50 {
            let a = Point((0..7).map(|_| r.gen_range(-5.0..5.0)).collect());
            let b = Point((0..7).map(|_| r.gen_range(-5.0..5.0)).collect());
            // independent scalar-loop computation
            let mut acc = 0.0;
            for i in 0..7 {
                let diff = a.0[i] - b.0[i];
                acc += diff * diff;
            }
            let expected = acc.sqrt();
            assert!((distance(&a, &b).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_dimension_mismatch_errors() {
        let a = Point(vec![0.0]);
        let b = Point(vec![0.0, 1.0]);
        assert!(matches!(
            distance(&a, &b),
            Err(AuditError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_ball_returns_center_copies() {
        let ball = Ball::new(Point(vec![1.0, 2.0]), 0.0).unwrap();
        let pts = sample_ball(&ball, 5, &mut rng(1));
        assert_eq!(pts.len(), 5);
        for p in &pts {
            assert_eq!(p, &ball.center);
        }
        assert!(sample_ball(&ball, 0, &mut rng(1)).is_empty());
    }

    #[test]
    fn ball_radial_cdf_halfway() {
        // fraction inside r = 2^(-1/2) of a unit 2-ball is (r/R)^d = 0.5
        let ball = Ball::new(Point(vec![0.0, 0.0]), 1.0).unwrap();
        let pts = sample_ball(&ball, 100_000, &mut rng(42));
        let thresh = 0.5_f64.sqrt();
        let frac = pts
            .iter()
            .filter(|p| dist(p, &ball.center) <= thresh)
            .count() as f64
            / pts.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "frac = {frac}");
        for p in &pts {
            assert!(dist(p, &ball.center) <= ball.radius);
        }
    }

    #[test]
    fn shell_layer_puts_all_points_at_radius() {
        let layer = SphericalLayer::new(Point(vec![0.0; 4]), 2.0, 2.0).unwrap();
        for p in sample_layer(&layer, 200, &mut rng(3)) {
            assert!((dist(&p, &layer.center) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn layer_radial_cdf_d3() {
        // F(1.5) = (1.5^3 - 1) / (2^3 - 1)
        let layer = SphericalLayer::new(Point(vec![0.0; 3]), 1.0, 2.0).unwrap();
        let pts = sample_layer(&layer, 100_000, &mut rng(9));
        let expected = (1.5f64.powi(3) - 1.0) / 7.0;
        let frac = pts
            .iter()
            .filter(|p| dist(p, &layer.center) <= 1.5)
            .count() as f64
            / pts.len() as f64;
        assert!((frac - expected).abs() < 0.01, "frac = {frac}");
        for p in &pts {
            let r = dist(&p, &layer.center);
            assert!(r >= 1.0 && r <= 2.0);
        }
    }

    #[test]
    fn zero_inner_layer_matches_ball_radii() {
        // two-sample Kolmogorov-Smirnov on radius distributions
        let center = Point(vec![0.0, 0.0, 0.0]);
        let ball = Ball::new(center.clone(), 1.5).unwrap();
        let layer = SphericalLayer::new(center.clone(), 0.0, 1.5).unwrap();
        let n = 20_000;
        let mut ra: Vec<f64> = sample_ball(&ball, n, &mut rng(11))
            .iter()
            .map(|p| dist(p, &center))
            .collect();
        let mut rb: Vec<f64> = sample_layer(&layer, n, &mut rng(12))
            .iter()
            .map(|p| dist(p, &center))
            .collect();
        ra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rb.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < n && j < n {
            if ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        // critical value at alpha=0.001 for two samples of size n
        let crit = 1.95 * (2.0 / n as f64).sqrt();
        assert!(ks < crit, "ks = {ks}, crit = {crit}");
    }

    #[test]
    fn direction_uniformity() {
        let ball = Ball::new(Point(vec![0.0; 5]), 1.0).unwrap();
        let n = 50_000;
        let pts = sample_ball(&ball, n, &mut rng(21));
        for axis in 0..5 {
            let mean: f64 = pts
                .iter()
                .map(|p| {
                    let r = dist(p, &ball.center);
                    if r > 1e-12 {
                        p.0[axis] / r
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "axis {axis}: {mean}");
        }
    }

    #[test]
    fn identical_seed_identical_samples() {
        let ball = Ball::new(Point(vec![0.5, -0.5]), 2.0).unwrap();
        let a = sample_ball(&ball, 100, &mut rng(77));
        let b = sample_ball(&ball, 100, &mut rng(77));
        assert_eq!(a, b);
    }
}
