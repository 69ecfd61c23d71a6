//! Discrete paths and arc-length reparameterization.

use crate::error::{Error, Result};
use crate::num::{Real, Vec2};

/// An ordered discrete curve in the phase plane, with its geometric action
/// once one has been computed for it.
#[derive(Clone, Debug)]
pub struct DiscretePath<T> {
    pub points: Vec<Vec2<T>>,
    pub action: Option<T>,
}

impl<T: Real> DiscretePath<T> {
    pub fn new(points: Vec<Vec2<T>>) -> Self {
        debug_assert!(points.len() >= 2);
        DiscretePath { points, action: None }
    }

    pub fn straight_line(a: Vec2<T>, b: Vec2<T>, n: usize) -> Self {
        assert!(n >= 2);
        let denom = T::of((n - 1) as f64);
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let t = T::of(i as f64) / denom;
            points.push(a + (b - a) * t);
        }
        // endpoints exactly as requested, immune to round-off above
        points[0] = a;
        points[n - 1] = b;
        DiscretePath { points, action: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean length in the (c, w) plane.
    pub fn length(&self) -> T {
        path_length(&self.points)
    }

    pub fn reparameterized(&self) -> Result<Self> {
        Ok(DiscretePath {
            points: reparameterize(&self.points)?,
            action: None,
        })
    }
}

/// Sum of Euclidean segment lengths.
pub fn path_length<T: Real>(points: &[Vec2<T>]) -> T {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

fn cumulative_lengths<T: Real>(points: &[Vec2<T>]) -> Vec<T> {
    let mut cum = Vec::with_capacity(points.len());
    let mut acc = T::zero();
    cum.push(acc);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        cum.push(acc);
    }
    cum
}

/// Resample an open polyline at `n` positions equidistant in its own arc
/// length. Endpoints are preserved bit-identically.
pub fn resample<T: Real>(points: &[Vec2<T>], n: usize) -> Result<Vec<Vec2<T>>> {
    assert!(points.len() >= 2 && n >= 2);
    let cum = cumulative_lengths(points);
    let total = cum[points.len() - 1];
    if total < T::of(1e-12) {
        return Err(Error::DegeneratePath);
    }
    let mut out = Vec::with_capacity(n);
    out.push(points[0]);
    let denom = T::of((n - 1) as f64);
    let mut k = 0usize;
    for j in 1..n - 1 {
        let t = total * T::of(j as f64) / denom;
        while k + 2 < cum.len() && cum[k + 1] < t {
            k += 1;
        }
        let seg = cum[k + 1] - cum[k];
        let a = if seg > T::zero() { (t - cum[k]) / seg } else { T::zero() };
        out.push(points[k] + (points[k + 1] - points[k]) * a);
    }
    out.push(points[points.len() - 1]);
    Ok(out)
}

/// Move interior points along the piecewise-linear curve until chord lengths
/// are equal. One linear-interpolation pass leaves O(curvature) unevenness,
/// so iterate (a few passes reach relative 1e-7, well inside the documented
/// 1e-6 invariant).
pub fn reparameterize<T: Real>(points: &[Vec2<T>]) -> Result<Vec<Vec2<T>>> {
    const PASSES: usize = 4;
    let n = points.len();
    let rtol = T::of(1e-7);
    let mut pts = points.to_vec();
    for _ in 0..PASSES {
        let cum = cumulative_lengths(&pts);
        let total = cum[n - 1];
        if total < T::of(1e-12) {
            return Err(Error::DegeneratePath);
        }
        let mean = total / T::of((n - 1) as f64);
        let mut dev = T::zero();
        for i in 0..n - 1 {
            dev = dev.max(((cum[i + 1] - cum[i]) - mean).abs());
        }
        if dev / mean < rtol {
            break;
        }
        pts = resample(&pts, n)?;
    }
    Ok(pts)
}

/// Resample a closed curve (the duplicate closing point is optional in the
/// input) to `n` points equidistant in arc length, plus an exact closing
/// copy of the first point: the output has `n + 1` entries.
pub fn resample_closed<T: Real>(points: &[Vec2<T>], n: usize) -> Result<Vec<Vec2<T>>> {
    assert!(points.len() >= 3 && n >= 3);
    let mut closed = points.to_vec();
    if closed[0] != closed[closed.len() - 1] {
        closed.push(closed[0]);
    }
    let cum = cumulative_lengths(&closed);
    let total = cum[closed.len() - 1];
    if total < T::of(1e-12) {
        return Err(Error::DegeneratePath);
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(closed[0]);
    let denom = T::of(n as f64);
    let mut k = 0usize;
    for j in 1..n {
        let t = total * T::of(j as f64) / denom;
        while k + 2 < cum.len() && cum[k + 1] < t {
            k += 1;
        }
        let seg = cum[k + 1] - cum[k];
        let a = if seg > T::zero() { (t - cum[k]) / seg } else { T::zero() };
        out.push(closed[k] + (closed[k + 1] - closed[k]) * a);
    }
    out.push(closed[0]);
    Ok(out)
}
