//! Convex compact constraint sets.
//!
//! Every solver and certificate in the crate works through four queries on a
//! [`Domain`]: Euclidean projection, membership, diameter and the support gap
//! `max_{x' ∈ X} ⟨x − x', v⟩`. All three variants answer them in closed form.
//!
//! Domains are full-dimensional in their ambient space. Each one stores a
//! center together with radii `R1 ≤ R2` such that the ball of radius `R1`
//! about the center lies inside the set and the set lies inside the ball of
//! radius `R2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{check_dim, Vector};
use crate::{Error, Result};

/// Default absolute membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

// Relative slack in the "already inside" tests of `project`. Keeps projection
// exactly idempotent under floating point rounding.
const INSIDE_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Hypercube {
        lower: Vector,
        upper: Vector,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    /// Counter-clockwise, strictly convex.
    Polygon2D {
        vertices: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    center: Vector,
    inner_radius: f64,
    outer_radius: f64,
}

impl Domain {
    pub fn hypercube(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidDomain(
                "hypercube needs at least one coordinate".into(),
            ));
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::InvalidDomain(format!(
                    "hypercube bounds must satisfy lower < upper (coordinate {i}: {} vs {})",
                    lower[i], upper[i]
                )));
            }
        }
        let center = (&lower + &upper) * 0.5;
        let half = (&upper - &lower) * 0.5;
        let inner_radius = half.min();
        let outer_radius = half.norm();
        Ok(Self {
            shape: Shape::Hypercube { lower, upper },
            center,
            inner_radius,
            outer_radius,
        })
    }

    /// `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::hypercube(Vector::from_element(dim, lo), Vector::from_element(dim, hi))
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidDomain(
                "ball needs at least one coordinate".into(),
            ));
        }
        Ok(Self {
            shape: Shape::Ball {
                center: center.clone(),
                radius,
            },
            center,
            inner_radius: radius,
            outer_radius: radius,
        })
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidDomain(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        let mut turning = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [c[0] - b[0], c[1] - b[1]];
            let cross = e1[0] * e2[1] - e1[1] * e2[0];
            if !(cross > 0.0) {
                return Err(Error::InvalidDomain(
                    "polygon must be strictly convex and counter-clockwise".into(),
                ));
            }
            turning += cross.atan2(e1[0] * e2[0] + e1[1] * e2[1]);
        }
        // A self-intersecting star also turns left at every vertex.
        if (turning - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::InvalidDomain(
                "polygon boundary winds more than once".into(),
            ));
        }
        let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / n as f64;
        let mut inner = f64::INFINITY;
        let mut outer: f64 = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let len = ex.hypot(ey);
            // Distance from the centroid to the supporting line of edge i.
            let d = (ex * (cy - a[1]) - ey * (cx - a[0])) / len;
            inner = inner.min(d);
            outer = outer.max((a[0] - cx).hypot(a[1] - cy));
        }
        Ok(Self {
            shape: Shape::Polygon2D { vertices },
            center: Vector::from_vec(vec![cx, cy]),
            inner_radius: inner,
            outer_radius: outer,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// `R1`: radius of a ball about [`Domain::center`] contained in the set.
    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// `R2`: radius of a ball about [`Domain::center`] containing the set.
    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    /// Translate so the stored center sits at the origin. Returns the shifted
    /// domain and the offset that was subtracted.
    pub fn recentered(&self) -> (Domain, Vector) {
        let offset = self.center.clone();
        let shape = match &self.shape {
            Shape::Hypercube { lower, upper } => Shape::Hypercube {
                lower: lower - &offset,
                upper: upper - &offset,
            },
            Shape::Ball { radius, .. } => Shape::Ball {
                center: Vector::zeros(offset.len()),
                radius: *radius,
            },
            Shape::Polygon2D { vertices } => Shape::Polygon2D {
                vertices: vertices
                    .iter()
                    .map(|v| [v[0] - offset[0], v[1] - offset[1]])
                    .collect(),
            },
        };
        let dom = Domain {
            shape,
            center: Vector::zeros(offset.len()),
            inner_radius: self.inner_radius,
            outer_radius: self.outer_radius,
        };
        (dom, offset)
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, p: &Vector) -> Result<Vector> {
        check_dim(p, self.dim())?;
        Ok(self.project_unchecked(p))
    }

    pub(crate) fn project_unchecked(&self, p: &Vector) -> Vector {
        match &self.shape {
            Shape::Hypercube { lower, upper } => {
                Vector::from_fn(p.len(), |i, _| p[i].clamp(lower[i], upper[i]))
            }
            Shape::Ball { center, radius } => {
                let diff = p - center;
                let dist = diff.norm();
                if dist <= radius * (1.0 + INSIDE_SLACK) {
                    p.clone()
                } else {
                    center + diff * (radius / dist)
                }
            }
            Shape::Polygon2D { vertices } => {
                let q = project_polygon(vertices, [p[0], p[1]]);
                Vector::from_vec(vec![q[0], q[1]])
            }
        }
    }

    pub fn contains(&self, p: &Vector, tol: f64) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        (p - self.project_unchecked(p)).norm() <= tol
    }

    /// Exact Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Hypercube { lower, upper } => (upper - lower).norm(),
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Polygon2D { vertices } => {
                let mut best: f64 = 0.0;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        best = best.max((a[0] - b[0]).hypot(a[1] - b[1]));
                    }
                }
                best
            }
        }
    }

    /// A point of the set minimizing `⟨·, v⟩`.
    pub fn support_minimizer(&self, v: &Vector) -> Result<Vector> {
        check_dim(v, self.dim())?;
        Ok(match &self.shape {
            Shape::Hypercube { lower, upper } => {
                Vector::from_fn(v.len(), |i, _| if v[i] < 0.0 { upper[i] } else { lower[i] })
            }
            Shape::Ball { center, radius } => {
                let n = v.norm();
                if n == 0.0 {
                    center.clone()
                } else {
                    center - v * (radius / n)
                }
            }
            Shape::Polygon2D { vertices } => {
                let best = vertices
                    .iter()
                    .min_by(|a, b| {
                        let fa = a[0] * v[0] + a[1] * v[1];
                        let fb = b[0] * v[0] + b[1] * v[1];
                        fa.total_cmp(&fb)
                    })
                    .expect("polygon has vertices");
                Vector::from_vec(vec![best[0], best[1]])
            }
        })
    }

    /// `min_{x' ∈ X} ⟨x', v⟩`.
    pub fn support_min(&self, v: &Vector) -> Result<f64> {
        check_dim(v, self.dim())?;
        Ok(match &self.shape {
            Shape::Hypercube { lower, upper } => (0..v.len())
                .map(|i| (lower[i] * v[i]).min(upper[i] * v[i]))
                .sum(),
            Shape::Ball { center, radius } => center.dot(v) - radius * v.norm(),
            Shape::Polygon2D { vertices } => vertices
                .iter()
                .map(|a| a[0] * v[0] + a[1] * v[1])
                .fold(f64::INFINITY, f64::min),
        })
    }

    /// `max_{x' ∈ X} ⟨x − x', v⟩`, the first-order gap functional at `x`.
    pub fn support_gap(&self, x: &Vector, v: &Vector) -> Result<f64> {
        self.require_member(x)?;
        let gap = x.dot(v) - self.support_min(v)?;
        Ok(gap.max(0.0))
    }

    /// Fails with [`Error::OutsideDomain`] unless `x` is within
    /// [`MEMBERSHIP_TOL`] of the set.
    pub fn require_member(&self, x: &Vector) -> Result<()> {
        check_dim(x, self.dim())?;
        let violation = (x - self.project_unchecked(x)).norm();
        if violation > MEMBERSHIP_TOL {
            return Err(Error::OutsideDomain { violation });
        }
        Ok(())
    }

    /// Points at which an affine functional over the set attains its extrema:
    /// all corners of a hypercube, all polygon vertices, or `min_directions`
    /// evenly spread boundary points of a ball.
    pub fn extreme_points(&self, min_directions: usize) -> Vec<Vector> {
        match &self.shape {
            Shape::Hypercube { lower, upper } => {
                let d = lower.len();
                assert!(d < 24, "corner enumeration of a {d}-cube is too large");
                (0..1usize << d)
                    .map(|mask| {
                        Vector::from_fn(d, |i, _| {
                            if mask >> i & 1 == 1 {
                                upper[i]
                            } else {
                                lower[i]
                            }
                        })
                    })
                    .collect()
            }
            Shape::Polygon2D { vertices } => vertices
                .iter()
                .map(|v| Vector::from_vec(vec![v[0], v[1]]))
                .collect(),
            Shape::Ball { center, radius } => sphere_directions(center.len(), min_directions)
                .into_iter()
                .map(|u| center + u * *radius)
                .collect(),
        }
    }

    /// A random point of the set (uniform for cubes and balls, rejection from
    /// the bounding box for polygons).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match &self.shape {
            Shape::Hypercube { lower, upper } => {
                Vector::from_fn(lower.len(), |i, _| rng.random_range(lower[i]..=upper[i]))
            }
            Shape::Ball { center, radius } => {
                let d = center.len();
                let dir = gaussian_vector(rng, d);
                let n = dir.norm();
                let scale = radius * rng.random::<f64>().powf(1.0 / d as f64);
                if n == 0.0 {
                    center.clone()
                } else {
                    center + dir * (scale / n)
                }
            }
            Shape::Polygon2D { vertices } => {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                loop {
                    let p = Vector::from_vec(vec![
                        rng.random_range(lo[0]..=hi[0]),
                        rng.random_range(lo[1]..=hi[1]),
                    ]);
                    if self.contains(&p, 0.0) {
                        return p;
                    }
                }
            }
        }
    }
}

pub(crate) fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    Vector::from_fn(d, |_, _| {
        // Box-Muller; the cosine branch is enough here.
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Unit vectors spread over the sphere: an even grid on the circle for `d = 2`,
/// `±e_i` plus a Fibonacci lattice for `d = 3`, and `±e_i` plus seeded random
/// directions otherwise.
pub fn sphere_directions(d: usize, count: usize) -> Vec<Vector> {
    match d {
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => (0..count.max(4))
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / count.max(4) as f64;
                Vector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(count + 2 * d);
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = Vector::zeros(d);
                    e[i] = s;
                    out.push(e);
                }
            }
            if d == 3 {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                for i in 0..count {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    out.push(Vector::from_vec(vec![r * t.cos(), r * t.sin(), z]));
                }
            } else {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_d1e5);
                while out.len() < count + 2 * d {
                    let g = gaussian_vector(&mut rng, d);
                    let n = g.norm();
                    if n > 1e-12 {
                        out.push(g / n);
                    }
                }
            }
            out
        }
    }
}

fn project_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> [f64; 2] {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let t = (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0);
    [a[0] + t * ex, a[1] + t * ey]
}

fn project_polygon(vertices: &[[f64; 2]], p: [f64; 2]) -> [f64; 2] {
    let n = vertices.len();
    let inside = (0..n).all(|i| {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let cross = ex * (p[1] - a[1]) - ey * (p[0] - a[0]);
        let scale = ex.hypot(ey) * ((p[0] - a[0]).abs() + (p[1] - a[1]).abs()).max(1.0);
        cross >= -INSIDE_SLACK * scale
    });
    if inside {
        return p;
    }
    let mut best = p;
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let q = project_segment(vertices[i], vertices[(i + 1) % n], p);
        let d = (q[0] - p[0]).hypot(q[1] - p[1]);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// JSON form: `{"type":"hypercube"|"ball"|"polygon2d", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Hypercube { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polygon2d { vertices: Vec<[f64; 2]> },
}

impl TryFrom<DomainSpec> for Domain {
    type Error = Error;

    fn try_from(spec: DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Hypercube { lower, upper } => {
                Domain::hypercube(Vector::from_vec(lower), Vector::from_vec(upper))
            }
            DomainSpec::Ball { center, radius } => Domain::ball(Vector::from_vec(center), radius),
            DomainSpec::Polygon2d { vertices } => Domain::polygon(vertices),
        }
    }
}

impl From<&Domain> for DomainSpec {
    fn from(dom: &Domain) -> Self {
        match &dom.shape {
            Shape::Hypercube { lower, upper } => DomainSpec::Hypercube {
                lower: lower.iter().copied().collect(),
                upper: upper.iter().copied().collect(),
            },
            Shape::Ball { center, radius } => DomainSpec::Ball {
                center: center.iter().copied().collect(),
                radius: *radius,
            },
            Shape::Polygon2D { vertices } => DomainSpec::Polygon2d {
                vertices: vertices.clone(),
            },
        }
    }
}

impl Serialize for Domain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DomainSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DomainSpec::deserialize(d)?;
        Domain::try_from(spec).map_err(serde::de::Error::custom)
    }
}
