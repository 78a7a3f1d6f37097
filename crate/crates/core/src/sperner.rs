//! Sperner-coloring operators on an equilateral triangle.
//!
//! A coloring of the triangulated grid `{(q, r) : q, r ≥ 0, q + r ≤ 2^n}` is
//! turned into a vector field by sampling `k` points along the `a + b`
//! diagonal, extracting the first `n` bits of each basis coefficient, and
//! averaging the direction vectors assigned to the sampled colors. Points of
//! the field with a small VI gap sit next to trichromatic triangles.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, MEMBERSHIP_TOL};
use crate::linalg::Vector;
use crate::{Error, Result};

/// Thickness of the mandated boundary bands.
pub const BAND_THICKNESS: f64 = 1.0 / 8.0;
/// Minimum number of samples per operator evaluation.
pub const MIN_SAMPLES: usize = 16;
/// Largest grid exponent representable in double precision.
pub const MAX_EXPONENT: u32 = 20;
/// Largest grid exponent validated exhaustively.
pub const EXHAUSTIVE_LIMIT: u32 = 12;
/// Largest grid exponent accepted by the grid searches.
pub const SEARCH_LIMIT: u32 = 8;
/// Declared Lipschitz bound of the rescaled operator `F' = F / 2^n`.
pub const RESCALED_LIPSCHITZ_BOUND: f64 = 64.0;

const TIE_TOL: f64 = 1e-12;

/// Clamped bit extraction `clamp((x − ½)·L, 0, 1)`.
pub fn extract_bit(x: f64, lbits: f64) -> f64 {
    ((x - 0.5) * lbits).clamp(0.0, 1.0)
}

/// How the grid is colored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Coloring {
    /// Mandated bands, every free point colored 1.
    Canonical,
    /// Mandated bands; free points take the color `i` minimizing the `i`-th
    /// barycentric coordinate minus that of `center` (the centroid when
    /// omitted), which plants the trichromatic triangles near `center`.
    Planted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 2]>,
    },
    /// Explicit colors, `table[q][r]` for `r ≤ 2^n − q`.
    Table { table: Vec<Vec<u8>> },
}

/// A triangle of the grid, given by its three vertices `(q, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridTriangle {
    pub vertices: [(u64, u64); 3],
}

impl GridTriangle {
    /// `(q, r), (q+1, r), (q, r+1)`.
    pub fn up(q: u64, r: u64) -> Self {
        Self {
            vertices: [(q, r), (q + 1, r), (q, r + 1)],
        }
    }

    /// `(q+1, r), (q, r+1), (q+1, r+1)`.
    pub fn down(q: u64, r: u64) -> Self {
        Self {
            vertices: [(q + 1, r), (q, r + 1), (q + 1, r + 1)],
        }
    }

    /// `∞`-norm distance, in grid units, from `(gq, gr)` to the nearest vertex.
    pub fn grid_distance(&self, gq: f64, gr: f64) -> f64 {
        self.vertices
            .iter()
            .map(|&(q, r)| (q as f64 - gq).abs().max((r as f64 - gr).abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Value of `F` at a point together with how many samples blended colors.
#[derive(Clone, Debug)]
pub struct SpernerEval {
    pub value: [f64; 2],
    pub poorly_positioned: usize,
}

/// Outcome of the exhaustive validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Admissibility {
    pub exhaustive: bool,
    pub checked: usize,
}

/// A point found by [`SpernerInstance::find_vi_solution`].
#[derive(Clone, Debug, Serialize)]
pub struct ViSolution {
    pub point: [f64; 2],
    pub gap: f64,
    pub target: f64,
}

#[derive(Clone, Copy, Debug)]
struct CoordBits {
    lower: u64,
    upper: u64,
    theta: f64,
    poorly: bool,
}

#[derive(Clone, Debug)]
pub struct SpernerInstance {
    n: u32,
    k: usize,
    lbits: f64,
    sqrt3: f64,
    coloring: Coloring,
    domain: Domain,
}

impl SpernerInstance {
    pub fn new(n: u32, k: usize, coloring: Coloring) -> Result<Self> {
        if n == 0 || n > MAX_EXPONENT {
            return Err(Error::InvalidArgument(format!(
                "grid exponent must lie in 1..={MAX_EXPONENT}, got {n}"
            )));
        }
        if k < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_SAMPLES} samples, got {k}"
            )));
        }
        let scale = (2f64).powi(n as i32 + 16);
        let sqrt3 = (3f64.sqrt() * scale).round() / scale;
        let radius = 1f64.max((sqrt3 * sqrt3 + 1.0).sqrt() / 2.0);
        let domain = Domain::ball(Vector::from_vec(vec![sqrt3 / 2.0, 0.5]), radius)?;
        let side = 1usize << n;
        if let Coloring::Table { table } = &coloring {
            if table.len() != side + 1
                || table
                    .iter()
                    .enumerate()
                    .any(|(q, row)| row.len() != side + 1 - q)
            {
                return Err(Error::InvalidArgument(format!(
                    "a color table for n={n} needs rows of length {}, {}, …, 1",
                    side + 1,
                    side
                )));
            }
            if table.iter().flatten().any(|c| !(1..=3).contains(c)) {
                return Err(Error::InvalidArgument(
                    "colors must lie in {1, 2, 3}".into(),
                ));
            }
        }
        Ok(Self {
            n,
            k,
            lbits: ((k + 2) as f64) * (2f64).powi(n as i32 + 1),
            sqrt3,
            coloring,
            domain,
        })
    }

    /// Replaces the ambient domain, which must contain the triangle.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::InvalidDomain(
                "the ambient domain must be planar".into(),
            ));
        }
        for v in self.triangle() {
            if !domain.contains(&Vector::from_vec(v.to_vec()), MEMBERSHIP_TOL) {
                return Err(Error::InvalidDomain(format!(
                    "domain misses triangle vertex {v:?}"
                )));
            }
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lbits(&self) -> f64 {
        self.lbits
    }

    pub fn coloring(&self) -> &Coloring {
        &self.coloring
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn side(&self) -> u64 {
        1u64 << self.n
    }

    /// Dyadic approximation of `√3` used for the triangle geometry.
    pub fn sqrt3(&self) -> f64 {
        self.sqrt3
    }

    /// `A1, A2, A3`.
    pub fn triangle(&self) -> [[f64; 2]; 3] {
        [[0.0, 0.0], [self.sqrt3, 0.0], [self.sqrt3 / 2.0, 1.5]]
    }

    /// Inward normals `a⊥, b⊥, c⊥` of `A1A2`, `A1A3`, `A2A3`.
    pub fn normals(&self) -> [[f64; 2]; 3] {
        let h = self.sqrt3 / 2.0;
        [[0.0, 1.0], [h, -0.5], [-h, -0.5]]
    }

    /// Direction assigned to a color: 1 ↦ b⊥, 2 ↦ a⊥, 3 ↦ c⊥.
    pub fn direction(&self, color: u8) -> [f64; 2] {
        let [a, b, c] = self.normals();
        match color {
            1 => b,
            2 => a,
            _ => c,
        }
    }

    /// Default VI tolerance `(ε_b / 8) / 2^n`.
    pub fn default_tolerance(&self) -> f64 {
        BAND_THICKNESS / 8.0 / self.side() as f64
    }

    /// Color forced on `(q, r)` by the boundary bands, if any.
    pub fn band_color(&self, q: u64, r: u64) -> Option<u8> {
        let side = self.side() as f64;
        let (qf, rf) = (q as f64, r as f64);
        let thin = side * BAND_THICKNESS;
        let top = (1.0 - BAND_THICKNESS) * side;
        if qf <= thin && thin < rf && rf < top - qf {
            Some(1)
        } else if rf <= thin && qf < top - rf {
            Some(2)
        } else if qf + rf >= top {
            Some(3)
        } else {
            None
        }
    }

    fn corner_color(&self, q: u64, r: u64) -> Option<u8> {
        let side = self.side();
        match (q, r) {
            (0, 0) => Some(1),
            (q, 0) if q == side => Some(2),
            (0, r) if r == side => Some(3),
            _ => None,
        }
    }

    /// The coloring oracle on grid points.
    pub fn color(&self, q: u64, r: u64) -> Result<u8> {
        let side = self.side();
        if q + r > side {
            return Err(Error::InvalidArgument(format!(
                "({q}, {r}) lies outside the grid of side {side}"
            )));
        }
        if let Coloring::Table { table } = &self.coloring {
            return Ok(table[q as usize][r as usize]);
        }
        if let Some(c) = self.corner_color(q, r) {
            return Ok(c);
        }
        if let Some(c) = self.band_color(q, r) {
            return Ok(c);
        }
        Ok(match &self.coloring {
            Coloring::Planted { center } => {
                let [u0, v0] = center.unwrap_or([1.0 / 3.0, 1.0 / 3.0]);
                let (u, v) = (q as f64 / side as f64, r as f64 / side as f64);
                let scores = [u - u0, v - v0, (1.0 - u - v) - (1.0 - u0 - v0)];
                let mut best = 0;
                for i in 1..3 {
                    if scores[i] < scores[best] {
                        best = i;
                    }
                }
                best as u8 + 1
            }
            _ => 1,
        })
    }

    /// Checks the corner conditions and every band point.
    ///
    /// Exhaustive for `n ≤ 12`, otherwise 10⁵ seeded probes plus all three
    /// band edges. The first violation is returned as an error.
    pub fn validate_admissible(&self) -> Result<Admissibility> {
        let side = self.side();
        for (i, (q, r)) in [(0, 0), (side, 0), (0, side)].into_iter().enumerate() {
            let got = self.color(q, r)?;
            if got != i as u8 + 1 {
                return Err(Error::Inadmissible {
                    q,
                    r,
                    expected: i as u8 + 1,
                    got,
                });
            }
        }
        let check = |q: u64, r: u64| -> Result<()> {
            if self.corner_color(q, r).is_some() {
                return Ok(());
            }
            if let Some(expected) = self.band_color(q, r) {
                let got = self.color(q, r)?;
                if got != expected {
                    return Err(Error::Inadmissible {
                        q,
                        r,
                        expected,
                        got,
                    });
                }
            }
            Ok(())
        };
        let mut checked = 0;
        if self.n <= EXHAUSTIVE_LIMIT {
            for q in 0..=side {
                for r in 0..=side - q {
                    check(q, r)?;
                    checked += 1;
                }
            }
            return Ok(Admissibility {
                exhaustive: true,
                checked,
            });
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5be7_2e12);
        for t in 0..=side {
            check(t, 0)?;
            check(0, t)?;
            check(t, side - t)?;
            checked += 3;
        }
        for _ in 0..100_000 {
            let q = rng.random_range(0..=side);
            let r = rng.random_range(0..=side - q);
            check(q, r)?;
            checked += 1;
        }
        Ok(Admissibility {
            exhaustive: false,
            checked,
        })
    }

    pub fn is_admissible(&self) -> bool {
        self.validate_admissible().is_ok()
    }

    /// Coefficients `(u, v)` with `p = u·a + v·b`.
    pub fn basis_coords(&self, p: [f64; 2]) -> (f64, f64) {
        let v = p[1] / 1.5;
        let u = (p[0] - v * self.sqrt3 / 2.0) / self.sqrt3;
        (u, v)
    }

    pub fn point_of(&self, u: f64, v: f64) -> [f64; 2] {
        [u * self.sqrt3 + v * self.sqrt3 / 2.0, v * 1.5]
    }

    fn inside(u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u + v <= 1.0
    }

    /// Nearest-edge coloring used outside the triangle.
    pub fn outside_color(&self, p: [f64; 2]) -> u8 {
        let [_, a, b] = self.triangle();
        let cross = |o: [f64; 2], d: [f64; 2], x: [f64; 2]| {
            ((d[0] - o[0]) * (x[1] - o[1]) - (d[1] - o[1]) * (x[0] - o[0])).abs()
                / (d[0] - o[0]).hypot(d[1] - o[1])
        };
        let d12 = p[1].abs();
        let d13 = cross([0.0, 0.0], b, p);
        let d23 = cross(a, b, p);
        let m = d12.min(d13).min(d23);
        let tol = TIE_TOL * m.max(1.0);
        let (t12, t13, t23) = (d12 - m <= tol, d13 - m <= tol, d23 - m <= tol);
        match (t12, t13, t23) {
            (true, true, _) => 1,
            (true, false, true) => 2,
            (false, true, true) => 3,
            (false, true, false) => 1,
            (true, false, false) => 2,
            _ => 3,
        }
    }

    /// Color of an arbitrary point: the anchor of its grid cell inside the
    /// triangle (cell boundaries belong to the lower cell), the nearest-edge
    /// rule outside.
    pub fn color_at(&self, p: [f64; 2]) -> Result<u8> {
        self.require_in_domain(p)?;
        let (u, v) = self.basis_coords(p);
        if !Self::inside(u, v) {
            return Ok(self.outside_color(p));
        }
        let side = self.side() as f64;
        let snap = |t: f64| -> u64 {
            let scaled = t * side;
            if scaled <= 0.0 {
                0
            } else {
                ((scaled.ceil() as u64).saturating_sub(1)).min(self.side() - 1)
            }
        };
        self.color(snap(u), snap(v))
    }

    fn require_in_domain(&self, p: [f64; 2]) -> Result<()> {
        self.domain.require_member(&Vector::from_vec(p.to_vec()))
    }

    fn decompose(&self, t: f64) -> CoordBits {
        let mut y = t.clamp(0.0, 1.0);
        let mut prefix = 0u64;
        for j in 1..=self.n {
            let b = extract_bit(y, self.lbits);
            if b == 0.0 {
                prefix <<= 1;
                y = (2.0 * y).clamp(0.0, 1.0);
            } else if b == 1.0 {
                prefix = (prefix << 1) | 1;
                y = (2.0 * y - 1.0).clamp(0.0, 1.0);
            } else {
                let rest = self.n - j;
                return CoordBits {
                    lower: ((prefix << 1) << rest) | ((1u64 << rest) - 1),
                    upper: ((prefix << 1) | 1) << rest,
                    theta: b,
                    poorly: true,
                };
            }
        }
        CoordBits {
            lower: prefix,
            upper: prefix,
            theta: 0.0,
            poorly: false,
        }
    }

    /// Direction contributed by one sample and whether it blended colors.
    fn sample_direction(&self, u: f64, v: f64) -> ([f64; 2], bool) {
        if !Self::inside(u, v) {
            return (
                self.direction(self.outside_color(self.point_of(u, v))),
                false,
            );
        }
        let (bu, bv) = (self.decompose(u), self.decompose(v));
        let mut out = [0.0; 2];
        for (q, wq) in [(bu.lower, 1.0 - bu.theta), (bu.upper, bu.theta)] {
            for (r, wr) in [(bv.lower, 1.0 - bv.theta), (bv.upper, bv.theta)] {
                let w = wq * wr;
                if w == 0.0 {
                    continue;
                }
                // Anchors of in-triangle samples always lie on the grid.
                let c = self.color(q, r).unwrap_or(1);
                let d = self.direction(c);
                out[0] += w * d[0];
                out[1] += w * d[1];
            }
        }
        (out, bu.poorly || bv.poorly)
    }

    /// Offset `δ_i = i / ((k + 1) 2^{n+1})` of the zero-based `i`-th sample.
    pub fn sample_offset(&self, i: usize) -> f64 {
        i as f64 / ((self.k + 1) as f64 * (2f64).powi(self.n as i32 + 1))
    }

    fn evaluate(&self, p: [f64; 2]) -> SpernerEval {
        let (u, v) = self.basis_coords(p);
        let mut value = [0.0; 2];
        let mut poorly_positioned = 0;
        for i in 0..self.k {
            let d = self.sample_offset(i);
            let (dir, poorly) = self.sample_direction(u + d, v + d);
            value[0] += dir[0];
            value[1] += dir[1];
            poorly_positioned += poorly as usize;
        }
        let k = self.k as f64;
        SpernerEval {
            value: [value[0] / k, value[1] / k],
            poorly_positioned,
        }
    }

    /// `F(x)`: the average direction over the `k` samples of `x`.
    pub fn operator(&self, x: [f64; 2]) -> Result<SpernerEval> {
        self.require_in_domain(x)?;
        Ok(self.evaluate(x))
    }

    /// `F'(x) = F(x) / 2^n`, evaluated without a domain check.
    pub fn rescaled_operator_value(&self, x: &Vector) -> Vector {
        let f = self.evaluate([x[0], x[1]]).value;
        let s = self.side() as f64;
        Vector::from_vec(vec![f[0] / s, f[1] / s])
    }

    /// `max_{x' ∈ X} ⟨x' − x, F'(x)⟩`.
    pub fn vi_gap(&self, x: [f64; 2]) -> Result<f64> {
        let p = Vector::from_vec(x.to_vec());
        self.domain.require_member(&p)?;
        let f = self.rescaled_operator_value(&p);
        self.domain.support_gap(&p, &(-f))
    }

    /// Cartesian grid of `2^{n+2}` points per axis over the bounding box of
    /// the ambient domain, restricted to the domain.
    pub fn refined_grid(&self) -> Vec<[f64; 2]> {
        let m = 1usize << (self.n + 2);
        let c = self.domain.center();
        let r = self.domain.outer_radius();
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let x = c[0] - r + 2.0 * r * (i as f64 + 0.5) / m as f64;
                let y = c[1] - r + 2.0 * r * (j as f64 + 0.5) / m as f64;
                if self.domain.contains(&Vector::from_vec(vec![x, y]), 0.0) {
                    out.push([x, y]);
                }
            }
        }
        out
    }

    /// Grid cells whose 3×3 anchor neighborhood carries all three colors.
    fn candidate_cells(&self) -> Vec<(u64, u64)> {
        let side = self.side();
        let mut out = Vec::new();
        for q in 0..side {
            for r in 0..side - q {
                let mut seen = [false; 3];
                for dq in -1i64..=1 {
                    for dr in -1i64..=1 {
                        let (qq, rr) = (q as i64 + dq, r as i64 + dr);
                        if qq >= 0 && rr >= 0 && (qq + rr) as u64 <= side {
                            if let Ok(c) = self.color(qq as u64, rr as u64) {
                                seen[c as usize - 1] = true;
                            }
                        }
                    }
                }
                if seen.iter().all(|&s| s) {
                    out.push((q, r));
                }
            }
        }
        out
    }

    /// Width of the blend window just above the cell boundary `m / 2^n`.
    fn window_width(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let level = self.n - m.trailing_zeros().min(self.n);
        1.0 / (self.lbits * (2f64).powi(level as i32 - 1))
    }

    /// Abscissae in `[lo, hi]` where some sample enters or leaves a blend
    /// window of the boundaries `m / 2^n` and `(m + 1) / 2^n`.
    fn breakpoints(&self, m: u64) -> Vec<f64> {
        let side = self.side() as f64;
        let (lo, hi) = (m as f64 / side, (m + 1) as f64 / side);
        let mut pts = vec![lo, hi];
        for b in [m, m + 1] {
            let at = b as f64 / side;
            let w = self.window_width(b);
            for i in 0..self.k {
                let d = self.sample_offset(i);
                for t in [at - d, at - d + w] {
                    if t > lo && t < hi {
                        pts.push(t);
                    }
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-18);
        pts
    }

    /// Searches for a point with `vi_gap ≤ tol` (default `(ε_b/8)/2^n`).
    ///
    /// Between consecutive blend-window breakpoints `F` is bilinear in the
    /// basis coefficients, so each candidate cell is split along its
    /// breakpoints and `F = 0` is solved in closed form on every piece. The
    /// refined Cartesian grid is scanned as a fallback.
    pub fn find_vi_solution(&self, tol: Option<f64>) -> Result<ViSolution> {
        if self.n > SEARCH_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "grid search supports n ≤ {SEARCH_LIMIT}, got {}",
                self.n
            )));
        }
        let target = tol.unwrap_or_else(|| self.default_tolerance());
        let mut best: Option<ViSolution> = None;
        let consider = |p: [f64; 2], best: &mut Option<ViSolution>| {
            if !self.domain.contains(&Vector::from_vec(p.to_vec()), 0.0) {
                return;
            }
            if let Ok(gap) = self.vi_gap(p) {
                if best.as_ref().is_none_or(|b| gap < b.gap) {
                    *best = Some(ViSolution {
                        point: p,
                        gap,
                        target,
                    });
                }
            }
        };
        for (q, r) in self.candidate_cells() {
            let us = self.breakpoints(q);
            let vs = self.breakpoints(r);
            let values: Vec<Vec<[f64; 2]>> = us
                .iter()
                .map(|&u| {
                    vs.iter()
                        .map(|&v| self.evaluate(self.point_of(u, v)).value)
                        .collect()
                })
                .collect();
            for i in 0..us.len() - 1 {
                for j in 0..vs.len() - 1 {
                    let corners = [
                        values[i][j],
                        values[i + 1][j],
                        values[i][j + 1],
                        values[i + 1][j + 1],
                    ];
                    for (s, t) in bilinear_zeros(corners) {
                        let u = us[i] + s * (us[i + 1] - us[i]);
                        let v = vs[j] + t * (vs[j + 1] - vs[j]);
                        consider(self.point_of(u, v), &mut best);
                    }
                }
            }
        }
        if best.as_ref().is_none_or(|b| b.gap > target) {
            for p in self.refined_grid() {
                consider(p, &mut best);
            }
        }
        match best {
            Some(sol) if sol.gap <= target => Ok(sol),
            Some(sol) => Err(Error::ResolutionTooCoarse {
                best_gap: sol.gap,
                target,
            }),
            None => Err(Error::ResolutionTooCoarse {
                best_gap: f64::INFINITY,
                target,
            }),
        }
    }

    /// Position of `x` in grid units, `(u·2^n, v·2^n)`.
    pub fn grid_position(&self, x: [f64; 2]) -> (f64, f64) {
        let (u, v) = self.basis_coords(x);
        let s = self.side() as f64;
        (u * s, v * s)
    }

    fn is_trichromatic(&self, t: &GridTriangle) -> Result<bool> {
        let mut seen = [false; 3];
        for &(q, r) in &t.vertices {
            seen[self.color(q, r)? as usize - 1] = true;
        }
        Ok(seen.iter().all(|&s| s))
    }

    fn triangle_fits(&self, t: &GridTriangle) -> bool {
        t.vertices.iter().all(|&(q, r)| q + r <= self.side())
    }

    /// A trichromatic triangle anchored in the 5×5 neighborhood of `x`'s
    /// grid cell, the one closest to `x`. Fails with the neighborhood's color
    /// census when none exists.
    pub fn recover_trichromatic(&self, x: [f64; 2]) -> Result<GridTriangle> {
        let (gq, gr) = self.grid_position(x);
        let side = self.side() as i64;
        let anchor = |g: f64| (g.floor() as i64).clamp(0, side - 1);
        let (q0, r0) = (anchor(gq), anchor(gr));
        let mut best: Option<(f64, GridTriangle)> = None;
        let mut census = [0usize; 3];
        for dq in -2i64..=2 {
            for dr in -2i64..=2 {
                let (q, r) = (q0 + dq, r0 + dr);
                if q < 0 || r < 0 || q + r > side {
                    continue;
                }
                let (q, r) = (q as u64, r as u64);
                census[self.color(q, r)? as usize - 1] += 1;
                for t in [GridTriangle::up(q, r), GridTriangle::down(q, r)] {
                    if self.triangle_fits(&t) && self.is_trichromatic(&t)? {
                        let centroid = t.vertices.iter().fold((0.0, 0.0), |acc, &(a, b)| {
                            (acc.0 + a as f64 / 3.0, acc.1 + b as f64 / 3.0)
                        });
                        let d = (centroid.0 - gq).abs().max((centroid.1 - gr).abs());
                        if best
                            .as_ref()
                            .is_none_or(|(bd, bt)| d < *bd || (d == *bd && t < *bt))
                        {
                            best = Some((d, t));
                        }
                    }
                }
            }
        }
        best.map(|(_, t)| t).ok_or(Error::NoTrichromatic { census })
    }

    /// Every trichromatic triangle of the grid, in lexicographic order.
    pub fn brute_force_trichromatic(&self) -> Result<Vec<GridTriangle>> {
        if self.n > SEARCH_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "enumeration supports n ≤ {SEARCH_LIMIT}, got {}",
                self.n
            )));
        }
        let side = self.side();
        let mut out = Vec::new();
        for q in 0..side {
            for r in 0..side - q {
                for t in [GridTriangle::up(q, r), GridTriangle::down(q, r)] {
                    if self.triangle_fits(&t) && self.is_trichromatic(&t)? {
                        out.push(t);
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Distance in grid units from `x` to the nearest of `triangles`.
    pub fn distance_to_nearest(&self, x: [f64; 2], triangles: &[GridTriangle]) -> f64 {
        let (gq, gr) = self.grid_position(x);
        triangles
            .iter()
            .map(|t| t.grid_distance(gq, gr))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Parameters `(s, t) ∈ [0,1]²` where the bilinear interpolant of the corner
/// values `[f(0,0), f(1,0), f(0,1), f(1,1)]` vanishes.
fn bilinear_zeros(c: [[f64; 2]; 4]) -> Vec<(f64, f64)> {
    let sub = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let p = c[0];
    let q = sub(c[1], c[0]);
    let r = sub(c[2], c[0]);
    let w = [
        c[3][0] - c[1][0] - c[2][0] + c[0][0],
        c[3][1] - c[1][1] - c[2][1] + c[0][1],
    ];
    // P + tR and Q + tW must be parallel.
    let a2 = cross(r, w);
    let a1 = cross(p, w) + cross(r, q);
    let a0 = cross(p, q);
    let scale = [p, q, r, w]
        .iter()
        .map(|v| v[0].abs().max(v[1].abs()))
        .fold(0.0, f64::max)
        .max(1e-300);
    let tiny = 1e-14 * scale * scale;
    let mut ts = Vec::new();
    if a2.abs() > tiny {
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let root = -0.5 * (a1 + a1.signum() * sq);
            ts.push(root / a2);
            if root != 0.0 {
                ts.push(a0 / root);
            }
        }
    } else if a1.abs() > tiny {
        ts.push(-a0 / a1);
    } else {
        ts.extend([0.0, 0.25, 0.5, 0.75, 1.0]);
    }
    let mut out = Vec::new();
    for t in ts {
        if !(-1e-9..=1.0 + 1e-9).contains(&t) {
            continue;
        }
        let t = t.clamp(0.0, 1.0);
        let base = [p[0] + t * r[0], p[1] + t * r[1]];
        let dir = [q[0] + t * w[0], q[1] + t * w[1]];
        let n2 = dir[0] * dir[0] + dir[1] * dir[1];
        let s = if n2 > tiny {
            -(base[0] * dir[0] + base[1] * dir[1]) / n2
        } else {
            0.5
        };
        if (-1e-9..=1.0 + 1e-9).contains(&s) {
            out.push((s.clamp(0.0, 1.0), t));
        }
    }
    out
}

/// JSON form: `{"n": n, "k": k, "coloring": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpernerSpec {
    pub n: u32,
    #[serde(default = "default_samples")]
    pub k: usize,
    pub coloring: Coloring,
}

fn default_samples() -> usize {
    MIN_SAMPLES
}

impl SpernerSpec {
    pub fn build(&self) -> Result<SpernerInstance> {
        SpernerInstance::new(self.n, self.k, self.coloring.clone())
    }
}

impl From<&SpernerInstance> for SpernerSpec {
    fn from(inst: &SpernerInstance) -> Self {
        SpernerSpec {
            n: inst.n,
            k: inst.k,
            coloring: inst.coloring.clone(),
        }
    }
}
