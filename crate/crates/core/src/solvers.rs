//! Fixed-point and variational-inequality solvers.
//!
//! `run_rrm` and `run_halpern` drive the RRM map of a [`PerformativeInstance`]
//! and count ERM queries through it. `run_ellipsoid` works on any operator
//! that maps the domain into itself. The hypomonotone pipeline averages an
//! anchored iteration and certifies the result through EVI, MVI and SVI gaps.

use std::time::Instant;

use log::{debug, warn};

use crate::domain::{Domain, Shape};
use crate::instances::{Accounting, PerformativeInstance, SolveReport, SolveStatus};
use crate::linalg::{check_dim, Matrix, Vector};
use crate::operator::Operator;
use crate::{Error, Result};

/// Two iterates this close, two steps apart, count as a period-2 orbit.
pub const CYCLE_TOL: f64 = 1e-10;

/// At most this many iterates are kept in a report's trajectory.
pub const TRAJECTORY_CAP: usize = 4096;

/// Tolerance on a T-evaluation leaving the domain before it is treated as a
/// broken precondition rather than rounding noise.
pub const SELF_MAP_TOL: f64 = 1e-9;

/// Relative eigenvalue floor of the ellipsoid shape matrix. At the initial
/// ball this is the absolute floor `1e−14·R₂²`.
pub const EIGEN_FLOOR_RATIO: f64 = 1e-14;

fn thinning_for(max_iter: usize) -> usize {
    max_iter.div_ceil(TRAJECTORY_CAP).max(1)
}

struct Trajectory {
    every: usize,
    points: Vec<Vec<f64>>,
}

impl Trajectory {
    fn new(max_iter: usize) -> Self {
        Self {
            every: thinning_for(max_iter),
            points: Vec::new(),
        }
    }

    fn record(&mut self, k: usize, x: &Vector) {
        if k % self.every == 0 {
            self.points.push(x.iter().copied().collect());
        }
    }
}

fn finish_instance_report(
    inst: &PerformativeInstance,
    x: &Vector,
    status: SolveStatus,
    iters: usize,
    erm_before: u64,
    diag_before: u64,
    trajectory: Trajectory,
    start: Instant,
) -> Result<SolveReport> {
    let erm_queries = inst.erm_queries() - erm_before;
    let fp_gap = inst.fixed_point_gap(x, Accounting::Diagnostic)?;
    let stab_gap = inst.stability_gap(x)?;
    Ok(SolveReport {
        status,
        fp_gap,
        stab_gap,
        erm_queries,
        diagnostic_queries: inst.diagnostic_queries() - diag_before,
        iters,
        wall_millis: start.elapsed().as_secs_f64() * 1e3,
        trajectory_thinning: trajectory.every,
        final_point: x.iter().copied().collect(),
        iterates: trajectory.points,
    })
}

/// Repeated risk minimization `x_{t+1} = G(x_t)`.
///
/// Stops with `Converged` once `‖x_t − G(x_t)‖ ≤ tol`, with `Cycling` when
/// `G(x_t)` returns to `x_{t−1}` within [`CYCLE_TOL`], both absolutely and
/// relative to the step `‖x_t − G(x_t)‖`, and with `BudgetExhausted` after `max_iter`
/// updates. One ERM query is spent per tested iterate.
pub fn run_rrm(
    inst: &PerformativeInstance,
    x0: &Vector,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    inst.domain().require_member(x0)?;
    let start = Instant::now();
    let (erm0, diag0) = (inst.erm_queries(), inst.diagnostic_queries());
    let mut traj = Trajectory::new(max_iter);
    let mut prev: Option<Vector> = None;
    let mut x = x0.clone();
    let mut t = 0;
    let status = loop {
        traj.record(t, &x);
        if t == max_iter {
            break SolveStatus::BudgetExhausted;
        }
        let next = inst.rrm_map(&x)?;
        let step = (&x - &next).norm();
        if step <= tol {
            break SolveStatus::Converged;
        }
        // relative guard: near a fixed point every pair of iterates is close
        if prev.as_ref().is_some_and(|p| {
            let back = (&next - p).norm();
            back <= CYCLE_TOL && back <= CYCLE_TOL * step
        }) {
            break SolveStatus::Cycling;
        }
        prev = Some(std::mem::replace(&mut x, next));
        t += 1;
    };
    debug!("rrm finished: {status:?} after {t} iterations");
    finish_instance_report(inst, &x, status, t, erm0, diag0, traj, start)
}

/// Halpern iteration `x_{k+1} = Π(β_k x_0 + (1 − β_k) G(x_k))`, `β_k = 1/(k+2)`.
///
/// For nonexpansive `G` the residual obeys `‖x_k − G(x_k)‖ ≤ 2D/(k+1)`; every
/// violation of that rate on an instance with `ρ ≤ 1` is logged.
pub fn run_halpern(
    inst: &PerformativeInstance,
    x0: &Vector,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let dom = inst.domain();
    dom.require_member(x0)?;
    let start = Instant::now();
    let (erm0, diag0) = (inst.erm_queries(), inst.diagnostic_queries());
    let diameter = dom.diameter();
    let nonexpansive = inst.rho() <= 1.0;
    let mut traj = Trajectory::new(max_iter);
    let mut x = x0.clone();
    let mut k = 0;
    let status = loop {
        traj.record(k, &x);
        if k == max_iter {
            break SolveStatus::BudgetExhausted;
        }
        let gx = inst.rrm_map(&x)?;
        let residual = (&x - &gx).norm();
        if nonexpansive && residual > halpern_rate(diameter, k) + 1e-9 {
            warn!("halpern rate violated at k={k}: residual {residual:e}");
        }
        if residual <= tol {
            break SolveStatus::Converged;
        }
        let beta = 1.0 / (k as f64 + 2.0);
        x = dom.project_unchecked(&(x0 * beta + gx * (1.0 - beta)));
        k += 1;
    };
    finish_instance_report(inst, &x, status, k, erm0, diag0, traj, start)
}

/// The residual bound `2D/(k+1)` of Halpern iteration on a nonexpansive map.
pub fn halpern_rate(diameter: f64, k: usize) -> f64 {
    2.0 * diameter / (k as f64 + 1.0)
}

/// Center and shape matrix of the ellipsoid `{x : (x−c)ᵀ P⁻¹ (x−c) ≤ 1}`.
#[derive(Clone, Debug)]
pub struct EllipsoidState {
    pub center: Vector,
    pub shape: Matrix,
    pub iteration: usize,
}

impl EllipsoidState {
    pub fn ball(center: Vector, radius: f64) -> Self {
        let d = center.len();
        Self {
            center,
            shape: Matrix::identity(d, d) * (radius * radius),
            iteration: 0,
        }
    }

    /// Central cut keeping the half-space `⟨g, x − c⟩ ≤ 0`.
    ///
    /// Returns `false` when `gᵀPg` has collapsed and no update is possible.
    pub fn cut(&mut self, g: &Vector) -> bool {
        let d = self.center.len() as f64;
        let pg = &self.shape * g;
        let gpg = g.dot(&pg);
        if !(gpg > 0.0) || !gpg.is_finite() {
            return false;
        }
        let gt = pg / gpg.sqrt();
        if self.center.len() == 1 {
            self.center -= &gt * 0.5;
            self.shape /= 4.0;
        } else {
            self.center -= &gt / (d + 1.0);
            let scale = d * d / (d * d - 1.0);
            self.shape = (&self.shape - (&gt * gt.transpose()) * (2.0 / (d + 1.0))) * scale;
            self.shape = (&self.shape + self.shape.transpose()) * 0.5;
        }
        self.iteration += 1;
        true
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen_range().0
    }

    /// Smallest and largest eigenvalue of the shape matrix.
    pub fn eigen_range(&self) -> (f64, f64) {
        let e = self.shape.clone().symmetric_eigenvalues();
        (e.min(), e.max())
    }

    /// Whether the shape matrix has become numerically degenerate: its
    /// smallest eigenvalue fell below [`EIGEN_FLOOR_RATIO`] times its largest.
    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.eigen_range();
        !(lo >= EIGEN_FLOOR_RATIO * hi)
    }
}

/// Iteration budget `⌈2d(d+1) ln(R₂(L+2)/ε)⌉` of the ellipsoid method.
pub fn ellipsoid_budget(dim: usize, outer_radius: f64, lipschitz: f64, eps: f64) -> usize {
    let d = dim as f64;
    let log_term = (outer_radius * (lipschitz + 2.0) / eps).ln().max(1.0);
    (2.0 * d * (d + 1.0) * log_term).ceil() as usize
}

/// Ellipsoid method for a fixed point of a nonexpansive `T: X → X`.
///
/// Every center inside the domain is tested; `g = c − T(c)` separates the
/// center from the fixed-point set. Centers outside the domain are cut with
/// `c − Π(c)`. On budget exhaustion the in-domain center with the smallest
/// residual is returned. `ermQueries` counts evaluations of `T`, and
/// `stabGap` reports `max_{x'} ⟨x − x', x − T(x)⟩` at the returned point.
pub fn run_ellipsoid(
    t: &Operator,
    dom: &Domain,
    eps: f64,
    max_iter_override: Option<usize>,
) -> Result<SolveReport> {
    run_ellipsoid_with(dom, eps, t.lipschitz(), max_iter_override, |x| {
        Ok(t.apply(x))
    })
}

/// Ellipsoid method on the RRM map of an instance, counting ERM queries.
pub fn run_ellipsoid_instance(
    inst: &PerformativeInstance,
    eps: f64,
    max_iter_override: Option<usize>,
) -> Result<SolveReport> {
    let lipschitz = inst.rho();
    let mut report = run_ellipsoid_with(inst.domain(), eps, lipschitz, max_iter_override, |x| {
        inst.rrm_map(x)
    })?;
    let x = report.final_vector();
    report.stab_gap = inst.stability_gap(&x)?;
    report.diagnostic_queries = 0;
    Ok(report)
}

fn run_ellipsoid_with<E>(
    dom: &Domain,
    eps: f64,
    lipschitz: f64,
    max_iter_override: Option<usize>,
    mut eval: E,
) -> Result<SolveReport>
where
    E: FnMut(&Vector) -> Result<Vector>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let start = Instant::now();
    let r2 = dom.outer_radius();
    let budget =
        max_iter_override.unwrap_or_else(|| ellipsoid_budget(dom.dim(), r2, lipschitz, eps));
    let mut evals = 0u64;
    let mut checked_eval = |x: &Vector| -> Result<Vector> {
        evals += 1;
        let y = eval(x)?;
        check_dim(&y, x.len())?;
        if dom.contains(&y, 0.0) {
            return Ok(y);
        }
        let p = dom.project_unchecked(&y);
        let violation = (&y - &p).norm();
        if violation > SELF_MAP_TOL {
            return Err(Error::Precondition(format!(
                "operator left the domain by {violation:e}"
            )));
        }
        Ok(p)
    };

    let mut state = EllipsoidState::ball(dom.center().clone(), r2);
    let mut best: Option<(f64, Vector, Vector)> = None;
    let mut traj = Trajectory::new(budget);
    let mut status = SolveStatus::BudgetExhausted;
    let mut iters = 0;
    while iters < budget {
        traj.record(iters, &state.center);
        let c = state.center.clone();
        let g = if dom.contains(&c, 0.0) {
            let tc = checked_eval(&c)?;
            let g = &c - &tc;
            let r = g.norm();
            if best.as_ref().is_none_or(|(br, _, _)| r < *br) {
                best = Some((r, c.clone(), tc));
            }
            if r <= eps {
                status = SolveStatus::Converged;
                break;
            }
            g
        } else {
            &c - dom.project_unchecked(&c)
        };
        if !state.cut(&g) || state.is_degenerate() {
            warn!("ellipsoid degenerated at iteration {iters}");
            status = SolveStatus::Failed;
            iters += 1;
            break;
        }
        iters += 1;
    }

    let (x, tx) = match best {
        Some((_, x, tx)) => (x, tx),
        None => {
            let x = dom.project_unchecked(&state.center);
            let tx = checked_eval(&x)?;
            (x, tx)
        }
    };
    let residual = &x - &tx;
    Ok(SolveReport {
        status,
        fp_gap: residual.norm(),
        stab_gap: dom.support_gap(&x, &residual)?,
        erm_queries: evals,
        diagnostic_queries: 0,
        iters,
        wall_millis: start.elapsed().as_secs_f64() * 1e3,
        trajectory_thinning: traj.every,
        final_point: x.iter().copied().collect(),
        iterates: traj.points,
    })
}

/// A finitely supported distribution over domain points.
#[derive(Clone, Debug)]
pub struct WeightedSample {
    points: Vec<Vector>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "a sample needs as many weights as points and at least one point".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vector>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self::new(points, weights)
    }

    pub fn point_mass(x: Vector) -> Self {
        Self {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vector {
        let mut m = Vector::zeros(self.points[0].len());
        for (p, w) in self.points.iter().zip(&self.weights) {
            m += p * *w;
        }
        m
    }

    fn require_in(&self, dom: &Domain) -> Result<()> {
        self.points.iter().try_for_each(|p| dom.require_member(p))
    }

    /// `E⟨F(x), x⟩` and `E F(x)`.
    fn moments(&self, f: &Operator) -> (f64, Vector) {
        let mut inner = 0.0;
        let mut mean_field = Vector::zeros(self.points[0].len());
        for (p, w) in self.points.iter().zip(&self.weights) {
            let fx = f.apply(p);
            inner += w * fx.dot(p);
            mean_field += fx * *w;
        }
        (inner, mean_field)
    }
}

/// Worst EVI gap `E_μ⟨F(x), x − x'⟩` over the supplied test points.
///
/// The gap is affine in `x'`, so testing every vertex of a cube or polygon is
/// exact; balls need at least 256 boundary directions.
pub fn verify_evi(
    f: &Operator,
    dom: &Domain,
    sample: &WeightedSample,
    eps: f64,
    test_points: &[Vector],
) -> Result<(bool, f64)> {
    sample.require_in(dom)?;
    match dom.shape() {
        Shape::Ball { .. } => {
            if test_points.len() < 256 {
                return Err(Error::Precondition(format!(
                    "ball domains need ≥ 256 test points, got {}",
                    test_points.len()
                )));
            }
        }
        _ => {
            for v in dom.extreme_points(0) {
                if !test_points.iter().any(|t| (t - &v).amax() <= 1e-12) {
                    return Err(Error::Precondition(format!(
                        "test points omit the domain vertex {:?}",
                        v.as_slice()
                    )));
                }
            }
        }
    }
    let (inner, mean_field) = sample.moments(f);
    let worst = test_points
        .iter()
        .map(|t| inner - mean_field.dot(t))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((worst <= eps, worst))
}

/// Exact EVI residual `max_{x' ∈ X} E_μ⟨F(x), x − x'⟩`.
pub fn evi_residual(f: &Operator, dom: &Domain, sample: &WeightedSample) -> Result<f64> {
    sample.require_in(dom)?;
    let (inner, mean_field) = sample.moments(f);
    Ok(inner - dom.support_min(&mean_field)?)
}

/// Stampacchia gap `max_{x'} ⟨F(x), x − x'⟩`.
pub fn svi_gap(f: &Operator, dom: &Domain, x: &Vector) -> Result<f64> {
    dom.support_gap(x, &f.apply(x))
}

/// Sampled Minty gap `max_{x'} ⟨F(x'), x̄ − x'⟩` over `sample_points`.
///
/// This is only a lower estimate of the true Minty gap.
pub fn mvi_gap_estimate(
    f: &Operator,
    dom: &Domain,
    xbar: &Vector,
    sample_points: &[Vector],
) -> Result<f64> {
    dom.require_member(xbar)?;
    Ok(sample_points
        .iter()
        .map(|p| f.apply(p).dot(&(xbar - p)))
        .fold(0.0, f64::max))
}

/// Optimal interpolation step and SVI bound for an ε-MVI solution of an
/// `L`-Lipschitz operator on a domain of diameter `D`.
pub fn mvi_svi_bound(eps: f64, lipschitz: f64, diameter: f64) -> (f64, f64) {
    if eps <= 0.0 {
        return (0.0, 0.0);
    }
    let curvature = lipschitz * diameter * diameter;
    let delta = if curvature > 0.0 {
        (eps / curvature).sqrt()
    } else {
        f64::INFINITY
    };
    if delta < 1.0 {
        (delta, 2.0 * diameter * (lipschitz * eps).sqrt())
    } else {
        (1.0, eps + curvature)
    }
}

/// Fixed-point accuracy `√(2D √((2+σ)(ε + (σ + σ²/2)D²)))` reachable for a
/// `(1+σ)`-Lipschitz map from an ε-EVI solution of `I − T`.
pub fn expansive_fixed_point_accuracy(eps: f64, sigma: f64, diameter: f64) -> f64 {
    let hypo = sigma + sigma * sigma / 2.0;
    (2.0 * diameter * ((2.0 + sigma) * (eps + hypo * diameter * diameter)).sqrt()).sqrt()
}

/// Largest observed hypomonotonicity violation
/// `max −⟨F(x) − F(y), x − y⟩ / ‖x − y‖²` over the given pairs.
pub fn measured_hypomonotonicity(f: &Operator, pairs: &[(Vector, Vector)]) -> f64 {
    pairs
        .iter()
        .filter_map(|(x, y)| {
            let dx = x - y;
            let n2 = dx.norm_squared();
            (n2 > 0.0).then(|| -(f.apply(x) - f.apply(y)).dot(&dx) / n2)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Output of [`hypomonotone_solve`].
#[derive(Clone, Debug)]
pub struct HypomonotoneCertificates {
    /// Exact EVI residual `ε̂` of the averaged sample.
    pub evi_residual: f64,
    /// Whether `ε̂ ≤ eps`.
    pub evi_passed: bool,
    /// `ε̂ + σD²`.
    pub mvi_bound: f64,
    /// `2D√(L(ε̂ + σD²))`.
    pub svi_bound: f64,
    /// Exact SVI gap at the sample mean.
    pub svi_gap_at_mean: f64,
    /// Whether the measured SVI gap respects the SVI bound.
    pub chain_holds: bool,
    pub iterations: usize,
    pub sample: WeightedSample,
}

/// Averaging heuristic for a σ-hypomonotone, `L`-Lipschitz operator.
///
/// Runs anchored iteration on `T(x) = Π(x − γF(x))` with `γ = 1/(L+σ+1)`,
/// takes the uniform distribution over the second half of the iterates and
/// certifies its mean. No claim is made that the heuristic reaches any
/// particular EVI accuracy; `evi_passed` reports whether it reached `eps`.
pub fn hypomonotone_solve(
    f: &Operator,
    sigma: f64,
    dom: &Domain,
    eps: f64,
    budget: usize,
) -> Result<(Vector, HypomonotoneCertificates)> {
    if !(sigma >= 0.0) || !(eps > 0.0) || budget < 2 {
        return Err(Error::InvalidArgument(format!(
            "need σ ≥ 0, eps > 0 and budget ≥ 2 (got σ={sigma}, eps={eps}, budget={budget})"
        )));
    }
    check_dim(dom.center(), f.dim())?;
    let lipschitz = f.lipschitz();
    let gamma = 1.0 / (lipschitz + sigma + 1.0);
    let x0 = dom.center().clone();
    let mut x = x0.clone();
    let tail_start = budget / 2;
    let mut tail = Vec::with_capacity(budget - tail_start + 1);
    for k in 0..=budget {
        if k >= tail_start {
            tail.push(x.clone());
        }
        let tx = dom.project_unchecked(&(&x - f.apply(&x) * gamma));
        let beta = 1.0 / (k as f64 + 2.0);
        x = dom.project_unchecked(&(&x0 * beta + tx * (1.0 - beta)));
    }
    let sample = WeightedSample::uniform(tail)?;
    let mean = dom.project_unchecked(&sample.mean());
    let diameter = dom.diameter();
    let evi = evi_residual(f, dom, &sample)?.max(0.0);
    let mvi_bound = evi + sigma * diameter * diameter;
    let svi_bound = 2.0 * diameter * (lipschitz * mvi_bound).sqrt();
    let measured = svi_gap(f, dom, &mean)?;
    let evi_passed = evi <= eps;
    let chain_holds = measured <= svi_bound + 1e-9;
    if evi_passed && !chain_holds {
        warn!("certificate chain failed: svi gap {measured:e} exceeds bound {svi_bound:e}");
    }
    Ok((
        mean,
        HypomonotoneCertificates {
            evi_residual: evi,
            evi_passed,
            mvi_bound,
            svi_bound,
            svi_gap_at_mean: measured,
            chain_holds,
            iterations: budget,
            sample,
        },
    ))
}
