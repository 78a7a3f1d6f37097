//! Performative prediction instances with quadratic loss `ℓ(x; z) = ½‖x − z‖²`
//! and a mean-shift distribution map `z = g(x)`.
//!
//! For this loss the repeated-risk-minimization map has the closed form
//! `G(x) = Π_X(g(x))`, the loss is 1-strongly convex and 1-smooth, and the
//! sensitivity-to-curvature ratio `ρ` equals the Lipschitz constant of `g`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainSpec};
use crate::linalg::{check_dim, spectral_norm, Matrix, Vector};
use crate::operator::Operator;
use crate::sperner::SpernerInstance;
use crate::{Error, Result};

/// The mean of the induced distribution as a function of the deployed model.
#[derive(Clone, Debug)]
pub enum ShiftMap {
    /// `g(x) = M x + c`.
    Affine {
        m: Matrix,
        c: Vector,
        lipschitz: f64,
    },
    /// `g(x) = −x`.
    Negation {
        dim: usize,
    },
    /// `g(x) = (1 − λ) x + λ T(x)`.
    Damped {
        inner: Box<ShiftMap>,
        lambda: f64,
    },
    /// `g(x) = x + ratio · F'(x)` for the rescaled operator of a Sperner instance.
    SpernerWrapped {
        instance: Arc<SpernerInstance>,
        ratio: f64,
    },
    Custom(Operator),
}

impl ShiftMap {
    pub fn affine(m: Matrix, c: Vector) -> Result<Self> {
        if !m.is_square() || m.nrows() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: c.len(),
            });
        }
        let lipschitz = spectral_norm(&m);
        Ok(ShiftMap::Affine { m, c, lipschitz })
    }

    pub fn negation(dim: usize) -> Self {
        ShiftMap::Negation { dim }
    }

    pub fn damped(inner: ShiftMap, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping λ must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(ShiftMap::Damped {
            inner: Box::new(inner),
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ShiftMap::Affine { c, .. } => c.len(),
            ShiftMap::Negation { dim } => *dim,
            ShiftMap::Damped { inner, .. } => inner.dim(),
            ShiftMap::SpernerWrapped { .. } => 2,
            ShiftMap::Custom(op) => op.dim(),
        }
    }

    /// Lipschitz constant (exact for affine and negation maps, an upper bound
    /// for damped maps, declared otherwise).
    pub fn lipschitz(&self) -> f64 {
        match self {
            ShiftMap::Affine { lipschitz, .. } => *lipschitz,
            ShiftMap::Negation { .. } => 1.0,
            ShiftMap::Damped { inner, lambda } => (1.0 - lambda) + lambda * inner.lipschitz(),
            ShiftMap::SpernerWrapped { ratio, .. } => {
                1.0 + ratio * crate::sperner::RESCALED_LIPSCHITZ_BOUND
            }
            ShiftMap::Custom(op) => op.lipschitz(),
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            ShiftMap::Affine { m, c, .. } => m * x + c,
            ShiftMap::Negation { .. } => -x,
            ShiftMap::Damped { inner, lambda } => x * (1.0 - lambda) + inner.apply(x) * *lambda,
            ShiftMap::SpernerWrapped { instance, ratio } => {
                x + instance.rescaled_operator_value(x) * *ratio
            }
            ShiftMap::Custom(op) => op.apply(x),
        }
    }

    pub fn as_operator(&self) -> Operator {
        let me = self.clone();
        Operator::new(self.dim(), self.lipschitz(), move |x| me.apply(x))
    }
}

/// Whether an evaluation of the RRM map counts toward the ERM-query total.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accounting {
    Erm,
    Diagnostic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    L1,
    Linf,
}

impl Norm {
    pub fn of(self, v: &Vector) -> f64 {
        match self {
            Norm::L2 => v.norm(),
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::Linf => v.amax(),
        }
    }
}

/// A quadratic-loss performative prediction problem.
#[derive(Debug)]
pub struct PerformativeInstance {
    domain: Domain,
    shift: ShiftMap,
    erm_queries: AtomicU64,
    diagnostic_queries: AtomicU64,
}

impl Clone for PerformativeInstance {
    fn clone(&self) -> Self {
        Self {
            domain: self.domain.clone(),
            shift: self.shift.clone(),
            erm_queries: AtomicU64::new(self.erm_queries()),
            diagnostic_queries: AtomicU64::new(self.diagnostic_queries()),
        }
    }
}

impl PerformativeInstance {
    pub fn new(domain: Domain, shift: ShiftMap) -> Result<Self> {
        if shift.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: shift.dim(),
            });
        }
        Ok(Self {
            domain,
            shift,
            erm_queries: AtomicU64::new(0),
            diagnostic_queries: AtomicU64::new(0),
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn shift(&self) -> &ShiftMap {
        &self.shift
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Strong-convexity modulus of the loss.
    pub fn alpha(&self) -> f64 {
        1.0
    }

    /// Smoothness of the loss.
    pub fn beta(&self) -> f64 {
        1.0
    }

    /// `ρ = Lβ/α`, recomputed from the shift map on every call.
    pub fn rho(&self) -> f64 {
        self.shift.lipschitz() * self.beta() / self.alpha()
    }

    pub fn erm_queries(&self) -> u64 {
        self.erm_queries.load(Ordering::Relaxed)
    }

    pub fn diagnostic_queries(&self) -> u64 {
        self.diagnostic_queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.erm_queries.store(0, Ordering::Relaxed);
        self.diagnostic_queries.store(0, Ordering::Relaxed);
    }

    /// Mean of the distribution induced by deploying `x`.
    pub fn mean_shift(&self, x: &Vector) -> Vector {
        self.shift.apply(x)
    }

    /// `∇f(y)` for the loss averaged over `D(x)`: `y − g(x)`.
    pub fn loss_gradient(&self, y: &Vector, x: &Vector) -> Vector {
        y - self.mean_shift(x)
    }

    /// One ERM query: `argmin_{y ∈ X} ½‖y − g(x)‖² = Π_X(g(x))`.
    pub fn rrm_map(&self, x: &Vector) -> Result<Vector> {
        self.rrm_map_with(x, Accounting::Erm)
    }

    pub fn rrm_map_with(&self, x: &Vector, accounting: Accounting) -> Result<Vector> {
        self.domain.require_member(x)?;
        let counter = match accounting {
            Accounting::Erm => &self.erm_queries,
            Accounting::Diagnostic => &self.diagnostic_queries,
        };
        counter.fetch_add(1, Ordering::Relaxed);
        Ok(self.domain.project_unchecked(&self.mean_shift(x)))
    }

    /// First-order stability gap `max_{x'} ⟨x − x', x − g(x)⟩`; `x` is
    /// ε-performatively stable iff this is at most ε.
    pub fn stability_gap(&self, x: &Vector) -> Result<f64> {
        self.domain.require_member(x)?;
        let grad = self.loss_gradient(x, x);
        self.domain.support_gap(x, &grad)
    }

    /// `‖x − G(x)‖₂`.
    pub fn fixed_point_gap(&self, x: &Vector, accounting: Accounting) -> Result<f64> {
        Ok((x - self.rrm_map_with(x, accounting)?).norm())
    }

    /// `‖x − G(x)‖` in the requested norm. Never counted as an ERM query.
    pub fn residual_in_norm(&self, x: &Vector, norm: Norm) -> Result<f64> {
        Ok(norm.of(&(x - self.rrm_map_with(x, Accounting::Diagnostic)?)))
    }

    /// `‖∇f(G(x))‖₂` for the loss under `D(x)`.
    pub fn gradient_norm_at_map(&self, x: &Vector) -> Result<f64> {
        let gx = self.rrm_map_with(x, Accounting::Diagnostic)?;
        Ok(self.loss_gradient(&gx, x).norm())
    }

    /// True when `x` is certified `tol`-stable and its fixed-point gap agrees,
    /// i.e. `‖x − G(x)‖ ≤ √tol`.
    pub fn check_first_order_equivalence(&self, x: &Vector, tol: f64) -> Result<bool> {
        let stable = self.stability_gap(x)? <= tol;
        let fp = self.fixed_point_gap(x, Accounting::Diagnostic)?;
        Ok(stable && fp <= gap_bound_from_stability(tol, self.alpha())?)
    }
}

/// Upper bound `√(ε/α)` on the fixed-point gap at any ε-stable point.
pub fn gap_bound_from_stability(eps: f64, alpha: f64) -> Result<f64> {
    if !(eps >= 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need eps ≥ 0 and alpha > 0 (got eps={eps}, alpha={alpha})"
        )));
    }
    Ok((eps / alpha).sqrt())
}

/// Stability level `ε (Dβ + ‖∇f(G(x))‖)` implied by a fixed-point gap of ε.
pub fn stability_bound_from_gap(eps: f64, diameter: f64, beta: f64, grad_norm_at_map: f64) -> f64 {
    eps * (diameter * beta + grad_norm_at_map)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Cycling,
    BudgetExhausted,
    /// The solver hit a numerical failure (e.g. a degenerate ellipsoid).
    Failed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Cycling => "cycling",
            SolveStatus::BudgetExhausted => "budget_exhausted",
            SolveStatus::Failed => "failed",
        }
    }
}

/// Outcome of one solver run. `fp_gap` and `stab_gap` are recomputed at
/// `final_point` after the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub status: SolveStatus,
    pub fp_gap: f64,
    pub stab_gap: f64,
    pub erm_queries: u64,
    pub diagnostic_queries: u64,
    pub iters: usize,
    pub wall_millis: f64,
    pub trajectory_thinning: usize,
    pub final_point: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub iterates: Vec<Vec<f64>>,
}

impl SolveReport {
    pub fn final_vector(&self) -> Vector {
        Vector::from_vec(self.final_point.clone())
    }
}

/// JSON form of a shift map.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ShiftSpec {
    Affine {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    Negation {},
    Damped {
        inner: Box<ShiftSpec>,
        lambda: f64,
    },
    /// Only serializable: a callable cannot be read back from JSON.
    Custom {
        lipschitz: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InstanceSpec {
    pub domain: DomainSpec,
    pub shift: ShiftSpec,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ShiftSpec {
    pub fn build(&self, dim: usize) -> Result<ShiftMap> {
        match self {
            ShiftSpec::Affine { m, c } => {
                let mat = matrix_from_rows(m)?;
                let c = Vector::from_vec(c.clone());
                check_dim(&c, dim)?;
                ShiftMap::affine(mat, c)
            }
            ShiftSpec::Negation {} => Ok(ShiftMap::negation(dim)),
            ShiftSpec::Damped { inner, lambda } => ShiftMap::damped(inner.build(dim)?, *lambda),
            ShiftSpec::Custom { .. } => Err(Error::InvalidArgument(
                "custom shift maps carry code and cannot be loaded from JSON".into(),
            )),
        }
    }
}

impl From<&ShiftMap> for ShiftSpec {
    fn from(shift: &ShiftMap) -> Self {
        match shift {
            ShiftMap::Affine { m, c, .. } => ShiftSpec::Affine {
                m: matrix_to_rows(m),
                c: c.iter().copied().collect(),
            },
            ShiftMap::Negation { .. } => ShiftSpec::Negation {},
            ShiftMap::Damped { inner, lambda } => ShiftSpec::Damped {
                inner: Box::new(ShiftSpec::from(inner.as_ref())),
                lambda: *lambda,
            },
            other => ShiftSpec::Custom {
                lipschitz: other.lipschitz(),
            },
        }
    }
}

impl InstanceSpec {
    pub fn build(&self) -> Result<PerformativeInstance> {
        let domain = Domain::try_from(self.domain.clone())?;
        let shift = self.shift.build(domain.dim())?;
        PerformativeInstance::new(domain, shift)
    }
}

impl From<&PerformativeInstance> for InstanceSpec {
    fn from(inst: &PerformativeInstance) -> Self {
        InstanceSpec {
            domain: DomainSpec::from(inst.domain()),
            shift: ShiftSpec::from(inst.shift()),
        }
    }
}
