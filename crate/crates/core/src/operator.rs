use std::fmt;
use std::sync::Arc;

use crate::linalg::{spectral_norm, Matrix, Vector};

type MapFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// A vector field `ℝ^d → ℝ^d` with a declared Lipschitz bound.
///
/// Evaluation must be a pure function of its input.
#[derive(Clone)]
pub struct Operator {
    dim: usize,
    lipschitz: f64,
    f: Arc<MapFn>,
}

impl Operator {
    pub fn new<F>(dim: usize, lipschitz: f64, f: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            dim,
            lipschitz,
            f: Arc::new(f),
        }
    }

    /// `x ↦ M x + c`, with the exact spectral norm as its Lipschitz bound.
    pub fn affine(m: Matrix, c: Vector) -> Self {
        let dim = c.len();
        let lipschitz = spectral_norm(&m);
        Self::new(dim, lipschitz, move |x| &m * x + &c)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, 1.0, |x| x.clone())
    }

    pub fn negation(dim: usize) -> Self {
        Self::new(dim, 1.0, |x| -x)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, 0.0, move |_| Vector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }

    /// `x ↦ −T(x)`.
    pub fn negated(&self) -> Self {
        let inner = self.clone();
        Self::new(self.dim, self.lipschitz, move |x| -inner.apply(x))
    }

    /// `x ↦ x − T(x)`, the residual operator of a fixed-point problem.
    pub fn residual(&self) -> Self {
        let inner = self.clone();
        Self::new(self.dim, 1.0 + self.lipschitz, move |x| x - inner.apply(x))
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}
