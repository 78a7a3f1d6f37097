//! Solvers, reductions and certificates for performatively stable points.
//!
//! The crate covers the quadratic-loss hard class of performative prediction
//! (mean-shift distribution maps over a convex compact domain), the classical
//! algorithms run on it (repeated risk minimization, Halpern iteration, the
//! ellipsoid method, an averaging pipeline for hypomonotone variational
//! inequalities), reductions from variational inequalities, fixed points and
//! bimatrix games, the Sperner-based operator family, and strategic
//! classification local search with its LocalMaxCut gadget.

pub mod domain;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod operator;
pub mod reductions;
pub mod solvers;
pub mod sperner;
pub mod stratclass;
pub mod sweep;

pub use domain::{Domain, DomainSpec};
pub use error::{Error, Result};
pub use instances::{PerformativeInstance, ShiftMap, SolveReport, SolveStatus};
pub use linalg::{Matrix, Vector};
pub use operator::Operator;
