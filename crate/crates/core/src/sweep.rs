//! The ρ phase-transition sweep.
//!
//! Every (ρ, solver, seed) cell builds its own instance and start point from
//! a seeded ChaCha8 stream, so rows are reproducible regardless of how the
//! worker pool schedules them.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{gaussian_vector, Domain};
use crate::instances::{PerformativeInstance, ShiftMap, SolveReport};
use crate::linalg::{spectral_norm, Matrix};
use crate::solvers::{run_ellipsoid_instance, run_halpern, run_rrm};
use crate::{Error, Result};

/// Generator identifier recorded in sweep provenance.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng seeded via seed_from_u64";

/// Exact CSV header.
pub const CSV_HEADER: &str =
    "instance_id,rho,solver,seed,iterations,erm_queries,final_fp_gap,final_stab_gap,status,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `g(x) = −ρx`.
    NegationScaled,
    /// `g(x) = Mx + c` with a Gaussian `M` rescaled to spectral norm `ρ`.
    AffineRandom,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::NegationScaled => "negation-scaled",
            Family::AffineRandom => "affine-random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Rrm,
    Halpern,
    Ellipsoid,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Rrm => "rrm",
            SolverKind::Halpern => "halpern",
            SolverKind::Ellipsoid => "ellipsoid",
        }
    }

    pub fn run(
        self,
        inst: &PerformativeInstance,
        x0: &crate::Vector,
        eps: f64,
        max_iter: usize,
    ) -> Result<SolveReport> {
        match self {
            SolverKind::Rrm => run_rrm(inst, x0, max_iter, eps),
            SolverKind::Halpern => run_halpern(inst, x0, max_iter, eps),
            SolverKind::Ellipsoid => run_ellipsoid_instance(inst, eps, None),
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rrm" => Ok(SolverKind::Rrm),
            "halpern" => Ok(SolverKind::Halpern),
            "ellipsoid" => Ok(SolverKind::Ellipsoid),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

fn default_replicates() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub steps: usize,
    pub dim: usize,
    pub family: Family,
    pub solvers: Vec<SolverKind>,
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Seeds `seed, seed + 1, …` per ρ value.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if !(self.rho_min <= self.rho_max) || !self.rho_min.is_finite() || !self.rho_max.is_finite()
        {
            return bad("need finite rhoMin ≤ rhoMax");
        }
        if self.rho_min < 0.0 {
            return bad("rho must be nonnegative");
        }
        if self.steps == 0 || self.replicates == 0 {
            return bad("steps and replicates must be positive");
        }
        if self.dim == 0 {
            return bad("dimension must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if self.solvers.is_empty() {
            return bad("at least one solver is required");
        }
        Ok(())
    }

    /// The ρ grid, endpoints included.
    pub fn rhos(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.rho_min];
        }
        let span = self.rho_max - self.rho_min;
        (0..self.steps)
            .map(|i| self.rho_min + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub instance_id: String,
    pub rho: f64,
    pub solver: SolverKind,
    pub seed: u64,
    pub iterations: usize,
    pub erm_queries: u64,
    pub final_fp_gap: f64,
    pub final_stab_gap: f64,
    pub status: String,
    pub wall_ms: f64,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{:e},{},{:.3}",
            self.instance_id,
            self.rho,
            self.solver.as_str(),
            self.seed,
            self.iterations,
            self.erm_queries,
            self.final_fp_gap,
            self.final_stab_gap,
            self.status,
            self.wall_ms
        )
    }
}

/// Provenance written next to the CSV.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepProvenance {
    pub generator: &'static str,
    pub crate_version: &'static str,
    pub domain: String,
    pub spec: SweepSpec,
}

impl SweepProvenance {
    pub fn new(spec: &SweepSpec) -> Self {
        SweepProvenance {
            generator: GENERATOR,
            crate_version: env!("CARGO_PKG_VERSION"),
            domain: format!("[-1,1]^{}", spec.dim),
            spec: spec.clone(),
        }
    }
}

/// The instance and start point of one (ρ, seed) cell.
pub fn sweep_instance(
    family: Family,
    rho: f64,
    dim: usize,
    seed: u64,
) -> Result<(PerformativeInstance, crate::Vector)> {
    let dom = Domain::cube(dim, -1.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = match family {
        Family::NegationScaled => {
            ShiftMap::affine(Matrix::identity(dim, dim) * -rho, crate::Vector::zeros(dim))?
        }
        Family::AffineRandom => {
            let cols: Vec<_> = (0..dim).map(|_| gaussian_vector(&mut rng, dim)).collect();
            let raw = Matrix::from_columns(&cols);
            let norm = spectral_norm(&raw);
            let m = if norm > 0.0 {
                raw * (rho / norm)
            } else {
                Matrix::identity(dim, dim) * rho
            };
            let c = gaussian_vector(&mut rng, dim) * 0.1;
            ShiftMap::affine(m, c)?
        }
    };
    let inst = PerformativeInstance::new(dom.clone(), shift)?;
    let x0 = dom.sample(&mut rng);
    Ok((inst, x0))
}

/// Runs every (ρ, solver, seed) cell on a pool of `threads` workers
/// (the global pool when `None`). Rows come back ordered by ρ, then solver
/// in the order given, then seed.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rhos = spec.rhos();
    let mut jobs = Vec::new();
    for (ri, &rho) in rhos.iter().enumerate() {
        for &solver in &spec.solvers {
            for r in 0..spec.replicates {
                jobs.push((ri, rho, solver, spec.seed.wrapping_add(r as u64)));
            }
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|&(ri, rho, solver, seed)| {
                let (inst, x0) = sweep_instance(spec.family, rho, spec.dim, seed)?;
                let start = Instant::now();
                let report = solver.run(&inst, &x0, spec.eps, spec.max_iter)?;
                Ok(SweepRow {
                    instance_id: format!("{}-r{ri:03}-s{seed}", spec.family.as_str()),
                    rho,
                    solver,
                    seed,
                    iterations: report.iters,
                    erm_queries: report.erm_queries,
                    final_fp_gap: report.fp_gap,
                    final_stab_gap: report.stab_gap,
                    status: report.status.as_str().to_string(),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Header plus one line per row.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.to_csv());
    }
    out
}
