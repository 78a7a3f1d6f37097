//! Encodings into performative prediction.
//!
//! Variational inequalities and fixed-point problems become quadratic-loss
//! instances whose shift map mixes the identity with the source operator.
//! Win-loss bimatrix games become strategic classification instances whose
//! cost function depends on the published classifier.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::instances::{matrix_from_rows, matrix_to_rows, PerformativeInstance, ShiftMap};
use crate::linalg::{norm_inf, norm_one, Matrix, Vector};
use crate::operator::Operator;
use crate::solvers::svi_gap;
use crate::{Error, Result};

/// Default accuracy `ε' = 0.088/6` of the affine hard family.
pub const DEFAULT_EPS_PRIME: f64 = 0.088 / 6.0;

/// Tolerance added on the consequent side of round-trip certificates.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

fn ratio(eps: f64, eps_prime: f64) -> Result<f64> {
    if !(eps > 0.0) || !(eps_prime > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerances must be positive (eps={eps}, epsPrime={eps_prime})"
        )));
    }
    Ok(eps / eps_prime)
}

/// `g(x) = x − λF(x)` with `λ = eps/epsPrime`.
///
/// Affine and negation fields keep an affine shift, so the instance stays
/// serializable; any other field becomes a custom shift with the declared
/// Lipschitz bound `1 + λ·L_F`.
pub fn vi_to_ps(
    f: &ShiftMap,
    l_f: f64,
    eps: f64,
    eps_prime: f64,
    dom: Domain,
) -> Result<PerformativeInstance> {
    let lambda = ratio(eps, eps_prime)?;
    let d = dom.dim();
    let shift = match f {
        ShiftMap::Affine { m, c, .. } => {
            ShiftMap::affine(Matrix::identity(d, d) - m * lambda, c * -lambda)?
        }
        ShiftMap::Negation { .. } => {
            ShiftMap::affine(Matrix::identity(d, d) * (1.0 + lambda), Vector::zeros(d))?
        }
        other => {
            let field = other.clone();
            ShiftMap::Custom(Operator::new(d, 1.0 + lambda * l_f, move |x| {
                x - field.apply(x) * lambda
            }))
        }
    };
    PerformativeInstance::new(dom, shift)
}

/// `g(x) = (1 − λ)x + λT(x)` with `λ = eps/epsPrime`, capped at 1.
pub fn fp_to_ps(
    t: &ShiftMap,
    l_t: f64,
    eps: f64,
    eps_prime: f64,
    dom: Domain,
) -> Result<PerformativeInstance> {
    let lambda = damping(eps, eps_prime)?;
    let inner = match t {
        ShiftMap::Custom(op) => ShiftMap::Custom(Operator::new(op.dim(), l_t, {
            let op = op.clone();
            move |x| op.apply(x)
        })),
        other => other.clone(),
    };
    let shift = if lambda == 1.0 {
        inner
    } else {
        ShiftMap::damped(inner, lambda)?
    };
    PerformativeInstance::new(dom, shift)
}

/// The damping weight used by [`fp_to_ps`]: `eps/epsPrime`, capped at 1.
pub fn damping(eps: f64, eps_prime: f64) -> Result<f64> {
    let lambda = ratio(eps, eps_prime)?;
    if lambda > 1.0 {
        warn!("damping ratio {lambda} exceeds 1 and is capped; the certified accuracy becomes eps");
        return Ok(1.0);
    }
    Ok(lambda)
}

/// Affine hard instance `g(x) = (I − Ā)x − b̄`, `Ā = (ε/ε')A`, `b̄ = (ε/ε')b`.
///
/// Requires `‖A‖₁ ≤ 1` and `‖A‖∞ ≤ 1`; then `‖A‖₂ ≤ 1` and `ρ ≤ 1 + ε/ε'`.
/// `eps_prime` defaults to [`DEFAULT_EPS_PRIME`] and the domain to `[0,1]^d`.
pub fn gen_affine_hard(
    a: &Matrix,
    b: &Vector,
    eps: f64,
    eps_prime: Option<f64>,
    dom: Option<Domain>,
) -> Result<PerformativeInstance> {
    let (n1, ninf) = (norm_one(a), norm_inf(a));
    if n1 > 1.0 + 1e-12 || ninf > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "need ‖A‖₁ ≤ 1 and ‖A‖∞ ≤ 1, got {n1} and {ninf}"
        )));
    }
    let dom = match dom {
        Some(d) => d,
        None => Domain::cube(b.len(), 0.0, 1.0)?,
    };
    let field = ShiftMap::affine(a.clone(), b.clone())?;
    vi_to_ps(
        &field,
        (n1 * ninf).sqrt(),
        eps,
        eps_prime.unwrap_or(DEFAULT_EPS_PRIME),
        dom,
    )
}

/// Checks `stab_gap(x*) ≤ eps ⟹ svi_gap_F(x*) ≤ epsPrime` on the reduced
/// instance. Both sides are computed exactly; the result is the truth value
/// of the implication.
pub fn certify_vi_from_ps(
    f: &ShiftMap,
    dom: &Domain,
    x_star: &Vector,
    eps: f64,
    eps_prime: f64,
) -> Result<bool> {
    let inst = vi_to_ps(f, f.lipschitz(), eps, eps_prime, dom.clone())?;
    if inst.stability_gap(x_star)? > eps {
        return Ok(true);
    }
    Ok(svi_gap(&f.as_operator(), dom, x_star)? <= eps_prime + CERTIFICATE_SLACK)
}

/// Checks `‖x − G(x)‖ ≤ eps ⟹ ‖x − T(x)‖ ≤ eps/λ` on the reduced instance.
pub fn certify_fp_from_ps(
    t: &ShiftMap,
    dom: &Domain,
    x: &Vector,
    eps: f64,
    eps_prime: f64,
) -> Result<bool> {
    let inst = fp_to_ps(t, t.lipschitz(), eps, eps_prime, dom.clone())?;
    let lambda = damping(eps, eps_prime)?;
    if inst.fixed_point_gap(x, crate::instances::Accounting::Diagnostic)? > eps {
        return Ok(true);
    }
    Ok((x - t.apply(x)).norm() <= eps / lambda + CERTIFICATE_SLACK)
}

/// A two-player game with row payoffs `A` and column payoffs `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct BimatrixGame {
    a: Matrix,
    b: Matrix,
    win_loss: bool,
}

impl BimatrixGame {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if a.shape() != b.shape() || a.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "payoff matrices must share a nonempty shape, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("payoffs must be finite".into()));
        }
        let win_loss = a.iter().chain(b.iter()).all(|&v| v == 0.0 || v == 1.0);
        Ok(Self { a, b, win_loss })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn is_win_loss(&self) -> bool {
        self.win_loss
    }
}

/// JSON form `{"A": [[...]], "B": [[...]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl GameSpec {
    pub fn build(&self) -> Result<BimatrixGame> {
        BimatrixGame::new(matrix_from_rows(&self.a)?, matrix_from_rows(&self.b)?)
    }
}

impl From<&BimatrixGame> for GameSpec {
    fn from(g: &BimatrixGame) -> Self {
        GameSpec {
            a: matrix_to_rows(&g.a),
            b: matrix_to_rows(&g.b),
        }
    }
}

/// Strategic classification with classifier-dependent costs built from a
/// win-loss game: `n` population points, `m` classifiers, constant deviations
/// `Δ_i ≡ x_i`, target `h ≡ 0`, uniform weights, and star costs
/// `c_j(x_i, x*) = 2M − M·A_ij`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndogenousInstance {
    /// `labels[i][j] = f_j(x_i)`.
    pub labels: Vec<Vec<u8>>,
    /// `star_costs[i][j] = c_j(x_i, x*)`.
    pub star_costs: Vec<Vec<f64>>,
    /// `deviations[i]` is the point every input is moved to by `Δ_i`.
    pub deviations: Vec<usize>,
    pub scale: f64,
}

impl EndogenousInstance {
    pub fn population(&self) -> usize {
        self.labels.len()
    }

    pub fn classifiers(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    /// `c_j(x_i, x_i') = c_j(x_i, x*) + c_j(x_i', x*)`.
    pub fn cost(&self, j: usize, i: usize, i2: usize) -> f64 {
        self.star_costs[i][j] + self.star_costs[i2][j]
    }

    /// `Pr[h(x) = f_j(Δ_i(x))]`.
    pub fn jury_payoff(&self, i: usize, j: usize) -> f64 {
        f64::from(self.labels[self.deviations[i]][j] == 0)
    }

    /// `E[f_j(Δ_i(x)) − c_j(x, Δ_i(x))]` under the uniform distribution.
    pub fn contestant_payoff(&self, i: usize, j: usize) -> f64 {
        let n = self.population() as f64;
        let target = self.deviations[i];
        let mean_cost: f64 = (0..self.population())
            .map(|i2| self.cost(j, i2, target))
            .sum::<f64>()
            / n;
        f64::from(self.labels[target][j]) - mean_cost
    }
}

/// Builds the endogenous-cost instance of a win-loss game.
pub fn encode_endogenous(game: &BimatrixGame, m: f64) -> Result<EndogenousInstance> {
    if !game.is_win_loss() {
        return Err(Error::Precondition(
            "the encoding needs a win-loss game (entries in {0, 1})".into(),
        ));
    }
    if !(m > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "scale M must exceed 1, got {m}"
        )));
    }
    let (n, cols) = (game.rows(), game.cols());
    let labels = (0..n)
        .map(|i| (0..cols).map(|j| (1.0 - game.b[(i, j)]) as u8).collect())
        .collect();
    let star_costs = (0..n)
        .map(|i| (0..cols).map(|j| 2.0 * m - m * game.a[(i, j)]).collect())
        .collect();
    Ok(EndogenousInstance {
        labels,
        star_costs,
        deviations: (0..n).collect(),
        scale: m,
    })
}

/// The strategically equivalent game `(A', B)` with
/// `A'_ij = F_ij + M·A_ij − 2M`, plus the column offsets
/// `c_j = −(1/n) Σ_i' c_j(x_i', x*)`. The offsets do not depend on the
/// Contestant's choice and are strategically irrelevant.
pub fn endogenous_payoffs(inst: &EndogenousInstance) -> Result<(BimatrixGame, Vec<f64>)> {
    let (n, cols) = (inst.population(), inst.classifiers());
    let m = inst.scale;
    let a_prime = Matrix::from_fn(n, cols, |i, j| {
        let f = f64::from(inst.labels[i][j]);
        let a = (2.0 * m - inst.star_costs[i][j]) / m;
        f + m * a - 2.0 * m
    });
    let b = Matrix::from_fn(n, cols, |i, j| 1.0 - f64::from(inst.labels[i][j]));
    let offsets = (0..cols)
        .map(|j| -(0..n).map(|i| inst.star_costs[i][j]).sum::<f64>() / n as f64)
        .collect();
    Ok((BimatrixGame::new(a_prime, b)?, offsets))
}

fn in_simplex(p: &Vector, len: usize) -> bool {
    p.len() == len && p.iter().all(|&v| v >= -1e-12) && (p.sum() - 1.0).abs() <= 1e-9
}

/// Both best-response conditions of an ε-Nash equilibrium, checked against
/// every pure deviation.
pub fn verify_approx_nash(game: &BimatrixGame, x: &Vector, y: &Vector, eps: f64) -> bool {
    if !in_simplex(x, game.rows()) || !in_simplex(y, game.cols()) {
        return false;
    }
    let ay = &game.a * y;
    let btx = game.b.transpose() * x;
    let row_value = x.dot(&ay);
    let col_value = y.dot(&btx);
    row_value >= ay.max() - eps && col_value >= btx.max() - eps
}

/// Largest game dimension accepted by [`support_enum_nash`].
pub const SUPPORT_ENUM_LIMIT: usize = 5;

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..1 << n)
        .filter(|mask| (mask.count_ones() as usize) <= max)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

/// Mixed strategy on `support` equalizing `payoff` rows in `rows`:
/// `payoff[r, support] · p = value` for all `r ∈ rows`, `Σ p = 1`.
fn equalizer(payoff: &Matrix, rows: &[usize], support: &[usize], len: usize) -> Option<Vector> {
    let k = support.len();
    let mut sys = Matrix::zeros(rows.len() + 1, k + 1);
    let mut rhs = Vector::zeros(rows.len() + 1);
    for (e, &r) in rows.iter().enumerate() {
        for (c, &s) in support.iter().enumerate() {
            sys[(e, c)] = payoff[(r, s)];
        }
        sys[(e, k)] = -1.0;
    }
    for c in 0..k {
        sys[(rows.len(), c)] = 1.0;
    }
    rhs[rows.len()] = 1.0;
    let sol = sys.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
    if (&sys * &sol - &rhs).amax() > 1e-9 {
        return None;
    }
    let mut p = Vector::zeros(len);
    for (c, &s) in support.iter().enumerate() {
        if sol[c] < -1e-12 {
            return None;
        }
        p[s] = sol[c].max(0.0);
    }
    let total = p.sum();
    (total > 0.0).then(|| p / total)
}

/// Nash equilibria found by enumerating support pairs of size at most
/// `max_support`, solving the indifference systems by least squares, and
/// keeping the pairs that verify at tolerance `1e−9`. Results follow the
/// lexicographic order of `(row support, column support)`; duplicates within
/// `1e−9` are merged.
pub fn support_enum_nash(game: &BimatrixGame, max_support: usize) -> Result<Vec<(Vector, Vector)>> {
    let (n, m) = (game.rows(), game.cols());
    if n > SUPPORT_ENUM_LIMIT || m > SUPPORT_ENUM_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "support enumeration handles games up to {SUPPORT_ENUM_LIMIT}×{SUPPORT_ENUM_LIMIT}, got {n}×{m}"
        )));
    }
    let bt = game.b.transpose();
    let mut found: Vec<(Vector, Vector)> = Vec::new();
    let row_sets = subsets(n, max_support);
    let col_sets = subsets(m, max_support);
    for rows in &row_sets {
        for cols in &col_sets {
            let Some(y) = equalizer(&game.a, rows, cols, m) else {
                continue;
            };
            let Some(x) = equalizer(&bt, cols, rows, n) else {
                continue;
            };
            if !verify_approx_nash(game, &x, &y, 1e-9) {
                continue;
            }
            let duplicate = found
                .iter()
                .any(|(fx, fy)| (fx - &x).amax() <= 1e-9 && (fy - &y).amax() <= 1e-9);
            if !duplicate {
                found.push((x, y));
            }
        }
    }
    Ok(found)
}
