//! Strategic classification over a finite population.
//!
//! The Jury publishes a binary classifier; each point moves to whichever
//! point maximizes its label minus the moving cost. Local search flips one
//! label at a time. The LocalMaxCut gadget embeds a weighted graph so that
//! strategic local optima map to locally maximal cuts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Cost between a point and the points it is "close" to in the gadget.
pub const NEAR_COST: f64 = 0.8;
/// Cost between every other pair of distinct gadget points.
pub const FAR_COST: f64 = 1.2;
/// Relative tolerance separating a strict improvement from a plateau.
pub const IMPROVEMENT_TOL: f64 = 1e-12;
/// Largest population accepted by [`brute_force_strategic_opt`].
pub const BRUTE_FORCE_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: usize,
    pub weight: f64,
    pub target: u8,
}

/// Binary labels, one per population point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Classifier(Vec<u8>);

impl Classifier {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if labels.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Ok(Self(labels))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.0
    }

    pub fn set(&mut self, i: usize, label: u8) {
        self.0[i] = label & 1;
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.0[i] ^= 1;
        out
    }

    fn from_mask(mask: u64, len: usize) -> Self {
        Self((0..len).map(|i| (mask >> i & 1) as u8).collect())
    }
}

/// Undirected graph with nonnegative edge weights and named vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    names: Vec<Value>,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Vertices are `0..n`; edges are index pairs.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        Self::named((0..n).map(Value::from).collect(), edges)
    }

    fn named(names: Vec<Value>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = names.len();
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a missing vertex"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {u}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self { names, edges })
    }

    /// The complete graph on `n` vertices with unit weights.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v, 1.0)))
            .collect();
        Self::new(n, edges).expect("complete graph is valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn names(&self) -> &[Value] {
        &self.names
    }

    /// Weight of edges crossing the partition.
    pub fn cut_weight(&self, side: &[bool]) -> f64 {
        self.edges
            .iter()
            .filter(|(u, v, _)| side[*u] != side[*v])
            .map(|e| e.2)
            .sum()
    }

    /// No single-vertex move increases the cut weight.
    pub fn is_local_maxcut(&self, side: &[bool]) -> bool {
        (0..self.vertex_count()).all(|v| {
            let (same, other) = self.incident(v).fold((0.0, 0.0), |(s, o), (u, w)| {
                if side[u] == side[v] {
                    (s + w, o)
                } else {
                    (s, o + w)
                }
            });
            same <= other
        })
    }

    fn incident(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges.iter().filter_map(move |&(a, b, w)| match () {
            _ if a == v => Some((b, w)),
            _ if b == v => Some((a, w)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EdgeSpec {
    u: Value,
    v: Value,
    #[serde(default = "unit")]
    w: f64,
}

fn unit() -> f64 {
    1.0
}

/// JSON form `{"vertices": [...], "edges": [{"u": .., "v": .., "w": ..}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSpec {
    vertices: Vec<Value>,
    edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<WeightedGraph> {
        let index = |name: &Value| {
            self.vertices.iter().position(|v| v == name).ok_or_else(|| {
                Error::InvalidArgument(format!("edge endpoint {name} is not a listed vertex"))
            })
        };
        let edges = self
            .edges
            .iter()
            .map(|e| Ok((index(&e.u)?, index(&e.v)?, e.w)))
            .collect::<Result<Vec<_>>>()?;
        WeightedGraph::named(self.vertices.clone(), edges)
    }
}

impl From<&WeightedGraph> for GraphSpec {
    fn from(g: &WeightedGraph) -> Self {
        GraphSpec {
            vertices: g.names.clone(),
            edges: g
                .edges
                .iter()
                .map(|&(u, v, w)| EdgeSpec {
                    u: g.names[u].clone(),
                    v: g.names[v].clone(),
                    w,
                })
                .collect(),
        }
    }
}

/// Back-reference from a gadget instance to its graph. Vertex `v` owns point
/// `v`; edge `e` owns points `|V| + 2e` (plus) and `|V| + 2e + 1` (minus).
#[derive(Clone, Debug, PartialEq)]
pub struct GadgetMeta {
    pub graph: WeightedGraph,
}

impl GadgetMeta {
    pub fn vertex_point(&self, v: usize) -> usize {
        v
    }

    pub fn edge_plus(&self, e: usize) -> usize {
        self.graph.vertex_count() + 2 * e
    }

    pub fn edge_minus(&self, e: usize) -> usize {
        self.graph.vertex_count() + 2 * e + 1
    }
}

#[derive(Clone, Debug)]
pub struct StratClassInstance {
    points: Vec<Point>,
    cost: Matrix,
    total_weight: f64,
    gadget: Option<GadgetMeta>,
}

impl StratClassInstance {
    pub fn new(points: Vec<Point>, cost: Matrix) -> Result<Self> {
        let inst = Self::unchecked(points, cost, None)?;
        if !(inst.total_weight > 0.0) {
            return Err(Error::InvalidArgument(
                "total weight must be positive".into(),
            ));
        }
        Ok(inst)
    }

    fn unchecked(points: Vec<Point>, cost: Matrix, gadget: Option<GadgetMeta>) -> Result<Self> {
        let n = points.len();
        if cost.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cost.nrows(),
            });
        }
        for p in &points {
            if !(p.weight >= 0.0) || p.target > 1 {
                return Err(Error::InvalidArgument(format!(
                    "point {} has weight {} and target {}",
                    p.id, p.weight, p.target
                )));
            }
        }
        for i in 0..n {
            if cost[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "cost diagonal at {i} is nonzero"
                )));
            }
            for j in 0..n {
                if !(cost[(i, j)] >= 0.0) || cost[(i, j)] != cost[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "cost must be symmetric and nonnegative at ({i}, {j})"
                    )));
                }
            }
        }
        let total_weight = points.iter().map(|p| p.weight).sum();
        Ok(Self {
            points,
            cost,
            total_weight,
            gadget,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn cost(&self) -> &Matrix {
        &self.cost
    }

    /// Normalization constant `M`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn gadget(&self) -> Option<&GadgetMeta> {
        self.gadget.as_ref()
    }

    /// Whether `c(x, z) ≤ c(x, y) + c(y, z)` for all triples.
    pub fn satisfies_triangle_inequality(&self) -> bool {
        let n = self.len();
        (0..n).all(|x| {
            (0..n).all(|y| {
                (0..n).all(|z| self.cost[(x, z)] <= self.cost[(x, y)] + self.cost[(y, z)] + 1e-12)
            })
        })
    }

    fn check_len(&self, f: &Classifier) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }
}

/// The Contestant's move for every point: the `y` maximizing
/// `f(y) − c(x, y)`, staying at `x` unless some `y` is strictly better, and
/// the lowest id among equally good moves.
pub fn best_response(inst: &StratClassInstance, f: &Classifier) -> Result<Vec<usize>> {
    inst.check_len(f)?;
    Ok(best_response_unchecked(inst, f))
}

fn best_response_unchecked(inst: &StratClassInstance, f: &Classifier) -> Vec<usize> {
    let n = inst.len();
    (0..n)
        .map(|x| {
            let mut best = x;
            let mut value = f64::from(f.get(x));
            for y in 0..n {
                let v = f64::from(f.get(y)) - inst.cost[(x, y)];
                if v > value {
                    best = y;
                    value = v;
                }
            }
            best
        })
        .collect()
}

/// `Σ w(x)·1[h(x) = f(Δ(x))] / Σ w(x)`; an instance with no weight scores 1.
pub fn jury_utility(inst: &StratClassInstance, f: &Classifier) -> Result<f64> {
    inst.check_len(f)?;
    Ok(utility_unchecked(inst, f))
}

fn utility_unchecked(inst: &StratClassInstance, f: &Classifier) -> f64 {
    if inst.total_weight == 0.0 {
        return 1.0;
    }
    let delta = best_response_unchecked(inst, f);
    let correct: f64 = inst
        .points
        .iter()
        .zip(&delta)
        .filter(|(p, &d)| p.target == f.get(d))
        .map(|(p, _)| p.weight)
        .sum();
    correct / inst.total_weight
}

fn improves(new: f64, old: f64) -> bool {
    new > old + IMPROVEMENT_TOL * old.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub classifier: Classifier,
    pub utility: f64,
    /// Flipped index and the utility reached after the flip.
    pub path: Vec<(usize, f64)>,
}

/// Single-flip local search with the first-improvement pivot rule.
pub fn local_search(inst: &StratClassInstance, f0: &Classifier) -> Result<SearchOutcome> {
    inst.check_len(f0)?;
    let mut f = f0.clone();
    let mut utility = utility_unchecked(inst, &f);
    let mut path = Vec::new();
    'outer: loop {
        for i in 0..f.len() {
            let candidate = f.flipped(i);
            let u = utility_unchecked(inst, &candidate);
            if improves(u, utility) {
                f = candidate;
                utility = u;
                path.push((i, u));
                continue 'outer;
            }
        }
        break;
    }
    Ok(SearchOutcome {
        classifier: f,
        utility,
        path,
    })
}

/// No single label flip strictly increases the Jury's utility.
pub fn is_strategic_local_opt(inst: &StratClassInstance, f: &Classifier) -> Result<bool> {
    let base = jury_utility(inst, f)?;
    Ok((0..f.len()).all(|i| !improves(utility_unchecked(inst, &f.flipped(i)), base)))
}

/// How multi-start local search draws its starting classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartLabels {
    /// Every label uniformly at random.
    Any,
    /// Random vertex-point labels with every gadget edge label at 0.
    VertexOnly,
}

/// Local search from `starts` random classifiers, run in parallel. Start `s`
/// draws its labels from a ChaCha8 stream seeded with `seed + s`.
pub fn multi_start_search(
    inst: &StratClassInstance,
    starts: usize,
    seed: u64,
    labels: StartLabels,
) -> Result<Vec<SearchOutcome>> {
    let random_len = match labels {
        StartLabels::Any => inst.len(),
        StartLabels::VertexOnly => gadget_of(inst)?.graph.vertex_count(),
    };
    (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let mut f = Classifier::zeros(inst.len());
            for i in 0..random_len {
                f.set(i, rng.random_range(0..=1u8));
            }
            local_search(inst, &f)
        })
        .collect()
}

/// The LocalMaxCut gadget of a weighted graph.
pub fn build_maxcut_gadget(g: &WeightedGraph) -> Result<StratClassInstance> {
    let nv = g.vertex_count();
    let n = nv + 2 * g.edges.len();
    let mut points: Vec<Point> = (0..nv)
        .map(|v| Point {
            id: v,
            weight: g.incident(v).map(|(_, w)| w).sum(),
            target: 0,
        })
        .collect();
    let mut cost = Matrix::from_element(n, n, FAR_COST);
    cost.fill_diagonal(0.0);
    for (e, &(u, v, w)) in g.edges.iter().enumerate() {
        let (plus, minus) = (nv + 2 * e, nv + 2 * e + 1);
        points.push(Point {
            id: plus,
            weight: 2.0 * w,
            target: 1,
        });
        points.push(Point {
            id: minus,
            weight: 2.0 * w + 1.0,
            target: 0,
        });
        for near in [u, v, minus] {
            cost[(plus, near)] = NEAR_COST;
            cost[(near, plus)] = NEAR_COST;
        }
    }
    let inst = StratClassInstance::unchecked(points, cost, Some(GadgetMeta { graph: g.clone() }))?;
    if !inst.satisfies_triangle_inequality() {
        return Err(Error::Certificate(
            "gadget costs violate the triangle inequality".into(),
        ));
    }
    Ok(inst)
}

fn gadget_of(inst: &StratClassInstance) -> Result<&GadgetMeta> {
    inst.gadget
        .as_ref()
        .ok_or_else(|| Error::Precondition("instance was not built from a graph".into()))
}

/// Cut sides read from the vertex-point labels: `true` where `f(x_{v−}) = 1`.
pub fn recover_cut(inst: &StratClassInstance, f: &Classifier) -> Result<Vec<bool>> {
    inst.check_len(f)?;
    let meta = gadget_of(inst)?;
    Ok((0..meta.graph.vertex_count())
        .map(|v| f.get(meta.vertex_point(v)) == 1)
        .collect())
}

/// Every edge point carries label 0.
pub fn edge_labels_cleared(inst: &StratClassInstance, f: &Classifier) -> Result<bool> {
    inst.check_len(f)?;
    let meta = gadget_of(inst)?;
    Ok((meta.graph.vertex_count()..inst.len()).all(|i| f.get(i) == 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipDirection {
    ZeroToOne,
    OneToZero,
}

/// Closed-form utility change from flipping vertex `v`, checked against the
/// recomputed utilities. With `N(v)−` the neighbors labeled 0 and `N(v)+`
/// those labeled 1, a 0→1 flip gains `(Σ_{N(v)−} w − Σ_{N(v)+} w)/M` and a
/// 1→0 flip gains its negation. Needs all edge labels cleared.
pub fn utility_delta(
    inst: &StratClassInstance,
    f: &Classifier,
    v: usize,
    direction: FlipDirection,
) -> Result<f64> {
    let meta = gadget_of(inst)?;
    if v >= meta.graph.vertex_count() {
        return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
    }
    if !edge_labels_cleared(inst, f)? {
        return Err(Error::Precondition(
            "the closed form needs every edge label at 0".into(),
        ));
    }
    let current = f.get(meta.vertex_point(v));
    let expected = match direction {
        FlipDirection::ZeroToOne => 0,
        FlipDirection::OneToZero => 1,
    };
    if current != expected {
        return Err(Error::InvalidArgument(format!(
            "vertex {v} is labeled {current}, flip needs {expected}"
        )));
    }
    let (zero_side, one_side) = meta.graph.incident(v).fold((0.0, 0.0), |(z, o), (u, w)| {
        if f.get(meta.vertex_point(u)) == 0 {
            (z + w, o)
        } else {
            (z, o + w)
        }
    });
    let m = inst.total_weight;
    let gain = if m == 0.0 {
        0.0
    } else {
        (zero_side - one_side) / m
    };
    let delta = match direction {
        FlipDirection::ZeroToOne => gain,
        FlipDirection::OneToZero => -gain,
    };
    let recomputed =
        utility_unchecked(inst, &f.flipped(meta.vertex_point(v))) - utility_unchecked(inst, f);
    if (recomputed - delta).abs() > 1e-12 {
        return Err(Error::Certificate(format!(
            "closed-form delta {delta} disagrees with recomputed {recomputed}"
        )));
    }
    Ok(delta)
}

/// Every classifier attaining the maximum Jury utility, in increasing
/// binary order with point 0 as the lowest bit.
pub fn strategic_optima(inst: &StratClassInstance) -> Result<(f64, Vec<Classifier>)> {
    let n = inst.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search handles at most {BRUTE_FORCE_LIMIT} points, got {n}"
        )));
    }
    let scored: Vec<(u64, f64)> = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            (
                mask,
                utility_unchecked(inst, &Classifier::from_mask(mask, n)),
            )
        })
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let winners = scored
        .iter()
        .filter(|s| !improves(best, s.1))
        .map(|s| Classifier::from_mask(s.0, n))
        .collect();
    Ok((best, winners))
}

/// A global strategic maximum by exhaustive search.
pub fn brute_force_strategic_opt(inst: &StratClassInstance) -> Result<(Classifier, f64)> {
    let (best, winners) = strategic_optima(inst)?;
    Ok((
        winners.into_iter().next().expect("at least one classifier"),
        best,
    ))
}
