//! Property tests for the invariants of every module.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use perfstab::domain::sphere_directions;
use perfstab::instances::{gap_bound_from_stability, stability_bound_from_gap, Accounting};
use perfstab::linalg::{norm_inf, norm_one, spectral_norm};
use perfstab::reductions::{
    certify_fp_from_ps, certify_vi_from_ps, encode_endogenous, endogenous_payoffs, fp_to_ps,
    support_enum_nash, verify_approx_nash, vi_to_ps, BimatrixGame,
};
use perfstab::solvers::{
    halpern_rate, hypomonotone_solve, run_ellipsoid_instance, run_halpern, run_rrm, svi_gap,
    EllipsoidState,
};
use perfstab::sperner::{Coloring, SpernerInstance};
use perfstab::stratclass::{
    best_response, build_maxcut_gadget, edge_labels_cleared, is_strategic_local_opt, jury_utility,
    local_search, multi_start_search, recover_cut, utility_delta, Classifier, FlipDirection,
    StartLabels, WeightedGraph,
};
use perfstab::sweep::{run_sweep, to_csv, Family, SolverKind, SweepSpec, CSV_HEADER};
use perfstab::{Domain, Operator, PerformativeInstance, ShiftMap, SolveStatus};

type Vector = DVector<f64>;
type Matrix = DMatrix<f64>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_ish(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn domain_for(kind: u8, d: usize) -> Domain {
    match kind % 3 {
        0 => Domain::cube(d, -1.0, 1.0).unwrap(),
        1 => Domain::ball(Vector::from_element(d, 0.3), 1.5).unwrap(),
        _ => Domain::hypercube(
            Vector::from_element(d, 0.0),
            Vector::from_fn(d, |i, _| 1.0 + i as f64),
        )
        .unwrap(),
    }
}

fn point_in(r: &mut ChaCha8Rng, d: usize, scale: f64) -> Vector {
    Vector::from_fn(d, |_, _| r.random_range(-scale..scale))
}

fn with_spectral_norm(m: Matrix, rho: f64) -> Matrix {
    let s = m.clone().svd(false, false).singular_values.max();
    m * (rho / s)
}

// domain

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_nonexpansive(kind in 0u8..3, d in 1usize..5, seed in any::<u64>()) {
        let dom = domain_for(kind, d);
        let mut r = rng(seed);
        for _ in 0..20 {
            let p = point_in(&mut r, d, 4.0);
            let q = point_in(&mut r, d, 4.0);
            let pp = dom.project(&p).unwrap();
            prop_assert_eq!(dom.project(&pp).unwrap(), pp.clone());
            let qq = dom.project(&q).unwrap();
            prop_assert!((pp - qq).norm() <= (p - q).norm() + 1e-12);
        }
    }

    #[test]
    fn polygon_projection_is_idempotent_and_nonexpansive(seed in any::<u64>()) {
        let dom = Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.5, 1.5], [0.5, 2.0]]).unwrap();
        let mut r = rng(seed);
        for _ in 0..20 {
            let p = point_in(&mut r, 2, 4.0);
            let q = point_in(&mut r, 2, 4.0);
            let pp = dom.project(&p).unwrap();
            prop_assert_eq!(dom.project(&pp).unwrap(), pp.clone());
            let qq = dom.project(&q).unwrap();
            prop_assert!((pp - qq).norm() <= (p - q).norm() + 1e-12);
        }
    }

    #[test]
    fn support_gap_dominates_samples(kind in 0u8..3, d in 1usize..5, seed in any::<u64>()) {
        let dom = domain_for(kind, d);
        let mut r = rng(seed);
        let x = dom.sample(&mut r);
        let v = point_in(&mut r, d, 2.0);
        let gap = dom.support_gap(&x, &v).unwrap();
        for _ in 0..50 {
            let y = dom.sample(&mut r);
            prop_assert!(gap >= (&x - &y).dot(&v) - 1e-12);
        }
        let best = dom.support_minimizer(&v).unwrap();
        prop_assert!(dom.contains(&best, 1e-9));
        prop_assert!(((&x - &best).dot(&v) - gap).abs() <= 1e-9 * (1.0 + gap.abs()));
    }
}

#[test]
fn well_boundedness_radii_are_consistent() {
    for kind in 0..3 {
        for d in [2, 3] {
            let dom = domain_for(kind, d);
            let c = dom.center().clone();
            let (r1, r2) = (dom.inner_radius(), dom.outer_radius());
            for u in sphere_directions(d, 64) {
                let inner = &c + &u * r1;
                assert!(dom.contains(&inner, 1e-9));
                let projected = dom.project(&inner).unwrap();
                assert!((projected - &inner).norm() <= 1e-9);
                let far = &c + &u * (r2 * 1.001);
                assert!(
                    !dom.contains(&far, 1e-9),
                    "kind {kind}, d {d}: point beyond R2 is inside"
                );
            }
        }
    }
}

// instances

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rrm_map_contracts_at_rho(d in 1usize..5, rho in 0.05f64..0.98, kind in 0u8..3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = with_spectral_norm(gaussian_ish(&mut r, d, d), rho);
        let c = point_in(&mut r, d, 0.5);
        let inst = PerformativeInstance::new(domain_for(kind, d), ShiftMap::affine(m, c).unwrap()).unwrap();
        prop_assert!((inst.rho() - rho).abs() <= 1e-9);
        for _ in 0..20 {
            let x = inst.domain().sample(&mut r);
            let y = inst.domain().sample(&mut r);
            let gx = inst.rrm_map(&x).unwrap();
            let gy = inst.rrm_map(&y).unwrap();
            prop_assert!((gx - gy).norm() <= rho * (&x - &y).norm() + 1e-9);
        }
    }

    #[test]
    fn gap_conversions_hold(d in 1usize..5, rho in 0.0f64..2.0, kind in 0u8..3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = with_spectral_norm(gaussian_ish(&mut r, d, d), rho.max(1e-3));
        let c = point_in(&mut r, d, 0.5);
        let inst = PerformativeInstance::new(domain_for(kind, d), ShiftMap::affine(m, c).unwrap()).unwrap();
        let diameter = inst.domain().diameter();
        for _ in 0..10 {
            let x = inst.domain().sample(&mut r);
            let stab = inst.stability_gap(&x).unwrap();
            let fp = inst.fixed_point_gap(&x, Accounting::Diagnostic).unwrap();
            prop_assert!(fp <= gap_bound_from_stability(stab, 1.0).unwrap() + 1e-9);
            let grad = inst.gradient_norm_at_map(&x).unwrap();
            prop_assert!(stab <= stability_bound_from_gap(fp, diameter, 1.0, grad) + 1e-9);
        }
    }
}

#[test]
fn residual_of_nonexpansive_shift_is_monotone() {
    let mut r = rng(12);
    let maps: Vec<ShiftMap> = vec![
        ShiftMap::negation(3),
        ShiftMap::affine(
            with_spectral_norm(gaussian_ish(&mut r, 3, 3), 1.0),
            point_in(&mut r, 3, 1.0),
        )
        .unwrap(),
        ShiftMap::damped(ShiftMap::negation(3), 0.4).unwrap(),
    ];
    for g in maps {
        for _ in 0..1000 {
            let x = point_in(&mut r, 3, 2.0);
            let y = point_in(&mut r, 3, 2.0);
            let fx = &x - g.apply(&x);
            let fy = &y - g.apply(&y);
            assert!((fx - fy).dot(&(&x - &y)) >= -1e-9);
        }
    }
}

// solvers

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rrm_iterates_meet_the_geometric_bound(d in 1usize..5, rho in 0.1f64..0.95, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = with_spectral_norm(gaussian_ish(&mut r, d, d), rho);
        let c = point_in(&mut r, d, 0.5);
        let inst = PerformativeInstance::new(domain_for(0, d), ShiftMap::affine(m, c).unwrap()).unwrap();
        let x0 = inst.domain().sample(&mut r);
        let star = run_rrm(&inst, &x0, 4096, 1e-13).unwrap();
        prop_assert_eq!(star.status, SolveStatus::Converged);
        let star = star.final_vector();
        let report = run_rrm(&inst, &x0, 60, 1e-300).unwrap();
        let d0 = (&x0 - &star).norm();
        for (t, x) in report.iterates.iter().enumerate() {
            let dist = (Vector::from_vec(x.clone()) - &star).norm();
            // x* itself carries up to 1e-13/(1−ρ) of error
            let slack = 2e-13 / (1.0 - rho);
            prop_assert!(dist <= rho.powi(t as i32) * d0 * (1.0 + 1e-6) + slack, "t={t}: {dist}");
        }
    }

    #[test]
    fn halpern_meets_its_rate(d in 1usize..4, theta in 0.0f64..std::f64::consts::PI, k in 1usize..400, seed in any::<u64>()) {
        let mut r = rng(seed);
        let shift = if d == 2 {
            ShiftMap::affine(
                Matrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]),
                Vector::zeros(2),
            ).unwrap()
        } else {
            ShiftMap::affine(with_spectral_norm(gaussian_ish(&mut r, d, d), 1.0), point_in(&mut r, d, 0.3)).unwrap()
        };
        let inst = PerformativeInstance::new(domain_for(0, d), shift).unwrap();
        let x0 = inst.domain().sample(&mut r);
        let report = run_halpern(&inst, &x0, k, 1e-300).unwrap();
        let x = report.final_vector();
        let gap = inst.fixed_point_gap(&x, Accounting::Diagnostic).unwrap();
        prop_assert!(gap <= halpern_rate(inst.domain().diameter(), report.iters) + 1e-9);
    }

    #[test]
    fn ellipsoid_reports_are_sound(d in 1usize..4, rho in 0.0f64..1.0, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = with_spectral_norm(gaussian_ish(&mut r, d, d), rho.max(1e-3));
        let c = point_in(&mut r, d, 0.5);
        let inst = PerformativeInstance::new(domain_for(1, d), ShiftMap::affine(m, c).unwrap()).unwrap();
        let report = run_ellipsoid_instance(&inst, 1e-6, None).unwrap();
        if report.status == SolveStatus::Converged {
            let x = report.final_vector();
            prop_assert!(inst.domain().contains(&x, 1e-9));
            prop_assert!(inst.fixed_point_gap(&x, Accounting::Diagnostic).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn ellipsoid_shape_stays_symmetric(d in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut state = EllipsoidState::ball(point_in(&mut r, d, 1.0), 2.0);
        for _ in 0..10 * d {
            let g = point_in(&mut r, d, 1.0);
            if !state.cut(&g) || state.is_degenerate() {
                break;
            }
            let (lo, hi) = state.eigen_range();
            prop_assert!(lo > 0.0 && hi >= lo);
            prop_assert!(state.min_eigenvalue() == lo);
        }
    }

    #[test]
    fn expansive_residual_is_hypomonotone(sigma in 0.0f64..0.5, theta in 0.0f64..6.3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = 1.0 + sigma;
        let t = Matrix::from_row_slice(2, 2, &[s * theta.cos(), -s * theta.sin(), s * theta.sin(), s * theta.cos()]);
        let f = |x: &Vector| x - &t * x;
        let bound = sigma + sigma * sigma / 2.0;
        for _ in 0..1000 {
            let x = point_in(&mut r, 2, 1.0);
            let y = point_in(&mut r, 2, 1.0);
            let dx = &x - &y;
            prop_assert!((f(&x) - f(&y)).dot(&dx) >= -bound * dx.norm_squared() - 1e-9);
        }
    }
}

#[test]
fn certificate_chain_holds_when_evi_passes() {
    let mut passed = 0;
    for (i, sigma) in [0.0, 1e-3, 1e-2, 5e-2].into_iter().enumerate() {
        let mut r = rng(40 + i as u64);
        let dom = Domain::cube(2, -1.0, 1.0).unwrap();
        let theta: f64 = r.random_range(0.3..1.2);
        let s = 1.0 + sigma;
        let rot = Matrix::from_row_slice(
            2,
            2,
            &[
                s * theta.cos(),
                -s * theta.sin(),
                s * theta.sin(),
                s * theta.cos(),
            ],
        );
        let f = Operator::affine(Matrix::identity(2, 2) - rot, point_in(&mut r, 2, 0.2));
        let (mean, cert) = hypomonotone_solve(&f, sigma, &dom, 1e-3, 4000).unwrap();
        if cert.evi_passed {
            passed += 1;
            let gap = svi_gap(&f, &dom, &mean).unwrap();
            assert!(
                gap <= cert.svi_bound + 1e-12,
                "σ={sigma}: {gap} > {}",
                cert.svi_bound
            );
            assert!(cert.chain_holds);
        }
    }
    assert!(passed > 0);
}

// reductions

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vi_reduction_certifies_stable_points(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = 5;
        let raw = gaussian_ish(&mut r, d, d);
        let a = &raw * (0.9 / norm_one(&raw).max(norm_inf(&raw)));
        let b = Vector::from_fn(d, |_, _| r.random_range(0.0..1.0));
        let dom = Domain::cube(d, 0.0, 1.0).unwrap();
        let f = ShiftMap::affine(a.clone(), b.clone()).unwrap();
        let (eps, eps_prime) = (1e-3, 1e-2);
        let inst = vi_to_ps(&f, f.lipschitz(), eps, eps_prime, dom.clone()).unwrap();
        let field = f.as_operator();
        for _ in 0..200 {
            let x = dom.sample(&mut r);
            if inst.stability_gap(&x).unwrap() <= eps {
                prop_assert!(svi_gap(&field, &dom, &x).unwrap() <= eps_prime + 1e-9);
                prop_assert!(certify_vi_from_ps(&f, &dom, &x, eps, eps_prime).unwrap());
            }
        }
        // a point guaranteed to be stable: an exact solution found by RRM when the reduced map contracts
        if inst.rho() < 1.0 {
            let x0 = dom.sample(&mut r);
            let rep = run_rrm(&inst, &x0, 100_000, 1e-12).unwrap();
            let x = rep.final_vector();
            prop_assert!(inst.stability_gap(&x).unwrap() <= eps);
            prop_assert!(svi_gap(&field, &dom, &x).unwrap() <= eps_prime + 1e-9);
        }
    }

    #[test]
    fn fp_reduction_certifies_fixed_points(seed in any::<u64>(), rho in 0.1f64..0.7) {
        let mut r = rng(seed);
        let d = 3;
        // ‖Mx + c‖ ≤ ρ + 0.3 < 1 keeps T a self-map of the unit ball
        let dom = Domain::ball(Vector::zeros(d), 1.0).unwrap();
        let c = point_in(&mut r, d, 1.0).normalize() * 0.3;
        let t = ShiftMap::affine(with_spectral_norm(gaussian_ish(&mut r, d, d), rho), c).unwrap();
        let (eps, eps_prime) = (1e-4, 1e-3);
        let inst = fp_to_ps(&t, t.lipschitz(), eps, eps_prime, dom.clone()).unwrap();
        for _ in 0..100 {
            let x = dom.sample(&mut r);
            prop_assert!(certify_fp_from_ps(&t, &dom, &x, eps, eps_prime).unwrap());
        }
        let x0 = dom.sample(&mut r);
        let rep = run_halpern(&inst, &x0, 200_000, eps).unwrap();
        let x = rep.final_vector();
        prop_assert!(inst.fixed_point_gap(&x, Accounting::Diagnostic).unwrap() <= eps);
        prop_assert!((&x - t.apply(&x)).norm() <= eps_prime + 1e-9);
        prop_assert!(certify_fp_from_ps(&t, &dom, &x, eps, eps_prime).unwrap());
    }
}

#[test]
fn spectral_norm_is_bounded_by_induced_norms() {
    let mut r = rng(7);
    for i in 0..200 {
        let (rows, cols) = (r.random_range(1..7), r.random_range(1..7));
        let a = gaussian_ish(&mut r, rows, cols) * (1.0 + i as f64 / 20.0);
        assert!(spectral_norm(&a) <= (norm_one(&a) * norm_inf(&a)).sqrt() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn nash_equilibria_transfer_through_the_encoding(rows in 1usize..4, cols in 1usize..4, bits in any::<u64>(), m in 100.0f64..1000.0) {
        let bit = |k: usize| f64::from((bits >> k & 1) as u8);
        let a = Matrix::from_fn(rows, cols, |i, j| bit(i * cols + j));
        let b = Matrix::from_fn(rows, cols, |i, j| bit(32 + i * cols + j));
        let game = BimatrixGame::new(a, b).unwrap();
        let enc = encode_endogenous(&game, m).unwrap();
        let (prime, _) = endogenous_payoffs(&enc).unwrap();
        let eqs = support_enum_nash(&prime, rows.max(cols)).unwrap();
        prop_assert!(!eqs.is_empty());
        for (x, y) in eqs {
            prop_assert!(verify_approx_nash(&prime, &x, &y, 1e-9));
            prop_assert!(verify_approx_nash(&game, &x, &y, 1.0 / m + 1e-9));
        }
    }
}

// sperner

#[test]
fn directions_balance() {
    for n in 1..=12 {
        let inst = SpernerInstance::new(n, 16, Coloring::Canonical).unwrap();
        let sum = (1..=3).fold([0.0, 0.0], |acc, c| {
            let d = inst.direction(c);
            [acc[0] + d[0], acc[1] + d[1]]
        });
        let tol = (-(n as f64 + 10.0)).exp2();
        assert!(sum[0].abs() <= tol && sum[1].abs() <= tol, "n={n}: {sum:?}");
    }
}

#[test]
fn at_most_two_samples_are_poorly_positioned() {
    let mut r = rng(5);
    for n in [2, 4, 6] {
        let inst = SpernerInstance::new(n, 16, Coloring::Planted { center: None }).unwrap();
        let dom = inst.domain().clone();
        for _ in 0..10_000 {
            let x = dom.sample(&mut r);
            let eval = inst.operator([x[0], x[1]]).unwrap();
            assert!(
                eval.poorly_positioned <= 2,
                "n={n}, x={x:?}: {}",
                eval.poorly_positioned
            );
        }
    }
}

#[test]
fn rescaled_operator_has_bounded_lipschitz_constant() {
    for n in 3..=8 {
        let inst = SpernerInstance::new(n, 16, Coloring::Planted { center: None }).unwrap();
        let m = 1usize << (n + 2);
        let c = inst.domain().center().clone();
        let rad = inst.domain().outer_radius();
        let coord = |i: usize| 2.0 * rad * (i as f64 + 0.5) / m as f64 - rad;
        let at = |i: usize, j: usize| Vector::from_vec(vec![c[0] + coord(i), c[1] + coord(j)]);
        let values: Vec<Option<Vector>> = (0..m * m)
            .map(|k| {
                let p = at(k / m, k % m);
                inst.domain()
                    .contains(&p, 0.0)
                    .then(|| inst.rescaled_operator_value(&p))
            })
            .collect();
        let step = 2.0 * rad / m as f64;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let Some(v) = &values[i * m + j] else {
                    continue;
                };
                for (a, b) in [(i + 1, j), (i, j + 1)] {
                    if a < m && b < m {
                        if let Some(w) = &values[a * m + b] {
                            worst = worst.max((v - w).norm() / step);
                        }
                    }
                }
            }
        }
        assert!(worst <= 64.0, "n={n}: {worst}");
    }
}

#[test]
fn found_solutions_recover_listed_triangles() {
    for n in 3..=5 {
        for coloring in [
            Coloring::Canonical,
            Coloring::Planted { center: None },
            Coloring::Planted {
                center: Some([1.0, 0.4]),
            },
        ] {
            let inst = SpernerInstance::new(n, 16, coloring).unwrap();
            let sol = inst.find_vi_solution(None).unwrap();
            let tri = inst.recover_trichromatic(sol.point).unwrap();
            assert!(
                inst.brute_force_trichromatic().unwrap().contains(&tri),
                "n={n}: {tri:?}"
            );
        }
    }
}

// stratclass

fn random_graph(r: &mut ChaCha8Rng, n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(0.5) {
                edges.push((u, v, r.random_range(0.1..3.0)));
            }
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

fn random_labels(r: &mut ChaCha8Rng, len: usize) -> Classifier {
    Classifier::new((0..len).map(|_| r.random_range(0..=1u8)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn best_responses_are_optimal(n in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = build_maxcut_gadget(&random_graph(&mut r, n)).unwrap();
        let f = random_labels(&mut r, inst.len());
        let dev = best_response(&inst, &f).unwrap();
        let c = inst.cost();
        for x in 0..inst.len() {
            let chosen = f64::from(f.get(dev[x])) - c[(x, dev[x])];
            for y in 0..inst.len() {
                prop_assert!(chosen >= f64::from(f.get(y)) - c[(x, y)]);
            }
        }
    }

    #[test]
    fn delta_formula_matches_recomputation(n in 1usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = build_maxcut_gadget(&random_graph(&mut r, n)).unwrap();
        let mut f = Classifier::zeros(inst.len());
        for v in 0..n {
            f.set(v, r.random_range(0..=1u8));
        }
        let base = jury_utility(&inst, &f).unwrap();
        for v in 0..n {
            let dir = if f.get(v) == 0 { FlipDirection::ZeroToOne } else { FlipDirection::OneToZero };
            let delta = utility_delta(&inst, &f, v, dir).unwrap();
            let after = jury_utility(&inst, &f.flipped(v)).unwrap();
            prop_assert!((delta - (after - base)).abs() <= 1e-12);
        }
    }

    #[test]
    fn local_search_climbs_strictly(n in 1usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = build_maxcut_gadget(&random_graph(&mut r, n)).unwrap();
        let f0 = random_labels(&mut r, inst.len());
        let out = local_search(&inst, &f0).unwrap();
        let mut f = f0.clone();
        let mut levels = vec![jury_utility(&inst, &f).unwrap()];
        for &(i, u) in &out.path {
            f = f.flipped(i);
            let recomputed = jury_utility(&inst, &f).unwrap();
            prop_assert_eq!(u, recomputed);
            prop_assert!(u > *levels.last().unwrap());
            levels.push(u);
        }
        prop_assert_eq!(&f, &out.classifier);
        prop_assert!(is_strategic_local_opt(&inst, &out.classifier).unwrap());
        // strictly increasing, so each step reaches a new utility level
        levels.dedup();
        prop_assert_eq!(levels.len(), out.path.len() + 1);
    }

    #[test]
    fn cleared_edge_labels_transfer_to_local_maxcuts(n in 1usize..9, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n);
        let inst = build_maxcut_gadget(&g).unwrap();
        for out in multi_start_search(&inst, 20, seed, StartLabels::VertexOnly).unwrap() {
            prop_assert!(edge_labels_cleared(&inst, &out.classifier).unwrap());
            prop_assert!(g.is_local_maxcut(&recover_cut(&inst, &out.classifier).unwrap()));
        }
        for out in multi_start_search(&inst, 20, seed, StartLabels::Any).unwrap() {
            if edge_labels_cleared(&inst, &out.classifier).unwrap() {
                prop_assert!(g.is_local_maxcut(&recover_cut(&inst, &out.classifier).unwrap()));
            }
        }
    }
}

// sweep

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweep_csv_is_deterministic_and_accounted(seed in any::<u64>(), steps in 1usize..6, affine in any::<bool>()) {
        let spec = SweepSpec {
            rho_min: 0.6,
            rho_max: 1.2,
            steps,
            dim: 2,
            family: if affine { Family::AffineRandom } else { Family::NegationScaled },
            solvers: vec![SolverKind::Rrm, SolverKind::Halpern, SolverKind::Ellipsoid],
            eps: 1e-5,
            max_iter: 500,
            seed,
            replicates: 1,
        };
        let rows = run_sweep(&spec, Some(2)).unwrap();
        prop_assert_eq!(rows.len(), steps * 3);
        let strip = |csv: String| csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
        let again = run_sweep(&spec, Some(1)).unwrap();
        prop_assert_eq!(strip(to_csv(&rows)), strip(to_csv(&again)));
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        prop_assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for line in lines {
            prop_assert_eq!(line.split(',').count(), 10);
        }
        for row in rows.iter().filter(|r| r.solver == SolverKind::Rrm) {
            let (inst, x0) = perfstab::sweep::sweep_instance(spec.family, row.rho, spec.dim, row.seed).unwrap();
            let rep = SolverKind::Rrm.run(&inst, &x0, spec.eps, spec.max_iter).unwrap();
            prop_assert_eq!(rep.erm_queries, inst.erm_queries());
            prop_assert_eq!(row.erm_queries, rep.erm_queries);
            prop_assert!(row.erm_queries as usize <= row.iterations.max(1) + 1);
        }
    }
}
