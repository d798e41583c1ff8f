//! Worked examples for the tangent estimators: the two counterexamples, the
//! interval maps, Dini agreement for scalar maps and value functions, and
//! ladder/linearity properties.

use conedp::cone::OrderingCone;
use conedp::dp::backward_solve;
use conedp::io::ProblemFile;
use conedp::oracle::scalar_dp;
use conedp::pareto::PointCloud;
use conedp::tangent::*;
use proptest::prelude::*;
use std::path::Path;

fn w_line(half_width: f64, per_axis: usize) -> WGrid {
    WGrid { half_width, per_axis }
}

fn angle(d: &[f64]) -> f64 {
    d[1].atan2(d[0]).to_degrees().rem_euclid(360.0)
}

#[test]
fn cube_root_has_no_derivative_along_nonzero_directions() {
    let grid = w_line(50.0, 2001);
    for v in [1.0, -1.0, 0.5] {
        let est = contingent_derivative_estimate(&CubeRoot, &[0.0], &[0.0], &[v], &Ladder::default(), grid, SlackProfile::default()).unwrap();
        assert!(est.inside.is_empty(), "v = {v}: {:?}", est.inside);
    }
    // along v = 0 the vertical tangent survives: every w is admissible. The
    // quotient decays like h²w³, so the box must stay small for the ladder to see it.
    let est = contingent_derivative_estimate(&CubeRoot, &[0.0], &[0.0], &[0.0], &Ladder::default(), w_line(2.0, 41), SlackProfile::default()).unwrap();
    assert_eq!(est.inside.len(), est.sampled, "{:?}", est.inside);
}

#[test]
fn cube_root_is_regular_away_from_zero() {
    // at x = 1 the derivative is the ordinary one, 1/3
    let est = contingent_derivative_estimate(&CubeRoot, &[1.0], &[1.0], &[3.0], &Ladder::default(), w_line(2.0, 401), SlackProfile::default()).unwrap();
    assert!(!est.inside.is_empty());
    assert!(est.inside.iter().all(|w| (w[0] - 1.0).abs() <= 0.03), "{:?}", est.inside);
}

#[test]
fn parabola_line_origin_is_minimal_but_not_proper() {
    let cone = OrderingCone::orthant(2);
    let r = properly_minimal(&ParabolaLineUpper, &[0.0, 0.0], &cone, &Ladder::default(), 720, SlackProfile::default()).unwrap();
    assert_eq!(r.class, Minimality::MinimalNotProper);
    assert_eq!(r.tangent.directions.len(), 720);
    // {w₂ ≥ 0} ∪ {w₂ ≥ −w₁} is the angular range [−45°, 180°]
    let expected = |a: f64| a <= 180.0 || a >= 315.0;
    let near_edge = |a: f64| (a - 180.0).abs() <= 1.0 || (a - 315.0).abs() <= 1.0;
    for (d, &inside) in r.tangent.directions.iter().zip(&r.tangent.inside) {
        let a = angle(d);
        assert!(inside == expected(a) || near_edge(a), "{a}° classified {inside}");
    }
}

#[test]
fn interior_of_upper_set_is_not_minimal() {
    let cone = OrderingCone::orthant(2);
    let r = properly_minimal(&ParabolaLineUpper, &[0.5, 1.0], &cone, &Ladder::default(), 720, SlackProfile::default()).unwrap();
    assert_eq!(r.class, Minimality::NotMinimal);
}

#[test]
fn parabola_line_epiderivative_is_unbounded_below() {
    // the constant map x ↦ S: DF↑((x,0,0);0) = T_{S+P}(0,0), whose minimal
    // elements run down the ray w₂ = −w₁ and never close off
    let sample = PointCloud::new(2, vec![vec![0.0, 0.0], vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let map = ConstantUpperMap {
        upper: ParabolaLineUpper,
        domain_dim: 1,
        sample,
    };
    let est = epiderivative_estimate(&map, &[0.3], &[0.0, 0.0], &[0.0], &OrderingCone::orthant(2), &Ladder::default(), w_line(1.0, 41), SlackProfile::default()).unwrap();
    assert!(est.truncated);
    assert!(!est.is_empty());
    for w in &est.points {
        assert!(w[0] > 0.0 && (w[0] + w[1]).abs() <= 1e-12, "{w:?}");
    }
}

#[test]
fn interval_maps_at_the_kink() {
    let cone = OrderingCone::orthant(1);
    let grid = w_line(3.0, 61);
    let ladder = Ladder::default();
    // F(x) = [0, |x|]: DF((0,0);1) = [0, 1], lower epiderivative 0
    let f = AbsInterval { lower_coef: 0.0 };
    let d = contingent_derivative_estimate(&f, &[0.0], &[0.0], &[1.0], &ladder, grid, SlackProfile::default()).unwrap();
    let ws: Vec<f64> = d.inside.iter().map(|w| w[0]).collect();
    assert!(ws.iter().all(|&w| (-1e-9..=1.0 + 1e-9).contains(&w)) && ws.len() == 11, "{ws:?}");
    let e = epiderivative_estimate(&f, &[0.0], &[0.0], &[1.0], &cone, &ladder, grid, SlackProfile::default()).unwrap();
    assert!(e.points[0][0].abs() <= 2e-3, "{:?}", e.points);

    // F(x) = [−|x|, |x|]: the lower branch reaches −1
    let f = AbsInterval { lower_coef: -1.0 };
    let e = epiderivative_estimate(&f, &[0.0], &[0.0], &[1.0], &cone, &ladder, grid, SlackProfile::default()).unwrap();
    assert!((e.points[0][0] + 1.0).abs() <= 2e-3, "{:?}", e.points);
    let e = epiderivative_estimate(&f, &[0.0], &[0.0], &[-2.0], &cone, &ladder, grid, SlackProfile::default()).unwrap();
    assert!((e.points[0][0] + 2.0).abs() <= 4e-3, "{:?}", e.points);
}

/// Finite-difference lower Dini derivative `liminf (φ(x + h v) − φ(x)) / h`.
fn dini(phi: &dyn Fn(f64) -> f64, x: f64, v: f64) -> f64 {
    [1e-5, 1e-6, 1e-7]
        .iter()
        .map(|&h| (phi(x + h * v) - phi(x)) / h)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn scalar_epiderivative_is_the_lower_dini_derivative() {
    let cone = OrderingCone::orthant(1);
    let grid = w_line(10.0, 21);
    let cases: Vec<(Box<dyn Fn(f64) -> f64 + Sync>, f64, f64)> = vec![
        (Box::new(|x: f64| x * x), 0.7, 1.0),
        (Box::new(|x: f64| x * x), 0.7, -2.0),
        (Box::new(|x: f64| x.sin()), 0.3, 1.5),
        (Box::new(|x: f64| x.abs()), 0.0, 1.0),
        (Box::new(|x: f64| x.abs()), 0.0, -1.0),
        (Box::new(|x: f64| -x.abs()), 0.0, 1.0),
        (Box::new(|x: f64| (-x).exp()), -0.5, 1.0),
    ];
    // every rung must admit w, so the coarsest rung biases curved maps by about
    // h₁·φ″v²/2; start the ladder at 1e-2 to keep that below the tolerance
    let ladder = Ladder(vec![1e-2, 3e-3, 1e-3, 3e-4]);
    for (phi, x, v) in &cases {
        let map = ScalarFn(|s: f64| phi(s));
        let y = phi(*x);
        let est = epiderivative_estimate(&map, &[*x], &[y], &[*v], &cone, &ladder, grid, SlackProfile::default()).unwrap();
        let oracle = dini(phi.as_ref(), *x, *v);
        let tol = 1e-2 * (1.0 + oracle.abs());
        assert_eq!(est.points.len(), 1);
        assert!((est.points[0][0] - oracle).abs() <= tol, "x={x} v={v}: {} vs {oracle}", est.points[0][0]);
    }
}

#[test]
fn scalar_value_function_satisfies_the_dini_inequalities() {
    // on a p = 1 problem the contingent conditions and the finite-difference
    // Dini inequalities of the scalar value table must agree
    let pf = ProblemFile::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("problems/scalar_decay.json")).unwrap();
    let prob = &pf.problem;
    let field = backward_solve(prob, &pf.cone, &pf.grid, &pf.config).unwrap();
    let table = scalar_dp(prob, &pf.grid, &pf.config).unwrap();
    let h = pf.step();
    let tol = tangent_tolerance(prob, &field, h);
    let w = |i: usize, x: &[f64]| pf.grid.nearest(x).and_then(|k| table.values[i][k]);
    let cfg = ResidualConfig::default();
    let mut checked = 0;
    for i in 1..pf.config.steps {
        for node in (0..pf.grid.len()).step_by(7) {
            let (Some(v), Some(_)) = (table.values[i][node], field.front(i, node)) else { continue };
            let x = pf.grid.node(node);
            let mut dini1 = f64::INFINITY;
            let mut dini2 = f64::NEG_INFINITY;
            let mut defined = true;
            for u in &prob.controls {
                let (f, l) = (prob.f(&x, u), prob.l(&x, u));
                let fwd: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a + h * b).collect();
                let back: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a - h * b).collect();
                match (w(i + 1, &fwd), w(i - 1, &back)) {
                    (Some(a), Some(b)) => {
                        dini1 = dini1.min(l[0] + (a - v) / h);
                        dini2 = dini2.max(-l[0] + (b - v) / h);
                    }
                    _ => defined = false,
                }
            }
            if !defined {
                continue;
            }
            let r = contingent_solution_residual(&field, prob, i, node, 0, &cfg).unwrap();
            assert!(dini1 <= tol && dini2 <= tol, "({i},{node}): {dini1} {dini2} vs {tol}");
            assert!(r.ok(), "({i},{node}) contingent conditions fail: {:?} {:?}", r.cond1.map(|c| c.ratio), r.cond2.map(|c| c.ratio));
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} interior nodes checked");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn affine_maps_differentiate_exactly(
        a in prop::collection::vec(prop::collection::vec(-2i32..=2, 2), 2),
        b in prop::collection::vec(-3.0f64..3.0, 2),
        x in prop::collection::vec(-1.0f64..1.0, 2),
        v in prop::collection::vec(-1i32..=1, 2),
    ) {
        // integer data keeps A v on the unit w lattice
        let a: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|&k| k as f64).collect()).collect();
        let v: Vec<f64> = v.iter().map(|&k| k as f64).collect();
        let map = AffineMap { a: a.clone(), b: b.clone() };
        let y: Vec<f64> = a.iter().zip(&b).map(|(r, c)| r[0] * x[0] + r[1] * x[1] + c).collect();
        let av: Vec<f64> = a.iter().map(|r| r[0] * v[0] + r[1] * v[1]).collect();
        let est = contingent_derivative_estimate(&map, &x, &y, &v, &Ladder::default(), w_line(5.0, 11), SlackProfile::default()).unwrap();
        prop_assert_eq!(est.inside, vec![av]);
    }

    #[test]
    fn refining_the_ladder_keeps_tangents(s in -1.5f64..1.5, n in 16usize..200) {
        // on the parabola boundary T = {d : ⟨d, n̂⟩ ≥ 0}, n̂ ∝ (−2s, 1). Extra small
        // rungs may only evict directions the coarse ladder admitted on slack,
        // i.e. analytically outside and within about c₁·h_min of the boundary
        let z = [s, s * s];
        let nrm = (4.0 * s * s + 1.0).sqrt();
        let n_hat = [-2.0 * s / nrm, 1.0 / nrm];
        let dirs = sample_directions(2, n, 3);
        let coarse = contingent_cone_estimate(&ParabolaEpigraph, &z, &Ladder::default(), dirs.clone(), SlackProfile::default()).unwrap();
        let mut rungs = Ladder::default().0;
        rungs.extend([3e-4, 1e-4]);
        let fine = contingent_cone_estimate(&ParabolaEpigraph, &z, &Ladder(rungs), dirs.clone(), SlackProfile::default()).unwrap();
        for ((d, &a), &b) in dirs.iter().zip(&coarse.inside).zip(&fine.inside) {
            if a != b {
                let c = d[0] * n_hat[0] + d[1] * n_hat[1];
                prop_assert!(a && (-2e-3..0.0).contains(&c), "{d:?}: coarse {a}, fine {b}, ⟨d,n⟩ = {c}");
            }
        }
    }

    #[test]
    fn half_plane_tangents_are_the_half_plane(theta in 0.0f64..std::f64::consts::TAU) {
        let normal = vec![theta.cos(), theta.sin()];
        let s = HalfSpace { normal: normal.clone(), offset: 0.0 };
        let dirs = sample_directions(2, 720, 0);
        let est = contingent_cone_estimate(&s, &[0.0, 0.0], &Ladder::default(), dirs, SlackProfile::default()).unwrap();
        let res = angular_resolution(2, 720);
        for (d, &inside) in est.directions.iter().zip(&est.inside) {
            let c = d[0] * normal[0] + d[1] * normal[1];
            if c.abs() > res {
                prop_assert_eq!(inside, c > 0.0);
            }
        }
    }
}
