//! Backward solver against exhaustive enumeration and the scalar value iteration.

use conedp::cone::OrderingCone;
use conedp::control::{Constants, ControlProblem, Term, VectorField};
use conedp::dp::{backward_solve, export_field, import_field, GridConfig, Interpolation, StateGrid};
use conedp::oracle::{enumerate_front, scalar_dp, OracleError};
use conedp::pareto::hausdorff_points;
use proptest::prelude::*;

fn term(coef: f64, x: u32, u: u32) -> Term {
    Term {
        coef,
        x_pow: vec![x],
        u_pow: vec![u],
        trig: None,
    }
}

/// `ẋ = a x + b u` with costs `(u², (x − c)²)`, or their weighted sum when `p = 1`.
fn problem(a: f64, b: f64, c: f64, controls: &[f64], p: usize) -> ControlProblem {
    let effort = vec![term(1.0, 0, 2)];
    let tracking = vec![term(1.0, 2, 0), term(-2.0 * c, 1, 0), term(c * c, 0, 0)];
    let components = if p == 1 {
        vec![effort.into_iter().chain(tracking).collect()]
    } else {
        vec![effort, tracking]
    };
    ControlProblem {
        state_dim: 1,
        cost_dim: p,
        control_dim: 1,
        horizon: 0.3,
        dynamics: VectorField::Linear {
            a: vec![vec![a]],
            b: vec![vec![b]],
            c: vec![],
        },
        running_cost: VectorField::Terms { components },
        controls: controls.iter().map(|&u| vec![u]).collect(),
        constants: Constants {
            k_f: a.abs().max(0.1),
            m_f: 10.0,
            k_l: 10.0,
            m_l: 20.0,
        },
    }
}

fn grid() -> StateGrid {
    StateGrid::new(vec![-2.0], vec![2.0], vec![33]).unwrap()
}

fn cones() -> Vec<OrderingCone> {
    vec![
        OrderingCone::orthant(2),
        OrderingCone::new(2, vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        OrderingCone::new(2, vec![vec![1.0, -0.3], vec![-0.3, 1.0]]).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nearest_mode_matches_enumeration(
        a in -1.0f64..1.0,
        b in 0.5f64..2.0,
        c in -1.0f64..1.0,
        nu in 2usize..4,
        which in 0usize..3,
        node in 0usize..33,
    ) {
        let controls: Vec<f64> = (0..nu).map(|k| -1.0 + 2.0 * k as f64 / (nu - 1) as f64).collect();
        let prob = problem(a, b, c, &controls, 2);
        let cone = &cones()[which];
        let g = grid();
        let cfg = GridConfig::new(3);
        let field = backward_solve(&prob, cone, &g, &cfg).unwrap();
        let x = g.node(node);
        match (enumerate_front(&prob, cone, 0.0, &x, &cfg, Some(&g), 1_000_000), field.front(0, node)) {
            (Ok(oracle), Some(front)) => {
                let h = hausdorff_points(front.points(), oracle.front.points()).unwrap();
                prop_assert!(h <= 1e-9, "hausdorff {h}");
            }
            (Err(OracleError::Escape { .. }), None) => {}
            (o, f) => prop_assert!(false, "oracle {:?} vs solver {:?}", o.map(|r| r.count), f.map(|f| f.len())),
        }
    }

    #[test]
    fn scalar_fronts_match_value_iteration(
        a in -1.0f64..1.0,
        b in 0.5f64..2.0,
        c in -1.0f64..1.0,
        corners in any::<bool>(),
    ) {
        let prob = problem(a, b, c, &[-1.0, -0.5, 0.0, 0.5, 1.0], 1);
        let g = grid();
        let mut cfg = GridConfig::new(4);
        if corners {
            cfg.interpolation = Interpolation::CornerUnion;
        }
        let field = backward_solve(&prob, &OrderingCone::orthant(1), &g, &cfg).unwrap();
        let table = scalar_dp(&prob, &g, &cfg).unwrap();
        for i in 0..=cfg.steps {
            for node in 0..g.len() {
                match (field.front(i, node), table.values[i][node]) {
                    (Some(f), Some(v)) => {
                        prop_assert_eq!(f.len(), 1);
                        prop_assert!((f.points()[0][0] - v).abs() <= 1e-9);
                    }
                    (None, None) => {}
                    (f, v) => prop_assert!(false, "slice {i} node {node}: {:?} vs {v:?}", f.map(|f| f.points().to_vec())),
                }
            }
        }
    }
}

#[test]
fn exported_field_round_trips() {
    let prob = problem(0.3, 1.0, 0.2, &[-1.0, 0.0, 1.0], 2);
    let cone = OrderingCone::orthant(2);
    let field = backward_solve(&prob, &cone, &grid(), &GridConfig::new(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_field(&field, dir.path(), "abc").unwrap();
    let (back, m2) = import_field(dir.path()).unwrap();
    assert_eq!(manifest.problem_hash, m2.problem_hash);
    for i in 0..=field.steps() {
        for node in 0..field.grid().len() {
            assert_eq!(field.front(i, node).map(|f| f.points()), back.front(i, node).map(|f| f.points()));
        }
    }
}
