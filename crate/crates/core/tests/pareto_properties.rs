use conedp::cone::{ConePair, OrderingCone};
use conedp::pareto::{
    check_sandwich_lemma, hausdorff, is_externally_stable, lipschitz_certificate, minimal_elements, minimal_points,
    minimal_points_reference, perturb_in_class, random_class_cloud, PointCloud,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cloud_strategy(p: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    // a coarse lattice makes ties and duplicates common
    prop::collection::vec(prop::collection::vec((-6i32..6).prop_map(|k| k as f64 * 0.25), p), 1..max)
}

fn cone_strategy() -> impl Strategy<Value = OrderingCone> {
    prop_oneof![
        Just(OrderingCone::orthant(2)),
        Just(OrderingCone::new(2, vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()),
        Just(OrderingCone::new(2, vec![vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap()),
        Just(OrderingCone::new(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap()),
    ]
}

/// Componentwise Pareto minima, written from scratch.
fn orthant_minima(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dominates = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).all(|(x, y)| x <= y) && a != b;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if points.iter().any(|q| dominates(q, p)) || out.contains(p) {
            continue;
        }
        out.push(p.clone());
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn pairs() -> Vec<ConePair> {
    vec![
        ConePair::new(OrderingCone::orthant(2), OrderingCone::new(2, vec![vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap()).unwrap(),
        ConePair::new(OrderingCone::new(2, vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(), OrderingCone::orthant(2)).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn archive_scan_matches_pairwise_scan(pts in cloud_strategy(2, 40), cone in cone_strategy()) {
        prop_assert_eq!(minimal_points(&pts, &cone), minimal_points_reference(&pts, &cone));
    }

    #[test]
    fn archive_scan_matches_pairwise_scan_3d(pts in cloud_strategy(3, 30)) {
        let cone = OrderingCone::orthant(3);
        prop_assert_eq!(minimal_points(&pts, &cone), minimal_points_reference(&pts, &cone));
    }

    #[test]
    fn orthant_front_matches_componentwise_oracle(pts in cloud_strategy(3, 30)) {
        let cone = OrderingCone::orthant(3);
        prop_assert_eq!(sorted(minimal_points(&pts, &cone)), orthant_minima(&pts));
    }

    #[test]
    fn finite_clouds_are_externally_stable(pts in cloud_strategy(2, 40), cone in cone_strategy()) {
        let cloud = PointCloud::from_points(pts).unwrap();
        let front = minimal_elements(&cloud, &cone).unwrap();
        prop_assert!(!front.is_empty());
        prop_assert!(is_externally_stable(&cloud, &front));
        prop_assert!(front.antichain_violation().is_none());
    }

    #[test]
    fn sandwich_keeps_the_front(
        pts in cloud_strategy(2, 25),
        cone in cone_strategy(),
        extra in prop::collection::vec((0usize..100, 0.0f64..2.0, 0.0f64..2.0), 0..15),
    ) {
        let k1 = PointCloud::from_points(pts.clone()).unwrap();
        let gens = cone.generators().to_vec();
        let mut more = pts.clone();
        for (i, a, b) in extra {
            let base = &pts[i % pts.len()];
            more.push(vec![base[0] + a * gens[0][0] + b * gens[1][0], base[1] + a * gens[0][1] + b * gens[1][1]]);
        }
        let k2 = PointCloud::from_points(more).unwrap();
        let r = check_sandwich_lemma(&k1, &k2, &cone).unwrap();
        prop_assert!(r.hypotheses_hold());
        prop_assert!(r.holds(), "front distance {}", r.front_distance);
    }

    #[test]
    fn fronts_are_lipschitz_in_the_comparison_class(seed in any::<u64>(), which in 0usize..2, sigma in 0.001f64..0.2) {
        let pair = &pairs()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k1 = random_class_cloud(pair, 12, &mut rng);
        let k2 = perturb_in_class(&k1, pair, sigma, &mut rng);
        let r = lipschitz_certificate(&k1, &k2, pair).unwrap();
        prop_assert!(r.satisfied, "ratio {} > {}", r.ratio(), r.constant);
    }
}

#[test]
fn hausdorff_is_symmetric_and_zero_on_equal_sets() {
    let a = PointCloud::from_points(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let b = PointCloud::from_points(vec![vec![0.0, 0.5]]).unwrap();
    assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    assert_eq!(hausdorff(&a, &b).unwrap(), hausdorff(&b, &a).unwrap());
    assert!((hausdorff(&a, &b).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
}
