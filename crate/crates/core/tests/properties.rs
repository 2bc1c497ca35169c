use bregman_core::equilibrium::{resolve, Bifunction, Potential};
use bregman_core::geometry::{chain_gap, dual_average, three_point_gap};
use bregman_core::operators::{cyclic_select, QbneOperator};
use bregman_core::projection::bregman_project;
use bregman_core::solver::{AlphaSchedule, BetaSchedule};
use bregman_core::{ConvexSet, LegendreFunction, Point};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = LegendreFunction> {
    prop_oneof![
        Just(LegendreFunction::SquaredNorm),
        (1.2f64..6.0).prop_map(|p| LegendreFunction::p_norm(p).unwrap()),
        Just(LegendreFunction::NegativeEntropy),
    ]
}

fn point_for(f: &LegendreFunction, d: usize) -> BoxedStrategy<Point> {
    match f {
        LegendreFunction::NegativeEntropy => prop::collection::vec(0.05f64..4.0, d).prop_map(Point::new).boxed(),
        _ => prop::collection::vec(-3.0f64..3.0, d).prop_map(Point::new).boxed(),
    }
}

fn kind_and_points(n: usize) -> impl Strategy<Value = (LegendreFunction, Vec<Point>)> {
    (kind(), 1usize..6).prop_flat_map(move |(f, d)| {
        let pts = prop::collection::vec(point_for(&f, d), n);
        (Just(f), pts)
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distance_is_nonnegative_and_zero_on_diagonal((f, pts) in kind_and_points(2)) {
        let d = f.bregman_distance(&pts[0], &pts[1]).unwrap();
        prop_assert!(d >= -1e-12 * (1.0 + d.abs()));
        prop_assert!(f.bregman_distance(&pts[0], &pts[0]).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn three_point_and_chain((f, pts) in kind_and_points(4)) {
        let scale = 1.0 + f.bregman_distance(&pts[0], &pts[2]).unwrap().abs();
        prop_assert!(three_point_gap(&f, &pts[0], &pts[1], &pts[2]).unwrap().abs() <= 1e-9 * scale);
        let scale = 1.0 + f.bregman_distance(&pts[0], &pts[3]).unwrap().abs();
        prop_assert!(chain_gap(&f, &pts).unwrap().abs() <= 1e-9 * scale);
    }

    #[test]
    fn gradient_round_trip((f, pts) in kind_and_points(1)) {
        let back = f.conjugate_gradient(&f.gradient(&pts[0]).unwrap()).unwrap();
        prop_assert!(euclid(&back, &pts[0]) <= 1e-9 * (1.0 + euclid(&pts[0], &vec![0.0; pts[0].dim()])));
    }

    #[test]
    fn dual_average_of_one_point_is_that_point((f, pts) in kind_and_points(1)) {
        let avg = dual_average(&f, &[1.0], &pts).unwrap();
        prop_assert!(euclid(&avg, &pts[0]) <= 1e-9 * (1.0 + pts[0].iter().map(|v| v.abs()).sum::<f64>()));
    }

    #[test]
    fn projection_is_idempotent_and_feasible(
        (f, pts) in kind_and_points(1),
        radius in 0.2f64..1.0,
    ) {
        let d = pts[0].dim();
        let set = ConvexSet::ball(vec![1.0; d], radius).unwrap();
        let p = bregman_project(&f, &set, &pts[0]).unwrap();
        prop_assert!(set.contains(&p, 1e-8));
        let again = bregman_project(&f, &set, &p).unwrap();
        prop_assert!(euclid(&again, &p) <= 1e-7);
    }

    #[test]
    fn box_projection_clamps_for_separable_f(
        (f, pts) in kind_and_points(1),
    ) {
        let d = pts[0].dim();
        let set = ConvexSet::cube(d, 0.5, 1.5).unwrap();
        let p = bregman_project(&f, &set, &pts[0]).unwrap();
        let clamp: Vec<f64> = pts[0].iter().map(|v| v.clamp(0.5, 1.5)).collect();
        prop_assert!(euclid(&p, &clamp) <= 1e-15);
    }

    #[test]
    fn l1_resolvent_is_soft_threshold(
        x in prop::collection::vec(-2.5f64..2.5, 1..5),
        w in 0.0f64..1.5,
    ) {
        let d = x.len();
        let g = Bifunction::proximal(Potential::L1 { weight: w }, ConvexSet::cube(d, -3.0, 3.0).unwrap()).unwrap();
        let z = resolve(&LegendreFunction::SquaredNorm, &g, &Point::new(x.clone()), 1e-12).unwrap();
        let shrink: Vec<f64> = x.iter().map(|v| v.signum() * (v.abs() - w).max(0.0)).collect();
        prop_assert!(euclid(&z, &shrink) <= 1e-9);
    }

    #[test]
    fn cyclic_selection_wraps(len in 1usize..7, n in 1usize..1000) {
        let fam: Vec<QbneOperator> = (0..len)
            .map(|i| QbneOperator::identity().with_fixed_point(Point::new(vec![i as f64])).unwrap())
            .collect();
        let chosen = cyclic_select(&fam, n).unwrap();
        prop_assert_eq!(chosen.known_fixed_point.as_ref().unwrap()[0], ((n - 1) % len) as f64);
    }

    #[test]
    fn schedules_stay_in_range(a in 0.01f64..=1.0, b in 1.0f64..10.0, c in 0.01f64..0.5, n in 1usize..100_000) {
        let alpha = AlphaSchedule::Harmonic { a, b };
        prop_assert!(alpha.validate().is_ok());
        let v = alpha.at(n);
        prop_assert!(v > 0.0 && v < 1.0);
        prop_assert!(alpha.at(n + 1) <= v);
        let beta = BetaSchedule::Alternating { c, d: 1.0 - c };
        prop_assert!(beta.validate().is_ok());
        let bv = beta.at(n);
        prop_assert!(bv == c || bv == 1.0 - c);
    }
}
