//! Property tests for the geometry primitives and the attention combiner.

use geokge_core::combiner::{combine_euclidean, weights_from_scores, AttentionVariant};
use geokge_core::geometry::{
    ball_distance, complex_rotate, exp_map_zero, mobius_add, norm, project_to_ball, reflect2d,
    BallPoint, DistancePrefactor,
};
use geokge_core::query::QueryRepresentation;
use geokge_core::ModelKind;
use proptest::collection::vec;
use proptest::prelude::*;

fn pairs_vec(max_pairs: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_pairs).prop_flat_map(|n| vec(-5.0f64..5.0, 2 * n))
}

/// A point strictly inside the ball of curvature `c`.
fn ball_point(d: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (vec(-1.0f64..1.0, d), 0.1f64..2.0, 0.0f64..0.95).prop_map(|(v, c, rel)| {
        let n = norm(&v);
        let data = if n == 0.0 { v } else { v.iter().map(|x| x * rel / (n * c.sqrt())).collect() };
        (data, c)
    })
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

proptest! {
    #[test]
    fn rotation_preserves_norm(h in pairs_vec(16), seed in vec(-10.0f64..10.0, 16)) {
        let theta = &seed[..h.len() / 2];
        let out = complex_rotate(&h, theta).unwrap();
        prop_assert!((norm(&out) - norm(&h)).abs() <= 1e-12 * norm(&h).max(1.0));
    }

    #[test]
    fn reflection_is_an_involution(h in pairs_vec(16), seed in vec(-10.0f64..10.0, 16)) {
        let theta = &seed[..h.len() / 2];
        let twice = reflect2d(&reflect2d(&h, theta).unwrap(), theta).unwrap();
        for (a, b) in twice.iter().zip(&h) {
            prop_assert!((a - b).abs() <= 1e-12 * norm(&h).max(1.0));
        }
    }

    #[test]
    fn reflection_preserves_norm(h in pairs_vec(16), seed in vec(-10.0f64..10.0, 16)) {
        let theta = &seed[..h.len() / 2];
        let out = reflect2d(&h, theta).unwrap();
        prop_assert!((norm(&out) - norm(&h)).abs() <= 1e-12 * norm(&h).max(1.0));
    }

    #[test]
    fn mobius_identity_and_inverse((p, c) in ball_point(6)) {
        let p = BallPoint { data: p, c };
        let zero = BallPoint { data: vec![0.0; 6], c };
        let right = mobius_add(&p, &zero).unwrap();
        let left = mobius_add(&zero, &p).unwrap();
        let inverse = mobius_add(&p.neg(), &p).unwrap();
        prop_assert!(norm(&diff(&right.data, &p.data)) <= 1e-10);
        prop_assert!(norm(&diff(&left.data, &p.data)) <= 1e-10);
        prop_assert!(norm(&inverse.data) <= 1e-10);
    }

    #[test]
    fn mobius_sum_stays_in_ball((p, c) in ball_point(5), (q, c_q) in ball_point(5)) {
        let q: Vec<f64> = q.iter().map(|x| x * (c_q / c).sqrt()).collect();
        let sum = mobius_add(&BallPoint { data: p, c }, &BallPoint { data: q, c }).unwrap();
        prop_assert!(c.sqrt() * norm(&sum.data) < 1.0);
    }

    #[test]
    fn exp_map_stays_in_ball(v in vec(-20.0f64..20.0, 1..10), c in 0.1f64..2.0) {
        let p = project_to_ball(&exp_map_zero(&v, c).data, c);
        prop_assert!(c.sqrt() * norm(&p.data) < 1.0);
    }

    #[test]
    fn radial_distance_from_origin(v in vec(-1.0f64..1.0, 1..10), len in 1e-3f64..3.0) {
        let n = norm(&v);
        prop_assume!(n > 1e-6);
        let v: Vec<f64> = v.iter().map(|x| x * len / n).collect();
        let origin = BallPoint { data: vec![0.0; v.len()], c: 1.0 };
        let y = project_to_ball(&exp_map_zero(&v, 1.0).data, 1.0);
        let d = ball_distance(&origin, &y, DistancePrefactor::TwoOverC).unwrap().value;
        prop_assert!((d - 2.0 * len).abs() <= 1e-8 * 2.0 * len);
    }

    #[test]
    fn ball_distance_is_symmetric((p, c) in ball_point(4), (q, c_q) in ball_point(4)) {
        let q: Vec<f64> = q.iter().map(|x| x * (c_q / c).sqrt()).collect();
        let (p, q) = (BallPoint { data: p, c }, BallPoint { data: q, c });
        let a = ball_distance(&p, &q, DistancePrefactor::TwoOverSqrtC).unwrap().value;
        let b = ball_distance(&q, &p, DistancePrefactor::TwoOverSqrtC).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn prefactors_differ_by_sqrt_c((p, c) in ball_point(4), (q, c_q) in ball_point(4)) {
        let q: Vec<f64> = q.iter().map(|x| x * (c_q / c).sqrt()).collect();
        let (p, q) = (BallPoint { data: p, c }, BallPoint { data: q, c });
        let a = ball_distance(&p, &q, DistancePrefactor::TwoOverC).unwrap().value;
        let b = ball_distance(&p, &q, DistancePrefactor::TwoOverSqrtC).unwrap().value;
        prop_assert!((a * c.sqrt() - b).abs() <= 1e-9 * b.max(1.0));
    }

    #[test]
    fn flat_limit_matches_euclidean(x in vec(-0.5f64..0.5, 4), y in vec(-0.5f64..0.5, 4)) {
        let c = 1e-12;
        let (bx, by) = (BallPoint { data: x.clone(), c }, BallPoint { data: y.clone(), c });
        let e = norm(&diff(&x, &y));
        prop_assume!(e > 1e-3);
        let d = ball_distance(&bx, &by, DistancePrefactor::TwoOverSqrtC).unwrap().value;
        prop_assert!((d - 2.0 * e).abs() <= 1e-6 * e);
        let sum = mobius_add(&bx, &by).unwrap();
        let plain: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(norm(&diff(&sum.data, &plain)) <= 1e-6);
    }

    #[test]
    fn softmax_is_shift_invariant(s in vec(-20.0f64..20.0, 1..6), shift in -50.0f64..50.0) {
        for variant in [AttentionVariant::Alpha, AttentionVariant::AlphaSquared] {
            let a = weights_from_scores(&s, variant);
            let shifted: Vec<f64> = s.iter().map(|x| x + shift).collect();
            let b = weights_from_scores(&shifted, variant);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(a.iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn squared_weights_equal_doubled_scores(s in vec(-20.0f64..20.0, 1..6)) {
        let squared = weights_from_scores(&s, AttentionVariant::AlphaSquared);
        let doubled: Vec<f64> = s.iter().map(|x| 2.0 * x).collect();
        let plain = weights_from_scores(&doubled, AttentionVariant::Alpha);
        for (x, y) in squared.iter().zip(&plain) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn combined_query_lies_in_convex_hull(
        qs in (1usize..5, 1usize..6).prop_flat_map(|(n, d)| vec(vec(-3.0f64..3.0, d), n)),
        raw in vec(0.01f64..1.0, 5),
    ) {
        let n = qs.len();
        let total: f64 = raw[..n].iter().sum();
        let alphas: Vec<f64> = raw[..n].iter().map(|x| x / total).collect();
        let reps: Vec<QueryRepresentation> = qs
            .iter()
            .map(|v| QueryRepresentation { vector: v.clone(), source: ModelKind::TransE })
            .collect();
        let q = combine_euclidean(&reps, &alphas).unwrap().q_e;
        for k in 0..q.len() {
            let lo = qs.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
            let hi = qs.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(q[k] >= lo - 1e-12 && q[k] <= hi + 1e-12);
        }
        // Distance to any anchor is bounded by the weighted constituent distances.
        let anchor = vec![0.5; q.len()];
        let lhs = norm(&diff(&anchor, &q));
        let rhs: f64 = qs.iter().zip(&alphas).map(|(v, a)| a * norm(&diff(&anchor, v))).sum();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn midpoint_distance_is_bounded_above(
        q1 in vec(-3.0f64..3.0, 4),
        q2 in vec(-3.0f64..3.0, 4),
        a in vec(-3.0f64..3.0, 4),
    ) {
        let mid: Vec<f64> = q1.iter().zip(&q2).map(|(x, y)| 0.5 * (x + y)).collect();
        let (p1, p2, pm) = (norm(&diff(&q1, &a)), norm(&diff(&q2, &a)), norm(&diff(&mid, &a)));
        prop_assert!(pm <= p1.max(p2) + 1e-12);
        prop_assert!(pm <= 0.5 * (p1 + p2) + 1e-12);
    }
}
