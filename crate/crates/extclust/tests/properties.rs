//! Property tests for the geometric primitives.

use extclust::angle::{
    dissimilarity, extract_angles, face_angle, nearest_face_of_dim, normalize, Dissimilarity,
    FaceSet, RawSample,
};
use extclust::husler_reiss::{chi_from_gamma, t_inverse, t_transform};
use extclust::theory::check_triangle_inequality;
use proptest::prelude::*;

fn positive_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, d)
}

proptest! {
    #[test]
    fn dissimilarity_symmetric_and_in_range(
        a in positive_vec(4),
        b in positive_vec(4),
    ) {
        let x = normalize(&a).unwrap();
        let y = normalize(&b).unwrap();
        for kind in [
            Dissimilarity::SqrtEuclid,
            Dissimilarity::Angular,
            Dissimilarity::C1,
            Dissimilarity::C2,
        ] {
            let xy = dissimilarity(&x, &y, kind).unwrap();
            let yx = dissimilarity(&y, &x, kind).unwrap();
            prop_assert!((xy - yx).abs() <= 1e-15);
            prop_assert!((0.0..=1.0).contains(&xy));
            prop_assert!(dissimilarity(&x, &x, kind).unwrap() == 0.0);
        }
    }

    #[test]
    fn dissimilarities_order_consistently(
        a in positive_vec(3),
        b in positive_vec(3),
        c in positive_vec(3),
    ) {
        // all four kinds induce the same closeness order
        let x = normalize(&a).unwrap();
        let y1 = normalize(&b).unwrap();
        let y2 = normalize(&c).unwrap();
        let kinds = [
            Dissimilarity::SqrtEuclid,
            Dissimilarity::Angular,
            Dissimilarity::C1,
            Dissimilarity::C2,
        ];
        let d1: Vec<f64> = kinds.iter().map(|&k| dissimilarity(&x, &y1, k).unwrap()).collect();
        let d2: Vec<f64> = kinds.iter().map(|&k| dissimilarity(&x, &y2, k).unwrap()).collect();
        if x.dot(&y1) > x.dot(&y2) + 1e-12 {
            for (u, v) in d1.iter().zip(&d2) {
                prop_assert!(u <= &(v + 1e-12));
            }
        }
    }

    #[test]
    fn transform_roundtrip(z in prop::collection::vec(-30.0f64..30.0, 1..6)) {
        let x = t_inverse(&z).unwrap();
        let back = t_transform(&x).unwrap();
        for (a, b) in z.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn transform_inverse_is_unit_norm_for_extreme_args(
        z in prop::collection::vec(-700.0f64..700.0, 1..6),
    ) {
        let x = t_inverse(&z).unwrap();
        let norm: f64 = x.entries().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
        prop_assert!(x.entries().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn chi_is_decreasing(a in 0.0f64..50.0, b in 1e-9f64..50.0) {
        let lo = chi_from_gamma(a + b).unwrap();
        let hi = chi_from_gamma(a).unwrap();
        prop_assert!(lo < hi);
        prop_assert!(lo > 0.0 && hi <= 1.0);
    }

    #[test]
    fn nearest_face_is_minimal(v in positive_vec(5), m in 1usize..=5) {
        let x = normalize(&v).unwrap();
        let best = nearest_face_of_dim(&x, m).unwrap();
        let best_angle = face_angle(&x, &best).unwrap();
        // compare with every contiguous window of size m, a cheap cover
        // of alternatives
        for lo in 1..=(5 - m + 1) {
            let other = FaceSet::contiguous(lo, lo + m - 1, 5).unwrap();
            prop_assert!(best_angle <= face_angle(&x, &other).unwrap() + 1e-12);
        }
    }

    #[test]
    fn extraction_commutes_with_permutation(
        rows in prop::collection::vec(prop::collection::vec(0.1f64..10.0, 3), 4..12),
        rot in 0usize..12,
    ) {
        let raw = RawSample::new(rows.clone()).unwrap();
        let direct = extract_angles(&raw, 0.5).unwrap();
        let mut rotated = rows;
        let r = rot % rotated.len();
        rotated.rotate_left(r);
        let raw2 = RawSample::new(rotated).unwrap();
        let via = extract_angles(&raw2, 0.5).unwrap();
        // norms are almost surely distinct: the same multiset of angles
        // comes back, up to the row reordering
        let mut a: Vec<Vec<u64>> = direct
            .angles()
            .iter()
            .map(|x| x.entries().iter().map(|v| v.to_bits()).collect())
            .collect();
        let mut b: Vec<Vec<u64>> = via
            .angles()
            .iter()
            .map(|x| x.entries().iter().map(|v| v.to_bits()).collect())
            .collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn triangle_inequality_holds(
        a in 1e-6f64..100.0,
        b in 1e-6f64..100.0,
        c in 0.0f64..100.0,
        e in 1e-9f64..100.0,
    ) {
        prop_assert!(check_triangle_inequality(a, b, c, e).unwrap());
    }
}
