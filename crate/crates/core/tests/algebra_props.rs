use proptest::prelude::*;

use rplab::path_signature::prefix_signatures;
use rplab::{path_signature, AlgebraShape, GroupElement, LieSeries, PiecewiseLinearPath, RoughPathGrid, TensorSeries};

fn shape_strategy() -> impl Strategy<Value = AlgebraShape> {
    (1usize..=3, 1usize..=4).prop_map(|(d, n)| AlgebraShape::new(d, n).unwrap())
}

fn lie_in(shape: AlgebraShape) -> impl Strategy<Value = LieSeries> {
    prop::collection::vec(-1.0f64..1.0, shape.len()).prop_map(move |mut c| {
        c[0] = 0.0;
        LieSeries::dynkin_projection(&TensorSeries::from_flat(shape, c).unwrap())
    })
}

fn element_in(shape: AlgebraShape) -> impl Strategy<Value = GroupElement> {
    lie_in(shape).prop_map(|l| l.exp())
}

fn path_in(d: usize) -> impl Strategy<Value = PiecewiseLinearPath> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 1..8)
        .prop_map(move |inc| PiecewiseLinearPath::from_increments(&vec![0.0; d], &inc).unwrap())
}

fn gap(a: &GroupElement, b: &GroupElement) -> f64 {
    let scale = a.series().coeffs().iter().chain(b.series().coeffs()).fold(1.0f64, |m, c| m.max(c.abs()));
    a.series().max_abs_diff(b.series()).unwrap() / scale
}

fn signature(x: &PiecewiseLinearPath, shape: AlgebraShape) -> GroupElement {
    path_signature(x, x.start_time(), x.end_time(), shape).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn multiplication_is_associative((a, b, c) in shape_strategy().prop_flat_map(|s| (element_in(s), element_in(s), element_in(s)))) {
        let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
        let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
        prop_assert!(gap(&left, &right) <= 1e-12);
    }

    #[test]
    fn inverse_is_two_sided(a in shape_strategy().prop_flat_map(element_in)) {
        let e = GroupElement::identity(a.shape());
        prop_assert!(gap(&a.multiply(&a.inverse()).unwrap(), &e) <= 1e-12);
        prop_assert!(gap(&a.inverse().multiply(&a).unwrap(), &e) <= 1e-12);
        prop_assert!(gap(&a.inverse().inverse(), &a) <= 1e-12);
    }

    #[test]
    fn exp_and_log_are_inverse(l in shape_strategy().prop_flat_map(lie_in)) {
        let g = l.exp();
        prop_assert!(gap(&g.log().exp(), &g) <= 1e-12);
        let back = g.log();
        prop_assert!(back.series().max_abs_diff(l.series()).unwrap() <= 1e-12 * (1.0 + l.series().graded_norm()));
    }

    #[test]
    fn dilation_is_a_homomorphism(
        (a, b) in shape_strategy().prop_flat_map(|s| (element_in(s), element_in(s))),
        lambda in 0.1f64..4.0,
    ) {
        let lhs = a.multiply(&b).unwrap().dilate(lambda);
        let rhs = a.dilate(lambda).multiply(&b.dilate(lambda)).unwrap();
        prop_assert!(gap(&lhs, &rhs) <= 1e-12);
        let scaled = a.dilate(lambda).homogeneous_norm();
        prop_assert!((scaled - lambda * a.homogeneous_norm()).abs() <= 1e-12 * (1.0 + scaled));
    }

    #[test]
    fn exponentials_are_group_like(a in shape_strategy().prop_flat_map(element_in)) {
        prop_assert!(a.is_group_like(1e-8));
    }

    #[test]
    fn symmetric_defect_is_not_group_like(l in (1usize..=3, 2usize..=4).prop_flat_map(|(d, n)| lie_in(AlgebraShape::new(d, n).unwrap()))) {
        let mut series = l.exp().into_series();
        series.level_mut(2)[0] += 0.25;
        let g = GroupElement::from_series(series).unwrap();
        prop_assert!(!g.is_group_like(1e-8));
    }

    #[test]
    fn chen_identity_on_splits(
        (x, shape) in shape_strategy().prop_flat_map(|s| (path_in(s.dim()), Just(s))),
        mut cuts in prop::array::uniform3(0.0f64..=1.0),
    ) {
        cuts.sort_by(f64::total_cmp);
        let [s, t, u] = cuts;
        let direct = path_signature(&x, s, u, shape).unwrap();
        let chained = path_signature(&x, s, t, shape).unwrap().multiply(&path_signature(&x, t, u, shape).unwrap()).unwrap();
        prop_assert!(gap(&direct, &chained) <= 1e-12);
    }

    #[test]
    fn reversal_inverts((x, shape) in shape_strategy().prop_flat_map(|s| (path_in(s.dim()), Just(s)))) {
        let forward = signature(&x, shape);
        let backward = signature(&x.reversed(), shape);
        prop_assert!(gap(&backward, &forward.inverse()) <= 1e-12);
    }

    #[test]
    fn scaling_the_path_dilates((x, shape) in shape_strategy().prop_flat_map(|s| (path_in(s.dim()), Just(s))), lambda in 0.1f64..3.0) {
        let g = signature(&x, shape);
        prop_assert!(gap(&signature(&x.scaled(lambda), shape), &g.dilate(lambda)) <= 1e-12);
    }

    #[test]
    fn parametrisation_and_breakpoints_do_not_matter(
        (x, shape) in shape_strategy().prop_flat_map(|s| (path_in(s.dim()), Just(s))),
        extra in prop::collection::vec(0.0f64..1.0, 0..4),
    ) {
        let g = signature(&x, shape);
        prop_assert!(gap(&signature(&x.retimed(0.2, 0.7).unwrap(), shape), &g) <= 1e-12);
        prop_assert!(gap(&signature(&x.with_breakpoints(&extra).unwrap(), shape), &g) <= 1e-12);
    }

    #[test]
    fn level_two_shuffle((x, d) in (1usize..=3).prop_flat_map(|d| (path_in(d), Just(d)))) {
        let g = signature(&x, AlgebraShape::new(d, 2).unwrap());
        let (l1, l2) = (g.level(1), g.level(2));
        for i in 0..d {
            for j in 0..d {
                let sym = l2[i * d + j] + l2[j * d + i];
                prop_assert!((sym - l1[i] * l1[j]).abs() <= 1e-12 * (1.0 + sym.abs()));
            }
        }
    }

    #[test]
    fn prefix_signatures_chain((x, shape) in shape_strategy().prop_flat_map(|s| (path_in(s.dim()), Just(s)))) {
        let prefixes = prefix_signatures(&x, shape).unwrap();
        prop_assert_eq!(prefixes.len(), x.breakpoint_count());
        prop_assert!(gap(prefixes.last().unwrap(), &signature(&x, shape)) <= 1e-12);
    }

    #[test]
    fn grid_increments_compose((x, shape) in shape_strategy().prop_flat_map(|s| (path_in(s.dim()), Just(s))), cells in 1usize..6) {
        let grid = RoughPathGrid::from_skeleton(x.clone().into(), RoughPathGrid::uniform_times(cells), shape, 2.5).unwrap();
        prop_assert!(grid.chen_defect().unwrap().unwrap() <= 1e-12);
        let whole = grid.increment_between(0, cells).unwrap();
        prop_assert!(gap(&whole, &signature(&x, shape)) <= 1e-12);
    }

    #[test]
    fn group_json_round_trips(a in shape_strategy().prop_flat_map(element_in)) {
        prop_assert_eq!(GroupElement::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn path_csv_round_trips(x in (1usize..=3).prop_flat_map(path_in)) {
        let back = PiecewiseLinearPath::from_csv(&x.to_csv()).unwrap();
        prop_assert_eq!(back.to_csv(), x.to_csv());
    }
}
