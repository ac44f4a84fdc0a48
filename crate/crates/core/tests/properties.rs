use iap_core::classify::{evaluate, nn_classify};
use iap_core::cube_io::{load_features, save_features, FeatureMatrix, HyperCube, Stage};
use iap_core::fif::{extract_fif, FifLayout};
use iap_core::grouping::BandGrouping;
use iap_core::numerics::kernel::{make_angular_kernel, make_isotropic_kernel};
use iap_core::numerics::{convolve2d, rotate_plane, standardize, Boundary, RealPlane, RotationOp};
use iap_core::sif::{aggregate, SuperpixelMap};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = FeatureMatrix> {
    prop::collection::vec(-100.0f64..100.0, rows * cols)
        .prop_map(move |v| FeatureMatrix::new(rows, cols, v, Stage::Iap).unwrap())
}

fn plane(w: usize, h: usize) -> impl Strategy<Value = RealPlane> {
    prop::collection::vec(-1.0f64..1.0, w * h).prop_map(move |v| RealPlane::new(w, h, v).unwrap())
}

/// Segment ids drawn from a few labels; segments need not be connected.
fn segmentation(w: usize, h: usize) -> impl Strategy<Value = SuperpixelMap> {
    prop::collection::vec(0u32..6, w * h).prop_map(move |ids| SuperpixelMap::from_ids(w, h, &ids).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aggregation_is_idempotent(x in matrix(30, 3), seg in segmentation(6, 5)) {
        let once = aggregate(&x.clone().with_stage(Stage::SifRcf), &seg).unwrap();
        let twice = aggregate(&once, &seg).unwrap();
        prop_assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn aggregation_preserves_column_sums(x in matrix(30, 3), seg in segmentation(6, 5)) {
        let agg = aggregate(&x, &seg).unwrap();
        for j in 0..3 {
            let a: f64 = x.column(j).iter().sum();
            let b: f64 = agg.column(j).iter().sum();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn aggregation_is_constant_within_segments(x in matrix(30, 2), seg in segmentation(6, 5)) {
        let agg = aggregate(&x, &seg).unwrap();
        for i in 0..30 {
            for k in 0..30 {
                if seg.ids()[i] == seg.ids()[k] {
                    prop_assert_eq!(agg.row(i), agg.row(k));
                }
            }
        }
    }

    #[test]
    fn nn_ignores_signed_column_permutations(
        train in prop::collection::vec(-5i32..5, 12 * 4),
        query in prop::collection::vec(-5i32..5, 20 * 4),
        perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
        signs in prop::collection::vec(prop::bool::ANY, 4),
    ) {
        // Integer features keep every distance exact, so ties break the same way.
        let to = |v: &[i32], rows: usize| FeatureMatrix::new(rows, 4, v.iter().map(|&x| x as f64).collect(), Stage::Iap).unwrap();
        let moved = |v: &[i32], rows: usize| {
            let mut out = Vec::with_capacity(v.len());
            for r in v.chunks(4) {
                for (j, &p) in perm.iter().enumerate() {
                    out.push(if signs[j] { -r[p] } else { r[p] } as f64);
                }
            }
            FeatureMatrix::new(rows, 4, out, Stage::Iap).unwrap()
        };
        let labels: Vec<u32> = (0..12).map(|i| i % 3 + 1).collect();
        let a = nn_classify(&to(&train, 12), &labels, &to(&query, 20)).unwrap();
        let b = nn_classify(&moved(&train, 12), &labels, &moved(&query, 20)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metrics_stay_in_range(pairs in prop::collection::vec((1u32..5, 1u32..5), 1..80)) {
        let (pred, truth): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        let m = evaluate(&pred, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.oa));
        prop_assert!((0.0..=1.0).contains(&m.aa));
        prop_assert!(m.kappa <= 1.0 + 1e-12);
        prop_assert_eq!(m.samples(), truth.len() as u64);
        let perfect = evaluate(&truth, &truth).unwrap();
        prop_assert_eq!(perfect.oa, 1.0);
        prop_assert_eq!(perfect.aa, 1.0);
    }

    #[test]
    fn convolution_is_linear(p in plane(9, 7), q in plane(9, 7), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let k = make_angular_kernel(1, 2, 1.5).unwrap();
        let mix = RealPlane::from_fn(9, 7, |x, y| a * p.get(x, y) + b * q.get(x, y));
        let lhs = convolve2d(&mix, &k, Boundary::Reflect).unwrap();
        let cp = convolve2d(&p, &k, Boundary::Reflect).unwrap();
        let cq = convolve2d(&q, &k, Boundary::Reflect).unwrap();
        for i in 0..lhs.len() {
            let want = cp.data()[i] * a + cq.data()[i] * b;
            prop_assert!((lhs.data()[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn isotropic_filtering_commutes_with_quarter_turns(p in plane(8, 11), turns in 1usize..4) {
        let k = make_isotropic_kernel(2).unwrap();
        let op = RotationOp::exact(90.0 * turns as f64);
        let a = rotate_plane(&convolve2d(&p, &k, Boundary::Reflect).unwrap(), op).unwrap();
        let b = convolve2d(&rotate_plane(&p, op).unwrap(), &k, Boundary::Reflect).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fif_is_invariant_to_quarter_turns(values in prop::collection::vec(0.0f64..1.0, 12 * 12 * 2), turns in 1usize..4) {
        let cube = HyperCube::new(12, 12, 2, values).unwrap();
        let op = RotationOp::exact(90.0 * turns as f64);
        let planes: Vec<RealPlane> = cube.planes().iter().map(|p| rotate_plane(p, op).unwrap()).collect();
        let rotated = HyperCube::from_planes(&planes).unwrap();
        let grouping = BandGrouping::single(2);
        let layout = FifLayout::with_default_width(3, vec![1, 3]).unwrap();
        let a = extract_fif(&cube, &grouping, &layout).unwrap();
        let b = extract_fif(&rotated, &grouping, &layout).unwrap();
        for j in 0..a.cols() {
            let scale = a.column(j).iter().fold(1e-9f64, |m, v| m.max(v.abs()));
            for y in 0..12 {
                for x in 0..12 {
                    let (rx, ry) = op.map_exact(x, y, 12, 12).unwrap();
                    let d = (a.get(y * 12 + x, j) - b.get(ry * 12 + rx, j)).abs();
                    prop_assert!(d <= 1e-9 * scale, "column {} pixel ({}, {}) differs by {}", j, x, y, d);
                }
            }
        }
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_spread(x in matrix(25, 3)) {
        let (z, _) = standardize(&x).unwrap();
        for j in 0..3 {
            let col = z.column(j);
            let mean = col.iter().sum::<f64>() / 25.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 25.0;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feature_files_round_trip_bit_for_bit(x in matrix(7, 5)) {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("m");
        save_features(&stem, &x, "abc").unwrap();
        let (back, hash) = load_features(&stem).unwrap();
        prop_assert_eq!(hash, "abc");
        prop_assert_eq!(back.stage(), x.stage());
        let same = back.values().iter().zip(x.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }
}
