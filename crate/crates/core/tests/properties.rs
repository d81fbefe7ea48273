use mssvdd::datamodel::{feature_csv_string, read_feature_csv, stratified_folds};
use mssvdd::eval::{compute_metrics, ConfusionMatrix};
use mssvdd::kernel::center_kernel;
use mssvdd::svdd::{svdd_solve, DEFAULT_KKT_TOL};
use mssvdd::{FeatureMatrix, Label};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn labels_strategy() -> impl Strategy<Value = (Vec<Label>, usize)> {
    (2usize..6).prop_flat_map(|k| {
        (
            proptest::collection::vec(any::<bool>(), 0..40).prop_map(move |mut extra| {
                // guarantee k samples of each class
                extra.extend(std::iter::repeat_n(true, k));
                extra.extend(std::iter::repeat_n(false, k));
                extra.into_iter().map(Label::from_bool).collect::<Vec<_>>()
            }),
            Just(k),
        )
    })
}

proptest! {
    #[test]
    fn folds_partition_and_balance((labels, k) in labels_strategy(), seed in any::<u64>()) {
        let plan = stratified_folds(&labels, k, seed).unwrap();
        let mut seen = vec![0usize; labels.len()];
        for f in 0..k {
            for i in plan.test_indices(f) {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for class in [true, false] {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| plan.test_indices(f).iter().filter(|&&i| labels[i].is_target() == class).count())
                .collect();
            let max = *per_fold.iter().max().unwrap();
            let min = *per_fold.iter().min().unwrap();
            prop_assert!(max - min <= 1);
        }
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn feature_csv_round_trips_bit_exactly(
        rows in 1usize..6,
        cols in 1usize..6,
        values in proptest::collection::vec(-1e12f64..1e12, 36),
    ) {
        let m = DMatrix::from_fn(rows, cols, |i, j| values[i * 6 + j] / 7.0);
        let fm = FeatureMatrix::new(m.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, feature_csv_string(&fm)).unwrap();
        let back = read_feature_csv(&path).unwrap().unwrap();
        prop_assert_eq!(back.values(), &m);
        // write -> read -> write is byte stable too
        prop_assert_eq!(feature_csv_string(&back), feature_csv_string(&fm));
    }

    #[test]
    fn centering_is_idempotent(n in 1usize..12, values in proptest::collection::vec(-5.0f64..5.0, 144)) {
        let a = DMatrix::from_fn(n, n, |i, j| values[i * 12 + j]);
        let k = &a * a.transpose();
        let once = center_kernel(&k).centered;
        let twice = center_kernel(&once).centered;
        prop_assert!((once - twice).abs().max() < 1e-9);
    }

    #[test]
    fn distance_expansion_identity(
        m in 2usize..8,
        values in proptest::collection::vec(-3.0f64..3.0, 24),
        probe in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let x = DMatrix::from_fn(3, m, |i, j| values[j * 3 + i]);
        let desc = svdd_solve(&x, 1.0, DEFAULT_KKT_TOL).unwrap();
        let y = nalgebra::DVector::from_column_slice(&probe);
        // |y|^2 - 2 sum a_i <x_i, y> + sum a_i a_j <x_i, x_j>
        let a = &desc.alphas;
        let g = x.transpose() * &x;
        let expanded = y.dot(&y) - 2.0 * (x.transpose() * &y).dot(a) + a.dot(&(g * a));
        let direct = desc.distance_sq(y.column(0)).unwrap();
        prop_assert!((expanded - direct).abs() <= 1e-9 * expanded.abs().max(1.0));
    }

    #[test]
    fn metrics_are_scale_free(tp in 0u64..50, fn_ in 0u64..50, fp in 0u64..50, tn in 0u64..50, s in 1u64..20) {
        prop_assume!(tp + fn_ + fp + tn > 0);
        let a = compute_metrics(&ConfusionMatrix::new(tp, fn_, fp, tn)).unwrap();
        let b = compute_metrics(&ConfusionMatrix::new(tp * s, fn_ * s, fp * s, tn * s)).unwrap();
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a.gm * a.gm - a.sen * a.spe).abs() < 1e-12);
        if a.pre + a.sen > 0.0 {
            prop_assert!((a.f1 - 2.0 * a.pre * a.sen / (a.pre + a.sen)).abs() < 1e-12);
        }
        prop_assert!(a.as_array().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
