use mssvdd::datamodel::{stratified_folds, synth_multimodal};
use mssvdd::eval::{
    grid_search, nested_cv, report_csv, run_cv, run_cv_with_plan, CvOptions, GridSpec,
    SelectionMode,
};
use mssvdd::{FoldPlan, KernelParams, Label, Method, TrainConfig};

fn linear_svdd() -> TrainConfig {
    TrainConfig {
        method: Method::Svdd,
        c_penalty: 0.3,
        ..Default::default()
    }
}

fn subspace(d: usize) -> TrainConfig {
    TrainConfig {
        d,
        c_penalty: 0.3,
        eta: 1e-3,
        max_iter: 5,
        ..Default::default()
    }
}

#[test]
fn pooled_confusion_covers_every_sample_once() {
    let data = synth_multimodal(30, 25, &[3, 2], 4.0, 1).unwrap();
    let report = run_cv(
        &data,
        &subspace(2),
        &CvOptions {
            k: 5,
            seed: 3,
            normalize: false,
        },
    )
    .unwrap();
    assert_eq!(report.pooled.total(), 55);
    assert_eq!(report.folds.len(), 5);
    let per_fold: u64 = report.folds.iter().map(|f| f.confusion.total()).sum();
    assert_eq!(per_fold, 55);
}

#[test]
fn far_outliers_are_perfectly_separated() {
    let data = synth_multimodal(40, 40, &[3, 3], 50.0, 2).unwrap();
    for config in [linear_svdd(), subspace(3)] {
        let report = run_cv(
            &data,
            &config,
            &CvOptions {
                k: 5,
                seed: 1,
                normalize: false,
            },
        )
        .unwrap();
        for f in &report.folds {
            assert_eq!(f.metrics.spe, 1.0, "{:?} fold {}", config.method, f.fold);
        }
        // targets may fall just outside a tight boundary, outliers never inside
        assert!(
            report.mean.gm > 0.85,
            "{:?}: {}",
            config.method,
            report.mean.gm
        );
    }
}

#[test]
fn far_outliers_with_hard_margin_give_unit_gm_in_every_fold() {
    // with C = 1 every training target is enclosed; outliers sit 50 units
    // away from a unit-variance cluster
    let data = synth_multimodal(60, 30, &[2], 50.0, 4).unwrap();
    let config = TrainConfig {
        method: Method::Svdd,
        c_penalty: 1.0,
        ..Default::default()
    };
    let report = run_cv(
        &data,
        &config,
        &CvOptions {
            k: 3,
            seed: 2,
            normalize: false,
        },
    )
    .unwrap();
    for f in &report.folds {
        assert!(f.metrics.spe == 1.0);
    }
}

#[test]
fn leave_one_out_mean_accuracy_equals_pooled_accuracy() {
    let data = synth_multimodal(8, 6, &[2, 2], 3.0, 5).unwrap();
    let plan = FoldPlan::leave_one_out(14).unwrap();
    let report = run_cv_with_plan(&data, &subspace(1), &plan, false).unwrap();
    assert_eq!(report.folds.len(), 14);
    assert!((report.mean.acc - report.pooled_metrics.acc).abs() < 1e-12);
}

#[test]
fn cross_validation_is_reproducible() {
    let data = synth_multimodal(20, 20, &[3, 3], 2.0, 6).unwrap();
    let config = TrainConfig {
        kernelized: true,
        ..subspace(2)
    };
    let opts = CvOptions {
        k: 4,
        seed: 9,
        normalize: true,
    };
    let a = run_cv(&data, &config, &opts).unwrap();
    let b = run_cv(&data, &config, &opts).unwrap();
    assert_eq!(report_csv(&a), report_csv(&b));
    assert_eq!(a, b);
}

#[test]
fn singleton_grid_returns_its_cell() {
    let data = synth_multimodal(20, 20, &[2, 2], 0.0, 7).unwrap();
    let base = subspace(2);
    let grid = GridSpec::single(&base);
    let result = grid_search(
        &data,
        &base,
        &grid,
        &CvOptions {
            k: 4,
            seed: 1,
            normalize: false,
        },
    )
    .unwrap();
    assert_eq!(result.table.len(), 1);
    assert_eq!(result.best, base);
}

#[test]
fn ties_prefer_the_smaller_subspace() {
    // identical data in both modalities and a zero learning rate: the score
    // of every d is whatever it is, but equal scores must resolve to small d
    let data = synth_multimodal(25, 25, &[3, 3], 6.0, 8).unwrap();
    let base = TrainConfig {
        eta: 0.0,
        ..subspace(1)
    };
    let grid = GridSpec {
        d: vec![3, 2, 1],
        ..GridSpec::single(&base)
    };
    let result = grid_search(
        &data,
        &base,
        &grid,
        &CvOptions {
            k: 5,
            seed: 2,
            normalize: false,
        },
    )
    .unwrap();
    let top = result
        .table
        .iter()
        .filter_map(|c| c.mean_gm)
        .fold(f64::NEG_INFINITY, f64::max);
    let smallest_tied = result
        .table
        .iter()
        .filter(|c| c.mean_gm == Some(top))
        .map(|c| c.config.d)
        .min()
        .unwrap();
    assert_eq!(result.best.d, smallest_tied);
    assert_eq!(result.best_score, top);
}

#[test]
fn extreme_gaussian_scales_are_distinguished() {
    let data = synth_multimodal(30, 30, &[3, 3], 6.0, 7).unwrap();
    let base = TrainConfig {
        kernelized: true,
        kernel: KernelParams::composite(0.5, 1.0, 0.5, 0.0),
        ..subspace(2)
    };
    let grid = GridSpec {
        sigma: vec![0.01, 1000.0],
        kappa_inverse_d: true,
        ..GridSpec::single(&base)
    };
    let result = grid_search(
        &data,
        &base,
        &grid,
        &CvOptions {
            k: 5,
            seed: 3,
            normalize: false,
        },
    )
    .unwrap();
    assert_eq!(result.table.len(), 2);
    let chosen = result
        .table
        .iter()
        .find(|c| c.config == result.best)
        .unwrap();
    let rejected = result
        .table
        .iter()
        .find(|c| c.config != result.best)
        .unwrap();
    assert!(chosen.mean_gm.unwrap() > rejected.mean_gm.unwrap());
    assert_eq!(result.best.kernel.kappa, 0.5);
}

#[test]
fn grid_search_never_sees_outer_test_labels() {
    let data = synth_multimodal(30, 30, &[2, 2], 3.0, 10).unwrap();
    let plan = stratified_folds(data.labels().unwrap(), 5, 4).unwrap();
    let test = plan.test_indices(0);
    let train = plan.train_indices(0);

    let mut labels = data.labels().unwrap().to_vec();
    // reverse the labels of the outer-test samples
    let flipped: Vec<Label> = test.iter().rev().map(|&i| labels[i]).collect();
    for (&i, l) in test.iter().zip(flipped) {
        labels[i] = l.flipped();
    }
    let permuted = data.with_labels(Some(labels)).unwrap();

    let base = subspace(1);
    let grid = GridSpec {
        d: vec![1, 2],
        c: vec![0.1, 0.3],
        ..GridSpec::single(&base)
    };
    let inner = CvOptions {
        k: 4,
        seed: 5,
        normalize: false,
    };
    let a = grid_search(&data.select(&train).unwrap(), &base, &grid, &inner).unwrap();
    let b = grid_search(&permuted.select(&train).unwrap(), &base, &grid, &inner).unwrap();
    assert_eq!(a, b);
}

#[test]
fn nested_and_global_selection_both_report_every_fold() {
    let data = synth_multimodal(25, 25, &[2, 2], 5.0, 11).unwrap();
    let base = subspace(1);
    let grid = GridSpec {
        d: vec![1, 2],
        ..GridSpec::single(&base)
    };
    let outer = CvOptions {
        k: 3,
        seed: 1,
        normalize: false,
    };
    for mode in [SelectionMode::Nested, SelectionMode::Global] {
        let report = nested_cv(&data, &base, &grid, &outer, 3, mode).unwrap();
        assert_eq!(report.folds.len(), 3);
        assert_eq!(report.pooled.total(), 50);
        for f in &report.folds {
            let s = f.selection.as_ref().unwrap();
            assert_eq!(s.cells_evaluated, 2);
        }
        if mode == SelectionMode::Global {
            assert!(report.folds.windows(2).all(|w| w[0].config == w[1].config));
        }
    }
}

#[test]
fn all_failing_cells_is_an_error() {
    let data = synth_multimodal(10, 10, &[2, 2], 1.0, 12).unwrap();
    // C * M < 1 for every training fold
    let base = TrainConfig {
        c_penalty: 0.001,
        ..subspace(1)
    };
    let grid = GridSpec::single(&base);
    let err = grid_search(
        &data,
        &base,
        &grid,
        &CvOptions {
            k: 2,
            seed: 0,
            normalize: false,
        },
    )
    .unwrap_err();
    assert!(matches!(err, mssvdd::Error::AllCellsFailed { .. }), "{err}");
}
