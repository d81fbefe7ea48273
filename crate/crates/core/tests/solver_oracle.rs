use mssvdd::svdd::{gram, ocsvm_solve, svdd_solve, DEFAULT_KKT_TOL};
use mssvdd_oracles::{svdd_kkt_gap, svdd_objective, svdd_simplex_grid};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_points(rng: &mut ChaCha8Rng, d: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, m, |_, _| rng.sample(StandardNormal))
}

#[test]
fn five_planar_points_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_points(&mut rng, 2, 5);
    let desc = svdd_solve(&x, 0.6, DEFAULT_KKT_TOL).unwrap();
    let g = mssvdd_oracles::gram(&x);
    let (best, _) = svdd_simplex_grid(&g, 0.6, 0.01).unwrap();
    let ours = svdd_objective(&g, desc.alphas.as_slice());
    assert!(
        ours >= best - 1e-9,
        "solver {ours} below lattice optimum {best}"
    );
    assert!(ours - best <= 1e-3, "solver {ours} vs lattice {best}");
}

#[test]
fn random_instances_match_grid_search_and_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..30 {
        let c = [0.3, 0.6, 1.0][case % 3];
        let min_m = (1.0f64 / c).ceil() as usize;
        let m = rng.random_range(min_m.max(1)..=5);
        let d = rng.random_range(1..=3);
        let x = random_points(&mut rng, d, m);
        let desc = svdd_solve(&x, c, DEFAULT_KKT_TOL).unwrap();
        let a = desc.alphas.as_slice();

        assert!(
            (a.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "case {case}: sum"
        );
        assert!(
            a.iter().all(|&v| (0.0..=c).contains(&v)),
            "case {case}: box"
        );

        let g = mssvdd_oracles::gram(&x);
        assert!(svdd_kkt_gap(&g, a, c) <= 1e-6, "case {case}: kkt");
        let (best, _) = svdd_simplex_grid(&g, c, 0.01).unwrap();
        let ours = svdd_objective(&g, a);
        assert!((ours - best).abs() <= 1e-3, "case {case}: {ours} vs {best}");
    }
}

#[test]
fn library_gram_agrees_with_naive_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_points(&mut rng, 3, 7);
    let diff = (gram(&x) - mssvdd_oracles::gram(&x)).abs().max();
    assert!(diff < 1e-12);
}

#[test]
fn radius_is_attained_on_boundary_support_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_points(&mut rng, 2, 20);
    let desc = svdd_solve(&x, 0.2, DEFAULT_KKT_TOL).unwrap();
    for &i in &desc.boundary {
        let r = desc.distance_sq(x.column(i)).unwrap();
        assert!(
            (r - desc.radius_sq).abs() < 1e-5,
            "boundary point {i}: {r} vs {}",
            desc.radius_sq
        );
    }
    // points with zero multiplier are inside, capped ones outside
    for (i, &a) in desc.alphas.iter().enumerate() {
        let r = desc.distance_sq(x.column(i)).unwrap();
        if a == 0.0 {
            assert!(r <= desc.radius_sq + 1e-5);
        } else if a == 0.2 {
            assert!(r >= desc.radius_sq - 1e-5);
        }
    }
}

#[test]
fn one_class_svm_keeps_the_nu_fraction_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_points(&mut rng, 2, 40);
    let nu = 0.2;
    let model = ocsvm_solve(&x, nu, DEFAULT_KKT_TOL).unwrap();
    let outside = (0..40)
        .filter(|&i| model.decision(x.column(i)).unwrap() < -1e-6)
        .count() as f64
        / 40.0;
    let support = model.alphas.iter().filter(|&&a| a > 1e-8).count() as f64 / 40.0;
    // nu upper-bounds the outlier fraction and lower-bounds the SV fraction
    assert!(outside <= nu + 1e-9, "outside fraction {outside}");
    assert!(support >= nu - 1e-9, "support fraction {support}");
}
