mod common;

use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvmfm::estimation::{estimate_factors, local_pca, scatter_matrix, GramSeries};
use tvmfm::kernels::{adaptive_simpson, boundary_weight, KernelFamily, KernelSide, KernelSpec, KernelWeights};
use tvmfm::smoothing::varimax::{varimax, varimax_criterion};
use tvmfm::{space_distance, LoadingPath, LoadingSide, MatrixSeries};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_series(p: usize, q: usize, len: usize, seed: u64) -> MatrixSeries {
    let mut r = rng(seed);
    MatrixSeries::new((0..len).map(|_| gaussian(p, q, &mut r)).collect()).unwrap()
}

#[test]
fn boundary_weight_matches_closed_form_integral() {
    // T = 200, h = 0.1, t = 1: attainable range of u is [-1/20, 1]; for the
    // Epanechnikov kernel the mass there is 0.5 + 0.75 (0.05 - 0.05^3 / 3).
    let spec = KernelSpec::two_sided(KernelFamily::Epanechnikov, 0.1).unwrap();
    let mass = 0.5 + 0.75 * (0.05 - 0.05f64.powi(3) / 3.0);
    assert!((mass - 0.537_468_75).abs() < 1e-12);
    let w = boundary_weight(&spec, 1, 1, 200).unwrap();
    assert!((w - 7.5 / mass).abs() < 1e-9, "{w}");
}

#[test]
fn boundary_weights_sum_like_a_riemann_integral() {
    // sum_s K(s, t) / T approximates the integral of the normalised kernel, 1.
    for family in [KernelFamily::Epanechnikov, KernelFamily::Uniform, KernelFamily::Quartic] {
        let spec = KernelSpec::two_sided(family, 0.1).unwrap();
        let len = 4000;
        let table = KernelWeights::new(spec, len).unwrap();
        for t in [1, 37, 400, 2000, 3900, 4000] {
            let total: f64 = table.weights_at(t).unwrap().iter().map(|(_, w)| w).sum::<f64>() / len as f64;
            assert!((total - 1.0).abs() < 5e-3, "{family:?} t={t} {total}");
        }
    }
}

#[test]
fn simpson_matches_polynomial_integrals() {
    let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
    assert!((adaptive_simpson(&f, -1.0, 2.0, 1e-12) - 9.0).abs() < 1e-10);
    let g = |x: f64| x.sin();
    assert!((adaptive_simpson(&g, 0.0, std::f64::consts::PI, 1e-12) - 2.0).abs() < 1e-10);
}

#[test]
fn local_pca_matches_jacobi() {
    let mut r = rng(11);
    for _ in 0..50 {
        let m = random_symmetric(6, &mut r);
        let (vals, vecs) = jacobi_eigen(&m);
        let fit = local_pca(&m, 6).unwrap();
        for (a, b) in fit.spectrum.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-8);
        }
        let unit = &fit.loading / 6f64.sqrt();
        assert!(max_dev_up_to_sign(&vecs, &unit) < 1e-8);
    }
}

#[test]
fn scatter_matches_double_loop() {
    let series = random_series(5, 4, 30, 2);
    for side in [KernelSide::TwoSided, KernelSide::Left, KernelSide::Right] {
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 0.2, side).unwrap();
        let table = KernelWeights::new(spec, 30).unwrap();
        for t in [2, 15, 29] {
            let w = table.weights_at(t).unwrap();
            for (ls, row) in [(LoadingSide::Row, true), (LoadingSide::Column, false)] {
                let fast = scatter_matrix(&series, t, &spec, ls).unwrap();
                let slow = scatter_loop(series.data(), &w, row);
                assert!((fast - &slow).amax() < 1e-12);
                let grams = GramSeries::new(&series, ls);
                assert!((grams.scatter(&table, t).unwrap() - slow).amax() < 1e-12);
            }
        }
    }
}

#[test]
fn factors_match_triple_loop() {
    let series = random_series(6, 5, 8, 3);
    let mut r = rng(4);
    let rows = LoadingPath::from_mats(LoadingSide::Row, (0..8).map(|_| gaussian(6, 2, &mut r)).collect()).unwrap();
    let cols = LoadingPath::from_mats(LoadingSide::Column, (0..8).map(|_| gaussian(5, 3, &mut r)).collect()).unwrap();
    let f = estimate_factors(&series, &rows, &cols).unwrap();
    for t in 0..8 {
        let slow = factors_loop(&rows.mats[t], &series.data()[t], &cols.mats[t]);
        assert!((&f.mats[t] - slow).amax() < 1e-12);
    }
}

#[test]
fn space_distance_matches_literal_projectors() {
    let mut r = rng(5);
    for _ in 0..50 {
        let n = r.random_range(3..9);
        let d = r.random_range(1..n);
        let a = gaussian(n, d, &mut r);
        let b = gaussian(n, d, &mut r);
        let literal = (projector_literal(&a) - projector_literal(&b)).norm();
        assert!((space_distance(&a, &b).unwrap() - literal).abs() < 1e-10);
    }
}

#[test]
fn varimax_matches_grid_search_for_two_columns() {
    let mut r = rng(6);
    for _ in 0..5 {
        let m = gaussian(12, 2, &mut r);
        let res = varimax(&m, 1e-12, 500).unwrap();
        let mut best = f64::NEG_INFINITY;
        let steps = (std::f64::consts::FRAC_PI_2 / 1e-4) as usize;
        for k in 0..=steps {
            let (s, c) = (k as f64 * 1e-4).sin_cos();
            let g = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            best = best.max(varimax_objective(&(&m * g)));
        }
        assert!((res.criterion - best).abs() < 1e-3, "{} vs {best}", res.criterion);
        assert!(res.criterion >= best - 1e-9);
        assert!((varimax_criterion(&res.rotated) - varimax_objective(&res.rotated)).abs() < 1e-12);
    }
}
