mod common;

use common::gaussian;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvmfm::linalg::gram_schmidt;
use tvmfm::metrics::{rotation_oracle, rotation_residuals, space_distances, RotationInputs};
use tvmfm::{estimate_factors, estimate_loadings, estimate_signal, KernelFamily, KernelSpec, KernelWeights, LoadingPath, LoadingSide, MatrixSeries};

struct Exact {
    series: MatrixSeries,
    rows: Vec<DMatrix<f64>>,
    cols: Vec<DMatrix<f64>>,
    factors: Vec<DMatrix<f64>>,
}

/// Noise-free model with constant loadings `R^T R = p I`, `C^T C = q I`.
fn exact_model(p: usize, q: usize, len: usize, seed: u64) -> Exact {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = gram_schmidt(&gaussian(p, 2, &mut rng)).unwrap() * (p as f64).sqrt();
    let c = gram_schmidt(&gaussian(q, 3, &mut rng)).unwrap() * (q as f64).sqrt();
    let factors: Vec<DMatrix<f64>> = (0..len).map(|_| gaussian(2, 3, &mut rng)).collect();
    let data = factors.iter().map(|f| &r * f * c.transpose()).collect();
    Exact {
        series: MatrixSeries::new(data).unwrap(),
        rows: vec![r; len],
        cols: vec![c; len],
        factors,
    }
}

#[test]
fn noise_free_constant_loadings_are_recovered() {
    let m = exact_model(9, 7, 60, 1);
    let spec = KernelSpec::two_sided(KernelFamily::Epanechnikov, 0.15).unwrap();
    let (rows, cols) = estimate_loadings(&m.series, &spec, &spec, 2, 3).unwrap();
    let truth_r = LoadingPath::from_mats(LoadingSide::Row, m.rows.clone()).unwrap();
    let truth_c = LoadingPath::from_mats(LoadingSide::Column, m.cols.clone()).unwrap();
    for d in space_distances(&rows, &truth_r).unwrap().into_iter().chain(space_distances(&cols, &truth_c).unwrap()) {
        assert!(d < 1e-6, "{d}");
    }

    let f_hat = estimate_factors(&m.series, &rows, &cols).unwrap();
    for t in 0..60 {
        let align_r = rows.mats[t].transpose() * &m.rows[t] / 9.0;
        let align_c = m.cols[t].transpose() * &cols.mats[t] / 7.0;
        let expect = align_r * &m.factors[t] * align_c;
        assert!((&f_hat.mats[t] - expect).amax() < 1e-8);
    }

    let signal = estimate_signal(&m.series, &rows, &cols).unwrap();
    for (s, y) in signal.data().iter().zip(m.series.data()) {
        assert!((s - y).amax() < 1e-8);
    }
}

#[test]
fn rotation_oracle_aligns_truth_with_estimate() {
    let m = exact_model(8, 6, 50, 2);
    let spec = KernelSpec::two_sided(KernelFamily::Epanechnikov, 0.2).unwrap();
    let table = KernelWeights::new(spec, 50).unwrap();
    let (rows, cols) = estimate_loadings(&m.series, &spec, &spec, 2, 3).unwrap();
    for (est, truth) in [(&rows, &m.rows), (&cols, &m.cols)] {
        let inputs = RotationInputs {
            rows_true: &m.rows,
            cols_true: &m.cols,
            factors_true: &m.factors,
            estimate: est,
        };
        let h = rotation_oracle(&inputs, &table).unwrap();
        for res in rotation_residuals(est, truth, &h) {
            assert!(res.sqrt() < 1e-8, "{res}");
        }
    }
}

#[test]
fn rotation_oracle_scalar_case_matches_loop() {
    // d = 1: H_t = sum_s w_s f_s^2 |c|^2 (r . r_hat) / (T p q lambda_t).
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (p, q, len) = (5, 4, 20);
    let r = gaussian(p, 1, &mut rng);
    let c = gaussian(q, 1, &mut rng);
    let f: Vec<DMatrix<f64>> = (0..len).map(|_| gaussian(1, 1, &mut rng)).collect();
    let data = f.iter().map(|fi| &r * fi * c.transpose()).collect();
    let series = MatrixSeries::new(data).unwrap();
    let spec = KernelSpec::two_sided(KernelFamily::Quartic, 0.3).unwrap();
    let table = KernelWeights::new(spec, len).unwrap();
    let (rows, _) = estimate_loadings(&series, &spec, &spec, 1, 1).unwrap();
    let inputs = RotationInputs {
        rows_true: &vec![r.clone(); len],
        cols_true: &vec![c.clone(); len],
        factors_true: &f,
        estimate: &rows,
    };
    let h = rotation_oracle(&inputs, &table).unwrap();
    for t in 1..=len {
        let mut acc = 0.0;
        for (s, w) in table.weights_at(t).unwrap() {
            acc += w * f[s - 1][(0, 0)].powi(2);
        }
        let expect = acc * c.norm_squared() * r.column(0).dot(&rows.mats[t - 1].column(0))
            / ((len * p * q) as f64 * rows.eigvals[t - 1][0]);
        assert!((h[t - 1][(0, 0)] - expect).abs() < 1e-10 * expect.abs().max(1.0));
    }
}
