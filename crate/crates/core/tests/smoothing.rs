mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvmfm::experiment::EstimationSettings;
use tvmfm::smoothing::{
    apply_global_rotation, detect_switches, mvp_bootstrap_regions, repair_and_smooth, repair_and_smooth_with,
    BootstrapOptions, CoalescingRegion, RepairOptions, SwitchDiagnostics,
};
use tvmfm::simulate::{gen_coalescing, ExperimentConfig, Scenario};
use tvmfm::{classify_regions, space_distance, LoadingPath, LoadingSide};

const N: usize = 6;
const T: usize = 200;

/// Smoothly rotating orthonormal 6 x 2 frame scaled by sqrt(n).
fn truth(t: usize) -> DMatrix<f64> {
    let u = t as f64 / T as f64;
    let (a, b) = (1.2 * u, 0.7 * u);
    let col1 = [a.cos() * b.cos(), a.sin() * b.cos(), b.sin(), 0.0, 0.0, 0.0];
    let col2 = [-a.sin(), a.cos(), 0.0, 0.0, 0.0, 0.0];
    let mut m = DMatrix::from_fn(N, 2, |i, j| if j == 0 { col1[i] } else { col2[i] });
    let q = tvmfm::linalg::gram_schmidt(&m).unwrap();
    m.copy_from(&q);
    m * (N as f64).sqrt()
}

fn column(m: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    m.columns(j, 1).into_owned()
}

#[test]
fn repair_undoes_swap_and_sign_flips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mats: Vec<DMatrix<f64>> = (1..=T)
        .map(|t| {
            let mut m = truth(t);
            if t > T / 2 {
                m.swap_columns(0, 1);
            }
            for j in 0..2 {
                if rng.random_bool(0.5) {
                    m.column_mut(j).neg_mut();
                }
            }
            m
        })
        .collect();
    let raw = LoadingPath::from_mats(LoadingSide::Row, mats).unwrap();
    let region = CoalescingRegion { a: 90, b: 110, kappa: 1 };
    let fixed = repair_and_smooth_with(&raw, &[region], &RepairOptions::default()).unwrap();
    assert!(fixed.smoothed);
    for t in 1..=T {
        let (got, want) = (&fixed.mats[t - 1], truth(t));
        for j in 0..2 {
            let d = space_distance(&column(got, j), &column(&want, j)).unwrap();
            assert!(d <= 0.05, "t={t} column {j}: {d}");
        }
        let gram = got.transpose() * got / N as f64;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    }
}

#[test]
fn repair_without_regions_only_aligns_signs() {
    let mats: Vec<DMatrix<f64>> = (1..=T)
        .map(|t| {
            let mut m = truth(t);
            if t % 3 == 0 {
                m.column_mut(1).neg_mut();
            }
            m
        })
        .collect();
    let raw = LoadingPath::from_mats(LoadingSide::Row, mats).unwrap();
    let fixed = repair_and_smooth(&raw, &SwitchDiagnostics::empty(T)).unwrap();
    for t in 1..=T {
        assert!((&fixed.mats[t - 1] - truth(t)).amax() < 1e-10);
    }
}

#[test]
fn global_rotation_is_orthogonal_and_increases_criterion() {
    let mats: Vec<DMatrix<f64>> = (1..=T).map(truth).collect();
    let path = LoadingPath::from_mats(LoadingSide::Row, mats).unwrap();
    let (rotated, res) = apply_global_rotation(&path, 1..=T).unwrap();
    let g = &res.rotation;
    assert!((g.transpose() * g - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    for (a, b) in path.mats.iter().zip(&rotated.mats) {
        assert!((a * g - b).amax() < 1e-12);
    }
    let mut stacked = DMatrix::zeros(N * T, 2);
    for (k, m) in path.mats.iter().enumerate() {
        stacked.view_mut((k * N, 0), (N, 2)).copy_from(m);
    }
    assert!(res.criterion >= common::varimax_objective(&stacked) - 1e-12);
}

fn coalescing_row_series(scenario: Scenario) -> tvmfm::MatrixSeries {
    let cfg = ExperimentConfig::coalescing(12, 12, 600, 0.1, 0.05, scenario).with_seed(5);
    gen_coalescing(&cfg, LoadingSide::Row, 0).unwrap().series
}

#[test]
fn left_right_detector_finds_row_crossing() {
    let series = coalescing_row_series(Scenario::S0);
    let spec = EstimationSettings::default().onesided_spec(&series, LoadingSide::Row).unwrap();
    let diag = detect_switches(&series, &spec, LoadingSide::Row, 4).unwrap();
    assert_eq!(diag.stats.len(), 3);
    let w = spec.half_width(600);
    for row in &diag.stats {
        assert!(row[..w].iter().all(Option::is_none));
        assert!(row[w..600 - w].iter().all(Option::is_some));
        assert!(row.iter().flatten().all(|v| (0.0..=4.0).contains(v)));
    }
    let hits = classify_regions(&diag.regions, &[0.5], 600).unwrap();
    assert!(hits.detected(0), "{:?}", diag.regions);
    assert!(diag.regions.iter().any(|r| r.kappa == 3 && r.contains(300)));
}

#[test]
fn bootstrap_detector_is_deterministic() {
    let series = coalescing_row_series(Scenario::S0);
    let spec = EstimationSettings::default().spec(&series, LoadingSide::Row).unwrap();
    let opts = BootstrapOptions { n_boot: 50, percentile: 5.0, seed: 9 };
    let a = mvp_bootstrap_regions(&series, &spec, LoadingSide::Row, 4, &opts).unwrap();
    let b = mvp_bootstrap_regions(&series, &spec, LoadingSide::Row, 4, &opts).unwrap();
    assert_eq!(a, b);
    assert!(classify_regions(&a, &[0.5], 600).unwrap().detected(0));
    let bad = BootstrapOptions { percentile: 60.0, ..opts };
    assert!(mvp_bootstrap_regions(&series, &spec, LoadingSide::Row, 4, &bad).is_err());
}
