mod common;

use common::gaussian;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvmfm::estimation::{eigen_ratio_profile, local_pca, scatter_matrix};
use tvmfm::kernels::{KernelFamily, KernelSide, KernelSpec, KernelWeights};
use tvmfm::linalg::{asymmetry, gram_schmidt};
use tvmfm::smoothing::varimax::{varimax, varimax_criterion};
use tvmfm::smoothing::{switch_statistic, switch_statistic_swapped};
use tvmfm::{space_distance, LoadingSide, MatrixSeries};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn family(i: u8) -> KernelFamily {
    [KernelFamily::Epanechnikov, KernelFamily::Uniform, KernelFamily::Quartic][i as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scatter_is_symmetric_psd_with_shared_trace(seed: u64, p in 2usize..7, q in 2usize..7, len in 5usize..30, h in 0.05f64..1.0, t_frac in 0.0f64..1.0, fam in 0u8..3) {
        let mut r = rng(seed);
        let series = MatrixSeries::new((0..len).map(|_| gaussian(p, q, &mut r)).collect()).unwrap();
        let spec = KernelSpec::two_sided(family(fam), h).unwrap();
        let t = 1 + ((len - 1) as f64 * t_frac) as usize;
        let mr = scatter_matrix(&series, t, &spec, LoadingSide::Row).unwrap();
        let mc = scatter_matrix(&series, t, &spec, LoadingSide::Column).unwrap();
        let scale = mr.amax().max(1.0);
        prop_assert!(asymmetry(&mr) <= 1e-10 * scale);
        prop_assert!((mr.trace() - mc.trace()).abs() <= 1e-10 * scale);
        let pca = local_pca(&mr, 1).unwrap();
        prop_assert!(pca.spectrum.iter().all(|v| *v >= -1e-10 * scale));
    }

    #[test]
    fn kernel_weights_nonnegative_and_local(len in 5usize..200, h in 0.02f64..1.0, t_frac in 0.0f64..1.0, fam in 0u8..3, side in 0u8..3) {
        let side = [KernelSide::TwoSided, KernelSide::Left, KernelSide::Right][side as usize];
        let spec = KernelSpec::new(family(fam), h, side).unwrap();
        let table = KernelWeights::new(spec, len).unwrap();
        let t = 1 + ((len - 1) as f64 * t_frac) as usize;
        let w = spec.half_width(len);
        if let Ok(weights) = table.weights_at(t) {
            for (s, wt) in weights {
                prop_assert!(wt >= 0.0);
                match side {
                    KernelSide::TwoSided => prop_assert!(s.abs_diff(t) <= w),
                    KernelSide::Left => prop_assert!(s < t && t - s <= w),
                    KernelSide::Right => prop_assert!(s >= t && s - t <= w),
                }
            }
        }
    }

    #[test]
    fn local_pca_residual_and_orthogonality(seed: u64, n in 2usize..9, d_frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let a = gaussian(n, n, &mut r);
        let m = &a * a.transpose();
        let d = 1 + ((n - 1) as f64 * d_frac) as usize;
        let fit = local_pca(&m, d).unwrap();
        let norm = m.norm();
        for j in 0..d {
            let v = fit.loading.column(j) / (n as f64).sqrt();
            prop_assert!((&m * &v - &v * fit.eigvals[j]).norm() <= 1e-8 * norm.max(1.0));
        }
        let gram = fit.loading.transpose() * &fit.loading;
        prop_assert!((gram - DMatrix::<f64>::identity(d, d) * n as f64).amax() <= 1e-8 * n as f64);
    }

    #[test]
    fn varimax_orthogonal_and_monotone(seed: u64, rows in 4usize..40, d in 2usize..5) {
        let mut r = rng(seed);
        let m = gaussian(rows, d, &mut r);
        let res = varimax(&m, 1e-10, 300).unwrap();
        let g = &res.rotation;
        prop_assert!((g.transpose() * g - DMatrix::<f64>::identity(d, d)).amax() <= 1e-10);
        prop_assert!((&m * g - &res.rotated).amax() <= 1e-10);
        prop_assert!(varimax_criterion(&res.rotated) >= varimax_criterion(&m) - 1e-12);
    }

    #[test]
    fn gram_schmidt_orthonormal(seed: u64, n in 2usize..10, d_frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let d = 1 + ((n - 1) as f64 * d_frac) as usize;
        let q = gram_schmidt(&gaussian(n, d, &mut r)).unwrap();
        prop_assert!((q.transpose() * &q - DMatrix::<f64>::identity(d, d)).amax() <= 1e-10);
    }

    #[test]
    fn space_distance_invariant_under_basis_change(seed: u64, n in 3usize..9, d_frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let d = 1 + ((n - 2) as f64 * d_frac) as usize;
        let a = gaussian(n, d, &mut r);
        let b = gaussian(n, d, &mut r);
        let g = gaussian(d, d, &mut r) + DMatrix::<f64>::identity(d, d) * 3.0;
        let base = space_distance(&a, &b).unwrap();
        prop_assert!((space_distance(&(&a * &g), &b).unwrap() - base).abs() <= 1e-8);
        prop_assert!((space_distance(&b, &a).unwrap() - base).abs() <= 1e-10);
        prop_assert!(space_distance(&(&a * &g), &a).unwrap() <= 1e-8);
        prop_assert!(base <= (2.0 * d as f64).sqrt() + 1e-10);
    }

    #[test]
    fn switch_statistic_forms_agree(seed: u64, n in 3usize..10) {
        let mut r = rng(seed);
        let l = gram_schmidt(&gaussian(n, 3, &mut r)).unwrap();
        let rr = gram_schmidt(&gaussian(n, 3, &mut r)).unwrap();
        for i in 1..3 {
            let a = switch_statistic(&l, &rr, i).unwrap();
            let b = switch_statistic_swapped(&l, &rr, i).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
            prop_assert!((0.0..=4.0).contains(&a));
        }
    }

    #[test]
    fn rank_invariant_to_rescaling(seed: u64, len in 1usize..20, scale in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let spectra: Vec<Vec<f64>> = (0..len)
            .map(|_| {
                let mut v: Vec<f64> = (0..8).map(|_| gaussian(1, 1, &mut r)[(0, 0)].abs() + 0.01).collect();
                v.sort_by(|a, b| b.total_cmp(a));
                v
            })
            .collect();
        let scaled: Vec<Vec<f64>> = spectra.iter().map(|s| s.iter().map(|v| v * scale).collect()).collect();
        prop_assert_eq!(eigen_ratio_profile(&spectra, 5).unwrap().0, eigen_ratio_profile(&scaled, 5).unwrap().0);
    }
}
