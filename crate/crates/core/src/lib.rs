//! Time-varying matrix factor models.
//!
//! A matrix series `Y_t = R_t F_t C_t^T + E_t` with smoothly varying row and
//! column loadings is estimated by kernel-weighted local PCA of the scatter
//! matrices `sum_s K(t, s) Y_s Y_s^T` and `sum_s K(t, s) Y_s^T Y_s`.
//!
//! ```
//! use tvmfm::{estimate_loadings, simulate, KernelFamily, KernelSpec};
//!
//! let cfg = simulate::ExperimentConfig::standard(simulate::Dgp::Dgp1, 10, 10, 60, 0.1);
//! let sim = simulate::gen_dgp1(&cfg, 0).unwrap();
//! let spec = KernelSpec::two_sided(KernelFamily::Epanechnikov, 0.2).unwrap();
//! let (rows, cols) = estimate_loadings(&sim.series, &spec, &spec, 2, 2).unwrap();
//! assert_eq!(rows.mats[0].shape(), (10, 2));
//! assert_eq!(cols.len(), 60);
//! ```

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod simulate;
pub mod smoothing;
pub mod stats;

pub use error::{Error, Result};
pub use estimation::{
    estimate_factors, estimate_loadings, estimate_rank, estimate_signal, local_pca, scatter_matrix, FactorPath,
    GramSeries, KmaxRule, LoadingPath, LoadingSide, MatrixSeries,
};
pub use kernels::{rot_bandwidth, KernelFamily, KernelSide, KernelSpec, KernelWeights, ROT_SCALE};
pub use metrics::{avg_space_distance, classify_regions, space_distance};
pub use smoothing::{
    apply_global_rotation, detect_switches, mvp_bootstrap_regions, repair_and_smooth, varimax, CoalescingRegion,
    SwitchDiagnostics,
};
