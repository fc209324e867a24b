//! Monte Carlo drivers: simulate, estimate and score one replication, or a
//! whole cell of replications.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{estimate_loadings, estimate_rank, KmaxRule, LoadingPath, LoadingSide, MatrixSeries};
use crate::kernels::{rot_bandwidth, KernelFamily, KernelSpec, ROT_SCALE};
use crate::metrics::{avg_space_distance, classify_regions, RegionClassification};
use crate::simulate::{crossing_points, gen_coalescing, generate, lambda_col, lambda_row, Dgp, ExperimentConfig};
use crate::smoothing::{detect_switches_with, mvp_bootstrap_regions, BootstrapOptions, DetectOptions};
use crate::stats::{mean, std_dev};

/// Bandwidth and rank-search settings shared by the drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationSettings {
    pub family: KernelFamily,
    /// Constant `c` of the rule-of-thumb bandwidth.
    pub scale: f64,
    /// One-sided bandwidth as a multiple of the two-sided one.
    pub onesided_multiple: f64,
    pub kmax: KmaxRule,
    /// Fixed two-sided bandwidth replacing the rule of thumb.
    pub bandwidth: Option<f64>,
    /// Fixed one-sided bandwidth replacing `onesided_multiple`.
    pub onesided_bandwidth: Option<f64>,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            family: KernelFamily::Epanechnikov,
            scale: ROT_SCALE,
            onesided_multiple: 1.5,
            kmax: KmaxRule::default(),
            bandwidth: None,
            onesided_bandwidth: None,
        }
    }
}

impl EstimationSettings {
    /// Rule-of-thumb two-sided spec for one side of `series`.
    pub fn spec(&self, series: &MatrixSeries, side: LoadingSide) -> Result<KernelSpec> {
        let cross = match side {
            LoadingSide::Row => series.q(),
            LoadingSide::Column => series.p(),
        };
        let h = match self.bandwidth {
            Some(h) => h,
            None => rot_bandwidth(cross, series.len(), self.scale).min(1.0),
        };
        KernelSpec::two_sided(self.family, h)
    }

    /// Spec whose bandwidth is `onesided_multiple` times the two-sided one.
    pub fn onesided_spec(&self, series: &MatrixSeries, side: LoadingSide) -> Result<KernelSpec> {
        if let Some(h) = self.onesided_bandwidth {
            return KernelSpec::two_sided(self.family, h);
        }
        let base = self.spec(series, side)?;
        KernelSpec::two_sided(self.family, (base.bandwidth * self.onesided_multiple).min(1.0))
    }
}

/// Scores of one DGP1/DGP2 replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepOutcome {
    pub rep: u64,
    pub dist_row: f64,
    pub dist_col: f64,
    pub k_hat: usize,
    pub r_hat: usize,
}

/// Simulate, estimate with the true ranks and score one replication.
pub fn run_replication(cfg: &ExperimentConfig, settings: &EstimationSettings, rep: u64) -> Result<RepOutcome> {
    if cfg.dgp == Dgp::Coalescing {
        return Err(Error::invalid("use run_coalescing_replication for the coalescing design"));
    }
    let sim = generate(cfg, rep)?;
    let series = &sim.series;
    let (rows, cols) = estimate_loadings(
        series,
        &settings.spec(series, LoadingSide::Row)?,
        &settings.spec(series, LoadingSide::Column)?,
        cfg.k,
        cfg.r,
    )?;
    let truth_rows = LoadingPath::from_mats(LoadingSide::Row, sim.truth.rows)?;
    let truth_cols = LoadingPath::from_mats(LoadingSide::Column, sim.truth.cols)?;
    Ok(RepOutcome {
        rep,
        dist_row: avg_space_distance(&rows, &truth_rows)?,
        dist_col: avg_space_distance(&cols, &truth_cols)?,
        k_hat: estimate_rank(&rows.spectrum, settings.kmax.resolve(cfg.p))?,
        r_hat: estimate_rank(&cols.spectrum, settings.kmax.resolve(cfg.q))?,
    })
}

/// Mean and standard deviation of the distances over a cell, plus the
/// frequency of each estimated rank pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n_reps: usize,
    pub mean_row: f64,
    pub sd_row: f64,
    pub mean_col: f64,
    pub sd_col: f64,
    /// `((k_hat, r_hat), relative frequency)`, sorted by rank pair.
    pub rank_freq: Vec<((usize, usize), f64)>,
}

impl CellSummary {
    pub fn from_outcomes(outcomes: &[RepOutcome]) -> Self {
        let rows: Vec<f64> = outcomes.iter().map(|o| o.dist_row).collect();
        let cols: Vec<f64> = outcomes.iter().map(|o| o.dist_col).collect();
        let mut pairs: Vec<(usize, usize)> = outcomes.iter().map(|o| (o.k_hat, o.r_hat)).collect();
        pairs.sort_unstable();
        let mut rank_freq: Vec<((usize, usize), f64)> = Vec::new();
        for pair in pairs {
            match rank_freq.last_mut() {
                Some((last, count)) if *last == pair => *count += 1.0,
                _ => rank_freq.push((pair, 1.0)),
            }
        }
        for (_, f) in rank_freq.iter_mut() {
            *f /= outcomes.len() as f64;
        }
        Self {
            n_reps: outcomes.len(),
            mean_row: mean(&rows),
            sd_row: std_dev(&rows),
            mean_col: mean(&cols),
            sd_col: std_dev(&cols),
            rank_freq,
        }
    }

    /// Relative frequency of the rank pair `(k, r)`.
    pub fn frequency(&self, k: usize, r: usize) -> f64 {
        self.rank_freq.iter().find(|(pair, _)| *pair == (k, r)).map_or(0.0, |(_, f)| *f)
    }
}

/// Run `cfg.n_reps` replications in parallel.
pub fn run_experiment(cfg: &ExperimentConfig, settings: &EstimationSettings) -> Result<(Vec<RepOutcome>, CellSummary)> {
    cfg.validate()?;
    if cfg.n_reps == 0 {
        return Err(Error::invalid("n_reps must be positive"));
    }
    let outcomes: Vec<RepOutcome> = (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(cfg, settings, rep))
        .collect::<Result<_>>()?;
    let summary = CellSummary::from_outcomes(&outcomes);
    Ok((outcomes, summary))
}

/// Coalescing-region detector used by [`run_coalescing_replication`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detector {
    LeftRight(DetectOptions),
    Bootstrap(BootstrapOptions),
}

/// Crossing points of the eigenvalue curves of one side of the coalescing design.
pub fn true_crossings(side: LoadingSide) -> Vec<f64> {
    let lambda = match side {
        LoadingSide::Row => lambda_row,
        LoadingSide::Column => lambda_col,
    };
    crossing_points(lambda).into_iter().map(|c| c.u).collect()
}

/// Simulate the coalescing design for `side`, detect regions and classify
/// them against the true crossing points.
pub fn run_coalescing_replication(
    cfg: &ExperimentConfig,
    settings: &EstimationSettings,
    side: LoadingSide,
    detector: &Detector,
    rep: u64,
) -> Result<RegionClassification> {
    let sim = gen_coalescing(cfg, side, rep)?;
    let series = &sim.series;
    let d = match side {
        LoadingSide::Row => cfg.k,
        LoadingSide::Column => cfg.r,
    };
    let regions = match detector {
        Detector::LeftRight(opts) => {
            detect_switches_with(series, &settings.onesided_spec(series, side)?, side, d, opts)?.regions
        }
        Detector::Bootstrap(opts) => {
            let mut opts = *opts;
            opts.seed ^= cfg.seed.rotate_left(17) ^ rep;
            mvp_bootstrap_regions(series, &settings.spec(series, side)?, side, d, &opts)?
        }
    };
    classify_regions(&regions, &true_crossings(side), cfg.len)
}

/// Per-replication classifications for `cfg.n_reps` replications.
pub fn run_coalescing_study(
    cfg: &ExperimentConfig,
    settings: &EstimationSettings,
    side: LoadingSide,
    detector: &Detector,
) -> Result<Vec<RegionClassification>> {
    cfg.validate()?;
    (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_coalescing_replication(cfg, settings, side, detector, rep))
        .collect()
}
