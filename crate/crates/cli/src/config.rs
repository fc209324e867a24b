//! TOML configuration for `tvmfm simulate`.
//!
//! ```toml
//! seed = 1
//! n_reps = 50
//! output_dir = "results"
//! kmax = "third"          # "half", "third" or an integer
//!
//! [bandwidth]
//! c = 0.6769              # rule-of-thumb constant
//! h = 0.2                 # fixed two-sided bandwidth (overrides c)
//! h_star = 0.3            # fixed one-sided bandwidth
//! onesided_multiple = 1.5
//!
//! [[cell]]
//! dgp = "dgp1"            # "dgp1", "dgp2" or "coalescing"
//! p = 20
//! q = 20
//! T = 100
//! psi = 0.1
//! ```

use std::path::PathBuf;

use serde::Deserialize;
use tvmfm::experiment::{Detector, EstimationSettings};
use tvmfm::simulate::{Dgp, ExperimentConfig, Scenario};
use tvmfm::smoothing::{BootstrapOptions, DetectOptions, ThresholdRule};
use tvmfm::KmaxRule;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub n_reps: usize,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub kmax: KmaxSetting,
    #[serde(default)]
    pub bandwidth: BandwidthConfig,
    #[serde(rename = "cell")]
    pub cells: Vec<CellConfig>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(untagged)]
pub enum KmaxSetting {
    Named(KmaxName),
    Fixed(usize),
    #[default]
    #[serde(skip)]
    Default,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KmaxName {
    Half,
    Third,
}

impl KmaxSetting {
    pub fn rule(self) -> KmaxRule {
        match self {
            KmaxSetting::Named(KmaxName::Half) => KmaxRule::Half,
            KmaxSetting::Named(KmaxName::Third) | KmaxSetting::Default => KmaxRule::Third,
            KmaxSetting::Fixed(k) => KmaxRule::Fixed(k),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthConfig {
    pub c: Option<f64>,
    pub h: Option<f64>,
    pub h_star: Option<f64>,
    pub onesided_multiple: Option<f64>,
}

impl BandwidthConfig {
    pub fn settings(&self, kmax: KmaxRule) -> CliResult<EstimationSettings> {
        let mut s = EstimationSettings { kmax, ..Default::default() };
        if let Some(c) = self.c {
            check_positive("bandwidth.c", c)?;
            s.scale = c;
        }
        if let Some(m) = self.onesided_multiple {
            check_positive("bandwidth.onesided_multiple", m)?;
            s.onesided_multiple = m;
        }
        for (name, v) in [("bandwidth.h", self.h), ("bandwidth.h_star", self.h_star)] {
            if let Some(h) = v {
                if !(h > 0.0 && h <= 1.0) {
                    return Err(CliError::input(format!("{name} = {h} must lie in (0, 1]")));
                }
            }
        }
        s.bandwidth = self.h;
        s.onesided_bandwidth = self.h_star;
        Ok(s)
    }
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::input(format!("{name} = {v} must be positive")))
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DgpName {
    Dgp1,
    Dgp2,
    Coalescing,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectorName {
    #[default]
    LeftRight,
    Tukey,
    Bootstrap,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub dgp: DgpName,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "T")]
    pub len: usize,
    pub psi: f64,
    /// Coalescing design: 0, 1 or 2.
    #[serde(default)]
    pub scenario: u8,
    /// Coalescing design: share of noise variance.
    #[serde(default = "default_noise_share")]
    pub noise_share: f64,
    #[serde(default)]
    pub detector: DetectorName,
    pub n_boot: Option<usize>,
}

fn default_noise_share() -> f64 {
    0.05
}

impl CellConfig {
    pub fn experiment(&self, seed: u64, n_reps: usize) -> CliResult<ExperimentConfig> {
        let cfg = match self.dgp {
            DgpName::Dgp1 => ExperimentConfig::standard(Dgp::Dgp1, self.p, self.q, self.len, self.psi),
            DgpName::Dgp2 => ExperimentConfig::standard(Dgp::Dgp2, self.p, self.q, self.len, self.psi),
            DgpName::Coalescing => {
                if !(self.noise_share > 0.0 && self.noise_share < 1.0) {
                    return Err(CliError::input(format!("noise_share = {} must lie in (0, 1)", self.noise_share)));
                }
                let scenario = match self.scenario {
                    0 => Scenario::S0,
                    1 => Scenario::S1,
                    2 => Scenario::S2,
                    s => return Err(CliError::input(format!("scenario {s} must be 0, 1 or 2"))),
                };
                ExperimentConfig::coalescing(self.p, self.q, self.len, self.psi, self.noise_share, scenario)
            }
        };
        let cfg = cfg.with_seed(seed).with_reps(n_reps);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn detector(&self) -> Detector {
        match self.detector {
            DetectorName::LeftRight => Detector::LeftRight(DetectOptions::default()),
            DetectorName::Tukey => Detector::LeftRight(DetectOptions {
                rule: ThresholdRule::TukeyFence,
                ..Default::default()
            }),
            DetectorName::Bootstrap => Detector::Bootstrap(BootstrapOptions {
                n_boot: self.n_boot.unwrap_or(BootstrapOptions::default().n_boot),
                ..Default::default()
            }),
        }
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))?;
        if cfg.cells.is_empty() {
            return Err(CliError::input("config: at least one [[cell]] is required"));
        }
        if cfg.n_reps == 0 {
            return Err(CliError::input("config: n_reps must be positive"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = SimConfig::parse(
            r#"
            seed = 3
            n_reps = 5
            kmax = 4
            [bandwidth]
            h = 0.2
            [[cell]]
            dgp = "dgp1"
            p = 10
            q = 8
            T = 50
            psi = 0.1
            [[cell]]
            dgp = "coalescing"
            p = 12
            q = 12
            T = 300
            psi = 0.1
            scenario = 2
            detector = "bootstrap"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.cells.len(), 2);
        assert_eq!(cfg.kmax.rule(), KmaxRule::Fixed(4));
        let s = cfg.bandwidth.settings(cfg.kmax.rule()).unwrap();
        assert_eq!(s.bandwidth, Some(0.2));
        let exp = cfg.cells[1].experiment(cfg.seed, cfg.n_reps).unwrap();
        assert_eq!(exp.scenario, Scenario::S2);
        assert!((exp.snr_alpha2 - 19.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(SimConfig::parse("seed = 1").is_err());
        assert!(SimConfig::parse("bogus = 1\n[[cell]]\ndgp='dgp1'\np=5\nq=5\nT=20\npsi=0.1").is_err());
        let cfg = SimConfig::parse("[[cell]]\ndgp='dgp1'\np=5\nq=5\nT=20\npsi=1.5").unwrap();
        assert!(cfg.cells[0].experiment(0, 1).is_err());
        let bad_h = BandwidthConfig { h: Some(2.0), ..Default::default() };
        assert!(bad_h.settings(KmaxRule::Third).is_err());
    }
}
