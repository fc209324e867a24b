//! Python bindings. Matrices cross the boundary as nested lists (or anything
//! that converts to them, such as numpy arrays); a series is a list of
//! `p x q` matrices.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use tvmfm::experiment::{run_experiment as run_cell, EstimationSettings};
use tvmfm::simulate::{gen_coalescing, generate, Dgp, ExperimentConfig, Scenario};
use tvmfm::smoothing::{detect_switches_with, repair_and_smooth_with, CoalescingRegion, DetectOptions, RepairOptions};
use tvmfm::{KernelFamily, KernelSpec, LoadingSide, MatrixSeries};

type Mat = Vec<Vec<f64>>;

fn to_py_err(e: tvmfm::Error) -> PyErr {
    match e {
        tvmfm::Error::InvalidInput(_) | tvmfm::Error::DimensionMismatch { .. } | tvmfm::Error::TimeOutOfRange { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

pub fn to_matrix(rows: &Mat) -> Result<DMatrix<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err("matrix must be non-empty".into());
    }
    if rows.iter().any(|r| r.len() != m) {
        return Err("ragged matrix rows".into());
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn from_matrix(m: &DMatrix<f64>) -> Mat {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &Mat) -> PyResult<DMatrix<f64>> {
    to_matrix(rows).map_err(PyValueError::new_err)
}

fn series(data: &[Mat]) -> PyResult<MatrixSeries> {
    let mats = data.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
    MatrixSeries::new(mats).map_err(to_py_err)
}

fn parse_side(side: &str) -> PyResult<LoadingSide> {
    match side {
        "row" | "R" => Ok(LoadingSide::Row),
        "column" | "col" | "C" => Ok(LoadingSide::Column),
        _ => Err(PyValueError::new_err(format!("side must be 'row' or 'column', got {side:?}"))),
    }
}

fn side_str(side: LoadingSide) -> &'static str {
    match side {
        LoadingSide::Row => "row",
        LoadingSide::Column => "column",
    }
}

fn settings(h: Option<f64>, h_star: Option<f64>) -> EstimationSettings {
    EstimationSettings { bandwidth: h, onesided_bandwidth: h_star, ..Default::default() }
}

/// Loading matrices over time with the eigenvalues of each local PCA.
#[pyclass(module = "tvmfm", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct LoadingPath {
    pub side: String,
    pub mats: Vec<Mat>,
    pub eigvals: Vec<Vec<f64>>,
    pub spectrum: Vec<Vec<f64>>,
    pub smoothed: bool,
}

#[pymethods]
impl LoadingPath {
    #[new]
    #[pyo3(signature = (mats, side = "row"))]
    fn py_new(mats: Vec<Mat>, side: &str) -> PyResult<Self> {
        let side = parse_side(side)?;
        Ok(Self {
            side: side_str(side).into(),
            mats,
            eigvals: Vec::new(),
            spectrum: Vec::new(),
            smoothed: false,
        })
    }

    fn __len__(&self) -> usize {
        self.mats.len()
    }

    fn __repr__(&self) -> String {
        let (n, d) = self.mats.first().map_or((0, 0), |m| (m.len(), m.first().map_or(0, Vec::len)));
        format!("LoadingPath(side={:?}, T={}, n={n}, d={d}, smoothed={})", self.side, self.mats.len(), self.smoothed)
    }
}

impl LoadingPath {
    fn from_core(p: &tvmfm::LoadingPath) -> Self {
        Self {
            side: side_str(p.side).into(),
            mats: p.mats.iter().map(from_matrix).collect(),
            eigvals: p.eigvals.clone(),
            spectrum: p.spectrum.clone(),
            smoothed: p.smoothed,
        }
    }

    fn to_core(&self) -> PyResult<tvmfm::LoadingPath> {
        let mats = self.mats.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let mut p = tvmfm::LoadingPath::from_mats(parse_side(&self.side)?, mats).map_err(to_py_err)?;
        p.eigvals = self.eigvals.clone();
        p.spectrum = self.spectrum.clone();
        p.smoothed = self.smoothed;
        Ok(p)
    }
}

/// Switch statistics, thresholds and detected regions `(a, b, kappa)`.
#[pyclass(module = "tvmfm", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct SwitchDiagnostics {
    pub stats: Vec<Vec<Option<f64>>>,
    pub thresholds: Vec<f64>,
    pub upper_q95: Vec<f64>,
    pub regions: Vec<(usize, usize, usize)>,
}

/// Simulated series and its truth.
#[pyclass(module = "tvmfm", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct Simulation {
    pub series: Vec<Mat>,
    pub rows: Vec<Mat>,
    pub cols: Vec<Mat>,
    pub factors: Vec<Mat>,
}

/// Monte Carlo cell summary.
#[pyclass(module = "tvmfm", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct CellSummary {
    pub n_reps: usize,
    pub mean_row: f64,
    pub sd_row: f64,
    pub mean_col: f64,
    pub sd_col: f64,
    pub rank_freq: Vec<((usize, usize), f64)>,
}

/// Rule-of-thumb bandwidth `c (n T)^(-1/5)`.
#[pyfunction]
#[pyo3(signature = (n_cross, length, c = tvmfm::ROT_SCALE))]
fn rot_bandwidth(n_cross: usize, length: usize, c: f64) -> f64 {
    tvmfm::rot_bandwidth(n_cross, length, c)
}

/// Row and column loading paths. Bandwidths default to the rule of thumb.
#[pyfunction]
#[pyo3(signature = (data, k, r, h_row = None, h_col = None))]
fn estimate_loadings(
    data: Vec<Mat>,
    k: usize,
    r: usize,
    h_row: Option<f64>,
    h_col: Option<f64>,
) -> PyResult<(LoadingPath, LoadingPath)> {
    let s = series(&data)?;
    let spec_r = settings(h_row, None).spec(&s, LoadingSide::Row).map_err(to_py_err)?;
    let spec_c = settings(h_col, None).spec(&s, LoadingSide::Column).map_err(to_py_err)?;
    let (rows, cols) = tvmfm::estimate_loadings(&s, &spec_r, &spec_c, k, r).map_err(to_py_err)?;
    Ok((LoadingPath::from_core(&rows), LoadingPath::from_core(&cols)))
}

/// Factor matrices `R_t^T Y_t C_t / (pq)`.
#[pyfunction]
fn estimate_factors(data: Vec<Mat>, rows: &LoadingPath, cols: &LoadingPath) -> PyResult<Vec<Mat>> {
    let s = series(&data)?;
    let f = tvmfm::estimate_factors(&s, &rows.to_core()?, &cols.to_core()?).map_err(to_py_err)?;
    Ok(f.mats.iter().map(from_matrix).collect())
}

/// Eigenvalue-ratio rank from per-time spectra.
#[pyfunction]
fn estimate_rank(spectra: Vec<Vec<f64>>, k_max: usize) -> PyResult<usize> {
    tvmfm::estimate_rank(&spectra, k_max).map_err(to_py_err)
}

/// Frobenius distance between the projectors onto the column spaces.
#[pyfunction]
fn space_distance(a: Mat, b: Mat) -> PyResult<f64> {
    tvmfm::space_distance(&matrix(&a)?, &matrix(&b)?).map_err(to_py_err)
}

/// Time average of `space_distance`.
#[pyfunction]
fn avg_space_distance(estimate: &LoadingPath, truth: &LoadingPath) -> PyResult<f64> {
    tvmfm::avg_space_distance(&estimate.to_core()?, &truth.to_core()?).map_err(to_py_err)
}

/// Left/right eigenvector switch detection on one side.
#[pyfunction]
#[pyo3(signature = (data, side, d, h_star = None))]
fn detect_switches(data: Vec<Mat>, side: &str, d: usize, h_star: Option<f64>) -> PyResult<SwitchDiagnostics> {
    let s = series(&data)?;
    let side = parse_side(side)?;
    let spec = settings(None, h_star).onesided_spec(&s, side).map_err(to_py_err)?;
    let diag = detect_switches_with(&s, &spec, side, d, &DetectOptions::default()).map_err(to_py_err)?;
    Ok(SwitchDiagnostics {
        stats: diag.stats,
        thresholds: diag.thresholds,
        upper_q95: diag.upper_q95,
        regions: diag.regions.iter().map(|r| (r.a, r.b, r.kappa)).collect(),
    })
}

/// Undo order switches and sign flips and smooth through the regions.
#[pyfunction]
fn repair_and_smooth(path: &LoadingPath, regions: Vec<(usize, usize, usize)>) -> PyResult<LoadingPath> {
    let regions: Vec<CoalescingRegion> = regions.into_iter().map(|(a, b, kappa)| CoalescingRegion { a, b, kappa }).collect();
    let fixed = repair_and_smooth_with(&path.to_core()?, &regions, &RepairOptions::default()).map_err(to_py_err)?;
    Ok(LoadingPath::from_core(&fixed))
}

/// Varimax over time points `start..=end` (1-based), applied to the whole path.
/// Returns the rotated path and the rotation matrix.
#[pyfunction]
#[pyo3(signature = (path, start = None, end = None))]
fn global_rotation(path: &LoadingPath, start: Option<usize>, end: Option<usize>) -> PyResult<(LoadingPath, Mat)> {
    let core = path.to_core()?;
    let window = start.unwrap_or(1)..=end.unwrap_or(core.len());
    let (rotated, res) = tvmfm::apply_global_rotation(&core, window).map_err(to_py_err)?;
    Ok((LoadingPath::from_core(&rotated), from_matrix(&res.rotation)))
}

/// Plain varimax of one matrix; returns `(rotated, rotation)`.
#[pyfunction]
fn varimax(m: Mat) -> PyResult<(Mat, Mat)> {
    let res = tvmfm::varimax(&matrix(&m)?, 1e-8, 200).map_err(to_py_err)?;
    Ok((from_matrix(&res.rotated), from_matrix(&res.rotation)))
}

/// Kernel weights `(s, w)` at time `t` (1-based).
#[pyfunction]
#[pyo3(signature = (length, t, bandwidth, side = "two_sided"))]
fn kernel_weights(length: usize, t: usize, bandwidth: f64, side: &str) -> PyResult<Vec<(usize, f64)>> {
    let side = match side {
        "two_sided" => tvmfm::KernelSide::TwoSided,
        "left" => tvmfm::KernelSide::Left,
        "right" => tvmfm::KernelSide::Right,
        _ => return Err(PyValueError::new_err("side must be 'two_sided', 'left' or 'right'")),
    };
    let spec = KernelSpec::new(KernelFamily::Epanechnikov, bandwidth, side).map_err(to_py_err)?;
    tvmfm::KernelWeights::new(spec, length).and_then(|w| w.weights_at(t)).map_err(to_py_err)
}

#[allow(clippy::too_many_arguments)]
fn config(
    dgp: &str,
    p: usize,
    q: usize,
    length: usize,
    psi: f64,
    seed: u64,
    scenario: u8,
    noise_share: f64,
) -> PyResult<ExperimentConfig> {
    let cfg = match dgp {
        "dgp1" => ExperimentConfig::standard(Dgp::Dgp1, p, q, length, psi),
        "dgp2" => ExperimentConfig::standard(Dgp::Dgp2, p, q, length, psi),
        "coalescing" => {
            let scenario = match scenario {
                0 => Scenario::S0,
                1 => Scenario::S1,
                2 => Scenario::S2,
                _ => return Err(PyValueError::new_err("scenario must be 0, 1 or 2")),
            };
            if !(noise_share > 0.0 && noise_share < 1.0) {
                return Err(PyValueError::new_err("noise_share must lie in (0, 1)"));
            }
            ExperimentConfig::coalescing(p, q, length, psi, noise_share, scenario)
        }
        _ => return Err(PyValueError::new_err("dgp must be 'dgp1', 'dgp2' or 'coalescing'")),
    };
    let cfg = cfg.with_seed(seed);
    cfg.validate().map_err(to_py_err)?;
    Ok(cfg)
}

/// One simulated series with its truth.
#[pyfunction]
#[pyo3(signature = (dgp, p, q, length, psi = 0.1, seed = 0, rep = 0, scenario = 0, noise_share = 0.05, side = "row"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    dgp: &str,
    p: usize,
    q: usize,
    length: usize,
    psi: f64,
    seed: u64,
    rep: u64,
    scenario: u8,
    noise_share: f64,
    side: &str,
) -> PyResult<Simulation> {
    let cfg = config(dgp, p, q, length, psi, seed, scenario, noise_share)?;
    let sim = match cfg.dgp {
        Dgp::Coalescing => gen_coalescing(&cfg, parse_side(side)?, rep),
        _ => generate(&cfg, rep),
    }
    .map_err(to_py_err)?;
    Ok(Simulation {
        series: sim.series.data().iter().map(from_matrix).collect(),
        rows: sim.truth.rows.iter().map(from_matrix).collect(),
        cols: sim.truth.cols.iter().map(from_matrix).collect(),
        factors: sim.truth.factors.iter().map(from_matrix).collect(),
    })
}

/// Monte Carlo cell for DGP1/DGP2: mean and sd of the loading-space
/// distances and the rank-pair frequencies.
#[pyfunction]
#[pyo3(signature = (dgp, p, q, length, psi = 0.1, n_reps = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    dgp: &str,
    p: usize,
    q: usize,
    length: usize,
    psi: f64,
    n_reps: usize,
    seed: u64,
) -> PyResult<CellSummary> {
    let cfg = config(dgp, p, q, length, psi, seed, 0, 0.05)?.with_reps(n_reps);
    let (_, s) = py
        .detach(|| run_cell(&cfg, &EstimationSettings::default()))
        .map_err(to_py_err)?;
    Ok(CellSummary {
        n_reps: s.n_reps,
        mean_row: s.mean_row,
        sd_row: s.sd_row,
        mean_col: s.mean_col,
        sd_col: s.sd_col,
        rank_freq: s.rank_freq,
    })
}

#[pymodule(name = "tvmfm")]
fn tvmfm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ROT_SCALE", tvmfm::ROT_SCALE)?;
    m.add_class::<LoadingPath>()?;
    m.add_class::<SwitchDiagnostics>()?;
    m.add_class::<Simulation>()?;
    m.add_class::<CellSummary>()?;
    m.add_function(wrap_pyfunction!(rot_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_weights, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_loadings, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_factors, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rank, m)?)?;
    m.add_function(wrap_pyfunction!(space_distance, m)?)?;
    m.add_function(wrap_pyfunction!(avg_space_distance, m)?)?;
    m.add_function(wrap_pyfunction!(detect_switches, m)?)?;
    m.add_function(wrap_pyfunction!(repair_and_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(global_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(varimax, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
