use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tvmfm::experiment::{run_coalescing_replication, run_replication, true_crossings, CellSummary, EstimationSettings};
use tvmfm::simulate::{gen_coalescing, generate, Dgp, ExperimentConfig, Scenario};
use tvmfm::stats::mean;
use tvmfm::{LoadingSide, MatrixSeries};

use crate::config::{CellConfig, DetectorName, SimConfig};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::pipeline::{normalize_columns, run_estimate, EstimateOptions, EstimateOutput};

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))
}

fn dgp_name(dgp: Dgp) -> &'static str {
    match dgp {
        Dgp::Dgp1 => "dgp1",
        Dgp::Dgp2 => "dgp2",
        Dgp::Coalescing => "coalescing",
    }
}

fn side_name(side: LoadingSide) -> &'static str {
    match side {
        LoadingSide::Row => "R",
        LoadingSide::Column => "C",
    }
}

fn detector_name(d: DetectorName) -> &'static str {
    match d {
        DetectorName::LeftRight => "left_right",
        DetectorName::Tukey => "tukey",
        DetectorName::Bootstrap => "bootstrap",
    }
}

#[derive(Default)]
struct SimTables {
    summary: Vec<String>,
    ranks: Vec<String>,
    reps: Vec<String>,
    detection: Vec<String>,
    detection_reps: Vec<String>,
    failures: usize,
}

fn simulate_standard(cell: usize, cfg: &ExperimentConfig, settings: &EstimationSettings, out: &mut SimTables) {
    let results: Vec<_> = (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(cfg, settings, rep))
        .collect();
    let mut ok = Vec::new();
    for (rep, res) in results.into_iter().enumerate() {
        match res {
            Ok(o) => {
                out.reps.push(format!("{cell},{rep},ok,{},{},{},{}", o.dist_row, o.dist_col, o.k_hat, o.r_hat));
                ok.push(o);
            }
            Err(e) => {
                eprintln!("warning: cell {cell} replication {rep} failed: {e}");
                out.reps.push(format!("{cell},{rep},failed,,,,"));
                out.failures += 1;
            }
        }
    }
    let failed = cfg.n_reps - ok.len();
    let head = format!("{cell},{},{},{},{},{},{},{failed}", dgp_name(cfg.dgp), cfg.p, cfg.q, cfg.len, cfg.psi, cfg.n_reps);
    if ok.is_empty() {
        out.summary.push(format!("{head},,,,"));
        return;
    }
    let s = CellSummary::from_outcomes(&ok);
    out.summary.push(format!("{head},{},{},{},{}", s.mean_row, s.sd_row, s.mean_col, s.sd_col));
    for ((k, r), f) in &s.rank_freq {
        out.ranks.push(format!("{cell},{k},{r},{f}"));
    }
}

fn simulate_coalescing(
    cell: usize,
    spec: &CellConfig,
    cfg: &ExperimentConfig,
    settings: &EstimationSettings,
    out: &mut SimTables,
) {
    let detector = spec.detector();
    for side in [LoadingSide::Row, LoadingSide::Column] {
        let points = true_crossings(side);
        let results: Vec<_> = (0..cfg.n_reps as u64)
            .into_par_iter()
            .map(|rep| run_coalescing_replication(cfg, settings, side, &detector, rep))
            .collect();
        let mut ok = Vec::new();
        for (rep, res) in results.into_iter().enumerate() {
            match res {
                Ok(c) => {
                    let hits: Vec<String> = c.true_positives.iter().map(usize::to_string).collect();
                    out.detection_reps
                        .push(format!("{cell},{},{rep},ok,{},{}", side_name(side), c.false_positives, hits.join(";")));
                    ok.push(c);
                }
                Err(e) => {
                    eprintln!("warning: cell {cell} side {} replication {rep} failed: {e}", side_name(side));
                    out.detection_reps.push(format!("{cell},{},{rep},failed,,", side_name(side)));
                    out.failures += 1;
                }
            }
        }
        let n = ok.len() as f64;
        let fp: Vec<f64> = ok.iter().map(|c| c.false_positives as f64).collect();
        let scenario = match cfg.scenario {
            Scenario::S0 => 0,
            Scenario::S1 => 1,
            Scenario::S2 => 2,
        };
        for (i, u) in points.iter().enumerate() {
            let tp = if ok.is_empty() { String::new() } else { (ok.iter().filter(|c| c.detected(i)).count() as f64 / n).to_string() };
            let fp_mean = if ok.is_empty() { String::new() } else { mean(&fp).to_string() };
            out.detection.push(format!(
                "{cell},{},{},{},{},{},{scenario},{},{u},{tp},{fp_mean},{},{}",
                side_name(side),
                cfg.p,
                cfg.q,
                cfg.len,
                cfg.psi,
                detector_name(spec.detector),
                cfg.n_reps,
                cfg.n_reps - ok.len()
            ));
        }
    }
}

/// Run every cell of a simulation config and write the result tables.
/// Returns the number of failed replications.
pub fn simulate(config_path: &Path, out_override: Option<&Path>) -> CliResult<usize> {
    let text = fs::read_to_string(config_path).map_err(|e| CliError::input(format!("{}: {e}", config_path.display())))?;
    let cfg = SimConfig::parse(&text)?;
    let settings = cfg.bandwidth.settings(cfg.kmax.rule())?;
    let experiments: Vec<ExperimentConfig> = cfg
        .cells
        .iter()
        .map(|c| c.experiment(cfg.seed, cfg.n_reps))
        .collect::<CliResult<_>>()?;
    let dir: PathBuf = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;

    let mut tables = SimTables::default();
    for (i, (spec, exp)) in cfg.cells.iter().zip(&experiments).enumerate() {
        let cell = i + 1;
        match exp.dgp {
            Dgp::Coalescing => simulate_coalescing(cell, spec, exp, &settings, &mut tables),
            _ => simulate_standard(cell, exp, &settings, &mut tables),
        }
    }

    if !tables.summary.is_empty() {
        io::write_table(
            &dir.join("summary.csv"),
            "cell,dgp,p,q,T,psi,n_reps,n_failed,mean_D_R,sd_D_R,mean_D_C,sd_D_C",
            &tables.summary,
        )?;
        io::write_table(&dir.join("ranks.csv"), "cell,k_hat,r_hat,frequency", &tables.ranks)?;
        io::write_table(&dir.join("reps.csv"), "cell,rep,status,D_R,D_C,k_hat,r_hat", &tables.reps)?;
    }
    if !tables.detection.is_empty() {
        io::write_table(
            &dir.join("detection.csv"),
            "cell,side,p,q,T,psi,scenario,detector,point,tp_rate,fp_per_rep,n_reps,n_failed",
            &tables.detection,
        )?;
        io::write_table(
            &dir.join("detection_reps.csv"),
            "cell,side,rep,status,false_positives,hits",
            &tables.detection_reps,
        )?;
    }
    Ok(tables.failures)
}

fn write_side(dir: &Path, side: LoadingSide, res: &crate::pipeline::SideResult, top: usize) -> CliResult<()> {
    let s = side_name(side);
    let normalized: Vec<_> = res.fitted.mats.iter().map(normalize_columns).collect();
    io::write_loadings(&dir.join(format!("loadings_{s}.csv")), &normalized)?;
    io::write_eigvals(&dir.join(format!("eigvals_{s}.csv")), &res.raw, top)?;
    io::write_switch_stats(&dir.join(format!("switch_stats_{s}.csv")), &res.diagnostics)?;
    io::write_regions(&dir.join(format!("regions_{s}.csv")), &res.diagnostics)?;
    Ok(())
}

/// Full estimation pipeline on a CSV series; writes loadings, eigenvalues,
/// switch statistics, regions and factors.
pub fn estimate(input: &Path, out: &Path, opts: &EstimateOptions, top: usize) -> CliResult<EstimateOutput> {
    let series = io::read_series_file(input)?;
    let res = run_estimate(&series, opts)?;
    export_estimate(out, &res, top)?;
    Ok(res)
}

pub fn export_estimate(out: &Path, res: &EstimateOutput, top: usize) -> CliResult<()> {
    ensure_dir(out)?;
    write_side(out, LoadingSide::Row, &res.rows, top)?;
    write_side(out, LoadingSide::Column, &res.cols, top)?;
    io::write_factors(&out.join("factors.csv"), &res.factors)?;
    io::write_table(&out.join("ranks.csv"), "k,r", &[format!("{},{}", res.k, res.r)])?;
    Ok(())
}

/// Eigenvalue paths and switch statistics only.
pub fn diagnose(input: &Path, out: &Path, opts: &EstimateOptions, top: usize) -> CliResult<EstimateOutput> {
    let series = io::read_series_file(input)?;
    let opts = EstimateOptions { no_rotation: true, ..opts.clone() };
    let res = run_estimate(&series, &opts)?;
    ensure_dir(out)?;
    for (side, r) in [(LoadingSide::Row, &res.rows), (LoadingSide::Column, &res.cols)] {
        let s = side_name(side);
        io::write_eigvals(&out.join(format!("eigvals_{s}.csv")), &r.raw, top)?;
        io::write_switch_stats(&out.join(format!("switch_stats_{s}.csv")), &r.diagnostics)?;
        io::write_regions(&out.join(format!("regions_{s}.csv")), &r.diagnostics)?;
    }
    Ok(res)
}

/// One simulated series. For the coalescing design `side` selects which
/// loading carries the eigenvalue curves.
pub fn simulate_series(cfg: &ExperimentConfig, side: LoadingSide, rep: u64) -> CliResult<tvmfm::simulate::Simulated> {
    cfg.validate()?;
    Ok(match cfg.dgp {
        Dgp::Coalescing => gen_coalescing(cfg, side, rep)?,
        _ => generate(cfg, rep)?,
    })
}

/// Write a simulated series as CSV, with its truth next to it when
/// `truth_dir` is given.
pub fn generate_series(
    cfg: &ExperimentConfig,
    side: LoadingSide,
    rep: u64,
    output: &Path,
    truth_dir: Option<&Path>,
) -> CliResult<MatrixSeries> {
    let sim = simulate_series(cfg, side, rep)?;
    io::write_series_file(output, &sim.series)?;
    if let Some(dir) = truth_dir {
        ensure_dir(dir)?;
        io::write_loadings(&dir.join("loadings_R.csv"), &sim.truth.rows)?;
        io::write_loadings(&dir.join("loadings_C.csv"), &sim.truth.cols)?;
        io::write_factors(&dir.join("factors.csv"), &tvmfm::FactorPath { mats: sim.truth.factors.clone() })?;
        if !sim.truth.lambda.is_empty() {
            let rows: Vec<String> = sim
                .truth
                .lambda
                .iter()
                .enumerate()
                .flat_map(|(t, l)| l.iter().enumerate().map(move |(j, v)| format!("{},{},{v}", t + 1, j + 1)))
                .collect();
            io::write_table(&dir.join("lambda.csv"), "t,index,value", &rows)?;
        }
    }
    Ok(sim.series)
}
