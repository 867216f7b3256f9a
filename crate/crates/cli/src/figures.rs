//! Data behind the readout figures: filters, bounds and Monte-Carlo error rates.

use std::fs;
use std::path::{Path, PathBuf};

use volterra::readout::{
    default_threshold_grid, readout_bounds, simulate_statistics, solve_fredholm_filter, threshold_scale,
    tune_on_samples, tuning_seed, LrtStatistic, MonteCarloResult, ReadoutBounds, ReadoutModel, RoptStatistic,
};

use crate::config::{db_to_snr, RunConfig};
use crate::error::CliResult;

/// Exponents per sign in the tuning grid.
pub const TUNING_POINTS: usize = 200;

pub const FIG1_HEADER: [&str; 3] = ["t_over_T1", "snr", "normalized_filter"];
pub const FIG2_HEADER: [&str; 3] = ["snr_db", "Q", "R_tilde"];
pub const FIG3_HEADER: [&str; 9] = [
    "snr_db",
    "pe_ropt",
    "pe_ropt_ci_lo",
    "pe_ropt_ci_hi",
    "pe_lrt",
    "pe_lrt_ci_lo",
    "pe_lrt_ci_hi",
    "Q",
    "R_tilde",
];
pub const FIG3_TUNED_HEADER: [&str; 4] = [
    "threshold_ropt_tuned",
    "pe_ropt_tuned",
    "pe_ropt_tuned_ci_lo",
    "pe_ropt_tuned_ci_hi",
];

pub fn model_at(cfg: &RunConfig, snr: f64) -> CliResult<ReadoutModel> {
    Ok(ReadoutModel::from_snr(snr, cfg.t_over_t1, cfg.dt_over_t1, cfg.pi0)?)
}

/// `(t/T₁, 2Πh̃(t)/S)` on the sampling grid.
pub fn fig1_curve(cfg: &RunConfig, snr: f64) -> CliResult<Vec<(f64, f64)>> {
    let model = model_at(cfg, snr)?;
    let filter = solve_fredholm_filter(&model)?;
    Ok(filter
        .grid
        .times()
        .zip(filter.normalized(&model))
        .map(|(t, v)| (t / model.t1(), v))
        .collect())
}

pub fn fig2_point(cfg: &RunConfig, snr_db: f64) -> CliResult<ReadoutBounds> {
    let model = model_at(cfg, db_to_snr(snr_db))?;
    let filter = solve_fredholm_filter(&model)?;
    Ok(readout_bounds(&model, &filter)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedColumns {
    pub threshold: f64,
    pub result: MonteCarloResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig3Row {
    pub snr_db: f64,
    pub ropt: MonteCarloResult,
    pub lrt: MonteCarloResult,
    pub bounds: ReadoutBounds,
    pub tuned: Option<TunedColumns>,
}

/// Both rules on the same records. With `tune`, the R-optimal threshold is
/// picked on a held-out batch and scored on the main one.
pub fn fig3_point(cfg: &RunConfig, snr_db: f64, tune: bool) -> CliResult<Fig3Row> {
    let model = model_at(cfg, db_to_snr(snr_db))?;
    let filter = solve_fredholm_filter(&model)?;
    let bounds = readout_bounds(&model, &filter)?;
    let scale = threshold_scale(&model, &filter)?;
    let ropt = RoptStatistic::new(&model, filter)?;
    let lrt = LrtStatistic::new(&model);
    let samples = simulate_statistics(&model, &[&ropt, &lrt], cfg.trials, cfg.seed)?;
    let (pi0, pi1) = (model.pi0(), model.pi1());
    let tuned = if tune {
        let held_out = simulate_statistics(&model, &[&ropt], cfg.trials, tuning_seed(cfg.seed))?;
        let grid = default_threshold_grid(scale, TUNING_POINTS);
        let t = tune_on_samples(&held_out, &samples, 0, &grid, &model)?;
        Some(TunedColumns {
            threshold: t.threshold,
            result: t.result,
        })
    } else {
        None
    };
    Ok(Fig3Row {
        snr_db,
        ropt: samples.result(0, 0.0, pi0, pi1),
        lrt: samples.result(1, 0.0, pi0, pi1),
        bounds,
        tuned,
    })
}

fn create(dir: &Path, name: &str) -> CliResult<(PathBuf, csv::Writer<fs::File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = fs::File::create(&path)?;
    Ok((path, csv::Writer::from_writer(file)))
}

fn finish(mut w: csv::Writer<fs::File>) -> CliResult<()> {
    w.flush()?;
    Ok(())
}

fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

pub fn cmd_fig1(cfg: &RunConfig) -> CliResult<PathBuf> {
    let curves: Vec<(f64, Vec<(f64, f64)>)> = cfg
        .fig1_snrs
        .iter()
        .map(|&snr| fig1_curve(cfg, snr).map(|c| (snr, c)))
        .collect::<CliResult<_>>()?;
    let (path, mut w) = create(&cfg.out, "fig1.csv")?;
    w.write_record(FIG1_HEADER)?;
    for (snr, curve) in curves {
        for (t, v) in curve {
            w.write_record(row(&[t, snr, v]))?;
        }
    }
    finish(w)?;
    Ok(path)
}

pub fn cmd_fig2(cfg: &RunConfig) -> CliResult<PathBuf> {
    let rows: Vec<(f64, ReadoutBounds)> = cfg
        .snr_db
        .db_values()
        .into_iter()
        .map(|db| fig2_point(cfg, db).map(|b| (db, b)))
        .collect::<CliResult<_>>()?;
    let (path, mut w) = create(&cfg.out, "fig2.csv")?;
    w.write_record(FIG2_HEADER)?;
    for (db, b) in rows {
        w.write_record(row(&[db, b.q, b.r_tilde]))?;
    }
    finish(w)?;
    Ok(path)
}

pub fn cmd_fig3(cfg: &RunConfig) -> CliResult<PathBuf> {
    let rows: Vec<Fig3Row> = cfg
        .snr_db
        .db_values()
        .into_iter()
        .map(|db| fig3_point(cfg, db, cfg.tune_threshold))
        .collect::<CliResult<_>>()?;
    let (path, mut w) = create(&cfg.out, "fig3.csv")?;
    let mut header: Vec<&str> = FIG3_HEADER.to_vec();
    if cfg.tune_threshold {
        header.extend(FIG3_TUNED_HEADER);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut values = vec![
            r.snr_db,
            r.ropt.pe_hat,
            r.ropt.ci_low,
            r.ropt.ci_high,
            r.lrt.pe_hat,
            r.lrt.ci_low,
            r.lrt.ci_high,
            r.bounds.q,
            r.bounds.r_tilde,
        ];
        if let Some(t) = r.tuned {
            values.extend([t.threshold, t.result.pe_hat, t.result.ci_low, t.result.ci_high]);
        }
        w.write_record(row(&values))?;
    }
    finish(w)?;
    Ok(path)
}
