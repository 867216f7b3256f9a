//! Linear tomography: filter, error diagonals and per-record estimates.

use std::fs;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use volterra::tomography::{
    gellmann_basis, minimax_error_bound, project_physical, qst_error, qst_filter, simulated_mse,
    HermitianBasis, QstFilter, TomographyConfig, TomographyModel,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct TomoOutput {
    pub filter: QstFilter,
    pub sigma_diag: DVector<f64>,
    /// `None` when the measurements leave a parameter undetermined.
    pub bound_diag: Option<DVector<f64>>,
    pub estimates: Vec<DVector<f64>>,
    pub projected: Option<Vec<DVector<f64>>>,
    /// Simulated `(mse, se)` per component.
    pub mse: Option<(DVector<f64>, DVector<f64>)>,
}

fn projection_basis(model: &TomographyModel) -> CliResult<HermitianBasis> {
    let d = model.dimension().ok_or_else(|| {
        CliError::Config("--project needs `dimension` in the model file".into())
    })?;
    let (m, n) = model.b().shape();
    if model.b() != &DMatrix::identity(m, n) {
        return Err(CliError::Config("--project needs the identity estimand".into()));
    }
    Ok(gellmann_basis(d)?)
}

pub fn run_tomo(config: &TomographyConfig, project: bool) -> CliResult<TomoOutput> {
    let model = config.model()?;
    let filter = qst_filter(&model)?;
    let sigma_diag = qst_error(&model)?.diagonal();
    let bound_diag = match minimax_error_bound(&model) {
        Ok(b) => Some(b.diagonal()),
        Err(volterra::Error::UnboundedBound(msg)) => {
            eprintln!("warning: minimax bound is infinite: {msg}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let basis = if project { Some(projection_basis(&model)?) } else { None };

    let estimates = config
        .records
        .iter()
        .map(|y| filter.estimate(&DVector::from_column_slice(y)))
        .collect::<volterra::Result<Vec<_>>>()?;
    let projected = basis
        .as_ref()
        .map(|b| estimates.iter().map(|z| project_physical(z, b)).collect::<volterra::Result<Vec<_>>>())
        .transpose()?;
    let mse = config
        .simulate
        .as_ref()
        .map(|s| simulated_mse(&model, &filter, s.trials, s.seed, basis.as_ref()))
        .transpose()?;
    Ok(TomoOutput {
        filter,
        sigma_diag,
        bound_diag,
        estimates,
        projected,
        mse,
    })
}

pub fn cmd_tomo(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("tomo needs --input".into()))?;
    let config = TomographyConfig::from_toml_str(&fs::read_to_string(input)?)?;
    let out = run_tomo(&config, cfg.project)?;
    fs::create_dir_all(&cfg.out)?;

    let filter_path = cfg.out.join("tomo_filter.csv");
    let mut w = csv::Writer::from_path(&filter_path)?;
    let k = out.filter.gain.ncols();
    let mut header = vec!["component".to_string(), "offset".to_string()];
    header.extend((1..=k).map(|i| format!("gain_{i}")));
    w.write_record(&header)?;
    for j in 0..out.filter.gain.nrows() {
        let mut rec = vec![(j + 1).to_string(), out.filter.offset[j].to_string()];
        rec.extend(out.filter.gain.row(j).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let summary_path = cfg.out.join("tomo_summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record(["component", "sigma_diag", "bound_diag", "mse", "mse_se"])?;
    for j in 0..out.sigma_diag.len() {
        let bound = out.bound_diag.as_ref().map_or("inf".to_string(), |b| b[j].to_string());
        let (mse, se) = out
            .mse
            .as_ref()
            .map_or((String::new(), String::new()), |(m, s)| (m[j].to_string(), s[j].to_string()));
        w.write_record([(j + 1).to_string(), out.sigma_diag[j].to_string(), bound, mse, se])?;
    }
    w.flush()?;

    let estimates_path = cfg.out.join("tomo_estimates.csv");
    let mut w = csv::Writer::from_path(&estimates_path)?;
    let mut header = vec!["record", "component", "estimate"];
    if out.projected.is_some() {
        header.push("projected");
    }
    w.write_record(&header)?;
    for (r, z) in out.estimates.iter().enumerate() {
        for (j, v) in z.iter().enumerate() {
            let mut rec = vec![(r + 1).to_string(), (j + 1).to_string(), v.to_string()];
            if let Some(p) = &out.projected {
                rec.push(p[r][j].to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(vec![filter_path, summary_path, estimates_path])
}
