//! Optimal filter synthesis from sample data or a moment description.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use volterra::estimation::{optimal_error, solve_optimal_filter, ErrorCovariance, VolterraFilter};
use volterra::moments::{gaussian_linear_moments, sample_moments, MomentSet, SampleDataset};
use volterra::tomography::MatrixSpec;
use volterra::FeatureSet;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Order used for sample data when `--order` is absent.
pub const DEFAULT_SAMPLE_ORDER: usize = 1;

/// Input file schema for moment descriptions:
///
/// ```toml
/// [moments]            # raw moments over the degree-lexicographic features
/// record_len = 1
/// order = 1
/// c_x  = { rows = 1, cols = 1, data = [1.0] }
/// c_xy = { rows = 1, cols = 2, data = [0.0, 0.5] }
/// c_y  = { rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }
/// ```
///
/// or a zero-mean linear Gaussian model `y = y₀ + dt·g·x`:
///
/// ```toml
/// [gaussian]
/// dt = 1.0
/// g    = { rows = 2, cols = 2, data = [0.0, 0.0, 1.0, 0.0] }
/// c_x  = { rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }
/// c_y0 = { rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisInput {
    pub moments: Option<MomentSpec>,
    pub gaussian: Option<GaussianSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub record_len: usize,
    pub order: usize,
    pub c_x: MatrixSpec,
    pub c_xy: MatrixSpec,
    pub c_y: MatrixSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub dt: f64,
    pub g: MatrixSpec,
    pub c_x: MatrixSpec,
    pub c_y0: MatrixSpec,
}

impl SynthesisInput {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn moments(&self) -> CliResult<MomentSet> {
        match (&self.moments, &self.gaussian) {
            (Some(m), None) => Ok(MomentSet::new(
                FeatureSet::enumerate(m.record_len, m.order)?,
                m.c_x.to_matrix("c_x")?,
                m.c_xy.to_matrix("c_xy")?,
                m.c_y.to_matrix("c_y")?,
            )?),
            (None, Some(g)) => Ok(gaussian_linear_moments(
                &g.g.to_matrix("g")?,
                &g.c_x.to_matrix("c_x")?,
                &g.c_y0.to_matrix("c_y0")?,
                g.dt,
            )?),
            _ => Err(CliError::Config(
                "input needs exactly one of [moments] or [gaussian]".into(),
            )),
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Moments for `--input`, truncated to `--order` when given.
pub fn load_moments(path: &Path, order: Option<usize>) -> CliResult<MomentSet> {
    if is_csv(path) {
        let data = SampleDataset::from_csv_path(path)?;
        return Ok(sample_moments(&data, order.unwrap_or(DEFAULT_SAMPLE_ORDER))?);
    }
    let text = fs::read_to_string(path)?;
    let m = SynthesisInput::from_toml_str(&text)?.moments()?;
    match order {
        Some(p) if p > m.order() => Err(CliError::Config(format!(
            "order {p} exceeds the order {} of the supplied moments",
            m.order()
        ))),
        Some(p) => Ok(m.truncate(p)?),
        None => Ok(m),
    }
}

/// Refuses moment matrices that needed Tikhonov loading.
pub fn synthesize(m: &MomentSet) -> CliResult<(VolterraFilter, ErrorCovariance)> {
    let filter = solve_optimal_filter(m)?;
    if let Some(report) = filter.solve_report().filter(|r| r.regularized) {
        return Err(CliError::Numerical(format!(
            "ill-conditioned moments: condition estimate {:.3e}, ridge {:.3e} would be needed",
            report.condition_estimate, report.ridge
        )));
    }
    let error = optimal_error(m)?;
    Ok((filter, error))
}

pub fn cmd_synthesize(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("synthesize needs --input".into()))?;
    let moments = load_moments(input, cfg.order)?;
    let (filter, error) = synthesize(&moments)?;

    fs::create_dir_all(&cfg.out)?;
    let filter_path = cfg.out.join("filter.csv");
    filter.write_csv(fs::File::create(&filter_path)?)?;

    let error_path = cfg.out.join("error.csv");
    let mut w = csv::Writer::from_path(&error_path)?;
    w.write_record(["component", "sigma_diag"])?;
    for (j, v) in error.diagonal().iter().enumerate() {
        w.write_record([(j + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(vec![filter_path, error_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"
[moments]
record_len = 1
order = 1
c_x = { rows = 1, cols = 1, data = [1.0] }
c_xy = { rows = 1, cols = 2, data = [0.0, 0.5] }
c_y = { rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }
"#;

    #[test]
    fn scalar_demo() {
        let m = SynthesisInput::from_toml_str(SCALAR).unwrap().moments().unwrap();
        let (f, e) = synthesize(&m).unwrap();
        assert!((f.coefficients()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((e.diagonal()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn needs_exactly_one_section() {
        let both = format!("{SCALAR}\n[gaussian]\ndt = 1.0\ng = {{ rows = 1, cols = 1, data = [0.0] }}\nc_x = {{ rows = 1, cols = 1, data = [1.0] }}\nc_y0 = {{ rows = 1, cols = 1, data = [1.0] }}\n");
        let err = SynthesisInput::from_toml_str(&both).unwrap().moments().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = SynthesisInput::from_toml_str("").unwrap().moments().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(SynthesisInput::from_toml_str("[moments]\nfoo = 1").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn singular_moments_are_numerical_failures() {
        let text = r#"
[moments]
record_len = 2
order = 1
c_x = { rows = 1, cols = 1, data = [1.0] }
c_xy = { rows = 1, cols = 3, data = [0.0, 0.5, 0.5] }
c_y = { rows = 3, cols = 3, data = [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0] }
"#;
        let m = SynthesisInput::from_toml_str(text).unwrap().moments().unwrap();
        assert_eq!(synthesize(&m).unwrap_err().exit_code(), 4);
    }
}
