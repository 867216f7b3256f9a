//! Optimal Volterra estimators and their error covariances.
//!
//! The optimal order-`P` filter solves the normal equations
//! `C_xY = H · C_Y` over the full feature vector (constant included), and its
//! error covariance is `C_x − H · C_xYᵀ`. Any other filter can be scored with
//! [`error_at_filter`], which expands the quadratic risk directly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::{FeatureIndex, FeatureSet};
use crate::grid::TimeGrid;
use crate::linalg::{max_abs, sym_eigenvalues, symmetrized, SolveReport, SpdSolver};
use crate::moments::{check_causal, kernel_moments_at, Kernel, MomentSet};

/// A Volterra estimator `x̌ = h0 + H·Y` over the non-constant features `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraFilter {
    features: FeatureSet,
    h0: DVector<f64>,
    h: DMatrix<f64>,
    report: Option<SolveReport>,
}

impl VolterraFilter {
    pub fn new(features: FeatureSet, h0: DVector<f64>, h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h0.len() || h.ncols() + 1 != features.len() {
            return Err(Error::InvalidArgument(format!(
                "coefficients are {}x{} with {} offsets, feature set has {} non-constant features",
                h.nrows(),
                h.ncols(),
                h0.len(),
                features.len() - 1
            )));
        }
        if h0.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("filter coefficients must be finite".into()));
        }
        Ok(Self {
            features,
            h0,
            h,
            report: None,
        })
    }

    /// A filter that outputs zero for every record.
    pub fn zero(features: FeatureSet, output_dim: usize) -> Self {
        let m = features.len();
        Self {
            features,
            h0: DVector::zeros(output_dim),
            h: DMatrix::zeros(output_dim, m - 1),
            report: None,
        }
    }

    /// Builds a filter from the `J×M` matrix whose first column is `h0`.
    pub fn from_full(features: FeatureSet, full: &DMatrix<f64>) -> Result<Self> {
        let m = features.len();
        if full.ncols() != m {
            return Err(Error::InvalidArgument(format!(
                "expected {m} columns, got {}",
                full.ncols()
            )));
        }
        let h0 = full.column(0).into_owned();
        let h = full.columns(1, m - 1).into_owned();
        Self::new(features, h0, h)
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn output_dim(&self) -> usize {
        self.h0.len()
    }

    pub fn h0(&self) -> &DVector<f64> {
        &self.h0
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `[h0 | H]`, the coefficient matrix over the full feature vector.
    pub fn full(&self) -> DMatrix<f64> {
        let (j, m) = (self.h0.len(), self.features.len());
        let mut full = DMatrix::zeros(j, m);
        full.set_column(0, &self.h0);
        full.columns_mut(1, m - 1).copy_from(&self.h);
        full
    }

    /// Diagnostics from synthesis, when the filter came from a solve.
    pub fn solve_report(&self) -> Option<SolveReport> {
        self.report
    }

    /// `x̌(j) = h0(j) + Σ_μ H(j, μ)·Y(μ)`.
    pub fn evaluate(&self, record: &[f64]) -> Result<DVector<f64>> {
        let y = self.features.evaluate_nonconstant(record)?;
        Ok(&self.h0 + &self.h * y)
    }

    /// Writes `j,feature,coefficient` rows after a `# K=..,P=..,J=..` line.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(
            writer,
            "# K={},P={},J={}",
            self.features.record_len(),
            self.features.max_order(),
            self.output_dim()
        )?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "feature", "coefficient"])?;
        let full = self.full();
        for j in 0..self.output_dim() {
            for (mu, feature) in self.features.indices().iter().enumerate() {
                w.write_record([
                    (j + 1).to_string(),
                    feature.to_string(),
                    full[(j, mu)].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta = parse_meta(&first, &["K", "P", "J"])?;
        let (k, p, j) = (meta[0] as usize, meta[1] as usize, meta[2] as usize);
        let features = FeatureSet::enumerate(k, p)?;
        let mut full = DMatrix::from_element(j, features.len(), f64::NAN);

        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for record in rdr.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Parse(format!("expected 3 fields, got {}", record.len())));
            }
            let row: usize = record[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad output index {:?}", &record[0])))?;
            let feature: FeatureIndex = record[1].parse()?;
            let value: f64 = record[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient {:?}", &record[2])))?;
            let col = features
                .position(&feature)
                .ok_or_else(|| Error::Parse(format!("feature {feature} outside K={k}, P={p}")))?;
            if row == 0 || row > j {
                return Err(Error::Parse(format!("output index {row} outside 1..={j}")));
            }
            full[(row - 1, col)] = value;
        }
        if full.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("filter CSV is missing coefficients".into()));
        }
        Self::from_full(features, &full)
    }
}

/// Parses a `# A=1,B=2` metadata line, returning values in `keys` order.
pub(crate) fn parse_meta(line: &str, keys: &[&str]) -> Result<Vec<f64>> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("expected a '#' metadata line, got {line:?}")))?;
    let mut values = vec![None; keys.len()];
    for pair in body.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad metadata entry {pair:?}")))?;
        if let Some(i) = keys.iter().position(|k| *k == key.trim()) {
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad metadata value {pair:?}")))?;
            values[i] = Some(v);
        }
    }
    values
        .into_iter()
        .zip(keys)
        .map(|(v, k)| v.ok_or_else(|| Error::Parse(format!("metadata is missing {k}"))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Error of the optimal filter for the moments.
    Optimal,
    /// Error of a caller-supplied filter.
    AtFilter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCovariance {
    pub sigma: DMatrix<f64>,
    pub order: usize,
    pub provenance: Provenance,
}

impl ErrorCovariance {
    pub fn diagonal(&self) -> DVector<f64> {
        self.sigma.diagonal()
    }

    pub fn trace(&self) -> f64 {
        self.sigma.trace()
    }
}

/// Solves `C_xY(j, ν) = Σ_μ H(j, μ) C_Y(μ, ν)` for the optimal filter.
pub fn solve_optimal_filter(m: &MomentSet) -> Result<VolterraFilter> {
    let solver = SpdSolver::new(m.c_y())?;
    let full_t = solver.solve(&m.c_xy().transpose());
    let mut filter = VolterraFilter::from_full(m.features().clone(), &full_t.transpose())?;
    filter.report = Some(solver.report());
    Ok(filter)
}

/// `C_x − H C_xYᵀ − C_xY Hᵀ + H C_Y Hᵀ` for an arbitrary filter.
pub fn error_at_filter(m: &MomentSet, f: &VolterraFilter) -> Result<ErrorCovariance> {
    if f.features() != m.features() || f.output_dim() != m.output_dim() {
        return Err(Error::InvalidArgument(
            "filter and moments use different feature sets or output sizes".into(),
        ));
    }
    let h = f.full();
    let cross = &h * m.c_xy().transpose();
    let sigma = m.c_x() - &cross - cross.transpose() + &h * m.c_y() * h.transpose();
    Ok(ErrorCovariance {
        sigma: symmetrized(&sigma),
        order: m.order(),
        provenance: Provenance::AtFilter,
    })
}

/// `Σ̃ = C_x − H̃ C_xYᵀ` at the optimal filter.
pub fn optimal_error(m: &MomentSet) -> Result<ErrorCovariance> {
    let f = solve_optimal_filter(m)?;
    Ok(optimal_error_for(m, &f))
}

fn optimal_error_for(m: &MomentSet, f: &VolterraFilter) -> ErrorCovariance {
    let sigma = m.c_x() - f.full() * m.c_xy().transpose();
    ErrorCovariance {
        sigma: symmetrized(&sigma),
        order: m.order(),
        provenance: Provenance::Optimal,
    }
}

/// Relative residual of the normal equations, `|C_xY − H C_Y| / |C_xY|`.
pub fn normal_equation_residual(m: &MomentSet, f: &VolterraFilter) -> f64 {
    let r = m.c_xy() - f.full() * m.c_y();
    max_abs(&r) / max_abs(m.c_xy()).max(f64::MIN_POSITIVE)
}

/// Linear filter on a uniform grid in continuous-time normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLinearFilter {
    pub grid: TimeGrid,
    /// Estimation times, one per row of `kernel`.
    pub times: Vec<f64>,
    /// `h̃₁(t_i, τ_j)`, so that `x̌(t_i) = Σ_j dt · h̃₁(t_i, τ_j) · y(τ_j)`.
    pub kernel: DMatrix<f64>,
    /// `Σ̃(t_i, t_i)`.
    pub error: DVector<f64>,
    pub report: Option<SolveReport>,
}

impl ContinuousLinearFilter {
    pub fn estimate(&self, record: &[f64]) -> Result<DVector<f64>> {
        if record.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "record has {} samples, grid has {}",
                record.len(),
                self.grid.len()
            )));
        }
        Ok(&self.kernel * DVector::from_column_slice(record) * self.grid.dt())
    }
}

/// Zero-mean optimal linear filter estimating `x` at every grid time.
pub fn continuous_linear_filter(
    c_x: &Kernel,
    c_xy: &Kernel,
    c_y: &Kernel,
    grid: &TimeGrid,
) -> Result<ContinuousLinearFilter> {
    let times: Vec<f64> = grid.times().collect();
    continuous_linear_filter_at(c_x, c_xy, c_y, grid, &times)
}

/// Zero-mean optimal linear filter estimating `x` at the given times from a
/// record sampled on `grid`.
///
/// Solves `C_xy(t, τ) = Σ_s dt·h̃₁(t, s)·C_y(s, τ)` and returns
/// `Σ̃(t, t) = C_x(t, t) − Σ_τ dt·h̃₁(t, τ)·C_xy(t, τ)`.
pub fn continuous_linear_filter_at(
    c_x: &Kernel,
    c_xy: &Kernel,
    c_y: &Kernel,
    grid: &TimeGrid,
    times: &[f64],
) -> Result<ContinuousLinearFilter> {
    let m = kernel_moments_at(c_x, c_xy, c_y, times, grid)?;
    let f = solve_optimal_filter(&m)?;
    let dt = grid.dt();
    let kernel = f.coefficients() / dt;
    let cross = m.c_xy().columns(1, grid.len());
    let error = DVector::from_fn(times.len(), |i, _| {
        m.c_x()[(i, i)] - dt * kernel.row(i).dot(&cross.row(i))
    });
    Ok(ContinuousLinearFilter {
        grid: *grid,
        times: times.to_vec(),
        kernel,
        error,
        report: f.solve_report(),
    })
}

fn strict_cholesky(name: &str, m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(symmetrized(m))
        .ok_or_else(|| Error::InvalidModel(format!("{name} is not positive definite")))
}

/// `(C_x⁻¹ + dt² gᵀ C_y0⁻¹ g)⁻¹`, the information form of the linear-response
/// error covariance.
pub fn information_form_error(
    c_x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    c_y0: &DMatrix<f64>,
    dt: f64,
) -> Result<ErrorCovariance> {
    check_response_dims(c_x, g, c_y0)?;
    let cx_inv = strict_cholesky("C_x", c_x)?.inverse();
    let noise = strict_cholesky("C_y0", c_y0)?;
    let info = cx_inv + g.transpose() * noise.solve(g) * (dt * dt);
    let sigma = strict_cholesky("information matrix", &info)?.inverse();
    Ok(ErrorCovariance {
        sigma: symmetrized(&sigma),
        order: 1,
        provenance: Provenance::Optimal,
    })
}

/// `C_x − dt² C_x gᵀ (dt² g C_x gᵀ + C_y0)⁻¹ g C_x`, the direct form.
pub fn direct_form_error(
    c_x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    c_y0: &DMatrix<f64>,
    dt: f64,
) -> Result<ErrorCovariance> {
    check_response_dims(c_x, g, c_y0)?;
    let c_y = g * c_x * g.transpose() * (dt * dt) + c_y0;
    let gcx = g * c_x;
    let gain_t = strict_cholesky("C_y", &c_y)?.solve(&gcx);
    let sigma = c_x - gcx.transpose() * gain_t * (dt * dt);
    Ok(ErrorCovariance {
        sigma: symmetrized(&sigma),
        order: 1,
        provenance: Provenance::Optimal,
    })
}

fn check_response_dims(c_x: &DMatrix<f64>, g: &DMatrix<f64>, c_y0: &DMatrix<f64>) -> Result<()> {
    let (k, j) = g.shape();
    if c_x.shape() != (j, j) || c_y0.shape() != (k, k) {
        return Err(Error::InvalidModel(format!(
            "g is {k}x{j}, C_x is {}x{}, C_y0 is {}x{}",
            c_x.nrows(),
            c_x.ncols(),
            c_y0.nrows(),
            c_y0.ncols()
        )));
    }
    check_causal(g)
}

/// Outcome of testing `gᵀ C_y0⁻¹ g ≤ (4/ħ²) C_q0` in the PSD order.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyCheck {
    pub holds: bool,
    /// Smallest eigenvalue of `(4/ħ²) C_q0 − gᵀ C_y0⁻¹ g`.
    pub slack: f64,
    /// All eigenvalues of the slack matrix, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Relative tolerance on the slack eigenvalue used to decide `holds`.
pub const UNCERTAINTY_TOL: f64 = 1e-10;

/// Checks the matrix uncertainty relation between the output noise `C_y0`,
/// the symmetrized probe covariance `C_q0` and the causal response `g`.
///
/// The time step cancels from both sides, so it is not a parameter.
pub fn check_matrix_uncertainty(
    g: &DMatrix<f64>,
    c_y0: &DMatrix<f64>,
    c_q0: &DMatrix<f64>,
    hbar: f64,
) -> Result<UncertaintyCheck> {
    let (k, j) = g.shape();
    if c_y0.shape() != (k, k) || c_q0.shape() != (j, j) {
        return Err(Error::InvalidModel("dimension mismatch in uncertainty check".into()));
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    check_causal(g)?;
    let lhs = g.transpose() * strict_cholesky("C_y0", c_y0)?.solve(g);
    let rhs = c_q0 * (4.0 / (hbar * hbar));
    let slack_matrix = &rhs - &lhs;
    let eigenvalues = sym_eigenvalues(&slack_matrix);
    let slack = eigenvalues[0];
    let scale = max_abs(&rhs).max(max_abs(&lhs)).max(f64::MIN_POSITIVE);
    Ok(UncertaintyCheck {
        holds: slack >= -UNCERTAINTY_TOL * scale,
        slack,
        eigenvalues,
    })
}

/// Renders a covariance diagonal for logs.
pub fn format_diagonal(sigma: &ErrorCovariance) -> String {
    let mut s = String::new();
    for (i, v) in sigma.diagonal().iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.6e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_psd;
    use crate::moments::{gaussian_linear_moments, sample_moments, SampleDataset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn scalar_moments() -> MomentSet {
        MomentSet::new(
            FeatureSet::enumerate(1, 1).unwrap(),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_row_slice(1, 2, &[0.0, 0.5]),
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    #[test]
    fn scalar_optimal_filter() {
        let m = scalar_moments();
        let f = solve_optimal_filter(&m).unwrap();
        assert!(f.h0()[0].abs() < 1e-15);
        assert!((f.coefficients()[(0, 0)] - 0.5).abs() < 1e-15);
        let sigma = optimal_error(&m).unwrap();
        assert!((sigma.sigma[(0, 0)] - 0.75).abs() < 1e-15);
        let at = error_at_filter(&m, &f).unwrap();
        assert!((at.sigma[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn identity_system_copies_cross_moments() {
        let features = FeatureSet::enumerate(3, 1).unwrap();
        let c_xy = DMatrix::from_row_slice(2, 4, &[0.0, 0.1, 0.2, 0.3, 0.0, -0.4, 0.0, 0.25]);
        let m = MomentSet::new(features, DMatrix::identity(2, 2), c_xy.clone(), DMatrix::identity(4, 4)).unwrap();
        let f = solve_optimal_filter(&m).unwrap();
        assert!((f.coefficients() - c_xy.columns(1, 3)).abs().max() < 1e-15);
    }

    #[test]
    fn evaluation() {
        let features = FeatureSet::enumerate(1, 1).unwrap();
        let f = VolterraFilter::new(features.clone(), DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(f.evaluate(&[5.0]).unwrap()[0], 11.0);
        assert!(matches!(f.evaluate(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
        let zero = VolterraFilter::zero(features, 1);
        assert_eq!(zero.evaluate(&[-3.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn order_zero_filter_is_prior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 500;
        let x: Vec<f64> = (0..n).map(|_| 2.0 + { let v: f64 = StandardNormal.sample(&mut rng); v }).collect();
        let y: Vec<f64> = x.iter().map(|v| v + { let w: f64 = StandardNormal.sample(&mut rng); w }).collect();
        let data = SampleDataset::new(DMatrix::from_column_slice(n, 1, &x), DMatrix::from_column_slice(n, 1, &y)).unwrap();
        let m = sample_moments(&data, 0).unwrap();
        let f = solve_optimal_filter(&m).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!((f.evaluate(&[100.0]).unwrap()[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn zero_filter_error_is_second_moment() {
        let m = scalar_moments();
        let zero = VolterraFilter::zero(m.features().clone(), 1);
        assert_eq!(error_at_filter(&m, &zero).unwrap().sigma, *m.c_x());
    }

    #[test]
    fn gaussian_mmse() {
        for rho in [0.0, 0.3, 0.9] {
            let m = MomentSet::new(
                FeatureSet::enumerate(1, 1).unwrap(),
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_row_slice(1, 2, &[0.0, rho]),
                DMatrix::identity(2, 2),
            )
            .unwrap();
            let sigma = optimal_error(&m).unwrap().sigma[(0, 0)];
            assert!((sigma - (1.0 - rho * rho)).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_filter_is_rejected() {
        let m = scalar_moments();
        let other = VolterraFilter::zero(FeatureSet::enumerate(2, 1).unwrap(), 1);
        assert!(matches!(error_at_filter(&m, &other), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn csv_round_trip() {
        let features = FeatureSet::enumerate(2, 2).unwrap();
        let full = DMatrix::from_fn(2, features.len(), |i, j| (i as f64 + 1.0) * 0.1 * j as f64 - 0.3);
        let f = VolterraFilter::from_full(features, &full).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# K=2,P=2,J=2\nj,feature,coefficient\n1,1,"));
        assert_eq!(VolterraFilter::read_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn csv_missing_rows_is_an_error() {
        let text = "# K=1,P=1,J=1\nj,feature,coefficient\n1,1,0.5\n";
        assert!(matches!(VolterraFilter::read_csv(text.as_bytes()), Err(Error::Parse(_))));
        let text = "K=1\n";
        assert!(matches!(VolterraFilter::read_csv(text.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn information_form_scalar() {
        // dt² gᵀ C_y0⁻¹ g = 3 with a 2-step chain reading x(1) once.
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0f64.sqrt(), 0.0]);
        let c_x = DMatrix::identity(2, 2);
        let c_y0 = DMatrix::identity(2, 2);
        let s = information_form_error(&c_x, &g, &c_y0, 1.0).unwrap();
        assert!((s.sigma[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((s.sigma[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn information_form_without_coupling() {
        let c_x = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = information_form_error(&c_x, &DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), 0.1).unwrap();
        assert!((s.sigma - c_x).abs().max() < 1e-14);
    }

    #[test]
    fn information_form_rejects_singular_inputs() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let g = DMatrix::zeros(2, 2);
        assert!(matches!(
            information_form_error(&singular, &g, &DMatrix::identity(2, 2), 1.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            information_form_error(&DMatrix::identity(2, 2), &g, &singular, 1.0),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn information_form_matches_generic_synthesis() {
        let g = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.8, 0.0, 0.0, -0.3, 1.1, 0.0]);
        let c_x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.5, 0.3, 0.0, 0.3, 0.7]);
        let c_y0 = DMatrix::from_diagonal_element(3, 3, 0.4);
        let dt = 0.5;
        let m = gaussian_linear_moments(&g, &c_x, &c_y0, dt).unwrap();
        let generic = optimal_error(&m).unwrap();
        let info = information_form_error(&c_x, &g, &c_y0, dt).unwrap();
        assert!((generic.sigma - info.sigma).abs().max() < 1e-12);
    }

    #[test]
    fn uncertainty_relation_without_coupling() {
        let c_q0 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let hbar = 1.3;
        let check = check_matrix_uncertainty(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), &c_q0, hbar).unwrap();
        assert!(check.holds);
        let expected = sym_eigenvalues(&(c_q0 * (4.0 / (hbar * hbar))))[0];
        assert!((check.slack - expected).abs() < 1e-14);
    }

    #[test]
    fn uncertainty_relation_two_step() {
        let (c, v) = (2.0, 0.5);
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, c, 0.0]);
        let c_y0 = DMatrix::from_diagonal_element(2, 2, v);
        // LHS = diag(c²/v, 0) = diag(8, 0); with ħ = 1 the RHS is 4 C_q0.
        let holding = DMatrix::from_diagonal(&DVector::from_vec(vec![2.5, 0.1]));
        let check = check_matrix_uncertainty(&g, &c_y0, &holding, 1.0).unwrap();
        assert!(check.holds);
        assert!((check.slack - 0.4).abs() < 1e-14);
        let violating = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.1]));
        let check = check_matrix_uncertainty(&g, &c_y0, &violating, 1.0).unwrap();
        assert!(!check.holds);
        assert!((check.slack - (6.0 - 8.0)).abs() < 1e-14);
    }

    #[test]
    fn uncertainty_relation_saturates() {
        let hbar = 0.7;
        let g = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.2, 0.0, 0.0, 0.4, -0.9, 0.0]);
        let c_y0 = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.4]);
        let lhs = g.transpose() * c_y0.clone().cholesky().unwrap().solve(&g);
        let c_q0 = lhs * (hbar * hbar / 4.0);
        let check = check_matrix_uncertainty(&g, &c_y0, &c_q0, hbar).unwrap();
        assert!(check.holds);
        assert!(check.slack.abs() < 1e-12);
    }

    #[test]
    fn optimal_error_is_psd() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let m = gaussian_linear_moments(&g, &DMatrix::identity(2, 2), &DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(is_psd(&optimal_error(&m).unwrap().sigma, 1e-8));
    }
}
