//! Raw (non-central) moments that drive filter synthesis.
//!
//! A [`MomentSet`] holds `⟨x xᵀ⟩`, `⟨x Yᵀ⟩` and `⟨Y Yᵀ⟩` where `Y` is the full
//! feature vector including the constant `1`, so the first column of
//! `c_xy` is `⟨x⟩` and the first row of `c_y` is `⟨Y⟩`. Moments come from
//! sample data, from a linear Gaussian response model, or from covariance
//! kernels sampled on a time grid.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::grid::TimeGrid;
use crate::linalg::{is_psd, symmetrized};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    features: FeatureSet,
    mean_x: DVector<f64>,
    mean_y: DVector<f64>,
    c_x: DMatrix<f64>,
    c_xy: DMatrix<f64>,
    c_y: DMatrix<f64>,
}

impl MomentSet {
    /// Validates dimensions; `mean_x` and `mean_y` are read from the
    /// constant-feature column/row.
    pub fn new(
        features: FeatureSet,
        c_x: DMatrix<f64>,
        c_xy: DMatrix<f64>,
        c_y: DMatrix<f64>,
    ) -> Result<Self> {
        let m = features.len();
        let j = c_x.nrows();
        if j == 0 || c_x.ncols() != j {
            return Err(Error::InvalidArgument("C_x must be square and non-empty".into()));
        }
        if c_xy.nrows() != j || c_xy.ncols() != m {
            return Err(Error::InvalidArgument(format!(
                "C_xY must be {j}x{m}, got {}x{}",
                c_xy.nrows(),
                c_xy.ncols()
            )));
        }
        if c_y.nrows() != m || c_y.ncols() != m {
            return Err(Error::InvalidArgument(format!(
                "C_Y must be {m}x{m}, got {}x{}",
                c_y.nrows(),
                c_y.ncols()
            )));
        }
        if (c_y[(0, 0)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "C_Y(1,1) must equal 1 (constant feature)".into(),
            ));
        }
        let c_x = symmetrized(&c_x);
        let c_y = symmetrized(&c_y);
        let mean_x = c_xy.column(0).into_owned();
        let mean_y = c_y.column(0).into_owned();
        Ok(Self {
            features,
            mean_x,
            mean_y,
            c_x,
            c_xy,
            c_y,
        })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn order(&self) -> usize {
        self.features.max_order()
    }

    /// Number of estimated quantities `J`.
    pub fn output_dim(&self) -> usize {
        self.c_x.nrows()
    }

    pub fn mean_x(&self) -> &DVector<f64> {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &DVector<f64> {
        &self.mean_y
    }

    pub fn c_x(&self) -> &DMatrix<f64> {
        &self.c_x
    }

    pub fn c_xy(&self) -> &DMatrix<f64> {
        &self.c_xy
    }

    pub fn c_y(&self) -> &DMatrix<f64> {
        &self.c_y
    }

    /// Restricts to a lower order; the lower-order features are a prefix.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::InvalidArgument(format!(
                "cannot raise order {} to {order}",
                self.order()
            )));
        }
        let features = FeatureSet::enumerate(self.features.record_len(), order)?;
        let m = features.len();
        Self::new(
            features,
            self.c_x.clone(),
            self.c_xy.columns(0, m).into_owned(),
            self.c_y.view((0, 0), (m, m)).into_owned(),
        )
    }

    /// Checks the PSD invariants of `C_x` and `C_Y` with tolerance relative
    /// to their traces.
    pub fn is_consistent(&self, rel_tol: f64) -> bool {
        is_psd(&self.c_x, rel_tol) && is_psd(&self.c_y, rel_tol)
    }
}

/// Paired samples of the hidden quantity `x` and the record `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl SampleDataset {
    /// `x` is `n×J`, `y` is `n×K`, one sample per row.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::InvalidArgument(format!(
                "x has {} rows, y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        Ok(Self { x, y })
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Reads a CSV with header `x_1..x_J,y_1..y_K`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut j = 0;
        let mut k = 0;
        for (col, name) in headers.iter().enumerate() {
            let expected_x = format!("x_{}", j + 1);
            let expected_y = format!("y_{}", k + 1);
            if k == 0 && name == expected_x {
                j += 1;
            } else if name == expected_y {
                k += 1;
            } else {
                return Err(Error::Parse(format!(
                    "unexpected column {name:?} at position {}",
                    col + 1
                )));
            }
        }
        if j == 0 || k == 0 {
            return Err(Error::Parse("need at least one x_ and one y_ column".into()));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != j + k {
                return Err(Error::Parse(format!("row {} has {} fields", row + 2, record.len())));
            }
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {} column {}: {field:?}", row + 2, col + 1)))?;
                if col < j {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        let n = xs.len() / j;
        if n == 0 {
            return Err(Error::Parse("no data rows".into()));
        }
        Self::new(
            DMatrix::from_row_slice(n, j, &xs),
            DMatrix::from_row_slice(n, k, &ys),
        )
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.x.ncols())
            .map(|i| format!("x_{i}"))
            .chain((1..=self.y.ncols()).map(|i| format!("y_{i}")))
            .collect();
        w.write_record(&header)?;
        for r in 0..self.n_samples() {
            let row: Vec<String> = self
                .x
                .row(r)
                .iter()
                .chain(self.y.row(r).iter())
                .map(|v| format!("{v:e}"))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample averages (1/n convention) of the raw moments up to order `order`.
pub fn sample_moments(data: &SampleDataset, order: usize) -> Result<MomentSet> {
    let n = data.n_samples();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let features = FeatureSet::enumerate(data.y.ncols(), order)?;
    let m = features.len();
    let mut f = DMatrix::zeros(n, m);
    let mut record = vec![0.0; data.y.ncols()];
    for r in 0..n {
        for (dst, src) in record.iter_mut().zip(data.y.row(r).iter()) {
            *dst = *src;
        }
        for (c, feat) in features.indices().iter().enumerate() {
            f[(r, c)] = feat.evaluate(&record);
        }
    }
    let inv_n = 1.0 / n as f64;
    let c_y = f.tr_mul(&f) * inv_n;
    let c_xy = data.x.tr_mul(&f) * inv_n;
    let c_x = data.x.tr_mul(&data.x) * inv_n;
    MomentSet::new(features, c_x, c_xy, c_y)
}

fn require_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidModel(format!(
            "{name} must be {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Checks that `g(k, j) = 0` whenever sample `k` does not come after `j`.
pub fn check_causal(g: &DMatrix<f64>) -> Result<()> {
    for k in 0..g.nrows() {
        for j in k..g.ncols() {
            if g[(k, j)] != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "response g({}, {}) = {} is not causal",
                    k + 1,
                    j + 1,
                    g[(k, j)]
                )));
            }
        }
    }
    Ok(())
}

/// Order-1 moments of the zero-mean linear response `y = y₀ + dt·g·x`.
///
/// `g` is `K×J` and strictly causal, `c_x` is `J×J`, `c_y0` is `K×K`.
pub fn gaussian_linear_moments(
    g: &DMatrix<f64>,
    c_x: &DMatrix<f64>,
    c_y0: &DMatrix<f64>,
    dt: f64,
) -> Result<MomentSet> {
    let (k, j) = g.shape();
    require_square("C_x", c_x, j)?;
    require_square("C_y0", c_y0, k)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidModel(format!("dt must be positive, got {dt}")));
    }
    check_causal(g)?;

    let cross = c_x * g.transpose() * dt;
    let c_y_block = g * c_x * g.transpose() * (dt * dt) + c_y0;

    let features = FeatureSet::enumerate(k, 1)?;
    let mut c_xy = DMatrix::zeros(j, k + 1);
    c_xy.view_mut((0, 1), (j, k)).copy_from(&cross);
    let mut c_y = DMatrix::zeros(k + 1, k + 1);
    c_y[(0, 0)] = 1.0;
    c_y.view_mut((1, 1), (k, k)).copy_from(&c_y_block);
    MomentSet::new(features, c_x.clone(), c_xy, c_y)
}

type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A two-time covariance kernel with an optional white-noise part `w·δ(t−τ)`.
///
/// On a grid with step `dt` the delta term becomes `w/dt` on the diagonal.
pub struct Kernel {
    smooth: Option<Box<KernelFn>>,
    white: f64,
}

impl Kernel {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            smooth: Some(Box::new(f)),
            white: 0.0,
        }
    }

    pub fn white(power: f64) -> Self {
        Self {
            smooth: None,
            white: power,
        }
    }

    pub fn zero() -> Self {
        Self {
            smooth: None,
            white: 0.0,
        }
    }

    pub fn with_white(mut self, power: f64) -> Self {
        self.white = power;
        self
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.smooth.as_ref().map_or(0.0, |f| f(t, s))
    }

    pub fn white_power(&self) -> f64 {
        self.white
    }

    /// Pointwise fill on the grid, with the delta rule on the diagonal.
    pub fn matrix(&self, grid: &TimeGrid) -> DMatrix<f64> {
        let times: Vec<f64> = grid.times().collect();
        self.cross_matrix(&times, &times, grid.dt())
    }

    /// Fill over arbitrary row and column times; the delta term lands where
    /// a row time equals a column time.
    pub fn cross_matrix(&self, rows: &[f64], cols: &[f64], dt: f64) -> DMatrix<f64> {
        let w = self.white / dt;
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let (t, s) = (rows[i], cols[j]);
            let delta = if self.white != 0.0 && t == s { w } else { 0.0 };
            self.eval(t, s) + delta
        })
    }
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("smooth", &self.smooth.is_some())
            .field("white", &self.white)
            .finish()
    }
}

/// Zero-mean order-1 moments from kernels evaluated on `grid`; `x` and `y`
/// are both indexed by the grid.
pub fn kernel_moments(c_x: &Kernel, c_xy: &Kernel, c_y: &Kernel, grid: &TimeGrid) -> Result<MomentSet> {
    let times: Vec<f64> = grid.times().collect();
    kernel_moments_at(c_x, c_xy, c_y, &times, grid)
}

/// Zero-mean order-1 moments for `x` at `x_times` and a record on `grid`.
pub fn kernel_moments_at(
    c_x: &Kernel,
    c_xy: &Kernel,
    c_y: &Kernel,
    x_times: &[f64],
    grid: &TimeGrid,
) -> Result<MomentSet> {
    if x_times.is_empty() {
        return Err(Error::InvalidArgument("need at least one estimation time".into()));
    }
    let n = grid.len();
    let dt = grid.dt();
    let times: Vec<f64> = grid.times().collect();
    let features = FeatureSet::enumerate(n, 1)?;
    let mut cross = DMatrix::zeros(x_times.len(), n + 1);
    cross
        .view_mut((0, 1), (x_times.len(), n))
        .copy_from(&c_xy.cross_matrix(x_times, &times, dt));
    let mut cy = DMatrix::zeros(n + 1, n + 1);
    cy[(0, 0)] = 1.0;
    cy.view_mut((1, 1), (n, n)).copy_from(&c_y.matrix(grid));
    MomentSet::new(features, c_x.cross_matrix(x_times, x_times, dt), cross, cy)
}

/// Same as [`kernel_moments`] for explicit points, validating uniformity.
pub fn kernel_moments_on_points(
    c_x: &Kernel,
    c_xy: &Kernel,
    c_y: &Kernel,
    points: &[f64],
) -> Result<(MomentSet, TimeGrid)> {
    let grid = TimeGrid::from_points(points)?;
    Ok((kernel_moments(c_x, c_xy, c_y, &grid)?, grid))
}
