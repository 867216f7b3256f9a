//! Linear state tomography.
//!
//! A density matrix is written `ρ_z = I/d + Σ_α z_α E_α` over an orthonormal,
//! traceless Hermitian basis, measurements are `y = A·z + y₀`, and the target
//! is `x = B·z`. With prior moments `⟨z⟩, C_z` the optimal linear estimator
//! and its error covariance have closed forms; letting `C_z → ∞` gives a
//! prior-free upper bound.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimation::{ErrorCovariance, Provenance};
use crate::features::FeatureSet;
use crate::linalg::{symmetrized, SpdSolver};
use crate::moments::MomentSet;

pub type C64 = Complex<f64>;

/// Radius of the physical region of `z` for `d = 2` under this normalization.
pub const BLOCH_RADIUS: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub const MIN_PRIOR_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBasis {
    d: usize,
    matrices: Vec<DMatrix<C64>>,
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of parameters, `d² − 1`.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.matrices
    }
}

/// Generalized Gell-Mann matrices scaled to `tr(E_α E_β) = δ_αβ`: the
/// symmetric off-diagonal set, then the antisymmetric set, then the diagonal
/// set. For `d = 2` this is `(σx, σy, σz)/√2`.
pub fn gellmann_basis(d: usize) -> Result<HermitianBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {d}")));
    }
    let zero = || DMatrix::<C64>::zeros(d, d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut sym = Vec::new();
    let mut anti = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            let mut m = zero();
            m[(j, k)] = C64::new(s, 0.0);
            m[(k, j)] = C64::new(s, 0.0);
            sym.push(m);
            let mut m = zero();
            m[(j, k)] = C64::new(0.0, -s);
            m[(k, j)] = C64::new(0.0, s);
            anti.push(m);
        }
    }
    let mut matrices = sym;
    matrices.extend(anti);
    for l in 1..d {
        let c = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = zero();
        for j in 0..l {
            m[(j, j)] = C64::new(c, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) * c, 0.0);
        matrices.push(m);
    }
    Ok(HermitianBasis { d, matrices })
}

fn check_params(z: &DVector<f64>, basis: &HermitianBasis) -> Result<()> {
    if z.len() != basis.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} parameters, got {}",
            basis.len(),
            z.len()
        )));
    }
    Ok(())
}

/// `ρ_z = I/d + Σ_α z_α E_α`; positivity is not enforced.
pub fn density_from_params(z: &DVector<f64>, basis: &HermitianBasis) -> Result<DMatrix<C64>> {
    check_params(z, basis)?;
    let d = basis.d;
    let mut rho = DMatrix::<C64>::identity(d, d) / C64::new(d as f64, 0.0);
    for (e, &za) in basis.matrices.iter().zip(z.iter()) {
        rho += e * C64::new(za, 0.0);
    }
    Ok(rho)
}

/// `z_α = Re tr(E_α ρ)`.
pub fn params_from_density(rho: &DMatrix<C64>, basis: &HermitianBasis) -> Result<DVector<f64>> {
    if rho.shape() != (basis.d, basis.d) {
        return Err(Error::InvalidArgument(format!(
            "density matrix must be {0}×{0}",
            basis.d
        )));
    }
    Ok(DVector::from_iterator(
        basis.len(),
        basis.matrices.iter().map(|e| (e * rho).trace().re),
    ))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Clips the negative eigenvalues of `ρ_z`, rescales to unit trace and
/// returns the parameters of the result.
pub fn project_physical(z: &DVector<f64>, basis: &HermitianBasis) -> Result<DVector<f64>> {
    let rho = density_from_params(z, basis)?;
    let herm = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return Ok(z.clone());
    }
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        basis.d,
        clipped.iter().map(|v| C64::new(v / total, 0.0)),
    ));
    let v = &eig.eigenvectors;
    params_from_density(&(v * diag * v.adjoint()), basis)
}

/// Uniform draw from the solid ball of radius [`BLOCH_RADIUS`].
pub fn sample_bloch_ball<R: Rng + ?Sized>(rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::<f64>::from_fn(3, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            return g * (BLOCH_RADIUS * u.cbrt() / norm);
        }
    }
}

/// Sample mean and covariance (unbiased) of `n_samples` uniform Bloch-ball
/// draws.
pub fn prior_moments_bloch(n_samples: usize, seed: u64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if n_samples < MIN_PRIOR_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PRIOR_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = DVector::zeros(3);
    let mut outer = DMatrix::zeros(3, 3);
    for _ in 0..n_samples {
        let z = sample_bloch_ball(&mut rng);
        outer += &z * z.transpose();
        sum += z;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let cov = (outer - &mean * mean.transpose() * n) / (n - 1.0);
    Ok((mean, symmetrized(&cov)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    /// Uniform over the physical ball (`d = 2`).
    BlochBall,
    /// Gaussian with the given moments, used only when simulating.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c_y0: DMatrix<f64>,
    mean_z: DVector<f64>,
    c_z: DMatrix<f64>,
    prior: PriorKind,
    dimension: Option<usize>,
}

impl TomographyModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c_y0: DMatrix<f64>,
        mean_z: DVector<f64>,
        c_z: DMatrix<f64>,
    ) -> Result<Self> {
        let (k, n) = a.shape();
        if b.ncols() != n || c_y0.shape() != (k, k) || mean_z.len() != n || c_z.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "inconsistent shapes: A is {k}×{n}, B is {}×{}, C_y0 is {}×{}, mean_z has {}, C_z is {}×{}",
                b.nrows(),
                b.ncols(),
                c_y0.nrows(),
                c_y0.ncols(),
                mean_z.len(),
                c_z.nrows(),
                c_z.ncols()
            )));
        }
        for (name, m) in [("C_y0", &c_y0), ("C_z", &c_z)] {
            let sym = symmetrized(m);
            if (m - &sym).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
                return Err(Error::InvalidModel(format!("{name} is not symmetric")));
            }
            let lo = crate::linalg::min_eigenvalue(&sym);
            if lo < -1e-12 * (1.0 + sym.abs().max()) {
                return Err(Error::InvalidModel(format!("{name} has negative eigenvalue {lo}")));
            }
        }
        Ok(Self {
            a,
            b,
            c_y0: symmetrized(&c_y0),
            mean_z,
            c_z: symmetrized(&c_z),
            prior: PriorKind::Explicit,
            dimension: None,
        })
    }

    /// Declares the prior as the uniform Bloch ball; requires 3 parameters.
    pub fn with_bloch_prior(mut self) -> Result<Self> {
        if self.mean_z.len() != 3 {
            return Err(Error::InvalidArgument("the Bloch-ball prior needs d = 2".into()));
        }
        self.prior = PriorKind::BlochBall;
        self.dimension = Some(2);
        Ok(self)
    }

    /// Records the Hilbert-space dimension, checking `d² − 1` parameters.
    pub fn with_dimension(mut self, d: usize) -> Result<Self> {
        if d < 2 || d * d - 1 != self.mean_z.len() {
            return Err(Error::InvalidArgument(format!(
                "dimension {d} does not match {} parameters",
                self.mean_z.len()
            )));
        }
        self.dimension = Some(d);
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c_y0(&self) -> &DMatrix<f64> {
        &self.c_y0
    }

    pub fn mean_z(&self) -> &DVector<f64> {
        &self.mean_z
    }

    pub fn c_z(&self) -> &DMatrix<f64> {
        &self.c_z
    }

    pub fn prior(&self) -> PriorKind {
        self.prior
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    /// Raw order-1 moments of `(x, y)` for the generic estimator.
    pub fn equivalent_moments(&self) -> Result<MomentSet> {
        let k = self.a.nrows();
        let second = &self.c_z + &self.mean_z * self.mean_z.transpose();
        let mean_y = &self.a * &self.mean_z;
        let c_x = &self.b * &second * self.b.transpose();
        let mut c_xy = DMatrix::zeros(self.b.nrows(), k + 1);
        c_xy.set_column(0, &(&self.b * &self.mean_z));
        c_xy.view_mut((0, 1), (self.b.nrows(), k))
            .copy_from(&(&self.b * &second * self.a.transpose()));
        let mut c_y = DMatrix::zeros(k + 1, k + 1);
        c_y[(0, 0)] = 1.0;
        c_y.view_mut((1, 0), (k, 1)).copy_from(&mean_y);
        c_y.view_mut((0, 1), (1, k)).copy_from(&mean_y.transpose());
        c_y.view_mut((1, 1), (k, k))
            .copy_from(&(&self.a * &second * self.a.transpose() + &self.c_y0));
        MomentSet::new(FeatureSet::enumerate(k, 1)?, c_x, c_xy, c_y)
    }

    /// Draws `z` from the prior and a noisy record `y = A·z + y₀`.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        Simulator::new(self).draw(rng)
    }
}

struct Simulator<'a> {
    model: &'a TomographyModel,
    root_z: DMatrix<f64>,
    root_y: DMatrix<f64>,
}

impl<'a> Simulator<'a> {
    fn new(model: &'a TomographyModel) -> Self {
        Self {
            model,
            root_z: psd_sqrt(&model.c_z),
            root_y: psd_sqrt(&model.c_y0),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let m = self.model;
        let z = match m.prior {
            PriorKind::BlochBall => sample_bloch_ball(rng),
            PriorKind::Explicit => {
                let w = DVector::from_fn(m.mean_z.len(), |_, _| StandardNormal.sample(rng));
                &m.mean_z + &self.root_z * w
            }
        };
        let w = DVector::from_fn(m.a.nrows(), |_, _| StandardNormal.sample(rng));
        let y = &m.a * &z + &self.root_y * w;
        (z, y)
    }
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

fn strict_solver(m: &DMatrix<f64>) -> Result<SpdSolver> {
    let solver = SpdSolver::new(m)?;
    if solver.report().regularized {
        return Err(Error::IllConditioned {
            condition: solver.report().condition_estimate,
        });
    }
    Ok(solver)
}

/// `x̌ = offset + gain·y`.
#[derive(Debug, Clone, PartialEq)]
pub struct QstFilter {
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl QstFilter {
    pub fn estimate(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.gain.ncols() {
            return Err(Error::InvalidArgument(format!(
                "record has {} entries, expected {}",
                y.len(),
                self.gain.ncols()
            )));
        }
        Ok(&self.offset + &self.gain * y)
    }
}

/// `h̃₁ = B C_z Aᵀ (A C_z Aᵀ + C_y0)⁻¹` with offset `B⟨z⟩ − h̃₁A⟨z⟩`.
pub fn qst_filter(model: &TomographyModel) -> Result<QstFilter> {
    let innovation = &model.a * &model.c_z * model.a.transpose() + &model.c_y0;
    let solver = strict_solver(&innovation)?;
    let cross = &model.b * &model.c_z * model.a.transpose();
    let gain = solver.solve(&cross.transpose()).transpose();
    let offset = &model.b * &model.mean_z - &gain * (&model.a * &model.mean_z);
    Ok(QstFilter { gain, offset })
}

/// `Σ̃ = B (C_z⁻¹ + Aᵀ C_y0⁻¹ A)⁻¹ Bᵀ`.
pub fn qst_error(model: &TomographyModel) -> Result<ErrorCovariance> {
    let cz_inv = strict_solver(&model.c_z)?.inverse();
    let cy_inv = strict_solver(&model.c_y0)?.inverse();
    let info = cz_inv + model.a.transpose() * cy_inv * &model.a;
    let post = strict_solver(&info)?.inverse();
    Ok(ErrorCovariance {
        sigma: symmetrized(&(&model.b * post * model.b.transpose())),
        order: 1,
        provenance: Provenance::Optimal,
    })
}

/// `B (Aᵀ C_y0⁻¹ A)⁻¹ Bᵀ`, the `C_z → ∞` limit of [`qst_error`].
pub fn minimax_error_bound(model: &TomographyModel) -> Result<DMatrix<f64>> {
    let cy_inv = strict_solver(&model.c_y0)?.inverse();
    let fisher = symmetrized(&(model.a.transpose() * cy_inv * &model.a));
    let n = fisher.nrows();
    let chol = nalgebra::Cholesky::new(fisher.clone())
        .ok_or_else(|| Error::UnboundedBound("the measurements do not determine every parameter".into()))?;
    let lo = crate::linalg::min_eigenvalue(&fisher);
    let hi = fisher.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lo <= 1e-12 * hi {
        return Err(Error::UnboundedBound(format!(
            "information matrix is numerically singular (λ_min = {lo})"
        )));
    }
    let inv = chol.solve(&DMatrix::identity(n, n));
    Ok(symmetrized(&(&model.b * inv * model.b.transpose())))
}

/// `{rows, cols, data}` with `data` in row-major order.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixSpec {
    pub fn to_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Parse(format!(
                "{name}: {}×{} needs {} entries, got {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorSpec {
    /// Moments sampled from the uniform Bloch ball.
    Bloch {
        #[serde(default = "default_prior_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
    Explicit { mean: Vec<f64>, cov: MatrixSpec },
}

fn default_prior_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Configuration file schema:
///
/// ```toml
/// dimension = 2                      # optional; needed for projection
/// records = [[0.1, 0.0, 0.9]]        # optional measured vectors y
///
/// [measurement]                      # A
/// rows = 3
/// cols = 3
/// data = [1.41421356, 0, 0, 0, 1.41421356, 0, 0, 0, 1.41421356]
///
/// [estimand]                         # B, optional (identity)
/// rows = 3
/// cols = 3
/// data = [1, 0, 0, 0, 1, 0, 0, 0, 1]
///
/// [noise]                            # C_y0
/// rows = 3
/// cols = 3
/// data = [0.01, 0, 0, 0, 0.01, 0, 0, 0, 0.01]
///
/// [prior]
/// kind = "bloch"                     # or "explicit" with mean and [prior.cov]
/// samples = 100000
/// seed = 1
///
/// [simulate]                         # optional Monte-Carlo check
/// trials = 100000
/// seed = 2
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    pub dimension: Option<usize>,
    #[serde(default)]
    pub records: Vec<Vec<f64>>,
    pub measurement: MatrixSpec,
    pub estimand: Option<MatrixSpec>,
    pub noise: MatrixSpec,
    pub prior: PriorSpec,
    pub simulate: Option<SimulateSpec>,
}

impl TomographyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn model(&self) -> Result<TomographyModel> {
        let a = self.measurement.to_matrix("measurement")?;
        let n = a.ncols();
        let b = match &self.estimand {
            Some(spec) => spec.to_matrix("estimand")?,
            None => DMatrix::identity(n, n),
        };
        let c_y0 = self.noise.to_matrix("noise")?;
        let model = match &self.prior {
            PriorSpec::Bloch { samples, seed } => {
                let (mean, cov) = prior_moments_bloch(*samples, *seed)?;
                TomographyModel::new(a, b, c_y0, mean, cov)?.with_bloch_prior()?
            }
            PriorSpec::Explicit { mean, cov } => TomographyModel::new(
                a,
                b,
                c_y0,
                DVector::from_column_slice(mean),
                cov.to_matrix("prior.cov")?,
            )?,
        };
        match self.dimension {
            Some(d) => model.with_dimension(d),
            None => Ok(model),
        }
    }
}

/// Per-component mean squared error of `filter` over simulated trials, with
/// its standard error. With `project`, estimates are repaired before scoring,
/// which requires `B = I`.
pub fn simulated_mse(
    model: &TomographyModel,
    filter: &QstFilter,
    trials: usize,
    seed: u64,
    project: Option<&HermitianBasis>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if trials < 2 {
        return Err(Error::InsufficientData { needed: 2, got: trials });
    }
    let m = model.b.nrows();
    if project.is_some() && model.b != DMatrix::identity(m, model.b.ncols()) {
        return Err(Error::InvalidArgument("projection needs the identity estimand".into()));
    }
    let sim = Simulator::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = DVector::zeros(m);
    let mut sum_sq = DVector::zeros(m);
    for _ in 0..trials {
        let (z, y) = sim.draw(&mut rng);
        let mut est = filter.estimate(&y)?;
        if let Some(basis) = project {
            est = project_physical(&est, basis)?;
        }
        let err = (est - &model.b * z).map(|v| v * v);
        sum_sq += err.map(|v| v * v);
        sum += err;
    }
    let n = trials as f64;
    let mse = sum / n;
    let se = DVector::from_fn(m, |i, _| ((sum_sq[i] / n - mse[i] * mse[i]).max(0.0) / (n - 1.0)).sqrt());
    Ok((mse, se))
}
