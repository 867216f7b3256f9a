//! Dispersive qubit readout: a decaying two-level signal in white noise.
//!
//! Under H₁ the record is `y(t) = S·x(t) + noise`, where `x` starts at 1 and
//! decays to 0 at rate `1/T₁`; under H₀ it is noise alone. Noise with power
//! `Π` has per-sample variance `Π/δt` on a grid with step `δt`.
//!
//! The R-optimal linear filter solves
//! `Π h(t) + π₁S² ∫ C_x(t, τ) h(τ) dτ = (S/2)⟨x(t)⟩`. On the grid the kernel
//! `e^{−max(t,τ)/T₁}` factors through cumulative sums, so the default solver
//! is linear in the number of samples; a dense solver is kept for checking.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::detection::{bounds_from_forms, ErrorBounds, Hypothesis, HypothesisMoments};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::grid::TimeGrid;
use crate::linalg::{solve_tridiagonal, SpdSolver};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    t1: f64,
    s: f64,
    pi: f64,
    duration: f64,
    dt: f64,
    pi0: f64,
    pi1: f64,
    len: usize,
}

impl ReadoutModel {
    pub fn new(t1: f64, s: f64, pi: f64, duration: f64, dt: f64, pi0: f64) -> Result<Self> {
        for (name, v) in [("T1", t1), ("S", s), ("Pi", pi), ("T", duration), ("dt", dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::InvalidArgument(format!("pi0 must lie in (0, 1), got {pi0}")));
        }
        if dt > duration {
            return Err(Error::InvalidGrid(format!("dt = {dt} exceeds T = {duration}")));
        }
        let steps = duration / dt;
        let len = steps.round();
        if (steps - len).abs() > 1e-6 {
            return Err(Error::InvalidGrid(format!(
                "T = {duration} is not a whole number of steps dt = {dt}"
            )));
        }
        Ok(Self {
            t1,
            s,
            pi,
            duration,
            dt,
            pi0,
            pi1: 1.0 - pi0,
            len: len as usize,
        })
    }

    /// Model in units `T₁ = Π = 1` with `S = √snr`.
    pub fn from_snr(snr: f64, duration_over_t1: f64, dt_over_t1: f64, pi0: f64) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
        }
        Self::new(1.0, snr.sqrt(), 1.0, duration_over_t1, dt_over_t1, pi0)
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    /// `S²T₁/Π`.
    pub fn snr(&self) -> f64 {
        self.s * self.s * self.t1 / self.pi
    }

    /// Samples per record.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `t_k = k·δt` for `k = 0..T/δt`.
    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(0.0, self.dt, self.len).expect("validated model")
    }

    /// Per-sample noise standard deviation `√(Π/δt)`.
    pub fn noise_std(&self) -> f64 {
        (self.pi / self.dt).sqrt()
    }

    /// `⟨x(t_k)⟩ = e^{−t_k/T₁}` on the model grid.
    pub fn survival(&self) -> Vec<f64> {
        (0..self.len).map(|k| (-(k as f64) * self.dt / self.t1).exp()).collect()
    }
}

/// Mean and covariance of the decaying two-level process on `grid`.
pub fn telegraph_mean_cov(model: &ReadoutModel, grid: &TimeGrid) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if grid.t0() < 0.0 {
        return Err(Error::InvalidArgument(format!("negative grid time {}", grid.t0())));
    }
    let a: Vec<f64> = grid.times().map(|t| (-t / model.t1).exp()).collect();
    let n = a.len();
    let cov = DMatrix::from_fn(n, n, |i, j| a[i.max(j)] - a[i] * a[j]);
    Ok((DVector::from_vec(a), cov))
}

/// Per-trial generator for a derived stream of `seed`.
pub fn trial_rng(seed: u64, trial: u64, hypothesis: Hypothesis) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 1) | hypothesis.index() as u64);
    rng
}

/// Independent seed for an auxiliary batch.
pub fn derived_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Decay time `τ ~ T₁·Exp(1)`; the path is 1 on `t_k < τ`. This has the same
/// law as flipping 1→0 with probability `1 − e^{−δt/T₁}` at every step.
fn decay_time<R: Rng + ?Sized>(model: &ReadoutModel, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    model.t1 * e
}

/// Nonincreasing binary path with `x(0) = 1`.
pub fn simulate_path<R: Rng + ?Sized>(model: &ReadoutModel, rng: &mut R) -> Vec<bool> {
    let tau = decay_time(model, rng);
    (0..model.len).map(|k| (k as f64) * model.dt < tau).collect()
}

/// Noisy record under `hypothesis`.
pub fn simulate_record<R: Rng + ?Sized>(model: &ReadoutModel, hypothesis: Hypothesis, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; model.len];
    fill_record(model, hypothesis, rng, &mut out);
    out
}

fn fill_record<R: Rng + ?Sized>(model: &ReadoutModel, hypothesis: Hypothesis, rng: &mut R, out: &mut [f64]) {
    let tau = match hypothesis {
        Hypothesis::H0 => f64::NEG_INFINITY,
        Hypothesis::H1 => decay_time(model, rng),
    };
    let sigma = model.noise_std();
    for (k, y) in out.iter_mut().enumerate() {
        let w: f64 = StandardNormal.sample(rng);
        let signal = if (k as f64) * model.dt < tau { model.s } else { 0.0 };
        *y = signal + sigma * w;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FredholmMethod {
    /// Tridiagonal reduction plus a rank-one correction, `O(N)`.
    #[default]
    Structured,
    /// Cholesky on the full `N×N` system.
    Dense,
}

/// R-optimal filter `h̃(t_k)` on the model grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FredholmFilter {
    pub grid: TimeGrid,
    pub h: Vec<f64>,
    pub method: FredholmMethod,
}

impl FredholmFilter {
    /// `2Πh̃/S`, which is 1 at `t = 0` in the high-noise limit.
    pub fn normalized(&self, model: &ReadoutModel) -> Vec<f64> {
        let scale = 2.0 * model.pi / model.s;
        self.h.iter().map(|v| v * scale).collect()
    }
}

pub fn solve_fredholm_filter(model: &ReadoutModel) -> Result<FredholmFilter> {
    solve_fredholm_filter_with(model, FredholmMethod::Structured)
}

pub fn solve_fredholm_filter_with(model: &ReadoutModel, method: FredholmMethod) -> Result<FredholmFilter> {
    let h = match method {
        FredholmMethod::Structured => fredholm_structured(model)?,
        FredholmMethod::Dense => fredholm_dense(model)?,
    };
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    Ok(FredholmFilter {
        grid: model.grid(),
        h,
        method,
    })
}

/// `c = π₁S²δt`, the weight of the covariance term in the discrete system.
fn kernel_weight(model: &ReadoutModel) -> f64 {
    model.pi1 * model.s * model.s * model.dt
}

/// Solves `(ΠI + cK − c·aaᵀ)h = (S/2)a` with `K_ij = a_max(i,j)`.
///
/// `K = U·D·Uᵀ` with `U` upper-triangular ones and `d_k = a_k − a_{k+1}`, and
/// `U⁻¹U⁻ᵀ` is the tridiagonal second-difference matrix `T`. Hence
/// `(ΠI + cK)⁻¹a = U⁻ᵀ(ΠT + cD)⁻¹U⁻¹a`; Sherman–Morrison handles `aaᵀ`.
fn fredholm_structured(model: &ReadoutModel) -> Result<Vec<f64>> {
    let a = model.survival();
    let n = a.len();
    let c = kernel_weight(model);
    let d: Vec<f64> = (0..n).map(|k| a[k] - a.get(k + 1).copied().unwrap_or(0.0)).collect();
    let diag: Vec<f64> = (0..n)
        .map(|k| model.pi * if k + 1 < n { 2.0 } else { 1.0 } + c * d[k])
        .collect();
    let off = vec![-model.pi; n.saturating_sub(1)];
    // U⁻¹a is exactly d.
    let g = solve_tridiagonal(&diag, &off, &d)?;
    let u: Vec<f64> = (0..n).map(|k| g[k] - if k > 0 { g[k - 1] } else { 0.0 }).collect();
    let au: f64 = a.iter().zip(&u).map(|(x, y)| x * y).sum();
    let denom = 1.0 - c * au;
    if !(denom > 0.0) {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let scale = 0.5 * model.s / denom;
    Ok(u.into_iter().map(|v| v * scale).collect())
}

fn fredholm_dense(model: &ReadoutModel) -> Result<Vec<f64>> {
    let (a, cov) = telegraph_mean_cov(model, &model.grid())?;
    let n = a.len();
    let system = cov * kernel_weight(model) + DMatrix::identity(n, n) * model.pi;
    let solver = SpdSolver::new(&system)?;
    Ok(solver.solve_vec(&(a * (0.5 * model.s))).iter().copied().collect())
}

/// Max-norm residual of the discretized integral equation relative to the
/// max norm of its right-hand side, evaluated by direct summation.
pub fn fredholm_residual(model: &ReadoutModel, filter: &FredholmFilter) -> Result<f64> {
    check_len(model, filter.h.len())?;
    let a = model.survival();
    let c = kernel_weight(model);
    let h = &filter.h;
    let worst = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let conv: f64 = (0..a.len()).map(|j| (a[i.max(j)] - a[i] * a[j]) * h[j]).sum();
            (model.pi * h[i] + c * conv - 0.5 * model.s * a[i]).abs()
        })
        .reduce(|| 0.0, f64::max);
    let rhs = a.iter().fold(0.0f64, |m, v| m.max((0.5 * model.s * v).abs()));
    Ok(worst / rhs)
}

fn check_len(model: &ReadoutModel, len: usize) -> Result<()> {
    if len != model.len {
        return Err(Error::InvalidArgument(format!(
            "expected {} samples on the model grid, got {len}",
            model.len
        )));
    }
    Ok(())
}

/// First time at which `values` drops to `values[0]/e`, linearly
/// interpolated; `None` if it never does.
pub fn decay_time_1e(values: &[f64], dt: f64) -> Option<f64> {
    let target = values.first()? / std::f64::consts::E;
    values.windows(2).enumerate().find_map(|(k, w)| {
        (w[1] <= target).then(|| {
            let frac = if w[0] == w[1] { 0.0 } else { (w[0] - target) / (w[0] - w[1]) };
            (k as f64 + frac) * dt
        })
    })
}

/// Conditional statistics of the raw samples, feature `y_k = y(t_k)`. Dense,
/// so only practical on short grids.
pub fn readout_hypothesis_moments(model: &ReadoutModel) -> Result<HypothesisMoments> {
    let (a, cov) = telegraph_mean_cov(model, &model.grid())?;
    let n = a.len();
    let noise = DMatrix::identity(n, n) * (model.pi / model.dt);
    HypothesisMoments::new(
        FeatureSet::enumerate(n, 1)?,
        DVector::zeros(n),
        &a * model.s,
        noise.clone(),
        cov * (model.s * model.s) + noise,
        model.pi0,
        model.pi1,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutBounds {
    pub q: f64,
    /// `R` evaluated at the given filter.
    pub r: f64,
    /// `1/(HᵀΔ)`, equal to `R` at the R-optimal filter.
    pub r_tilde: f64,
}

/// `Q` and `R` for a filter on the model grid, using `H_k = δt·h_k`.
pub fn readout_bounds(model: &ReadoutModel, filter: &FredholmFilter) -> Result<ReadoutBounds> {
    check_len(model, filter.h.len())?;
    let a = model.survival();
    let dt = model.dt;
    let h = &filter.h;
    let signal = 0.5 * model.s * dt * a.iter().zip(h).map(|(x, y)| x * y).sum::<f64>();
    let var0 = model.pi * dt * h.iter().map(|v| v * v).sum::<f64>();
    // hᵀ(K − aaᵀ)h with K_ij = a_max(i,j) = Σ_{m ≥ max(i,j)} (a_m − a_{m+1}).
    let mut prefix = 0.0;
    let mut quad = 0.0;
    for k in 0..a.len() {
        prefix += h[k];
        let d = a[k] - a.get(k + 1).copied().unwrap_or(0.0);
        quad += d * prefix * prefix;
    }
    let ah: f64 = a.iter().zip(h).map(|(x, y)| x * y).sum();
    let var1 = var0 + model.s * model.s * dt * dt * (quad - ah * ah);
    let ErrorBounds { q, r } = bounds_from_forms(var0, var1, signal, model.pi0, model.pi1)?;
    Ok(ReadoutBounds {
        q,
        r,
        r_tilde: 1.0 / signal,
    })
}

/// `λ̃ = Σ_k δt·h̃(t_k)·[y(t_k) − (S/2)⟨x(t_k)⟩]`.
pub fn r_optimal_statistic(filter: &FredholmFilter, model: &ReadoutModel, record: &[f64]) -> Result<f64> {
    check_len(model, filter.h.len())?;
    check_len(model, record.len())?;
    Ok(RoptStatistic::new(model, filter.clone())?.value(record))
}

/// Log-likelihood ratio `λ_o` with explicit-Euler, left-endpoint Itô sums.
pub fn lrt_statistic(model: &ReadoutModel, record: &[f64]) -> Result<f64> {
    check_len(model, record.len())?;
    Ok(LrtStatistic::new(model).value(record))
}

/// Exact log-likelihood ratio of the sampled record under the discrete-time
/// decay chain, for cross-checking [`lrt_statistic`].
pub fn exact_lrt_statistic(model: &ReadoutModel, record: &[f64]) -> Result<f64> {
    check_len(model, record.len())?;
    Ok(ExactLrtStatistic::new(model).value(record))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// A scalar test statistic with its own decision threshold.
pub trait Statistic: Sync {
    fn value(&self, record: &[f64]) -> f64;
    fn threshold(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct RoptStatistic {
    filter: FredholmFilter,
    midpoint: Vec<f64>,
    dt: f64,
    threshold: f64,
}

impl RoptStatistic {
    pub fn new(model: &ReadoutModel, filter: FredholmFilter) -> Result<Self> {
        check_len(model, filter.h.len())?;
        let midpoint = model.survival().into_iter().map(|v| 0.5 * model.s * v).collect();
        Ok(Self {
            filter,
            midpoint,
            dt: model.dt,
            threshold: 0.0,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn filter(&self) -> &FredholmFilter {
        &self.filter
    }
}

impl Statistic for RoptStatistic {
    fn value(&self, record: &[f64]) -> f64 {
        let sum: f64 = self
            .filter
            .h
            .iter()
            .zip(record)
            .zip(&self.midpoint)
            .map(|((h, y), m)| h * (y - m))
            .sum();
        self.dt * sum
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Tracks `ℓ = ln(p₀/p₁)` instead of `p₀` and `p₁`, so `x̌ = 1/(1 + e^ℓ)` stays
/// finite however large `p₁` grows. With `dη = y·δt` the steps
/// `p₁' = p₁·e^{(S/Π)dη − δt(S²/2Π + 1/T₁)}` and `p₀' = p₀ + (δt/T₁)p₁` give
/// `e^ℓ' = (e^ℓ + δt/T₁)·e^{−(S/Π)dη + δt(S²/2Π + 1/T₁)}`.
#[derive(Debug, Clone, Copy)]
pub struct LrtStatistic {
    gain: f64,
    penalty: f64,
    ln_jump: f64,
    drift: f64,
    dt: f64,
    threshold: f64,
}

impl LrtStatistic {
    pub fn new(model: &ReadoutModel) -> Self {
        let ratio = model.s / model.pi;
        Self {
            gain: ratio,
            penalty: 0.5 * model.s * ratio,
            ln_jump: (model.dt / model.t1).ln(),
            drift: model.dt * (0.5 * model.s * ratio + 1.0 / model.t1),
            dt: model.dt,
            threshold: (model.pi0 / model.pi1).ln(),
        }
    }
}

impl Statistic for LrtStatistic {
    fn value(&self, record: &[f64]) -> f64 {
        let mut lambda = 0.0;
        let mut ell = f64::NEG_INFINITY;
        for &y in record {
            let x = 1.0 / (1.0 + ell.exp());
            let deta = y * self.dt;
            lambda += self.gain * x * deta - self.penalty * x * x * self.dt;
            ell = log_add_exp(ell, self.ln_jump) - self.gain * deta + self.drift;
        }
        lambda
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Sums the likelihood of every decay step in the log domain:
/// `la` is the log weight of paths still excited, `lb` of paths already decayed.
#[derive(Debug, Clone, Copy)]
pub struct ExactLrtStatistic {
    gain: f64,
    offset: f64,
    ln_stay: f64,
    ln_decay: f64,
    threshold: f64,
}

impl ExactLrtStatistic {
    pub fn new(model: &ReadoutModel) -> Self {
        let q = (-model.dt / model.t1).exp();
        Self {
            gain: model.s * model.dt / model.pi,
            offset: model.s * model.s * model.dt / (2.0 * model.pi),
            ln_stay: q.ln(),
            ln_decay: (-(-model.dt / model.t1).exp_m1()).ln(),
            threshold: (model.pi0 / model.pi1).ln(),
        }
    }
}

impl Statistic for ExactLrtStatistic {
    fn value(&self, record: &[f64]) -> f64 {
        let mut la = 0.0;
        let mut lb = f64::NEG_INFINITY;
        for &y in record {
            let excited = la + self.gain * y - self.offset;
            lb = log_add_exp(lb, excited + self.ln_decay);
            la = excited + self.ln_stay;
        }
        log_add_exp(la, lb)
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloResult {
    /// Total records, split evenly between the hypotheses.
    pub trials: usize,
    pub errors0: usize,
    pub errors1: usize,
    pub pe_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl MonteCarloResult {
    /// Prior-weighted estimate with a Wald interval on the weighted sum.
    pub fn from_counts(errors0: usize, errors1: usize, per_hypothesis: usize, pi0: f64, pi1: f64, seed: u64) -> Self {
        let n = per_hypothesis as f64;
        let (p0, p1) = (errors0 as f64 / n, errors1 as f64 / n);
        let pe_hat = pi0 * p0 + pi1 * p1;
        let se = ((pi0 * pi0 * p0 * (1.0 - p0) + pi1 * pi1 * p1 * (1.0 - p1)) / n).sqrt();
        Self {
            trials: 2 * per_hypothesis,
            errors0,
            errors1,
            pe_hat,
            ci_low: (pe_hat - Z_95 * se).max(0.0),
            ci_high: (pe_hat + Z_95 * se).min(1.0),
            seed,
        }
    }

    pub fn standard_error(&self) -> f64 {
        (self.ci_high - self.ci_low).max(0.0) / (2.0 * Z_95)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

pub const MIN_TRIALS: usize = 1000;

/// Statistic values on simulated records, `values[hypothesis][statistic][trial]`.
/// Every statistic sees the same records.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSamples {
    pub per_hypothesis: usize,
    pub seed: u64,
    pub values: [Vec<Vec<f64>>; 2],
}

impl StatisticSamples {
    pub fn errors(&self, statistic: usize, threshold: f64) -> (usize, usize) {
        let e0 = self.values[0][statistic].iter().filter(|&&v| v >= threshold).count();
        let e1 = self.values[1][statistic].iter().filter(|&&v| v < threshold).count();
        (e0, e1)
    }

    pub fn result(&self, statistic: usize, threshold: f64, pi0: f64, pi1: f64) -> MonteCarloResult {
        let (e0, e1) = self.errors(statistic, threshold);
        MonteCarloResult::from_counts(e0, e1, self.per_hypothesis, pi0, pi1, self.seed)
    }
}

fn per_hypothesis(trials: usize) -> Result<usize> {
    if trials < MIN_TRIALS || trials % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "trials must be even and at least {MIN_TRIALS}, got {trials}"
        )));
    }
    Ok(trials / 2)
}

/// Simulates `trials/2` records per hypothesis, each from its own derived
/// stream, and evaluates every statistic on each record.
pub fn simulate_statistics(
    model: &ReadoutModel,
    statistics: &[&dyn Statistic],
    trials: usize,
    seed: u64,
) -> Result<StatisticSamples> {
    let per = per_hypothesis(trials)?;
    let run = |hypothesis: Hypothesis| -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..per)
            .into_par_iter()
            .map_init(
                || vec![0.0; model.len],
                |record, trial| {
                    let mut rng = trial_rng(seed, trial as u64, hypothesis);
                    fill_record(model, hypothesis, &mut rng, record);
                    statistics.iter().map(|s| s.value(record)).collect()
                },
            )
            .collect();
        (0..statistics.len())
            .map(|i| rows.iter().map(|r| r[i]).collect())
            .collect()
    };
    Ok(StatisticSamples {
        per_hypothesis: per,
        seed,
        values: [run(Hypothesis::H0), run(Hypothesis::H1)],
    })
}

/// Monte-Carlo error probability of one statistic at its own threshold.
pub fn monte_carlo_pe(statistic: &dyn Statistic, model: &ReadoutModel, trials: usize, seed: u64) -> Result<MonteCarloResult> {
    let samples = simulate_statistics(model, &[statistic], trials, seed)?;
    Ok(samples.result(0, statistic.threshold(), model.pi0, model.pi1))
}

/// `{0} ∪ {±scale·10^e}` for `points` exponents evenly spaced in `[−3, 0.5]`.
pub fn default_threshold_grid(scale: f64, points: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    for i in 0..points {
        let e = if points == 1 { 0.5 } else { -3.0 + 3.5 * i as f64 / (points - 1) as f64 };
        let v = scale * 10f64.powf(e);
        grid.push(v);
        grid.push(-v);
    }
    grid.sort_by(f64::total_cmp);
    grid
}

/// Scale for [`default_threshold_grid`]: `√(HᵀMH)` with `M = π₀C₀ + π₁C₁`.
pub fn threshold_scale(model: &ReadoutModel, filter: &FredholmFilter) -> Result<f64> {
    let b = readout_bounds(model, filter)?;
    Ok(b.r.sqrt() / b.r_tilde)
}

/// Grid point with the lowest error count on `samples`; ties go to the point
/// closest to 0, then the smaller one.
pub fn best_threshold(samples: &StatisticSamples, statistic: usize, grid: &[f64], pi0: f64, pi1: f64) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("threshold grid is empty".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let pe = samples.result(statistic, t, pi0, pi1).pe_hat;
        let better = match best {
            None => true,
            Some((bt, bp)) => pe < bp || (pe == bp && (t.abs(), t) < (bt.abs(), bt)),
        };
        if better {
            best = Some((t, pe));
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedThreshold {
    pub threshold: f64,
    /// Error probability on the tuning batch.
    pub tuning_pe: f64,
    /// Evaluation on the independent batch.
    pub result: MonteCarloResult,
}

/// Picks the threshold on a held-out batch drawn from a derived seed and
/// evaluates it on the batch for `seed`.
pub fn tune_threshold(
    statistic: &dyn Statistic,
    model: &ReadoutModel,
    trials: usize,
    grid: &[f64],
    seed: u64,
) -> Result<TunedThreshold> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("threshold grid is empty".into()));
    }
    let held_out = simulate_statistics(model, &[statistic], trials, tuning_seed(seed))?;
    let evaluation = simulate_statistics(model, &[statistic], trials, seed)?;
    tune_on_samples(&held_out, &evaluation, 0, grid, model)
}

pub fn tuning_seed(seed: u64) -> u64 {
    derived_seed(seed, 1)
}

pub fn tune_on_samples(
    held_out: &StatisticSamples,
    evaluation: &StatisticSamples,
    statistic: usize,
    grid: &[f64],
    model: &ReadoutModel,
) -> Result<TunedThreshold> {
    let (threshold, tuning_pe) = best_threshold(held_out, statistic, grid, model.pi0, model.pi1)?;
    Ok(TunedThreshold {
        threshold,
        tuning_pe,
        result: evaluation.result(statistic, threshold, model.pi0, model.pi1),
    })
}
