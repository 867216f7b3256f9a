//! Polynomial detection rules with guaranteed error-probability bounds.
//!
//! A rule is the threshold test `λ(y) = h0 + HᵀY ≥ threshold ⇒ H₁` over the
//! non-constant features `Y`. With `h0 = −HᵀȲ` the conditional means of `λ`
//! are `±HᵀΔ`, and the one-sided Chebyshev (Cantelli) inequality bounds the
//! average error probability by `Q(H) ≤ R(H)`. The R-optimal coefficients
//! are `H̃ = (π₀C₀ + π₁C₁)⁻¹Δ`.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::parse_meta;
use crate::features::{FeatureIndex, FeatureSet};
use crate::linalg::{symmetrized, SolveReport, SpdSolver};
use crate::moments::MomentSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

fn check_priors(pi0: f64, pi1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&pi0) || !(0.0..=1.0).contains(&pi1) || (pi0 + pi1 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "priors must lie in [0, 1] and sum to 1, got {pi0} and {pi1}"
        )));
    }
    Ok(())
}

/// Conditional feature statistics under the two hypotheses. The constant
/// feature is excluded from every vector and matrix here.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisMoments {
    features: FeatureSet,
    mean0: DVector<f64>,
    mean1: DVector<f64>,
    c0: DMatrix<f64>,
    c1: DMatrix<f64>,
    pi0: f64,
    pi1: f64,
}

impl HypothesisMoments {
    pub fn new(
        features: FeatureSet,
        mean0: DVector<f64>,
        mean1: DVector<f64>,
        c0: DMatrix<f64>,
        c1: DMatrix<f64>,
        pi0: f64,
        pi1: f64,
    ) -> Result<Self> {
        check_priors(pi0, pi1)?;
        let m = features.len() - 1;
        if mean0.len() != m || mean1.len() != m || c0.shape() != (m, m) || c1.shape() != (m, m) {
            return Err(Error::InvalidArgument(format!(
                "hypothesis statistics must have {m} non-constant features"
            )));
        }
        if mean0 == mean1 {
            return Err(Error::IndistinguishableHypotheses);
        }
        Ok(Self {
            features,
            mean0,
            mean1,
            c0: symmetrized(&c0),
            c1: symmetrized(&c1),
            pi0,
            pi1,
        })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn mean0(&self) -> &DVector<f64> {
        &self.mean0
    }

    pub fn mean1(&self) -> &DVector<f64> {
        &self.mean1
    }

    pub fn c0(&self) -> &DMatrix<f64> {
        &self.c0
    }

    pub fn c1(&self) -> &DMatrix<f64> {
        &self.c1
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    /// `Δ = (⟨Y⟩₁ − ⟨Y⟩₀) / 2`.
    pub fn delta(&self) -> DVector<f64> {
        (&self.mean1 - &self.mean0) * 0.5
    }

    /// `Ȳ = (⟨Y⟩₀ + ⟨Y⟩₁) / 2`.
    pub fn midpoint(&self) -> DVector<f64> {
        (&self.mean0 + &self.mean1) * 0.5
    }

    /// `π₀C₀ + π₁C₁`.
    pub fn mixture(&self) -> DMatrix<f64> {
        &self.c0 * self.pi0 + &self.c1 * self.pi1
    }
}

/// Centers two raw moment sets into conditional feature statistics.
pub fn hypothesis_stats(m0: &MomentSet, m1: &MomentSet, pi0: f64, pi1: f64) -> Result<HypothesisMoments> {
    if m0.features() != m1.features() {
        return Err(Error::InvalidArgument("moment sets use different feature sets".into()));
    }
    let m = m0.features().len() - 1;
    let center = |ms: &MomentSet| {
        let mean = ms.mean_y().rows(1, m).into_owned();
        let raw = ms.c_y().view((1, 1), (m, m)).into_owned();
        let cov = raw - &mean * mean.transpose();
        (mean, cov)
    };
    let (mean0, c0) = center(m0);
    let (mean1, c1) = center(m1);
    HypothesisMoments::new(m0.features().clone(), mean0, mean1, c0, c1, pi0, pi1)
}

/// Threshold test on `λ(y) = h0 + HᵀY`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRule {
    features: FeatureSet,
    h: DVector<f64>,
    h0: f64,
    threshold: f64,
    delta: DVector<f64>,
    midpoint: DVector<f64>,
}

impl DetectionRule {
    /// Builds a centered rule (`h0 = −HᵀȲ`); requires `HᵀΔ > 0`.
    pub fn centered(h: DVector<f64>, hm: &HypothesisMoments) -> Result<Self> {
        let midpoint = hm.midpoint();
        let h0 = -h.dot(&midpoint);
        Self::new(hm.features().clone(), h, h0, 0.0, hm.delta(), midpoint)
    }

    pub fn new(
        features: FeatureSet,
        h: DVector<f64>,
        h0: f64,
        threshold: f64,
        delta: DVector<f64>,
        midpoint: DVector<f64>,
    ) -> Result<Self> {
        let m = features.len() - 1;
        if h.len() != m || delta.len() != m || midpoint.len() != m {
            return Err(Error::InvalidArgument(format!(
                "rule vectors must have {m} entries"
            )));
        }
        if h.iter().chain(delta.iter()).chain(midpoint.iter()).any(|v| !v.is_finite())
            || !h0.is_finite()
            || !threshold.is_finite()
        {
            return Err(Error::InvalidRule("non-finite coefficients".into()));
        }
        let signal = h.dot(&delta);
        if !(signal > 0.0) {
            return Err(Error::InvalidRule(format!("HᵀΔ = {signal} must be positive")));
        }
        Ok(Self {
            features,
            h,
            h0,
            threshold,
            delta,
            midpoint,
        })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn midpoint(&self) -> &DVector<f64> {
        &self.midpoint
    }

    /// `HᵀΔ`, the conditional mean of `λ` under H₁.
    pub fn signal(&self) -> f64 {
        self.h.dot(&self.delta)
    }

    /// The same filter with a different threshold.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self {
            threshold,
            ..self.clone()
        }
    }

    /// Scales `H`, `h0` and the threshold by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {c}")));
        }
        Self::new(
            self.features.clone(),
            &self.h * c,
            self.h0 * c,
            self.threshold * c,
            self.delta.clone(),
            self.midpoint.clone(),
        )
    }

    pub fn statistic(&self, record: &[f64]) -> Result<f64> {
        let y = self.features.evaluate_nonconstant(record)?;
        Ok(self.h0 + self.h.dot(&y))
    }

    /// H₁ iff `λ ≥ threshold`.
    pub fn decide(&self, record: &[f64]) -> Result<Hypothesis> {
        Ok(decide_statistic(self.statistic(record)?, self.threshold))
    }

    /// `# h0=..,threshold=..,r_tilde=..,q=..,K=..,P=..` followed by
    /// `feature,coefficient,delta,midpoint` rows.
    pub fn write_csv<W: Write>(&self, mut writer: W, bounds: Option<ErrorBounds>) -> Result<()> {
        let (q, r) = bounds.map_or((f64::NAN, f64::NAN), |b| (b.q, b.r));
        writeln!(
            writer,
            "# h0={},threshold={},r_tilde={},q={},K={},P={}",
            self.h0,
            self.threshold,
            r,
            q,
            self.features.record_len(),
            self.features.max_order()
        )?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "coefficient", "delta", "midpoint"])?;
        for (i, feature) in self.features.indices()[1..].iter().enumerate() {
            w.write_record([
                feature.to_string(),
                self.h[i].to_string(),
                self.delta[i].to_string(),
                self.midpoint[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta = parse_meta(&first, &["h0", "threshold", "K", "P"])?;
        let features = FeatureSet::enumerate(meta[2] as usize, meta[3] as usize)?;
        let m = features.len() - 1;
        let mut h = DVector::from_element(m, f64::NAN);
        let mut delta = DVector::from_element(m, f64::NAN);
        let mut midpoint = DVector::from_element(m, f64::NAN);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for record in rdr.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse(format!("expected 4 fields, got {}", record.len())));
            }
            let feature: FeatureIndex = record[0].parse()?;
            let pos = features
                .position(&feature)
                .filter(|&p| p > 0)
                .ok_or_else(|| Error::Parse(format!("unexpected feature {feature}")))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number {s:?}")))
            };
            h[pos - 1] = parse(&record[1])?;
            delta[pos - 1] = parse(&record[2])?;
            midpoint[pos - 1] = parse(&record[3])?;
        }
        if h.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("rule CSV is missing coefficients".into()));
        }
        Self::new(features, h, meta[0], meta[1], delta, midpoint)
    }
}

/// H₁ iff `statistic ≥ threshold`.
pub fn decide_statistic(statistic: f64, threshold: f64) -> Hypothesis {
    if statistic >= threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// The R-optimal rule `H̃ = (π₀C₀ + π₁C₁)⁻¹Δ` and its bound
/// `R̃ = 1 / (Δᵀ(π₀C₀ + π₁C₁)⁻¹Δ)`.
pub fn r_optimal_rule(hm: &HypothesisMoments) -> Result<(DetectionRule, f64)> {
    let (rule, r_tilde, _) = r_optimal_rule_with_report(hm)?;
    Ok((rule, r_tilde))
}

pub fn r_optimal_rule_with_report(hm: &HypothesisMoments) -> Result<(DetectionRule, f64, SolveReport)> {
    let solver = SpdSolver::new(&hm.mixture())?;
    let delta = hm.delta();
    let mut h = solver.solve_vec(&delta);
    if h.dot(&delta) < 0.0 {
        // Only reachable when the ridge perturbs an indefinite mixture.
        h = -h;
    }
    let signal = h.dot(&delta);
    if !(signal > 0.0) {
        return Err(Error::IllConditioned {
            condition: solver.report().condition_estimate,
        });
    }
    let rule = DetectionRule::centered(h, hm)?;
    Ok((rule, 1.0 / signal, solver.report()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    /// Cantelli bound averaged over the hypotheses.
    pub q: f64,
    /// Quadratic bound `Hᵀ(π₀C₀ + π₁C₁)H / (HᵀΔ)²`.
    pub r: f64,
}

/// `Q(H)` and `R(H)` from the quadratic forms `HᵀC₀H`, `HᵀC₁H` and `HᵀΔ`.
pub fn bounds_from_forms(var0: f64, var1: f64, signal: f64, pi0: f64, pi1: f64) -> Result<ErrorBounds> {
    if !(signal > 0.0) {
        return Err(Error::InvalidRule(format!("HᵀΔ = {signal} must be positive")));
    }
    let d2 = signal * signal;
    let term = |v: f64| v / (v + d2);
    Ok(ErrorBounds {
        q: pi0 * term(var0) + pi1 * term(var1),
        r: (pi0 * var0 + pi1 * var1) / d2,
    })
}

pub fn error_bounds(rule: &DetectionRule, hm: &HypothesisMoments) -> Result<ErrorBounds> {
    if rule.features() != hm.features() {
        return Err(Error::InvalidArgument("rule and statistics use different feature sets".into()));
    }
    let h = rule.coefficients();
    let signal = h.dot(&hm.delta());
    let var0 = h.dot(&(hm.c0() * h));
    let var1 = h.dot(&(hm.c1() * h));
    bounds_from_forms(var0, var1, signal, hm.pi0(), hm.pi1())
}

/// One-sided Chebyshev bound `Pr(λ ≥ 0) ≤ var / (var + mean²)` for a
/// statistic with negative mean.
pub fn cantelli_bound(mean: f64, variance: f64) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidArgument(format!("variance must be nonnegative, got {variance}")));
    }
    if !(mean < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "the one-sided bound needs a negative mean, got {mean}"
        )));
    }
    Ok(variance / (variance + mean * mean))
}
