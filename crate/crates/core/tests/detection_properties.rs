use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use volterra::detection::{
    error_bounds, r_optimal_rule, DetectionRule, Hypothesis, HypothesisMoments,
};
use volterra::readout::{
    best_threshold, readout_hypothesis_moments, simulate_record, trial_rng, ReadoutModel,
    StatisticSamples,
};
use volterra::FeatureSet;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_hypotheses(seed: u64, n: usize) -> HypothesisMoments {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean0 = DVector::from_fn(n, |_, _| normal(&mut rng));
    let mean1 = DVector::from_fn(n, |_, _| normal(&mut rng));
    let c0 = spd(&mut rng, n);
    let c1 = spd(&mut rng, n);
    HypothesisMoments::new(FeatureSet::enumerate(n, 1).unwrap(), mean0, mean1, c0, c1, 0.4, 0.6).unwrap()
}

#[test]
fn equal_covariances_give_matched_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = spd(&mut rng, 4);
    let m0 = DVector::zeros(4);
    let m1 = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
    let hm = HypothesisMoments::new(FeatureSet::enumerate(4, 1).unwrap(), m0, m1.clone(), c.clone(), c.clone(), 0.5, 0.5).unwrap();
    let (rule, _) = r_optimal_rule(&hm).unwrap();
    let matched = c.clone().cholesky().unwrap().solve(&(m1 * 0.5));
    assert!((rule.coefficients() - matched).amax() < 1e-12);
}

#[test]
fn r_optimal_rule_minimizes_r() {
    let hm = random_hypotheses(2, 5);
    let (best, r_tilde) = r_optimal_rule(&hm).unwrap();
    let best_r = error_bounds(&best, &hm).unwrap().r;
    assert!((best_r - r_tilde).abs() < 1e-10 * r_tilde);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let delta = hm.delta();
    for _ in 0..100 {
        let mut h = DVector::from_fn(5, |_, _| normal(&mut rng));
        if h.dot(&delta) < 0.0 {
            h = -h;
        }
        let rule = DetectionRule::centered(h, &hm).unwrap();
        let b = error_bounds(&rule, &hm).unwrap();
        assert!(b.r >= r_tilde * (1.0 - 1e-12));
    }
}

#[test]
fn gaussian_shift_bounds_and_truth() {
    let hm = HypothesisMoments::new(
        FeatureSet::enumerate(1, 1).unwrap(),
        DVector::from_element(1, -1.0),
        DVector::from_element(1, 1.0),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        0.5,
        0.5,
    )
    .unwrap();
    let (rule, _) = r_optimal_rule(&hm).unwrap();
    let b = error_bounds(&rule, &hm).unwrap();
    let truth = Normal::standard().cdf(-1.0);
    assert!((truth - 0.1587).abs() < 1e-4);
    assert!(truth <= b.q && (b.q - 0.5).abs() < 1e-15 && (b.r - 1.0).abs() < 1e-15);

    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut errors = [0usize; 2];
    for (hyp, mean) in [(0, -1.0), (1, 1.0)] {
        for _ in 0..n {
            let y = mean + normal(&mut rng);
            let d = rule.decide(&[y]).unwrap();
            errors[hyp] += (d.index() != hyp) as usize;
        }
    }
    let pe = 0.5 * (errors[0] + errors[1]) as f64 / n as f64;
    let se = (0.5 * truth * (1.0 - truth) / n as f64).sqrt();
    assert!((pe - truth).abs() < 5.0 * se, "{pe}");
    assert!(pe <= b.q + 5.0 * se);
}

#[test]
fn symmetric_shift_tunes_to_zero() {
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draw = |mean: f64| (0..n).map(|_| mean + normal(&mut rng)).collect::<Vec<f64>>();
    let samples = StatisticSamples {
        per_hypothesis: n,
        seed: 5,
        values: [vec![draw(-1.0)], vec![draw(1.0)]],
    };
    let grid: Vec<f64> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect();
    let (t, _) = best_threshold(&samples, 0, &grid, 0.5, 0.5).unwrap();
    assert!(t.abs() <= 0.25, "{t}");
}

#[test]
fn readout_delta_is_half_signal() {
    let m = ReadoutModel::from_snr(10.0, 2.0, 0.1, 0.5).unwrap();
    let hm = readout_hypothesis_moments(&m).unwrap();
    for (k, d) in hm.delta().iter().enumerate() {
        let expected = 0.5 * m.s() * (-(k as f64) * 0.1).exp();
        assert!((d - expected).abs() < 1e-14);
    }
}

#[test]
fn readout_monte_carlo_respects_bounds() {
    let m = ReadoutModel::from_snr(30.0, 2.0, 0.1, 0.5).unwrap();
    let hm = readout_hypothesis_moments(&m).unwrap();
    let (rule, r_tilde) = r_optimal_rule(&hm).unwrap();
    let b = error_bounds(&rule, &hm).unwrap();
    assert!(b.q <= r_tilde);
    let n = 20_000u64;
    let mut errors = [0usize; 2];
    for hyp in [Hypothesis::H0, Hypothesis::H1] {
        for trial in 0..n {
            let mut rng = trial_rng(6, trial, hyp);
            let y = simulate_record(&m, hyp, &mut rng);
            errors[hyp.index()] += (rule.decide(&y).unwrap() != hyp) as usize;
        }
    }
    let (p0, p1) = (errors[0] as f64 / n as f64, errors[1] as f64 / n as f64);
    let pe = 0.5 * (p0 + p1);
    let se = (0.25 * (p0 * (1.0 - p0) + p1 * (1.0 - p1)) / n as f64).sqrt();
    assert!(pe <= b.q + 5.0 * se, "{pe} vs {}", b.q);
}

proptest! {
    #[test]
    fn q_never_exceeds_r(seed in any::<u64>(), n in 1usize..6) {
        let hm = random_hypotheses(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut h = DVector::from_fn(n, |_, _| normal(&mut rng));
        if h.dot(&hm.delta()) < 0.0 {
            h = -h;
        }
        prop_assume!(h.dot(&hm.delta()) > 1e-9);
        let rule = DetectionRule::centered(h, &hm).unwrap();
        let b = error_bounds(&rule, &hm).unwrap();
        prop_assert!(b.q <= b.r * (1.0 + 1e-12));
        prop_assert!(b.q >= 0.0 && b.q <= 1.0);
    }

    #[test]
    fn stationarity(seed in any::<u64>(), n in 1usize..6) {
        let hm = random_hypotheses(seed, n);
        let (rule, _) = r_optimal_rule(&hm).unwrap();
        let lhs = hm.mixture() * rule.coefficients();
        let delta = hm.delta();
        prop_assert!((lhs - &delta).amax() <= 1e-8 * delta.amax());
    }

    #[test]
    fn decisions_are_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3, t in -2.0f64..2.0) {
        let hm = random_hypotheses(seed, 3);
        let (rule, _) = r_optimal_rule(&hm).unwrap();
        let rule = rule.with_threshold(t);
        let scaled = rule.scaled(c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..50 {
            let y: Vec<f64> = (0..3).map(|_| 3.0 * normal(&mut rng)).collect();
            let a = rule.statistic(&y).unwrap() - rule.threshold();
            // Skip records that sit on the boundary up to rounding.
            if a.abs() < 1e-9 * (1.0 + rule.threshold().abs()) {
                continue;
            }
            prop_assert_eq!(rule.decide(&y).unwrap(), scaled.decide(&y).unwrap());
        }
    }
}
