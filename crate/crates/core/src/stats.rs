//! Closed-form statistical kernels: Chernoff sample sizes, multiple-test
//! corrections, SPRT machinery, candidate-set confidence and the budget
//! split used by the smart sampling stages.
//!
//! Everything that can underflow is evaluated in log space (`ln_1p`,
//! `exp_m1`), and sample sizes take an exact ceiling verified by the
//! `N - 1 < x <= N` check.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Absolute error bound and confidence parameter for estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffSpec {
    pub epsilon: f64,
    pub delta: f64,
}

impl ChernoffSpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, StatsError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(StatsError::InvalidParameter(format!("epsilon {epsilon} not in (0,1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(StatsError::InvalidParameter(format!("delta {delta} not in (0,1)")));
        }
        Ok(ChernoffSpec { epsilon, delta })
    }
}

/// Threshold, indifference half-width and error probabilities for the
/// sequential probability ratio test, with p0 = theta + epsilon and
/// p1 = theta - epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprtSpec {
    pub theta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SprtSpec {
    pub fn new(theta: f64, epsilon: f64, alpha: f64, beta: f64) -> Result<Self, StatsError> {
        if !(epsilon > 0.0) {
            return Err(StatsError::InvalidParameter(format!("epsilon {epsilon} not positive")));
        }
        let (p0, p1) = (theta + epsilon, theta - epsilon);
        if !(p1 > 0.0 && p0 < 1.0) {
            return Err(StatsError::InvalidParameter(format!(
                "need 0 < theta - epsilon and theta + epsilon < 1, got theta {theta}, epsilon {epsilon}"
            )));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(StatsError::InvalidParameter(format!("{name} {v} not in (0,1)")));
            }
        }
        Ok(SprtSpec { theta, epsilon, alpha, beta })
    }

    pub fn p0(&self) -> f64 {
        self.theta + self.epsilon
    }

    pub fn p1(&self) -> f64 {
        self.theta - self.epsilon
    }

    /// The mirrored specification for the complemented property: testing
    /// P(phi) <= theta is testing P(!phi) >= 1 - theta with the same errors.
    pub fn complement(&self) -> SprtSpec {
        SprtSpec { theta: 1.0 - self.theta, ..*self }
    }
}

/// Ceiling of `x` with the defensive integer check `n - 1 < x <= n`.
fn checked_ceil(x: f64) -> u64 {
    assert!(x.is_finite() && x >= 0.0, "sample size formula produced {x}");
    let mut n = x.ceil();
    while n - 1.0 >= x {
        n -= 1.0;
    }
    while n < x {
        n += 1.0;
    }
    (n as u64).max(1)
}

/// Simulation count for one estimate: ceil((ln 2 - ln delta) / (2 eps^2)).
pub fn chernoff_n(spec: &ChernoffSpec) -> u64 {
    checked_ceil(chernoff_floor(spec))
}

/// The raw (un-ceiled) single-estimate sample bound ln(2/delta)/(2 eps^2);
/// smart estimation requires its per-iteration budget to exceed this.
pub fn chernoff_floor(spec: &ChernoffSpec) -> f64 {
    (2f64.ln() - spec.delta.ln()) / (2.0 * spec.epsilon * spec.epsilon)
}

/// Simulation count per scheduler such that all of `m` independent
/// estimates stay within epsilon with probability 1 - delta:
/// ceil((ln 2 - ln(1 - (1-delta)^(1/m))) / (2 eps^2)).
pub fn chernoff_n_multi(spec: &ChernoffSpec, m: u64) -> u64 {
    assert!(m >= 1);
    let inner = -f64::exp_m1((-spec.delta).ln_1p() / m as f64);
    checked_ceil((2f64.ln() - inner.ln()) / (2.0 * spec.epsilon * spec.epsilon))
}

/// Per-test error level alpha_M = 1 - (1 - alpha)^(1/m) so that `m`
/// independent tests have cumulative error at most alpha.
pub fn multi_test_correction(alpha: f64, m: u64) -> f64 {
    assert!(m >= 1);
    -f64::exp_m1((-alpha).ln_1p() / m as f64)
}

/// Wald acceptance bounds (A, B) = ((1-beta)/alpha, beta/(1-alpha)).
///
/// The likelihood ratio here always has the p1 hypothesis on top: H1 is
/// accepted once ratio >= A, H0 once ratio <= B.
pub fn sprt_bounds(alpha: f64, beta: f64) -> (f64, f64) {
    ((1.0 - beta) / alpha, beta / (1.0 - alpha))
}

/// Running SPRT likelihood ratio held in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodRatio {
    log: f64,
}

impl LikelihoodRatio {
    pub fn new() -> Self {
        LikelihoodRatio { log: 0.0 }
    }

    /// Multiplies in one observation: p1/p0 when the trace satisfied the
    /// property, (1-p1)/(1-p0) otherwise.
    pub fn step(&mut self, satisfied: bool, p0: f64, p1: f64) {
        self.log += log_factor(satisfied, p0, p1);
    }

    pub fn log_value(&self) -> f64 {
        self.log
    }

    pub fn value(&self) -> f64 {
        self.log.exp()
    }
}

impl Default for LikelihoodRatio {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn log_factor(satisfied: bool, p0: f64, p1: f64) -> f64 {
    if satisfied {
        p1.ln() - p0.ln()
    } else {
        (1.0 - p1).ln() - (1.0 - p0).ln()
    }
}

/// One multiplicative SPRT update of `ratio` (kept for callers that carry a
/// plain ratio; the log-space [`LikelihoodRatio`] does the arithmetic).
pub fn sprt_step(ratio: f64, satisfied: bool, p0: f64, p1: f64) -> f64 {
    debug_assert!(ratio > 0.0);
    (ratio.ln() + log_factor(satisfied, p0, p1)).exp()
}

/// Probability that some of `m` candidates' estimates over `n` simulations
/// each is off by more than epsilon: 1 - (1 - e^(-2 eps^2 n))^m.
pub fn candidate_confidence(n: u64, m: u64, epsilon: f64) -> f64 {
    assert!(m >= 1);
    let t = (-2.0 * epsilon * epsilon * n as f64).exp();
    if t >= 1.0 {
        return 1.0;
    }
    -f64::exp_m1(m as f64 * (-t).ln_1p())
}

/// Probability of seeing at least one satisfying trace from a good
/// scheduler when sampling `m` schedulers with `n` simulations each:
/// (1 - (1-p_g)^m)(1 - (1-p_gbar)^n).
pub fn good_scheduler_seen_probability(p_g: f64, p_gbar: f64, m: u64, n: u64) -> f64 {
    fn hit(p: f64, k: u64) -> f64 {
        if k == 0 || p <= 0.0 {
            0.0
        } else if p >= 1.0 {
            1.0
        } else {
            -f64::exp_m1(k as f64 * (-p).ln_1p())
        }
    }
    hit(p_g, m) * hit(p_gbar, n)
}

/// Candidate-generation budget split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BudgetSplit {
    /// Simulations per candidate scheduler.
    pub sims_per_candidate: u64,
    /// Number of candidate schedulers.
    pub candidates: u64,
}

/// Splits a per-iteration budget using the estimate from the previous
/// stage: N = ceil(1/p), M = ceil(n_max * p), with two caps so that
/// N * M <= 2 * n_max always holds. When ceil(1/p) exceeds the whole
/// budget the entire budget goes to a single candidate.
///
/// Returns None when `p_hat` is zero: no candidates can be generated.
pub fn budget_split(p_hat: f64, n_max: u64) -> Option<BudgetSplit> {
    assert!((0.0..=1.0).contains(&p_hat), "estimate {p_hat} outside [0,1]");
    assert!(n_max >= 1);
    if p_hat == 0.0 {
        return None;
    }
    let n = checked_ceil(1.0 / p_hat);
    if n > n_max {
        return Some(BudgetSplit { sims_per_candidate: n_max, candidates: 1 });
    }
    let m = checked_ceil(n_max as f64 * p_hat).min(n_max.div_ceil(n));
    Some(BudgetSplit { sims_per_candidate: n, candidates: m.max(1) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: f64, d: f64) -> ChernoffSpec {
        ChernoffSpec::new(e, d).unwrap()
    }

    #[test]
    fn chernoff_reference_values() {
        // Frozen from a 200-bit evaluation of the formula.
        assert_eq!(chernoff_n(&spec(0.01, 0.01)), 26492);
        assert_eq!(chernoff_n(&spec(0.02, 0.01)), 6623);
        assert_eq!(chernoff_n(&spec(0.005, 0.05)), 73778);
        assert_eq!(chernoff_n(&spec(0.1, 0.2)), 116);
        assert_eq!(chernoff_n(&spec(0.003, 0.001)), 422273);
    }

    #[test]
    fn chernoff_n_is_at_least_one() {
        assert!(chernoff_n(&spec(0.999, 0.999)) >= 1);
    }

    #[test]
    fn halving_epsilon_quadruples_n_up_to_ceiling() {
        let n1 = chernoff_n(&spec(0.01, 0.01));
        let n2 = chernoff_n(&spec(0.02, 0.01));
        assert_eq!((n1, n2), (26492, 6623));
        assert!((n1 as i64 - 4 * n2 as i64).abs() <= 4);
    }

    #[test]
    fn multi_reference_values() {
        // Frozen from a 200-bit evaluation.
        assert_eq!(chernoff_n_multi(&spec(0.01, 0.01), 300), 54986);
        assert_eq!(chernoff_n_multi(&spec(0.01, 0.01), 4000), 67937);
        assert_eq!(chernoff_n_multi(&spec(0.02, 0.05), 77), 10010);
        assert_eq!(chernoff_n_multi(&spec(0.005, 0.02), 12345), 280322);
    }

    #[test]
    fn multi_degenerates_to_single_at_m_1() {
        for (e, d) in [(0.01, 0.01), (0.05, 0.2), (0.002, 0.5)] {
            assert_eq!(chernoff_n_multi(&spec(e, d), 1), chernoff_n(&spec(e, d)));
        }
    }

    #[test]
    fn multi_is_nondecreasing_in_m() {
        let s = spec(0.01, 0.01);
        let mut prev = 0;
        for m in 1..=1000 {
            let n = chernoff_n_multi(&s, m);
            assert!(n >= prev, "m={m}");
            prev = n;
        }
    }

    #[test]
    fn correction_identity_at_m_1() {
        assert_eq!(multi_test_correction(0.01, 1), 0.01);
    }

    #[test]
    fn correction_reference_values() {
        assert!((multi_test_correction(0.01, 2) - 0.0050125628933800452655).abs() < 1e-15);
        assert!((multi_test_correction(0.05, 1000) - 5.129197890901780815e-5).abs() < 1e-17);
        assert!((multi_test_correction(0.37, 77) - 0.0059824937053876112566).abs() < 1e-15);
    }

    #[test]
    fn correction_satisfies_defining_identity() {
        for (a, m) in [(0.01, 2u64), (0.3, 17), (0.9, 500)] {
            let am = multi_test_correction(a, m);
            let recovered = -f64::exp_m1(m as f64 * (-am).ln_1p());
            assert!((recovered - a).abs() < 1e-12, "alpha {a} m {m}: {recovered}");
        }
    }

    #[test]
    fn sprt_bounds_reference() {
        let (a, b) = sprt_bounds(0.01, 0.01);
        assert!((a - 99.0).abs() < 1e-12);
        assert!((b - 0.01 / 0.99).abs() < 1e-15);
        // degenerate boundary
        let (a, b) = sprt_bounds(0.5, 0.5);
        assert_eq!((a, b), (1.0, 1.0));
        // A > 1 > B whenever alpha + beta < 1
        for (al, be) in [(0.01, 0.05), (0.2, 0.3), (0.001, 0.9)] {
            let (a, b) = sprt_bounds(al, be);
            assert!(a > 1.0 && b < 1.0);
        }
    }

    #[test]
    fn sprt_single_factors() {
        assert!((sprt_step(1.0, true, 0.21, 0.19) - 19.0 / 21.0).abs() < 1e-15);
        assert!((sprt_step(1.0, false, 0.21, 0.19) - 0.81 / 0.79).abs() < 1e-15);
    }

    #[test]
    fn sprt_accumulation_matches_direct_product() {
        let (p0, p1) = (0.21, 0.19);
        let mut rng = crate::scheduler::PrngState::new(2024);
        for _ in 0..50 {
            let (len_draw, r) = rng.next();
            rng = r;
            let n = (len_draw % 400 + 1) as usize;
            let mut ratio = LikelihoodRatio::new();
            let mut plain = 1.0f64;
            let mut k = 0u32;
            for _ in 0..n {
                let (d, r) = rng.next();
                rng = r;
                let sat = d % 2 == 0;
                k += u32::from(sat);
                ratio.step(sat, p0, p1);
                plain = sprt_step(plain, sat, p0, p1);
            }
            let direct = (p1 / p0).powi(k as i32)
                * ((1.0 - p1) / (1.0 - p0)).powi(n as i32 - k as i32);
            assert!((ratio.value() - direct).abs() / direct < 1e-12);
            assert!((plain - direct).abs() / direct < 1e-12);
        }
    }

    #[test]
    fn confidence_reference_values() {
        assert_eq!(candidate_confidence(0, 7, 0.1), 1.0);
        assert!((candidate_confidence(26492, 1, 0.01) - 0.0049995868498104316513).abs() < 1e-15);
        assert!((candidate_confidence(5000, 333, 0.02) - 0.99787854645970127872).abs() < 1e-12);
        assert!((candidate_confidence(100, 50, 0.01) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confidence_monotonicity() {
        // Strictly decreasing in n and increasing in m, checked where the
        // values are far enough from 1 for floats to resolve the ordering.
        let mut prev = candidate_confidence(30_000, 40, 0.01);
        for n in [40_000u64, 50_000, 60_000, 80_000] {
            let c = candidate_confidence(n, 40, 0.01);
            assert!(c < prev, "n={n}: {c} vs {prev}");
            prev = c;
        }
        let mut prev = candidate_confidence(20_000, 1, 0.01);
        for m in [2u64, 8, 64, 1024] {
            let c = candidate_confidence(20_000, m, 0.01);
            assert!(c > prev, "m={m}: {c} vs {prev}");
            prev = c;
        }
    }

    #[test]
    fn seen_probability_reference_values() {
        assert_eq!(good_scheduler_seen_probability(0.0, 0.5, 3, 7), 0.0);
        assert_eq!(good_scheduler_seen_probability(0.2, 0.5, 0, 7), 0.0);
        assert!(
            (good_scheduler_seen_probability(0.01, 0.1, 1000, 10) - 0.65129344153579366123).abs()
                < 1e-12
        );
        assert!(
            (good_scheduler_seen_probability(0.001, 0.25, 500, 4) - 0.26907689316129931296).abs()
                < 1e-12
        );
        assert!(
            (good_scheduler_seen_probability(1.0, 0.5, 3, 7) - 0.9921875).abs() < 1e-15
        );
    }

    #[test]
    fn seen_probability_saturates_with_certain_good_schedulers() {
        // p_g = 1 and growing n: value tends to 1
        let v = good_scheduler_seen_probability(1.0, 0.3, 5, 10_000);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_split_cases() {
        assert_eq!(
            budget_split(1.0, 100_000).unwrap(),
            BudgetSplit { sims_per_candidate: 1, candidates: 100_000 }
        );
        assert_eq!(
            budget_split(0.5, 100_000).unwrap(),
            BudgetSplit { sims_per_candidate: 2, candidates: 50_000 }
        );
        // ceil(1/p) beyond the whole budget: everything on one candidate
        assert_eq!(
            budget_split(1e-6, 100_000).unwrap(),
            BudgetSplit { sims_per_candidate: 100_000, candidates: 1 }
        );
        assert_eq!(budget_split(0.0, 100_000), None);
    }

    #[test]
    fn budget_split_never_exceeds_twice_the_budget() {
        let mut rng = crate::scheduler::PrngState::new(5);
        for _ in 0..2000 {
            let (a, r1) = rng.next();
            let (b, r2) = r1.next();
            rng = r2;
            let p = ((a >> 11) as f64 / (1u64 << 53) as f64).max(1e-12);
            let n_max = b % 1_000_000 + 1;
            let split = budget_split(p, n_max).unwrap();
            assert!(
                split.sims_per_candidate * split.candidates <= 2 * n_max,
                "p={p} n_max={n_max} split={split:?}"
            );
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ChernoffSpec::new(0.0, 0.1).is_err());
        assert!(ChernoffSpec::new(0.1, 1.0).is_err());
        assert!(SprtSpec::new(0.99, 0.01, 0.01, 0.01).is_err()); // p0 = 1
        assert!(SprtSpec::new(0.01, 0.01, 0.01, 0.01).is_err()); // p1 = 0
        assert!(SprtSpec::new(0.5, 0.01, 0.0, 0.01).is_err());
    }
}
