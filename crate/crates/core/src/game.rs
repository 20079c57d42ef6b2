//! Utilities, the two-user expected number of successful users (ESU), and a
//! Nash-equilibrium checker for symmetric mixed strategies.
//!
//! A symmetric mixed profile where everyone plays `Λ` is an equilibrium iff
//! (1) every degree in the support of `Λ` earns the same utility against the
//! others, and (2) no degree outside the support earns more. Only pure
//! deviations need to be checked: the utility of any mixed deviation is a
//! convex combination of pure-deviation utilities.

use serde::{Deserialize, Serialize};

use crate::config::{GameConfig, RewardScheme, StrategyProfile};
use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};
use crate::frame_sim::{estimate_success_probs, exact_success_probabilities, DEFAULT_ENUMERATION_BUDGET};
use crate::rng::RandomStream;

/// `r_d · p_s - d · c`.
pub fn pure_utility(success_prob: f64, degree: usize, scheme: &RewardScheme, cost: f64) -> f64 {
    scheme.reward(degree) * success_prob - degree as f64 * cost
}

/// `Σ_d Λ_d u(d)`, with `utilities[d - 1] = u(d)`.
pub fn mixed_utility(dist: &DegreeDistribution, utilities: &[f64]) -> Result<f64> {
    dist.iter()
        .filter(|&(_, p)| p > 0.0)
        .map(|(d, p)| match utilities.get(d - 1) {
            Some(u) if u.is_finite() => Ok(p * u),
            _ => Err(Error::MissingUtility(d)),
        })
        .sum()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Success probability of either user in the two-user, erasure-free game:
/// they fail only when both pick the same degree and the same slots.
pub fn two_user_success(i: usize, j: usize, slots: usize) -> f64 {
    if i != j {
        1.0
    } else {
        1.0 - 1.0 / binomial(slots, i)
    }
}

/// `E([i, j]) = p_s1 + p_s2`.
pub fn esu_two_user(i: usize, j: usize, slots: usize) -> f64 {
    2.0 * two_user_success(i, j, slots)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityEstimate {
    pub value: f64,
    /// Zero for exact oracles.
    pub std_error: f64,
}

impl UtilityEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

/// Utility of a single deviating user playing `Pure(degree)` while every
/// other user plays the candidate distribution.
pub trait UtilityOracle {
    fn utility(&self, degree: usize) -> Result<UtilityEstimate>;
}

impl<F> UtilityOracle for F
where
    F: Fn(usize) -> Result<UtilityEstimate>,
{
    fn utility(&self, degree: usize) -> Result<UtilityEstimate> {
        self(degree)
    }
}

/// Exact utilities of the two-user, erasure-free game.
#[derive(Clone, Debug)]
pub struct TwoUserOracle {
    pub slots: usize,
    pub candidate: DegreeDistribution,
    pub reward: f64,
    pub cost: f64,
}

impl UtilityOracle for TwoUserOracle {
    fn utility(&self, degree: usize) -> Result<UtilityEstimate> {
        let success: f64 = self
            .candidate
            .iter()
            .map(|(j, p)| p * two_user_success(degree, j, self.slots))
            .sum();
        Ok(UtilityEstimate::exact(self.reward * success - degree as f64 * self.cost))
    }
}

/// Exact utilities from full placement enumeration.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    pub config: GameConfig,
    pub candidate: DegreeDistribution,
    pub budget: f64,
}

impl ExactOracle {
    pub fn new(config: GameConfig, candidate: DegreeDistribution) -> Self {
        Self { config, candidate, budget: DEFAULT_ENUMERATION_BUDGET }
    }
}

impl UtilityOracle for ExactOracle {
    fn utility(&self, degree: usize) -> Result<UtilityEstimate> {
        let profile = StrategyProfile::with_deviant(&self.candidate, self.config.users, degree);
        let ps = exact_success_probabilities(&self.config, &profile, self.budget)?[0];
        Ok(UtilityEstimate::exact(pure_utility(ps, degree, &self.config.rewards, self.config.cost)))
    }
}

/// Monte Carlo utilities; each degree gets its own derived seed.
#[derive(Clone, Debug)]
pub struct MonteCarloOracle {
    pub config: GameConfig,
    pub candidate: DegreeDistribution,
    pub frames: u64,
    pub seed: u64,
}

impl UtilityOracle for MonteCarloOracle {
    fn utility(&self, degree: usize) -> Result<UtilityEstimate> {
        let profile = StrategyProfile::with_deviant(&self.candidate, self.config.users, degree);
        let seed = RandomStream::derive(self.seed, &[degree as u64]).next_seed();
        let est = estimate_success_probs(&self.config, &profile, self.frames, seed)?[0];
        let reward = self.config.rewards.reward(degree);
        Ok(UtilityEstimate {
            value: pure_utility(est.mean, degree, &self.config.rewards, self.config.cost),
            std_error: reward * est.std_error,
        })
    }
}

/// Precomputed utilities, `table[d - 1] = u(d)`.
#[derive(Clone, Debug)]
pub struct TabulatedOracle(pub Vec<UtilityEstimate>);

impl UtilityOracle for TabulatedOracle {
    fn utility(&self, degree: usize) -> Result<UtilityEstimate> {
        degree
            .checked_sub(1)
            .and_then(|i| self.0.get(i))
            .copied()
            .ok_or(Error::MissingUtility(degree))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeUtility {
    pub degree: usize,
    pub utility: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub degree: usize,
    /// Utility above the candidate's mixed utility.
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub is_ne: bool,
    pub support_utilities: Vec<DegreeUtility>,
    pub mixed_utility: f64,
    /// Largest pairwise utility gap inside the support.
    pub max_equality_residual: f64,
    /// Most profitable out-of-support degree, if any degree lies outside.
    pub worst_deviation: Option<Deviation>,
    pub deviation_utilities: Vec<DegreeUtility>,
    pub tolerance: f64,
    /// Largest standard error reported by the oracle.
    pub oracle_std_error: f64,
}

/// Checks both equilibrium conditions for the symmetric profile where all
/// users play `candidate`, over deviations `1..=max_degree`.
///
/// With a stochastic oracle each comparison is allowed `tolerance` plus three
/// combined standard errors, and `tolerance` itself must be at least three
/// times the largest standard error.
pub fn check_nash(
    config: &GameConfig,
    candidate: &DegreeDistribution,
    oracle: &dyn UtilityOracle,
    max_degree: usize,
    tolerance: f64,
) -> Result<NeReport> {
    if max_degree > config.slots {
        return Err(Error::Config(format!(
            "deviations up to {max_degree} exceed the {} slots of a frame",
            config.slots
        )));
    }
    if candidate.max_support_degree() > max_degree {
        return Err(Error::Config(format!(
            "candidate uses degree {} beyond max_degree {max_degree}",
            candidate.max_support_degree()
        )));
    }
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::Validation(format!("tolerance {tolerance} must be non-negative")));
    }

    let all: Vec<DegreeUtility> = (1..=max_degree)
        .map(|d| {
            oracle.utility(d).map(|u| DegreeUtility { degree: d, utility: u.value, std_error: u.std_error })
        })
        .collect::<Result<_>>()?;
    let oracle_std_error = all.iter().map(|u| u.std_error).fold(0.0, f64::max);
    let floor = 3.0 * oracle_std_error;
    if tolerance < floor {
        return Err(Error::BelowNoiseFloor { tolerance, floor });
    }

    let support = candidate.support();
    let (inside, outside): (Vec<DegreeUtility>, Vec<DegreeUtility>) =
        all.into_iter().partition(|u| support.contains(&u.degree));
    let values: Vec<f64> = (1..=max_degree)
        .map(|d| inside.iter().find(|u| u.degree == d).map_or(f64::NAN, |u| u.utility))
        .collect();
    let mixed = mixed_utility(candidate, &values)?;

    let mut max_equality_residual = 0.0f64;
    let mut equality_ok = true;
    for (k, a) in inside.iter().enumerate() {
        for b in &inside[k + 1..] {
            let gap = (a.utility - b.utility).abs();
            max_equality_residual = max_equality_residual.max(gap);
            let noise = 3.0 * a.std_error.hypot(b.std_error);
            equality_ok &= gap <= tolerance + noise;
        }
    }

    let support_se = inside.iter().map(|u| u.std_error).fold(0.0, f64::max);
    let mut worst_deviation: Option<Deviation> = None;
    let mut deviation_ok = true;
    for u in &outside {
        let gain = u.utility - mixed;
        deviation_ok &= gain <= tolerance + 3.0 * u.std_error.hypot(support_se);
        if worst_deviation.is_none_or(|w| gain > w.gain) {
            worst_deviation = Some(Deviation { degree: u.degree, gain });
        }
    }

    Ok(NeReport {
        is_ne: equality_ok && deviation_ok,
        support_utilities: inside,
        mixed_utility: mixed,
        max_equality_residual,
        worst_deviation,
        deviation_utilities: outside,
        tolerance,
        oracle_std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_distribution;
    use proptest::prelude::*;

    fn binomial_ne(m: usize) -> DegreeDistribution {
        let w: Vec<f64> = (1..=m).map(|k| binomial(m, k)).collect();
        make_distribution(&w).unwrap()
    }

    #[test]
    fn pure_utility_examples() {
        let r8 = RewardScheme::Constant(8.0);
        assert!((pure_utility(0.3875, 2, &r8, 1.0) - 1.1).abs() < 1e-12);
        assert!((pure_utility(0.5125, 3, &r8, 1.0) - 1.1).abs() < 1e-12);
        let r2 = RewardScheme::Constant(2.0);
        assert_eq!(pure_utility(1.0, 1, &r2, 1.0), 1.0);
        assert_eq!(pure_utility(1.0, 2, &r2, 1.0), 0.0);
        assert_eq!(pure_utility(0.0, 3, &RewardScheme::Constant(50.0), 1.0), -3.0);
    }

    #[test]
    fn mixed_utility_examples() {
        let d = make_distribution(&[0.0, 0.5, 0.5]).unwrap();
        assert!((mixed_utility(&d, &[f64::NAN, 1.1, 1.1]).unwrap() - 1.1).abs() < 1e-12);
        let deg = DegreeDistribution::degenerate(3).unwrap();
        assert_eq!(mixed_utility(&deg, &[f64::NAN, f64::NAN, 7.0]).unwrap(), 7.0);
        let w = make_distribution(&[0.25, 0.75]).unwrap();
        assert_eq!(mixed_utility(&w, &[4.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mixed_utility(&d, &[1.0, 1.0]), Err(Error::MissingUtility(3)));
    }

    #[test]
    fn esu_examples() {
        assert_eq!(esu_two_user(1, 2, 4), 2.0);
        assert!((esu_two_user(2, 2, 4) - (2.0 - 2.0 / 6.0)).abs() < 1e-15);
        assert_eq!(esu_two_user(4, 4, 4), 0.0);
    }

    #[test]
    fn binomial_candidate_is_ne_at_high_reward() {
        let cfg = GameConfig::new(4, 2).with_reward(40_000.0);
        let cand = binomial_ne(4);
        let oracle = TwoUserOracle { slots: 4, candidate: cand.clone(), reward: 40_000.0, cost: 1.0 };
        // Cost shifts utilities by at most c·(M - 1) across degrees.
        let report = check_nash(&cfg, &cand, &oracle, 4, 3.0).unwrap();
        assert!(report.is_ne, "{report:?}");
        assert!(report.max_equality_residual <= 3.0);
        assert!(report.worst_deviation.is_none());
    }

    #[test]
    fn framed_aloha_is_not_ne_for_two_users() {
        let cfg = GameConfig::new(4, 2).with_reward(1000.0);
        let cand = DegreeDistribution::degenerate(1).unwrap();
        let oracle = TwoUserOracle { slots: 4, candidate: cand.clone(), reward: 1000.0, cost: 1.0 };
        let report = check_nash(&cfg, &cand, &oracle, 4, 1e-9).unwrap();
        assert!(!report.is_ne);
        let worst = report.worst_deviation.unwrap();
        assert_eq!(worst.degree, 2);
        assert!(worst.gain > 0.0);
    }

    #[test]
    fn lone_user_prefers_one_replica() {
        let cfg = GameConfig::new(4, 1).with_reward(2.0);
        let cand = DegreeDistribution::degenerate(1).unwrap();
        let oracle = ExactOracle::new(cfg.clone(), cand.clone());
        let report = check_nash(&cfg, &cand, &oracle, 4, 1e-12).unwrap();
        assert!(report.is_ne);
        assert_eq!(report.worst_deviation.unwrap().degree, 2);
        assert!((report.worst_deviation.unwrap().gain + 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_oracle_agrees_with_two_user_formula() {
        let cand = make_distribution(&[0.2, 0.3, 0.4, 0.1]).unwrap();
        let cfg = GameConfig::new(4, 2).with_reward(10.0);
        let exact = ExactOracle::new(cfg, cand.clone());
        let formula = TwoUserOracle { slots: 4, candidate: cand, reward: 10.0, cost: 1.0 };
        for d in 1..=4 {
            let a = exact.utility(d).unwrap().value;
            let b = formula.utility(d).unwrap().value;
            assert!((a - b).abs() < 1e-12, "d = {d}: {a} vs {b}");
        }
    }

    #[test]
    fn noise_floor_is_enforced() {
        let cfg = GameConfig::new(4, 2);
        let cand = DegreeDistribution::degenerate(1).unwrap();
        let oracle = TabulatedOracle(vec![UtilityEstimate { value: 1.0, std_error: 0.1 }; 4]);
        assert!(matches!(
            check_nash(&cfg, &cand, &oracle, 4, 0.2),
            Err(Error::BelowNoiseFloor { .. })
        ));
        assert!(check_nash(&cfg, &cand, &oracle, 4, 0.31).unwrap().is_ne);
        assert!(check_nash(&cfg, &cand, &oracle, 5, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn esu_is_symmetric(i in 1usize..=8, j in 1usize..=8) {
            prop_assert_eq!(esu_two_user(i, j, 8), esu_two_user(j, i, 8));
        }

        #[test]
        fn convex_combination_identity(
            raw in prop::collection::vec(0.0f64..1.0, 1..6),
            utils in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-3);
            let d = make_distribution(&raw).unwrap();
            let direct: f64 = d.iter().map(|(k, p)| p * utils[k - 1]).sum();
            prop_assert!((mixed_utility(&d, &utils).unwrap() - direct).abs() < 1e-12);
        }
    }
}
