//! Game parameters and strategy profiles.

use serde::{Deserialize, Serialize};

use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};

/// Reward paid to a user whose packet is decoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScheme {
    Constant(f64),
    /// `r_d` for `d = 1..=len`, indexed from degree 1.
    PerDegree(Vec<f64>),
}

impl RewardScheme {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: &f64| r.is_finite() && *r >= 0.0;
        match self {
            RewardScheme::Constant(r) if ok(r) => Ok(()),
            RewardScheme::PerDegree(rs) if !rs.is_empty() && rs.iter().all(ok) => Ok(()),
            other => Err(Error::Config(format!(
                "rewards must be finite and non-negative: {other:?}"
            ))),
        }
    }

    /// `r_d`. Per-degree schemes pay nothing beyond their last entry.
    pub fn reward(&self, degree: usize) -> f64 {
        match self {
            RewardScheme::Constant(r) => *r,
            RewardScheme::PerDegree(rs) => {
                degree.checked_sub(1).and_then(|i| rs.get(i)).copied().unwrap_or(0.0)
            }
        }
    }

    /// `r_∞ = Σ Λ_d r_d`, recomputed on every call.
    pub fn expected_reward(&self, dist: &DegreeDistribution) -> f64 {
        dist.iter().map(|(d, p)| p * self.reward(d)).sum()
    }
}

/// Frame, population, channel and economy parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// `M`, slots per frame.
    pub slots: usize,
    /// `N`, contending users.
    pub users: usize,
    /// `p`, probability a singleton replica is decoded.
    pub decode_prob: f64,
    /// `c`, cost per transmitted replica.
    pub cost: f64,
    pub rewards: RewardScheme,
}

impl GameConfig {
    /// Erasure-free channel, unit cost and unit constant reward.
    pub fn new(slots: usize, users: usize) -> Self {
        Self {
            slots,
            users,
            decode_prob: 1.0,
            cost: 1.0,
            rewards: RewardScheme::Constant(1.0),
        }
    }

    pub fn with_decode_prob(mut self, p: f64) -> Self {
        self.decode_prob = p;
        self
    }

    pub fn with_cost(mut self, c: f64) -> Self {
        self.cost = c;
        self
    }

    pub fn with_rewards(mut self, rewards: RewardScheme) -> Self {
        self.rewards = rewards;
        self
    }

    pub fn with_reward(self, r: f64) -> Self {
        self.with_rewards(RewardScheme::Constant(r))
    }

    /// `G = N / M`.
    pub fn load(&self) -> f64 {
        self.users as f64 / self.slots as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::Config("a frame needs at least one slot".into()));
        }
        if !(0.0..=1.0).contains(&self.decode_prob) {
            return Err(Error::Config(format!(
                "decode probability {} outside [0, 1]",
                self.decode_prob
            )));
        }
        if !self.cost.is_finite() || self.cost < 0.0 {
            return Err(Error::Config(format!("cost {} must be non-negative", self.cost)));
        }
        self.rewards.validate()
    }

    /// Rejects distributions whose `d_max` exceeds the frame.
    pub fn check_distribution(&self, dist: &DegreeDistribution) -> Result<()> {
        if dist.max_support_degree() > self.slots {
            return Err(Error::Config(format!(
                "degree {} does not fit in a frame of {} slots",
                dist.max_support_degree(),
                self.slots
            )));
        }
        Ok(())
    }
}

/// A single user's strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Pure(usize),
    Mixed(DegreeDistribution),
}

impl Strategy {
    pub fn max_degree(&self) -> usize {
        match self {
            Strategy::Pure(d) => *d,
            Strategy::Mixed(dist) => dist.max_support_degree(),
        }
    }

    fn min_degree(&self) -> usize {
        match self {
            Strategy::Pure(d) => *d,
            Strategy::Mixed(dist) => dist.support().first().copied().unwrap_or(1),
        }
    }

    /// `(degree, probability)` over the support.
    pub fn support_weights(&self) -> Vec<(usize, f64)> {
        match self {
            Strategy::Pure(d) => vec![(*d, 1.0)],
            Strategy::Mixed(dist) => dist.iter().filter(|&(_, p)| p > 0.0).collect(),
        }
    }
}

/// One strategy per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile(pub Vec<Strategy>);

impl StrategyProfile {
    /// Every user plays `dist`.
    pub fn symmetric(dist: &DegreeDistribution, users: usize) -> Self {
        Self(vec![Strategy::Mixed(dist.clone()); users])
    }

    pub fn pure(degrees: &[usize]) -> Self {
        Self(degrees.iter().map(|&d| Strategy::Pure(d)).collect())
    }

    /// User 0 plays `Pure(degree)`, the other `users - 1` play `dist`.
    pub fn with_deviant(dist: &DegreeDistribution, users: usize, degree: usize) -> Self {
        let mut profile = Self::symmetric(dist, users);
        if users > 0 {
            profile.0[0] = Strategy::Pure(degree);
        }
        profile
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        if self.len() != config.users {
            return Err(Error::Config(format!(
                "profile has {} strategies for {} users",
                self.len(),
                config.users
            )));
        }
        for (user, strategy) in self.0.iter().enumerate() {
            if strategy.min_degree() == 0 {
                return Err(Error::Config(format!("user {user} has degree 0")));
            }
            if strategy.max_degree() > config.slots {
                return Err(Error::Config(format!(
                    "user {user} may send {} replicas in a frame of {} slots",
                    strategy.max_degree(),
                    config.slots
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_distribution;

    #[test]
    fn load_is_derived() {
        let mut cfg = GameConfig::new(100, 90);
        assert!((cfg.load() - 0.9).abs() < 1e-15);
        cfg.users = 80;
        assert!((cfg.load() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn per_degree_expected_reward() {
        let dist = make_distribution(&[0.0, 0.5, 0.5]).unwrap();
        let scheme = RewardScheme::PerDegree(vec![1.0, 2.0, 4.0]);
        assert_eq!(scheme.expected_reward(&dist), 3.0);
        assert_eq!(scheme.reward(7), 0.0);
        assert_eq!(RewardScheme::Constant(8.0).expected_reward(&dist), 8.0);
    }

    #[test]
    fn config_validation() {
        assert!(GameConfig::new(0, 3).validate().is_err());
        assert!(GameConfig::new(4, 2).with_decode_prob(1.5).validate().is_err());
        assert!(GameConfig::new(4, 2).with_reward(-1.0).validate().is_err());
        assert!(GameConfig::new(4, 2).validate().is_ok());
    }

    #[test]
    fn profile_validation() {
        let cfg = GameConfig::new(4, 2);
        assert!(StrategyProfile::pure(&[2, 3]).validate(&cfg).is_ok());
        assert!(StrategyProfile::pure(&[2]).validate(&cfg).is_err());
        assert!(StrategyProfile::pure(&[5, 1]).validate(&cfg).is_err());
        assert!(StrategyProfile::pure(&[0, 1]).validate(&cfg).is_err());
        let wide = make_distribution(&[1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(StrategyProfile::symmetric(&wide, 2).validate(&cfg).is_err());
        assert!(cfg.check_distribution(&wide).is_err());
    }
}
