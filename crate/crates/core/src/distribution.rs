//! Degree distributions `Λ(x) = Σ Λ_d x^d` over repetition counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Absolute tolerance on `Σ Λ_d = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Probability mass over degrees `1..=d_max`.
///
/// Degrees are 1-based: `prob(1)` is the probability of a single
/// transmission. Trailing zero entries are kept, so `d_max` is the length of
/// the vector the distribution was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DegreeDistribution {
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// Validates an already-normalized probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("degree distribution is empty".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Validation(format!(
                "degree probabilities must be finite and non-negative, got {bad}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "degree probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// `Λ(x) = x^degree`.
    pub fn degenerate(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Validation("degrees start at 1".into()));
        }
        let mut probs = vec![0.0; degree];
        probs[degree - 1] = 1.0;
        Ok(Self { probs })
    }

    pub fn d_max(&self) -> usize {
        self.probs.len()
    }

    /// `Λ_d`, zero outside `1..=d_max`.
    pub fn prob(&self, degree: usize) -> f64 {
        if degree == 0 {
            0.0
        } else {
            self.probs.get(degree - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Degrees with positive probability, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.iter().filter(|&(_, p)| p > 0.0).map(|(d, _)| d).collect()
    }

    /// Largest degree with positive probability.
    pub fn max_support_degree(&self) -> usize {
        self.support().last().copied().unwrap_or(1)
    }

    /// `(degree, Λ_d)` pairs for `d = 1..=d_max`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (i + 1, p))
    }

    /// `Λ'(1) = Σ d Λ_d`.
    pub fn average_degree(&self) -> f64 {
        self.iter().map(|(d, p)| d as f64 * p).sum()
    }

    /// `Λ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| (acc + p) * x)
    }

    /// Edge-perspective polynomial `λ(x) = Λ'(x) / Λ'(1)`.
    pub fn edge_eval(&self, x: f64) -> f64 {
        let numerator = self
            .probs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, &p)| acc * x + (i + 1) as f64 * p);
        numerator / self.average_degree()
    }

    /// Draws a degree with probability `Λ_d`.
    pub fn sample(&self, rng: &mut RandomStream) -> usize {
        if self.probs.len() == 1 {
            return 1;
        }
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut last_positive = 1;
        for (d, p) in self.iter() {
            if p > 0.0 {
                acc += p;
                last_positive = d;
                if u < acc {
                    return d;
                }
            }
        }
        // Rounding left `acc` a hair under 1.
        last_positive
    }
}

impl TryFrom<Vec<f64>> for DegreeDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<DegreeDistribution> for Vec<f64> {
    fn from(dist: DegreeDistribution) -> Self {
        dist.probs
    }
}

/// Normalizes non-negative weights over degrees `1..=raw.len()`.
pub fn make_distribution(raw: &[f64]) -> Result<DegreeDistribution> {
    if raw.is_empty() {
        return Err(Error::Validation("degree weights are empty".into()));
    }
    if let Some(bad) = raw.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Validation(format!(
            "degree weights must be finite and non-negative, got {bad}"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::Validation("degree weights are all zero".into()));
    }
    DegreeDistribution::new(raw.iter().map(|w| w / total).collect())
}

pub fn average_degree(dist: &DegreeDistribution) -> f64 {
    dist.average_degree()
}

pub fn sample_degree(dist: &DegreeDistribution, rng: &mut RandomStream) -> usize {
    dist.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_distribution_examples() {
        assert_eq!(make_distribution(&[1.0]).unwrap().probs(), &[1.0]);
        assert_eq!(
            make_distribution(&[0.0, 0.5, 0.5]).unwrap().probs(),
            &[0.0, 0.5, 0.5]
        );
        assert_eq!(make_distribution(&[2.0, 2.0]).unwrap().probs(), &[0.5, 0.5]);
        let padded = make_distribution(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(padded.d_max(), 4);
        assert_eq!(padded.support(), vec![2]);
    }

    #[test]
    fn make_distribution_rejects_bad_input() {
        assert!(make_distribution(&[]).is_err());
        assert!(make_distribution(&[0.5, -0.1]).is_err());
        assert!(make_distribution(&[0.0, 0.0]).is_err());
        assert!(make_distribution(&[f64::NAN]).is_err());
        assert!(DegreeDistribution::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn average_degree_examples() {
        let table_row = make_distribution(&[0.0, 0.51, 0.0, 0.49]).unwrap();
        assert!((average_degree(&table_row) - 2.98).abs() < 1e-12);
        assert_eq!(average_degree(&DegreeDistribution::degenerate(1).unwrap()), 1.0);
        let six = make_distribution(&[0.0, 0.54, 0.17, 0.0, 0.0, 0.29]).unwrap();
        assert!((average_degree(&six) - 3.33).abs() < 1e-12);
    }

    #[test]
    fn polynomial_evaluation() {
        let d = make_distribution(&[0.0, 0.5, 0.5]).unwrap();
        assert!((d.eval(0.5) - (0.5 * 0.25 + 0.5 * 0.125)).abs() < 1e-15);
        // λ(x) = (2·0.5 x + 3·0.5 x²) / 2.5
        assert!((d.edge_eval(0.5) - (0.5 + 1.5 * 0.25) / 2.5).abs() < 1e-15);
        assert_eq!(d.edge_eval(1.0), 1.0);
    }

    #[test]
    fn sampling_degenerate_and_support() {
        let mut rng = RandomStream::from_seed(1);
        let cube = DegreeDistribution::degenerate(3).unwrap();
        assert!((0..100).all(|_| cube.sample(&mut rng) == 3));
        let split = make_distribution(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((0..10_000).all(|_| matches!(split.sample(&mut rng), 1 | 4)));
    }

    #[test]
    fn sampling_frequency_matches() {
        // 3σ for a binomial proportion at n = 1e5 is ~0.0047 < 0.01.
        let mut rng = RandomStream::from_seed(11);
        let d = make_distribution(&[0.0, 0.5, 0.5]).unwrap();
        let n = 100_000;
        let twos = (0..n).filter(|_| d.sample(&mut rng) == 2).count();
        assert!((twos as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn sampling_passes_chi_square() {
        let d = make_distribution(&[0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let mut rng = RandomStream::from_seed(5);
        let draws = 1_000_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[d.sample(&mut rng) - 1] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(d.probs())
            .map(|(&o, &p)| {
                let e = p * draws as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 0.999 quantile of chi-square with 4 degrees of freedom.
        assert!(chi2 < 18.467, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in prop::collection::vec(0.0f64..10.0, 1..8)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let once = make_distribution(&raw).unwrap();
            let twice = make_distribution(once.probs()).unwrap();
            for (a, b) in once.probs().iter().zip(twice.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn average_degree_within_bounds(raw in prop::collection::vec(0.0f64..10.0, 1..8)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let d = make_distribution(&raw).unwrap();
            let avg = d.average_degree();
            prop_assert!(avg >= 1.0 - 1e-12 && avg <= d.d_max() as f64 + 1e-12);
        }
    }
}
