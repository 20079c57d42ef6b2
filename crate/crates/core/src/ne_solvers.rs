//! Equilibrium constructions: the two-user closed form, per-degree reward
//! fitting for a target distribution, and the short-frame solver that finds
//! the mixed strategy with a caller-chosen support under a constant reward.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{GameConfig, RewardScheme, StrategyProfile};
use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};
use crate::frame_sim::{
    estimate_profile_throughput, estimate_success_probs, exact_success_probabilities, SuccessEstimate,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::game::{binomial, check_nash, esu_two_user, NeReport, UtilityEstimate, UtilityOracle};
use crate::rng::RandomStream;

/// Symmetric equilibrium of the two-user game as `r → ∞`, built from the
/// ratio recursion `Λ_k = (M - k + 1) / k · Λ_{k-1}` and cross-checked
/// against `Λ_k = C(M, k) / (2^M - 1)`.
pub fn two_user_ne(slots: usize) -> Result<DegreeDistribution> {
    if slots == 0 {
        return Err(Error::Validation("need at least one slot".into()));
    }
    let mut ratios = vec![1.0];
    for k in 2..=slots {
        let prev = ratios[k - 2];
        ratios.push((slots - (k - 1)) as f64 / k as f64 * prev);
    }
    let lambda_1 = 1.0 / ratios.iter().sum::<f64>();
    let recursion: Vec<f64> = ratios.iter().map(|r| r * lambda_1).collect();

    let denom = 2f64.powi(slots as i32) - 1.0;
    for (k, &p) in recursion.iter().enumerate() {
        let closed = binomial(slots, k + 1) / denom;
        assert!(
            (p - closed).abs() <= 1e-12,
            "recursion and binomial forms disagree at k = {}: {p} vs {closed}",
            k + 1
        );
    }
    DegreeDistribution::new(recursion)
}

/// Expected decoded users per slot when both users play `dist`:
/// `(1/M) Σ_k Σ_j Λ_k Λ_j E([k, j])`.
pub fn two_user_throughput(dist: &DegreeDistribution, slots: usize) -> f64 {
    let esu: f64 = dist
        .iter()
        .flat_map(|(k, pk)| dist.iter().map(move |(j, pj)| pk * pj * esu_two_user(k, j, slots)))
        .sum();
    esu / slots as f64
}

/// Throughput at the two-user equilibrium, summed from the ESU and checked
/// against `(2/M)(1 - 1/(2^M - 1))`.
pub fn two_user_ne_throughput(slots: usize) -> Result<f64> {
    let dist = two_user_ne(slots)?;
    let via_esu = two_user_throughput(&dist, slots);
    let closed = 2.0 / slots as f64 * (1.0 - 1.0 / (2f64.powi(slots as i32) - 1.0));
    assert!(
        (via_esu - closed).abs() <= 1e-12,
        "ESU sum {via_esu} disagrees with closed form {closed}"
    );
    Ok(via_esu)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReward {
    pub degree: usize,
    pub reward: f64,
    /// Monte Carlo error propagated through the linear system.
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBound {
    pub degree: usize,
    /// Largest reward that keeps this degree unprofitable; `None` when the
    /// degree never succeeds.
    pub max_reward: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardFit {
    pub support_rewards: Vec<DegreeReward>,
    pub bounds: Vec<RewardBound>,
    pub r_infinity: f64,
    /// Success of a lone deviant at `Pure(d)`, `d = 1..=d_max`.
    pub deviant_success: Vec<SuccessEstimate>,
    /// Success of a user following the target distribution.
    pub conformist_success: SuccessEstimate,
    /// Propagated covariance of the support rewards, in support order.
    pub reward_covariance: Vec<Vec<f64>>,
    pub condition_number: f64,
    /// The support has a single degree, so the equalities hold for any reward.
    pub equality_vacuous: bool,
    pub constant_reward_feasible: bool,
}

impl RewardFit {
    /// `Σ Λ_d r_d` from the solved rewards.
    pub fn recomputed_r_infinity(&self, target: &DegreeDistribution) -> f64 {
        self.support_rewards.iter().map(|r| target.prob(r.degree) * r.reward).sum()
    }

    /// Per-degree scheme with support rewards as solved and out-of-support
    /// degrees paid their bound (zero when unbounded).
    pub fn per_degree_scheme(&self) -> RewardScheme {
        let d_max = self.deviant_success.len();
        let mut rewards = vec![0.0; d_max];
        for r in &self.support_rewards {
            rewards[r.degree - 1] = r.reward;
        }
        for b in &self.bounds {
            rewards[b.degree - 1] = b.max_reward.unwrap_or(0.0);
        }
        RewardScheme::PerDegree(rewards)
    }
}

/// Solves `r_d p_s(d) - d c = r_∞ p_s(mixed) - c Λ'(1)` over the support.
fn solve_support_rewards(
    target: &DegreeDistribution,
    support: &[usize],
    deviant: &[f64],
    conformist: f64,
    cost: f64,
) -> Result<(Vec<f64>, f64)> {
    let k = support.len();
    let avg = target.average_degree();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let diag = if i == j { deviant[support[i] - 1] } else { 0.0 };
        diag - conformist * target.prob(support[j])
    });
    let b = DVector::from_fn(k, |i, _| cost * (support[i] as f64 - avg));
    let sv = a.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e12 {
        // A consistent rank-deficient system (e.g. identical success
        // probabilities) still fixes reward differences; take the
        // minimum-norm solution when its residual vanishes.
        let svd = a.clone().svd(true, true);
        let x = svd
            .solve(&b, smax * 1e-10)
            .map_err(|_| Error::Singular { condition })?;
        let residual = (&a * &x - &b).amax();
        if residual > 1e-9 * (1.0 + b.amax()) {
            return Err(Error::Singular { condition });
        }
        return Ok((x.iter().copied().collect(), condition));
    }
    let x = a.lu().solve(&b).ok_or(Error::Singular { condition })?;
    Ok((x.iter().copied().collect(), condition))
}

/// Fits per-degree rewards from already estimated success probabilities.
/// `deviant[d - 1]` is the success of a lone `Pure(d)` deviant.
pub fn fit_rewards_from_estimates(
    target: &DegreeDistribution,
    cost: f64,
    deviant: &[SuccessEstimate],
    conformist: SuccessEstimate,
    fallback: &RewardScheme,
) -> Result<RewardFit> {
    if deviant.len() < target.d_max() {
        return Err(Error::Validation(format!(
            "need deviant estimates for degrees 1..={}, got {}",
            target.d_max(),
            deviant.len()
        )));
    }
    let support = target.support();
    let means: Vec<f64> = deviant.iter().map(|e| e.mean).collect();
    let avg = target.average_degree();

    let (support_rewards, condition_number, equality_vacuous, reward_covariance) = if support.len() == 1 {
        let d = support[0];
        (vec![DegreeReward { degree: d, reward: fallback.reward(d), std_error: 0.0 }], 1.0, true, vec![vec![0.0]])
    } else {
        let (rewards, condition) = solve_support_rewards(target, &support, &means, conformist.mean, cost)?;
        // Delta method: central-difference Jacobian against each independent
        // input estimate, then the full reward covariance.
        let k = support.len();
        let inputs: Vec<(Option<usize>, f64)> = support
            .iter()
            .map(|&d| (Some(d), deviant[d - 1].std_error))
            .chain(std::iter::once((None, conformist.std_error)))
            .collect();
        let mut covariance = vec![vec![0.0; k]; k];
        for (which, se) in inputs {
            if se == 0.0 {
                continue;
            }
            let h = 1e-6;
            let shifted = |sign: f64| {
                let mut dev = means.clone();
                let mut conf = conformist.mean;
                match which {
                    Some(d) => dev[d - 1] += sign * h,
                    None => conf += sign * h,
                }
                solve_support_rewards(target, &support, &dev, conf, cost).map(|r| r.0)
            };
            let (up, down) = (shifted(1.0)?, shifted(-1.0)?);
            let grad: Vec<f64> = up.iter().zip(&down).map(|(u, l)| (u - l) / (2.0 * h) * se).collect();
            for i in 0..k {
                for j in 0..k {
                    covariance[i][j] += grad[i] * grad[j];
                }
            }
        }
        let rewards = support
            .iter()
            .zip(rewards)
            .enumerate()
            .map(|(i, (&degree, reward))| DegreeReward { degree, reward, std_error: covariance[i][i].sqrt() })
            .collect();
        (rewards, condition, false, covariance)
    };

    let r_infinity: f64 = support_rewards.iter().map(|r| target.prob(r.degree) * r.reward).sum();
    let mixed = r_infinity * conformist.mean - cost * avg;
    let bounds = (1..=target.d_max())
        .filter(|d| !support.contains(d))
        .map(|d| RewardBound {
            degree: d,
            max_reward: (means[d - 1] > 0.0).then(|| (mixed + d as f64 * cost) / means[d - 1]),
        })
        .collect();
    // Rewards share the conformist estimate, so differences are judged
    // with their own propagated error rather than the marginal ones.
    let n = support_rewards.len();
    let constant_reward_feasible = (0..n).all(|i| {
        (i + 1..n).all(|j| {
            let c = &reward_covariance;
            let diff_se = (c[i][i] + c[j][j] - 2.0 * c[i][j]).max(0.0).sqrt();
            (support_rewards[i].reward - support_rewards[j].reward).abs() <= 3.0 * diff_se
        })
    });

    Ok(RewardFit {
        support_rewards,
        bounds,
        r_infinity,
        deviant_success: deviant.to_vec(),
        conformist_success: conformist,
        reward_covariance,
        condition_number,
        equality_vacuous,
        constant_reward_feasible,
    })
}

/// Success of one user following `dist` while everyone else does too,
/// pooled over all users of each frame.
pub fn estimate_conformist_success(
    config: &GameConfig,
    dist: &DegreeDistribution,
    frames: u64,
    seed: u64,
) -> Result<SuccessEstimate> {
    let profile = StrategyProfile::symmetric(dist, config.users);
    let est = estimate_profile_throughput(config, &profile, frames, seed)?;
    let scale = config.slots as f64 / config.users as f64;
    Ok(SuccessEstimate {
        mean: 1.0 - est.plr,
        std_error: est.std_error * scale,
        trials: frames * config.users as u64,
    })
}

/// Monte Carlo success of a lone `Pure(d)` deviant for `d = 1..=d_max`
/// against `users - 1` conformists.
pub fn estimate_deviant_success(
    config: &GameConfig,
    dist: &DegreeDistribution,
    d_max: usize,
    frames: u64,
    seed: u64,
) -> Result<Vec<SuccessEstimate>> {
    (1..=d_max)
        .map(|d| {
            let profile = StrategyProfile::with_deviant(dist, config.users, d);
            let s = RandomStream::derive(seed, &[d as u64]).next_seed();
            Ok(estimate_success_probs(config, &profile, frames, s)?[0])
        })
        .collect()
}

/// Per-degree rewards that make `target` an equilibrium, with bounds for the
/// degrees outside its support.
pub fn fit_rewards_for_ne(
    target: &DegreeDistribution,
    config: &GameConfig,
    frames: u64,
    seed: u64,
) -> Result<RewardFit> {
    config.validate()?;
    config.check_distribution(target)?;
    if config.users < 2 {
        return Err(Error::Config("reward fitting needs at least two users".into()));
    }
    let deviant = estimate_deviant_success(config, target, target.d_max(), frames, seed)?;
    let conformist_seed = RandomStream::derive(seed, &[u64::MAX]).next_seed();
    let conformist = estimate_conformist_success(config, target, frames, conformist_seed)?;
    fit_rewards_from_estimates(target, config.cost, &deviant, conformist, &config.rewards)
}

/// Success probability of a user at `Pure(degree)` when the other users'
/// pure degrees follow `composition` (`composition[t - 1]` users at degree `t`).
pub trait CompositionOracle: Sync {
    fn success(&self, degree: usize, composition: &[usize]) -> Result<f64>;
}

fn composition_profile(degree: usize, composition: &[usize]) -> Vec<usize> {
    let mut degrees = vec![degree];
    for (t, &k) in composition.iter().enumerate() {
        degrees.extend(std::iter::repeat_n(t + 1, k));
    }
    degrees
}

fn trim(composition: &[usize]) -> Vec<usize> {
    let end = composition.iter().rposition(|&k| k > 0).map_or(0, |i| i + 1);
    composition[..end].to_vec()
}

/// Exact enumeration, cached per `(degree, composition)`.
pub struct ExactCompositionOracle {
    pub config: GameConfig,
    pub budget: f64,
    cache: Mutex<HashMap<(usize, Vec<usize>), f64>>,
}

impl ExactCompositionOracle {
    pub fn new(config: GameConfig) -> Self {
        Self { config, budget: DEFAULT_ENUMERATION_BUDGET, cache: Mutex::new(HashMap::new()) }
    }
}

impl CompositionOracle for ExactCompositionOracle {
    fn success(&self, degree: usize, composition: &[usize]) -> Result<f64> {
        let key = (degree, trim(composition));
        if let Some(&p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p);
        }
        let degrees = composition_profile(degree, &key.1);
        let mut config = self.config.clone();
        config.users = degrees.len();
        let p = exact_success_probabilities(&config, &StrategyProfile::pure(&degrees), self.budget)?[0];
        self.cache.lock().unwrap().insert(key, p);
        Ok(p)
    }
}

/// Monte Carlo fallback for frames too large to enumerate.
pub struct MonteCarloCompositionOracle {
    pub config: GameConfig,
    pub frames: u64,
    pub seed: u64,
    cache: Mutex<HashMap<(usize, Vec<usize>), f64>>,
}

impl MonteCarloCompositionOracle {
    pub fn new(config: GameConfig, frames: u64, seed: u64) -> Self {
        Self { config, frames, seed, cache: Mutex::new(HashMap::new()) }
    }
}

impl CompositionOracle for MonteCarloCompositionOracle {
    fn success(&self, degree: usize, composition: &[usize]) -> Result<f64> {
        let key = (degree, trim(composition));
        if let Some(&p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p);
        }
        let degrees = composition_profile(degree, &key.1);
        let mut config = self.config.clone();
        config.users = degrees.len();
        let mut path = vec![degree as u64];
        path.extend(key.1.iter().map(|&k| k as u64));
        let seed = RandomStream::derive(self.seed, &path).next_seed();
        let p = estimate_success_probs(&config, &StrategyProfile::pure(&degrees), self.frames, seed)?[0].mean;
        self.cache.lock().unwrap().insert(key, p);
        Ok(p)
    }
}

/// Exact enumeration for frames up to 6 slots and 5 users, Monte Carlo
/// (`10^5` frames per composition) beyond that.
pub fn default_composition_oracle(config: &GameConfig, seed: u64) -> Box<dyn CompositionOracle> {
    if config.slots <= 6 && config.users <= 5 {
        Box::new(ExactCompositionOracle::new(config.clone()))
    } else {
        Box::new(MonteCarloCompositionOracle::new(config.clone(), 100_000, seed))
    }
}

/// Calls `visit` with every `k` of length `parts` summing to `total`.
fn for_each_composition(total: usize, parts: usize, visit: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(
        remaining: usize,
        idx: usize,
        current: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if idx + 1 == current.len() {
            current[idx] = remaining;
            return visit(current);
        }
        for k in 0..=remaining {
            current[idx] = k;
            rec(remaining - k, idx + 1, current, visit)?;
        }
        Ok(())
    }
    if parts == 0 {
        return if total == 0 { visit(&[]) } else { Ok(()) };
    }
    rec(total, 0, &mut vec![0; parts], visit)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Short-frame utility with arbitrary real weights (`weights[t - 1]` for
/// degree `t`), so the root finder may step outside the simplex.
fn utility_from_weights(
    degree: usize,
    weights: &[f64],
    config: &GameConfig,
    oracle: &dyn CompositionOracle,
) -> Result<f64> {
    let others = config.users.saturating_sub(1);
    let reward = config.rewards.reward(degree);
    let cost = degree as f64 * config.cost;
    let ln_n = ln_factorial(others);
    let mut total = 0.0;
    for_each_composition(others, weights.len(), &mut |k| {
        let mut w = (ln_n - k.iter().map(|&x| ln_factorial(x)).sum::<f64>()).exp();
        for (&kt, &lt) in k.iter().zip(weights) {
            if kt > 0 {
                w *= lt.powi(kt as i32);
            }
        }
        if w == 0.0 {
            return Ok(());
        }
        let ps = oracle.success(degree, k)?;
        total += w * (reward * ps - cost);
        Ok(())
    })?;
    Ok(total)
}

/// Utility of `Pure(degree)` summed over every composition of the other
/// `N - 1` users' degrees, weighted by its multinomial probability under
/// `dist`.
pub fn short_frame_utility(
    degree: usize,
    dist: &DegreeDistribution,
    config: &GameConfig,
    oracle: &dyn CompositionOracle,
) -> Result<f64> {
    utility_from_weights(degree, dist.probs(), config, oracle)
}

/// Exposes [`short_frame_utility`] as a [`UtilityOracle`].
pub struct ShortFrameOracle<'a> {
    pub config: &'a GameConfig,
    pub candidate: &'a DegreeDistribution,
    pub compositions: &'a dyn CompositionOracle,
}

impl UtilityOracle for ShortFrameOracle<'_> {
    fn utility(&self, degree: usize) -> Result<UtilityEstimate> {
        short_frame_utility(degree, self.candidate, self.config, self.compositions).map(UtilityEstimate::exact)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortFrameOptions {
    /// Maximum absolute residual accepted as a root.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step for the Jacobian.
    pub jacobian_step: f64,
    /// Tolerance handed to the equilibrium check.
    pub nash_tolerance: f64,
}

impl Default for ShortFrameOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, jacobian_step: 1e-6, nash_tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortFrameSolution {
    pub distribution: DegreeDistribution,
    pub report: NeReport,
    pub residual: f64,
    pub iterations: usize,
}

struct SupportSystem<'a> {
    support: &'a [usize],
    d_max: usize,
    config: &'a GameConfig,
    oracle: &'a dyn CompositionOracle,
}

impl SupportSystem<'_> {
    fn weights(&self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.d_max];
        for (&d, &v) in self.support.iter().zip(x) {
            w[d - 1] = v;
        }
        w
    }

    /// Utility gaps against the first support degree, then `Σ Λ - 1`.
    fn residual(&self, x: &[f64]) -> Result<DVector<f64>> {
        let w = self.weights(x);
        let utils: Vec<f64> = self
            .support
            .iter()
            .map(|&d| utility_from_weights(d, &w, self.config, self.oracle))
            .collect::<Result<_>>()?;
        let k = self.support.len();
        Ok(DVector::from_fn(k, |i, _| {
            if i + 1 < k {
                utils[i + 1] - utils[0]
            } else {
                x.iter().sum::<f64>() - 1.0
            }
        }))
    }

    fn jacobian(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let k = x.len();
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[j] += h;
            down[j] -= h;
            let col = (self.residual(&up)? - self.residual(&down)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        Ok(jac)
    }

    /// Damped Newton from `x`; returns the final point and its residual.
    fn newton(&self, mut x: Vec<f64>, opts: &ShortFrameOptions) -> Result<(Vec<f64>, f64, usize)> {
        let mut f = self.residual(&x)?;
        let mut norm = f.amax();
        for iter in 0..opts.max_iter {
            if norm <= opts.tol {
                return Ok((x, norm, iter));
            }
            let jac = self.jacobian(&x, opts.jacobian_step)?;
            let Some(step) = jac.lu().solve(&(-&f)) else {
                return Ok((x, norm, iter));
            };
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
                let ft = self.residual(&trial)?;
                if ft.amax() < norm || alpha < 1e-6 {
                    x = trial;
                    f = ft;
                    norm = f.amax();
                    break;
                }
                alpha *= 0.5;
            }
        }
        Ok((x, norm, opts.max_iter))
    }

    /// Nelder-Mead on the squared residual norm.
    fn simplex_search(&self, start: &[f64], iterations: usize) -> Result<Vec<f64>> {
        let k = start.len();
        let cost = |x: &[f64]| self.residual(x).map(|r| r.norm_squared());
        let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..k {
            let mut p = start.to_vec();
            p[i] += 0.05;
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| cost(p)).collect::<Result<_>>()?;
        for _ in 0..iterations {
            let mut order: Vec<usize> = (0..=k).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            let centroid: Vec<f64> = (0..k).map(|j| pts[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64).collect();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[k]).map(|(c, w)| c + t * (c - w)).collect() };
            let reflected = along(1.0);
            let fr = cost(&reflected)?;
            if fr < vals[0] {
                let expanded = along(2.0);
                let fe = cost(&expanded)?;
                (pts[k], vals[k]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            } else if fr < vals[k - 1] {
                (pts[k], vals[k]) = (reflected, fr);
            } else {
                let contracted = along(-0.5);
                let fc = cost(&contracted)?;
                if fc < vals[k] {
                    (pts[k], vals[k]) = (contracted, fc);
                } else {
                    for i in 1..=k {
                        pts[i] = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
                        vals[i] = cost(&pts[i])?;
                    }
                }
            }
        }
        let best = (0..=k).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        Ok(pts.swap_remove(best))
    }
}

/// Finds `Λ` supported on `support` whose support degrees all earn the same
/// short-frame utility, then checks deviations to every degree up to `M`.
/// A solution failing the deviation condition is returned with
/// `report.is_ne == false`.
pub fn solve_short_frame_ne(
    support: &[usize],
    config: &GameConfig,
    oracle: &dyn CompositionOracle,
    opts: ShortFrameOptions,
) -> Result<ShortFrameSolution> {
    config.validate()?;
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if support.is_empty() || support[0] == 0 || *support.last().unwrap() > config.slots {
        return Err(Error::Validation(format!(
            "support {support:?} must be a non-empty subset of 1..={}",
            config.slots
        )));
    }
    let d_max = *support.last().unwrap();
    let system = SupportSystem { support: &support, d_max, config, oracle };
    let uniform = vec![1.0 / support.len() as f64; support.len()];

    let (mut x, mut residual, mut iterations) = system.newton(uniform.clone(), &opts)?;
    if residual > opts.tol {
        let start = system.simplex_search(&uniform, 2000)?;
        (x, residual, iterations) = system.newton(start, &opts)?;
        iterations += 2000;
    }
    if residual > opts.tol || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoRoot(format!(
            "support {support:?}: residual {residual:e} after {iterations} iterations"
        )));
    }
    if let Some(v) = x.iter().find(|&&v| v < -1e-9) {
        return Err(Error::InfeasibleSupport(format!(
            "support {support:?} needs a negative probability {v}"
        )));
    }
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let weights = system.weights(&clipped.iter().map(|v| v / total).collect::<Vec<_>>());
    let distribution = DegreeDistribution::new(weights)?;

    let nash_oracle = ShortFrameOracle { config, candidate: &distribution, compositions: oracle };
    let report = check_nash(config, &distribution, &nash_oracle, config.slots, opts.nash_tolerance)?;
    Ok(ShortFrameSolution { distribution, report, residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_distribution;
    use crate::game::TwoUserOracle;

    #[test]
    fn two_user_ne_examples() {
        let m4 = two_user_ne(4).unwrap();
        let expected = [4.0 / 15.0, 6.0 / 15.0, 4.0 / 15.0, 1.0 / 15.0];
        for (a, b) in m4.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(two_user_ne(1).unwrap().probs(), &[1.0]);
        let m2 = two_user_ne(2).unwrap();
        assert!((m2.prob(1) - 2.0 / 3.0).abs() < 1e-12 && (m2.prob(2) - 1.0 / 3.0).abs() < 1e-12);
        assert!(two_user_ne(0).is_err());
    }

    #[test]
    fn two_user_ne_forms_agree_up_to_twelve() {
        for m in 1..=12 {
            two_user_ne(m).unwrap();
            two_user_ne_throughput(m).unwrap();
        }
    }

    #[test]
    fn two_user_ne_equalizes_esu() {
        for m in 1..=10 {
            let dist = two_user_ne(m).unwrap();
            let esu: Vec<f64> = (1..=m)
                .map(|k| dist.iter().map(|(j, p)| p * esu_two_user(k, j, m)).sum())
                .collect();
            for (k, e) in esu.iter().enumerate() {
                let formula = 2.0 * (1.0 - dist.prob(k + 1) / binomial(m, k + 1));
                assert!((e - formula).abs() < 1e-12);
                assert!((e - esu[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_user_throughput_examples() {
        assert!((two_user_ne_throughput(4).unwrap() - 28.0 / 60.0).abs() < 1e-12);
        assert_eq!(two_user_ne_throughput(1).unwrap(), 0.0);
        let aloha = DegreeDistribution::degenerate(1).unwrap();
        assert!((two_user_throughput(&aloha, 4) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn ne_residual_shrinks_with_reward() {
        let dist = two_user_ne(4).unwrap();
        for r in [1e3, 1e4, 4e4] {
            let cfg = GameConfig::new(4, 2).with_reward(r);
            let oracle = TwoUserOracle { slots: 4, candidate: dist.clone(), reward: r, cost: 1.0 };
            let report = check_nash(&cfg, &dist, &oracle, 4, 2.0 * 4.0 / r * r).unwrap();
            assert!(report.max_equality_residual <= 2.0 * 4.0, "r = {r}");
            // Relative to the reward scale the residual vanishes.
            assert!(report.max_equality_residual / r <= 2.0 * 4.0 / r);
        }
    }

    #[test]
    fn identical_success_gives_cost_spaced_rewards() {
        let target = make_distribution(&[0.0, 0.5, 0.3, 0.2]).unwrap();
        let p = 0.6;
        let est = SuccessEstimate { mean: p, std_error: 0.0, trials: 1 };
        let fit = fit_rewards_from_estimates(&target, 1.0, &[est; 4], est, &RewardScheme::Constant(1.0)).unwrap();
        let r: Vec<f64> = fit.support_rewards.iter().map(|r| r.reward).collect();
        assert!((r[1] - r[0] - 1.0 / p).abs() < 1e-9);
        assert!((r[2] - r[0] - 2.0 / p).abs() < 1e-9);
        assert!((fit.r_infinity - fit.recomputed_r_infinity(&target)).abs() == 0.0);
    }

    #[test]
    fn fitted_rewards_satisfy_equalities_and_bounds() {
        let target = make_distribution(&[0.0, 0.5, 0.5, 0.0]).unwrap();
        let se = |m: f64| SuccessEstimate { mean: m, std_error: 0.001, trials: 100_000 };
        let deviant = [se(0.4), se(0.55), se(0.7), se(0.8)];
        let conformist = se(0.625);
        let fit = fit_rewards_from_estimates(&target, 1.0, &deviant, conformist, &RewardScheme::Constant(1.0)).unwrap();
        let mixed = fit.r_infinity * conformist.mean - target.average_degree();
        for r in &fit.support_rewards {
            let u = r.reward * deviant[r.degree - 1].mean - r.degree as f64;
            assert!((u - mixed).abs() < 1e-9);
            assert!(r.std_error > 0.0);
        }
        for b in &fit.bounds {
            let bound = b.max_reward.unwrap();
            let u = bound * deviant[b.degree - 1].mean - b.degree as f64;
            assert!((u - mixed).abs() < 1e-9, "bound is an active constraint");
        }
        assert_eq!(fit.bounds.iter().map(|b| b.degree).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn singleton_support_is_vacuous() {
        let target = DegreeDistribution::degenerate(2).unwrap();
        let est = |m: f64| SuccessEstimate { mean: m, std_error: 0.0, trials: 1 };
        let fit = fit_rewards_from_estimates(&target, 1.0, &[est(0.3), est(0.5)], est(0.5), &RewardScheme::Constant(6.0))
            .unwrap();
        assert!(fit.equality_vacuous);
        assert_eq!(fit.support_rewards[0].reward, 6.0);
        // 6·0.5 - 2 = 1 = r₁·0.3 - 1
        assert!((fit.bounds[0].max_reward.unwrap() - 2.0 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn unreachable_degree_is_unbounded() {
        let target = make_distribution(&[0.0, 0.5, 0.5]).unwrap();
        let est = |m: f64| SuccessEstimate { mean: m, std_error: 0.0, trials: 1 };
        let fit = fit_rewards_from_estimates(&target, 1.0, &[est(0.0), est(0.5), est(0.7)], est(0.6), &RewardScheme::Constant(1.0))
            .unwrap();
        assert_eq!(fit.bounds[0].max_reward, None);
    }

    #[test]
    fn compositions_are_complete() {
        let mut seen = Vec::new();
        for_each_composition(3, 3, &mut |k| {
            seen.push(k.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 10);
        assert!(seen.iter().all(|k| k.iter().sum::<usize>() == 3));
        let mut empty = 0;
        for_each_composition(0, 0, &mut |_| {
            empty += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(empty, 1);
    }

    #[test]
    fn short_frame_utility_examples() {
        let cfg = GameConfig::new(5, 4).with_reward(500.0);
        let oracle = ExactCompositionOracle::new(cfg.clone());
        let aloha = DegreeDistribution::degenerate(1).unwrap();
        let u = short_frame_utility(1, &aloha, &cfg, &oracle).unwrap();
        assert!((u - (500.0 * 0.512 - 1.0)).abs() < 1e-9);

        let lone = GameConfig::new(5, 1).with_reward(7.0).with_decode_prob(0.9);
        let oracle = ExactCompositionOracle::new(lone.clone());
        let u = short_frame_utility(1, &aloha, &lone, &oracle).unwrap();
        assert!((u - (7.0 * 0.9 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn short_frame_utility_matches_direct_enumeration() {
        // Averaging over compositions is the same as enumerating the
        // others' mixed strategies directly.
        let cfg = GameConfig::new(4, 3).with_reward(20.0);
        let dist = make_distribution(&[0.3, 0.5, 0.2]).unwrap();
        let oracle = ExactCompositionOracle::new(cfg.clone());
        for d in 1..=4 {
            let via_comp = short_frame_utility(d, &dist, &cfg, &oracle).unwrap();
            let profile = StrategyProfile::with_deviant(&dist, 3, d);
            let ps = exact_success_probabilities(&cfg, &profile, 1e8).unwrap()[0];
            let direct = 20.0 * ps - d as f64;
            assert!((via_comp - direct).abs() < 1e-9, "d = {d}");
        }
    }

    #[test]
    fn singleton_support_solution() {
        let cfg = GameConfig::new(5, 4).with_reward(500.0);
        let oracle = ExactCompositionOracle::new(cfg.clone());
        let sol = solve_short_frame_ne(&[2], &cfg, &oracle, ShortFrameOptions::default()).unwrap();
        assert_eq!(sol.distribution.probs(), &[0.0, 1.0]);
        assert_eq!(sol.report.max_equality_residual, 0.0);
    }

    #[test]
    fn short_frame_rejects_bad_support() {
        let cfg = GameConfig::new(5, 4).with_reward(500.0);
        let oracle = ExactCompositionOracle::new(cfg.clone());
        assert!(solve_short_frame_ne(&[], &cfg, &oracle, ShortFrameOptions::default()).is_err());
        assert!(solve_short_frame_ne(&[0, 1], &cfg, &oracle, ShortFrameOptions::default()).is_err());
        assert!(solve_short_frame_ne(&[6], &cfg, &oracle, ShortFrameOptions::default()).is_err());
    }
}
