//! Best-reply dynamics over simulated frames.
//!
//! Every user holds a pure degree. Users are visited one at a time; the
//! visited user estimates its utility for each degree `1..=d_max` against
//! the others' current degrees and moves to the best one. A full pass
//! without any change ends the dynamics at an (estimated) equilibrium.

use serde::{Deserialize, Serialize};

use crate::config::{GameConfig, StrategyProfile};
use crate::error::{Error, Result};
use crate::frame_sim::{estimate_profile_throughput, run_chunked, FrameBuffer};
use crate::game::UtilityEstimate;
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitOrder {
    /// Ascending user index every pass.
    #[default]
    Fixed,
    /// A fresh seeded permutation each pass.
    Shuffled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestReplyOptions {
    pub d_max: usize,
    pub frames_per_eval: u64,
    pub max_passes: usize,
    pub visit_order: VisitOrder,
    /// A challenger must beat the incumbent by this many standard errors of
    /// the paired difference.
    pub tie_factor: f64,
    pub seed: u64,
}

impl Default for BestReplyOptions {
    fn default() -> Self {
        Self {
            d_max: 6,
            frames_per_eval: 10_000,
            max_passes: 50,
            visit_order: VisitOrder::Fixed,
            tie_factor: 2.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyUpdate {
    pub pass: usize,
    pub user: usize,
    pub from: usize,
    pub to: usize,
    pub incumbent: UtilityEstimate,
    pub challenger: UtilityEstimate,
    /// Margin the challenger had to clear.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestReplyState {
    pub pure_strategies: Vec<usize>,
    /// Completed full passes.
    pub pass_index: usize,
    pub converged: bool,
    /// Population share at each degree `1..=d_max`.
    pub empirical_distribution: Vec<f64>,
    /// Mean estimated utility of the users' chosen degrees, per pass.
    pub utility_trace: Vec<f64>,
    pub changes_per_pass: Vec<usize>,
    pub updates: Vec<StrategyUpdate>,
}

pub fn histogram(strategies: &[usize], d_max: usize) -> Vec<f64> {
    let mut h = vec![0.0; d_max];
    for &d in strategies {
        h[d - 1] += 1.0;
    }
    let n = strategies.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Candidate utilities of one user, evaluated on shared frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationEstimates {
    /// Reference degree the paired errors are taken against.
    pub reference: usize,
    /// Utility estimate at each degree `1..=d_max`.
    pub utilities: Vec<UtilityEstimate>,
    /// Standard error of `utilities[d-1] - utilities[reference-1]` from the
    /// per-frame paired differences.
    pub paired_std_error: Vec<f64>,
}

impl DeviationEstimates {
    pub fn utility(&self, degree: usize) -> UtilityEstimate {
        self.utilities[degree - 1]
    }

    /// Best degree other than the reference, by estimated utility.
    pub fn best_alternative(&self) -> Option<(usize, UtilityEstimate)> {
        self.utilities
            .iter()
            .enumerate()
            .filter(|&(i, _)| i + 1 != self.reference)
            .map(|(i, &u)| (i + 1, u))
            .max_by(|a, b| a.1.value.total_cmp(&b.1.value))
    }
}

/// Utility of `user` at every degree `1..=d_max` while the others keep
/// their pure degrees. All candidates share the same frames for the other
/// users (common random numbers).
pub fn evaluate_deviations(
    config: &GameConfig,
    strategies: &[usize],
    user: usize,
    reference: usize,
    d_max: usize,
    frames: u64,
    seed: u64,
) -> Result<DeviationEstimates> {
    if frames == 0 {
        return Err(Error::Validation("need at least one frame per evaluation".into()));
    }
    if reference == 0 || reference > d_max {
        return Err(Error::Validation(format!("reference degree {reference} outside 1..={d_max}")));
    }
    // Per candidate: successes, and joint successes with the reference.
    let (_, _, hits, joint) = run_chunked(
        frames,
        || (FrameBuffer::new(config.slots), vec![false; d_max], vec![0u64; d_max], vec![0u64; d_max]),
        |(buf, won, hits, joint), f| {
            let mut rng = RandomStream::derive(seed, &[f]);
            buf.clear();
            for (u, &d) in strategies.iter().enumerate() {
                if u != user {
                    buf.push_random_user(d, &mut rng);
                }
            }
            buf.draw_erasures(0, config.decode_prob, &mut rng);
            let me = buf.users();
            for (d, w) in (1..=d_max).zip(won.iter_mut()) {
                let mut own = rng.clone();
                buf.push_random_user(d, &mut own);
                buf.draw_erasures(me, config.decode_prob, &mut own);
                buf.decode();
                *w = buf.decoded()[me];
                buf.pop_user();
            }
            let won_ref = won[reference - 1];
            for i in 0..d_max {
                hits[i] += won[i] as u64;
                joint[i] += (won[i] && won_ref) as u64;
            }
        },
        |(buf, won, mut a, mut b), (_, _, c, d)| {
            a.iter_mut().zip(c).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(d).for_each(|(x, y)| *x += y);
            (buf, won, a, b)
        },
    );
    let n = frames as f64;
    let r_ref = config.rewards.reward(reference);
    let p_ref = hits[reference - 1] as f64 / n;
    let mut utilities = Vec::with_capacity(d_max);
    let mut paired_std_error = Vec::with_capacity(d_max);
    for d in 1..=d_max {
        let p = hits[d - 1] as f64 / n;
        let p_joint = joint[d - 1] as f64 / n;
        let reward = config.rewards.reward(d);
        utilities.push(UtilityEstimate {
            value: reward * p - d as f64 * config.cost,
            std_error: reward * (p * (1.0 - p) / n).sqrt(),
        });
        // Per-frame difference is reward*s_d - r_ref*s_ref.
        let mean = reward * p - r_ref * p_ref;
        let second = reward * reward * p + r_ref * r_ref * p_ref - 2.0 * reward * r_ref * p_joint;
        paired_std_error.push(((second - mean * mean).max(0.0) / n).sqrt());
    }
    Ok(DeviationEstimates { reference, utilities, paired_std_error })
}

fn visit_order(users: usize, order: VisitOrder, seed: u64, pass: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..users).collect();
    if order == VisitOrder::Shuffled {
        let mut rng = RandomStream::derive(seed, &[pass as u64, u64::MAX]);
        for i in (1..users).rev() {
            idx.swap(i, rng.below(i + 1));
        }
    }
    idx
}

/// Runs best-reply dynamics from the all-ones (framed ALOHA) profile.
pub fn best_reply_dynamics(config: &GameConfig, opts: &BestReplyOptions) -> Result<BestReplyState> {
    config.validate()?;
    if opts.d_max == 0 || opts.d_max > config.slots {
        return Err(Error::Config(format!(
            "d_max {} must lie in 1..={}",
            opts.d_max, config.slots
        )));
    }
    if opts.frames_per_eval == 0 {
        return Err(Error::Validation("need at least one frame per evaluation".into()));
    }
    let users = config.users;
    let mut strategies = vec![1usize; users];
    let mut utility_trace = Vec::new();
    let mut changes_per_pass = Vec::new();
    let mut updates = Vec::new();
    let mut converged = false;
    let mut pass = 0;

    while pass < opts.max_passes && !converged {
        let mut changes = 0;
        let mut utility_sum = 0.0;
        for user in visit_order(users, opts.visit_order, opts.seed, pass) {
            let seed = RandomStream::derive(opts.seed, &[pass as u64, user as u64]).next_seed();
            let current = strategies[user];
            let est =
                evaluate_deviations(config, &strategies, user, current, opts.d_max, opts.frames_per_eval, seed)?;
            let incumbent = est.utility(current);
            let (best, challenger) = est
                .utilities
                .iter()
                .enumerate()
                .fold((current, incumbent), |acc, (i, &u)| if u.value > acc.1.value { (i + 1, u) } else { acc });
            let threshold = opts.tie_factor * est.paired_std_error[best - 1];
            if best != current && challenger.value - incumbent.value > threshold {
                strategies[user] = best;
                changes += 1;
                updates.push(StrategyUpdate { pass, user, from: current, to: best, incumbent, challenger, threshold });
                utility_sum += challenger.value;
            } else {
                utility_sum += incumbent.value;
            }
        }
        pass += 1;
        changes_per_pass.push(changes);
        utility_trace.push(if users > 0 { utility_sum / users as f64 } else { 0.0 });
        converged = changes == 0;
    }

    Ok(BestReplyState {
        empirical_distribution: histogram(&strategies, opts.d_max),
        pure_strategies: strategies,
        pass_index: pass,
        converged,
        utility_trace,
        changes_per_pass,
        updates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCheck {
    pub user: usize,
    pub incumbent: usize,
    pub best_alternative: usize,
    /// Estimated utility gain of the best alternative over the incumbent.
    pub gain: f64,
    /// Three standard errors of the paired difference.
    pub noise: f64,
}

impl DeviationCheck {
    pub fn profitable(&self) -> bool {
        self.gain > self.noise
    }
}

/// Re-estimates each listed user's best deviation with fresh frames.
pub fn check_deviations(
    config: &GameConfig,
    strategies: &[usize],
    users: &[usize],
    d_max: usize,
    frames: u64,
    seed: u64,
) -> Result<Vec<DeviationCheck>> {
    users
        .iter()
        .map(|&user| {
            let s = RandomStream::derive(seed, &[user as u64]).next_seed();
            let current = strategies[user];
            let est = evaluate_deviations(config, strategies, user, current, d_max, frames, s)?;
            let incumbent = est.utility(current);
            let (best_alternative, best) = est.best_alternative().unwrap_or((current, incumbent));
            Ok(DeviationCheck {
                user,
                incumbent: current,
                best_alternative,
                gain: best.value - incumbent.value,
                noise: 3.0 * est.paired_std_error[best_alternative - 1],
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub reward: f64,
    pub decode_prob: f64,
    pub histogram: Vec<f64>,
    pub throughput: f64,
    pub plr: f64,
    pub std_error: f64,
    pub converged: bool,
    pub passes: usize,
}

/// Best reply at each reward of `rewards`, then the converged profile's
/// throughput over `eval_frames` fresh frames (the same frames for every
/// row).
pub fn sweep_rewards(
    template: &GameConfig,
    rewards: &[f64],
    opts: &BestReplyOptions,
    eval_frames: u64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if rewards.is_empty() {
        return Err(Error::Validation("reward grid is empty".into()));
    }
    let eval_seed = RandomStream::derive(seed, &[u64::MAX]).next_seed();
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let config = template.clone().with_reward(r);
            let run_opts = BestReplyOptions {
                seed: RandomStream::derive(seed, &[i as u64]).next_seed(),
                ..*opts
            };
            let state = best_reply_dynamics(&config, &run_opts)?;
            let profile = StrategyProfile::pure(&state.pure_strategies);
            let est = estimate_profile_throughput(&config, &profile, eval_frames, eval_seed)?;
            Ok(SweepRow {
                reward: r,
                decode_prob: config.decode_prob,
                histogram: state.empirical_distribution,
                throughput: est.throughput,
                plr: est.plr,
                std_error: est.std_error,
                converged: state.converged,
                passes: state.pass_index,
            })
        })
        .collect()
}
