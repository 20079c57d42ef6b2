//! Reproduction checks for the published results.
//!
//! Each criterion runs a fixed, seeded workload and compares it with the
//! reference values at a stated tolerance. The outcome lists every
//! individual comparison so a failure shows exactly which number is off.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::best_reply::{best_reply_dynamics, check_deviations, sweep_rewards, BestReplyOptions, SweepRow};
use crate::config::{GameConfig, StrategyProfile};
use crate::density::{default_load_grid, de_fixed_point, peak_throughput, FixedPointOptions};
use crate::distribution::{make_distribution, DegreeDistribution};
use crate::error::Result;
use crate::frame_sim::{
    estimate_profile_throughput, estimate_success_probs, estimate_throughput, exact_success_probabilities,
    exact_throughput, run_sic, DEFAULT_ENUMERATION_BUDGET,
};
use crate::game::{
    check_nash, mixed_utility, two_user_success, MonteCarloOracle, TabulatedOracle, TwoUserOracle, UtilityOracle,
};
use crate::ne_solvers::{
    fit_rewards_for_ne, solve_short_frame_ne, two_user_ne, two_user_throughput, ExactCompositionOracle,
    ShortFrameOptions,
};
use crate::rng::RandomStream;

/// Titles of the criteria, indexed by `id - 1`.
pub const TITLES: [&str; 10] = [
    "two-user NE distribution",
    "two-user NE throughput",
    "two-user success probabilities",
    "density evolution peaks",
    "asymptotic consistency",
    "short-frame equilibria",
    "reward fitting",
    "best reply",
    "reward sweep shape",
    "property suites",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Lines reported for context only; they never fail the criterion.
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionOutcome {
    /// One-line summary, e.g. `PASS  4 density evolution peaks (0.4 s)`.
    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.label.as_str()).collect();
        let mut line = format!(
            "{} {:>2} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        );
        if !failed.is_empty() {
            line.push_str(&format!(" failed: {}", failed.join("; ")));
        }
        line
    }
}

#[derive(Default)]
struct Checks {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Checks {
    fn holds(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { label: label.into(), passed, detail: detail.into() });
    }

    fn near(&mut self, label: impl Into<String>, value: f64, target: f64, tol: f64) {
        let passed = (value - target).abs() <= tol;
        self.holds(label, passed, format!("{value:.6} vs {target} ± {tol}"));
    }

    fn at_least(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.holds(label, value >= bound, format!("{value:.6} >= {bound:.6}"));
    }

    fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }
}

/// Runs criterion `id` (1..=10) with the given base seed.
pub fn run_criterion(id: usize, seed: u64) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut c = Checks::default();
    let s = RandomStream::derive(seed, &[id as u64]).next_seed();
    match id {
        1 => two_user_distribution(&mut c)?,
        2 => two_user_throughput_check(&mut c, s)?,
        3 => two_user_success_check(&mut c, s)?,
        4 => density_peaks(&mut c)?,
        5 => asymptotic_consistency(&mut c, s)?,
        6 => short_frame(&mut c, s)?,
        7 => reward_fit(&mut c, s)?,
        8 => best_reply(&mut c, s)?,
        9 => sweep_shape(&mut c, s)?,
        10 => properties(&mut c, s)?,
        _ => return Err(crate::Error::Validation(format!("no criterion {id}; expected 1..=10"))),
    }
    Ok(CriterionOutcome {
        id,
        title: TITLES[id - 1].to_string(),
        passed: c.checks.iter().all(|k| k.passed),
        checks: c.checks,
        notes: c.notes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn offsets(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

fn two_user_distribution(c: &mut Checks) -> Result<()> {
    let ne = two_user_ne(4)?;
    let exact = [4.0, 6.0, 4.0, 1.0].map(|v| v / 15.0);
    let published = [0.27, 0.4, 0.26, 0.07];
    for d in 1..=4 {
        c.near(format!("Λ{d} exact"), ne.prob(d), exact[d - 1], 1e-12);
        c.near(format!("Λ{d} published"), ne.prob(d), published[d - 1], 0.005);
    }
    Ok(())
}

fn two_user_throughput_check(c: &mut Checks, seed: u64) -> Result<()> {
    let ne = two_user_ne(4)?;
    let cfg = GameConfig::new(4, 2);
    let exact = exact_throughput(&cfg, &StrategyProfile::symmetric(&ne, 2), DEFAULT_ENUMERATION_BUDGET)?;
    c.near("enumeration", exact, 28.0 / 60.0, 1e-12);
    c.near("ESU sum", two_user_throughput(&ne, 4), 28.0 / 60.0, 1e-12);
    let mc = estimate_throughput(&cfg, &ne, 1_000_000, seed)?;
    c.near("Monte Carlo 1e6", mc.throughput, exact, 0.002);
    let aloha_dist = DegreeDistribution::degenerate(1)?;
    let aloha = exact_throughput(&cfg, &StrategyProfile::symmetric(&aloha_dist, 2), DEFAULT_ENUMERATION_BUDGET)?;
    c.near("framed ALOHA", aloha, 0.375, 1e-12);
    c.at_least("improvement ratio", exact / aloha, 1.24);
    c.note(format!("published 0.49 (+30%) against {exact:.4} (+{:.1}%)", (exact / aloha - 1.0) * 100.0));
    Ok(())
}

fn two_user_success_check(c: &mut Checks, seed: u64) -> Result<()> {
    let cfg = GameConfig::new(4, 2);
    for i in 1..=4 {
        for j in 1..=4 {
            let profile = StrategyProfile::pure(&[i, j]);
            let s = RandomStream::derive(seed, &[i as u64, j as u64]).next_seed();
            let est = estimate_success_probs(&cfg, &profile, 100_000, s)?[0];
            let formula = two_user_success(i, j, 4);
            let label = format!("[{i},{j}]");
            if i != j {
                c.holds(label, formula == 1.0 && est.mean == 1.0, format!("formula {formula}, simulated {}", est.mean));
            } else {
                let gap = (est.mean - formula).abs();
                let ok = if est.std_error == 0.0 { gap == 0.0 } else { gap <= 4.0 * est.std_error };
                c.holds(label, ok, format!("{:.5} vs {formula:.5}, σ {:.5}", est.mean, est.std_error));
            }
        }
    }
    Ok(())
}

/// Distribution reported for `d_max = 6` by the asymptotic optimization.
pub fn table_one_dmax6() -> DegreeDistribution {
    make_distribution(&[0.0, 0.54, 0.17, 0.0, 0.0, 0.29]).expect("valid distribution")
}

fn density_peaks(c: &mut Checks) -> Result<()> {
    let grid = default_load_grid();
    let opts = FixedPointOptions::default();
    let x = peak_throughput(&DegreeDistribution::degenerate(1)?, &grid, opts)?;
    // The grid brackets G = 1 to within one step, where T = G e^{-G} is flat
    // to second order.
    c.near("Λ = x peak", x.throughput, (-1.0f64).exp(), 1e-4);
    let x2 = peak_throughput(&DegreeDistribution::degenerate(2)?, &grid, opts)?;
    c.near("Λ = x² peak", x2.throughput, 0.543, 0.005);
    c.near("Λ = x² peak load", x2.load, 0.60, 0.02);
    let d6 = peak_throughput(&table_one_dmax6(), &grid, opts)?;
    c.near("d_max = 6 peak", d6.throughput, 0.910, 0.010);
    c.note(format!("peak loads: x at {}, x² at {}, d_max = 6 at {}", x.load, x2.load, d6.load));
    Ok(())
}

fn asymptotic_consistency(c: &mut Checks, seed: u64) -> Result<()> {
    let dists = [
        ("x", DegreeDistribution::degenerate(1)?),
        ("x²", DegreeDistribution::degenerate(2)?),
        ("0.5x²+0.5x³", make_distribution(&[0.0, 0.5, 0.5])?),
    ];
    for (name, dist) in &dists {
        for load in [0.5, 0.9] {
            let users = (2000.0 * load) as usize;
            let cfg = GameConfig::new(2000, users);
            let de = de_fixed_point(dist, load, FixedPointOptions::default())?;
            let s = RandomStream::derive(seed, &[users as u64, dist.d_max() as u64]).next_seed();
            let sim = estimate_throughput(&cfg, dist, 200, s)?;
            c.near(format!("{name} at G = {load}"), sim.plr, de.plr, 0.02);
        }
    }
    Ok(())
}

fn short_frame(c: &mut Checks, seed: u64) -> Result<()> {
    let cfg = GameConfig::new(5, 4).with_reward(500.0);
    let oracle = ExactCompositionOracle::new(cfg.clone());
    let opts = ShortFrameOptions::default();
    // The {2, 3} row sits within 0.001 of its tolerance edge, so the
    // simulation needs a standard error well below that.
    let frames = 1_000_000;
    let exact = |dist: &DegreeDistribution| {
        exact_throughput(&cfg, &StrategyProfile::symmetric(dist, cfg.users), DEFAULT_ENUMERATION_BUDGET)
    };
    let simulate = |dist: &DegreeDistribution, tag: u64| {
        estimate_throughput(&cfg, dist, frames, RandomStream::derive(seed, &[tag]).next_seed())
    };

    let rows: [(&[usize], &[f64], f64); 2] = [(&[2, 3], &[0.54, 0.46], 0.44), (&[1, 2, 3], &[0.25, 0.38, 0.37], 0.55)];
    for (k, (support, published, throughput)) in rows.into_iter().enumerate() {
        let sol = solve_short_frame_ne(support, &cfg, &oracle, opts)?;
        let found: Vec<f64> = support.iter().map(|&d| sol.distribution.prob(d)).collect();
        let worst = found.iter().zip(published).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c.holds(
            format!("support {support:?} distribution"),
            worst <= 0.03,
            format!("({}) vs {published:?}, worst gap {worst:.4}", offsets(&found)),
        );
        let sim = simulate(&sol.distribution, k as u64)?;
        c.near(format!("support {support:?} throughput"), sim.throughput, throughput, 0.02);
        c.note(format!(
            "support {support:?}: exact throughput {:.4}, deviation condition {}, worst deviation {:?}",
            exact(&sol.distribution)?,
            if sol.report.is_ne { "holds" } else { "fails" },
            sol.report.worst_deviation
        ));
    }

    let aloha = simulate(&DegreeDistribution::degenerate(1)?, 9)?;
    c.near("framed ALOHA throughput", aloha.throughput, 0.41, 0.01);

    match solve_short_frame_ne(&[1, 2, 3, 4], &cfg, &oracle, opts) {
        Ok(sol) => {
            let sim = simulate(&sol.distribution, 4)?;
            c.near("support [1, 2, 3, 4] throughput", sim.throughput, 0.30, 0.03);
            c.note(format!(
                "support [1, 2, 3, 4]: Λ = ({}), exact throughput {:.4}, deviation condition {}",
                offsets(sol.distribution.probs()),
                exact(&sol.distribution)?,
                if sol.report.is_ne { "holds" } else { "fails" }
            ));
        }
        Err(e) => c.holds("support [1, 2, 3, 4] throughput", false, format!("solver error: {e}")),
    }
    let published = make_distribution(&[0.03, 0.249, 0.4, 0.321])?;
    let utilities: Vec<f64> = (1..=4)
        .map(|d| crate::ne_solvers::short_frame_utility(d, &published, &cfg, &oracle))
        .collect::<Result<_>>()?;
    c.note(format!(
        "published support [1, 2, 3, 4] row has utilities ({}) and exact throughput {:.4}",
        offsets(&utilities),
        exact(&published)?
    ));
    Ok(())
}

fn reward_fit(c: &mut Checks, seed: u64) -> Result<()> {
    let target = table_one_dmax6();
    let cfg = GameConfig::new(100, 90);
    let frames = 100_000;
    let fit = fit_rewards_for_ne(&target, &cfg, frames, seed)?;
    let published = [(2, 17.26), (3, 16.58), (6, 17.39)];
    for (d, r) in published {
        let got = fit.support_rewards.iter().find(|x| x.degree == d).map_or(f64::NAN, |x| x.reward);
        c.near(format!("r{d}"), got, r, 0.6);
    }
    for (d, r) in [(1, 19.79), (4, 16.63), (5, 16.86)] {
        let got = fit.bounds.iter().find(|b| b.degree == d).and_then(|b| b.max_reward).unwrap_or(f64::NAN);
        c.near(format!("bound r{d}"), got, r, 0.6);
    }
    c.holds("constant reward infeasible", !fit.constant_reward_feasible, format!("{}", fit.constant_reward_feasible));
    c.note(format!(
        "reward standard errors ({}), condition number {:.1}",
        offsets(&fit.support_rewards.iter().map(|r| r.std_error).collect::<Vec<_>>()),
        fit.condition_number
    ));

    // Fresh frames: the fitted scheme must make the target an equilibrium.
    let fitted = cfg.clone().with_rewards(fit.per_degree_scheme());
    let oracle = MonteCarloOracle {
        config: fitted.clone(),
        candidate: target.clone(),
        frames,
        seed: RandomStream::derive(seed, &[7]).next_seed(),
    };
    let table = (1..=6).map(|d| oracle.utility(d)).collect::<Result<Vec<_>>>()?;
    let eps = 3.0 * table.iter().map(|u| u.std_error).fold(0.0, f64::max);
    let report = check_nash(&fitted, &target, &TabulatedOracle(table), 6, eps)?;
    c.holds(
        "fitted scheme passes the equilibrium check",
        report.is_ne,
        format!("ε {eps:.4}, residual {:.4}, worst deviation {:?}", report.max_equality_residual, report.worst_deviation),
    );
    Ok(())
}

fn best_reply(c: &mut Checks, seed: u64) -> Result<()> {
    let base = GameConfig::new(100, 90);
    let opts = BestReplyOptions { seed, ..Default::default() };
    let eval_frames = 100_000;
    let eval_seed = RandomStream::derive(seed, &[u64::MAX]).next_seed();

    let low = best_reply_dynamics(&base.clone().with_reward(4.0), &opts)?;
    c.holds(
        "r = 4 stays at degree 1",
        low.converged && low.pure_strategies.iter().all(|&d| d == 1),
        format!("histogram ({}), passes {}", offsets(&low.empirical_distribution), low.pass_index),
    );

    let cfg = base.clone().with_reward(8.0);
    let high = best_reply_dynamics(&cfg, &opts)?;
    let h = &high.empirical_distribution;
    c.holds("r = 8 converged", high.converged, format!("{} passes", high.pass_index));
    c.near("r = 8 share at degree 2", h[1], 0.5, 0.05);
    c.near("r = 8 share at degree 3", h[2], 0.5, 0.05);
    c.holds("r = 8 support is {2, 3}", h[1] + h[2] == 1.0, format!("histogram ({})", offsets(h)));
    let utility = high.utility_trace.last().copied().unwrap_or(f64::NAN);
    c.near("r = 8 utility", utility, 1.1, 0.1);
    let est = estimate_profile_throughput(&cfg, &StrategyProfile::pure(&high.pure_strategies), eval_frames, eval_seed)?;
    c.near("r = 8 throughput", est.throughput, 0.405, 0.015);
    let aloha = estimate_throughput(&cfg, &DegreeDistribution::degenerate(1)?, eval_frames, eval_seed)?;
    c.at_least("gain over framed ALOHA", est.throughput / aloha.throughput, 1.05);

    let users: Vec<usize> = (0..cfg.users).collect();
    let checks = check_deviations(&cfg, &high.pure_strategies, &users, opts.d_max, 4 * opts.frames_per_eval, seed ^ 1)?;
    let profitable: Vec<usize> = checks.iter().filter(|d| d.profitable()).map(|d| d.user).collect();
    c.note(format!(
        "re-evaluation at 4x frames: {} of {} users have a deviation above 3 paired standard errors {profitable:?}",
        profitable.len(),
        users.len()
    ));
    Ok(())
}

fn sweep_shape(c: &mut Checks, seed: u64) -> Result<()> {
    let rewards = [4.0, 4.5, 5.0, 8.0, 12.0, 20.0];
    let opts = BestReplyOptions { seed, ..Default::default() };
    let eval_frames = 100_000;
    let argmax = |rows: &[SweepRow]| {
        rows.iter().max_by(|a, b| a.throughput.total_cmp(&b.throughput)).map(|r| (r.reward, r.throughput)).unwrap()
    };
    let table = |rows: &[SweepRow]| {
        rows.iter().map(|r| format!("{}:{:.4}", r.reward, r.throughput)).collect::<Vec<_>>().join(" ")
    };
    let reference = |p: f64| -> Result<(f64, f64)> {
        let cfg = GameConfig::new(100, 90).with_decode_prob(p);
        let s = RandomStream::derive(seed, &[u64::MAX]).next_seed();
        let aloha = estimate_throughput(&cfg, &DegreeDistribution::degenerate(1)?, eval_frames, s)?;
        let asym = estimate_throughput(&cfg, &table_one_dmax6(), eval_frames, s)?;
        Ok((aloha.throughput, asym.throughput))
    };

    let full = GameConfig::new(100, 90);
    let rows = sweep_rewards(&full, &rewards, &opts, eval_frames, seed)?;
    let (r_best, t_best) = argmax(&rows);
    c.holds("p = 1 maximum at r = 4.5", r_best == 4.5, table(&rows));
    let at = |r: f64| rows.iter().find(|x| x.reward == r).map_or(f64::NAN, |x| x.throughput);
    c.holds("p = 1 throughput falls from r = 8 to r = 20", at(20.0) < at(8.0), format!("{:.4} < {:.4}", at(20.0), at(8.0)));
    let (aloha, asym) = reference(1.0)?;
    c.at_least("p = 1 peak over framed ALOHA", t_best / aloha, 1.12);
    c.at_least("p = 1 peak over the asymptotic design", t_best / asym, 1.01);

    let lossy = full.with_decode_prob(0.9);
    let rows = sweep_rewards(&lossy, &rewards, &opts, eval_frames, seed)?;
    let (r_best, t_best) = argmax(&rows);
    c.holds("p = 0.9 maximum at r = 5", r_best == 5.0, table(&rows));
    let (aloha, asym) = reference(0.9)?;
    c.note(format!("p = 0.9 peak over framed ALOHA: {:.3}", t_best / aloha));
    c.at_least("p = 0.9 peak over the asymptotic design", t_best / asym, 1.05);
    Ok(())
}

fn properties(c: &mut Checks, seed: u64) -> Result<()> {
    let mut rng = RandomStream::derive(seed, &[]);
    let random_dist = |rng: &mut RandomStream, d_max: usize| {
        let raw: Vec<f64> = (0..d_max).map(|_| if rng.bernoulli(0.3) { 0.0 } else { rng.uniform() }).collect();
        if raw.iter().sum::<f64>() > 0.0 {
            make_distribution(&raw)
        } else {
            DegreeDistribution::degenerate(1 + rng.below(d_max))
        }
    };

    // Equilibrium characterization against the definition: no degree earns
    // more than the candidate's own mixed utility.
    let mut mismatches = 0;
    let mut equilibria = 0;
    let trials = 400;
    for t in 0..trials {
        let (reward, cost) = (1.0 + 20.0 * rng.uniform(), if (t / 4) % 2 == 0 { 1.0 } else { 0.0 });
        let cand = match t % 4 {
            0 => two_user_ne(4)?,
            1 => DegreeDistribution::degenerate(1 + rng.below(4))?,
            _ => random_dist(&mut rng, 4)?,
        };
        let cfg = GameConfig::new(4, 2).with_reward(reward).with_cost(cost);
        let oracle = TwoUserOracle { slots: 4, candidate: cand.clone(), reward, cost };
        let utils: Vec<f64> = (1..=4).map(|d| oracle.utility(d).map(|u| u.value)).collect::<Result<_>>()?;
        let mixed = mixed_utility(&cand, &utils)?;
        let by_definition = utils.iter().all(|&u| u <= mixed + 1e-9);
        let report = check_nash(&cfg, &cand, &oracle, 4, 1e-9)?;
        mismatches += (report.is_ne != by_definition) as usize;
        equilibria += by_definition as usize;
    }
    c.holds(
        "equilibrium check matches the definition",
        mismatches == 0 && equilibria > 0,
        format!("{mismatches} mismatches over {trials} candidates, {equilibria} equilibria"),
    );

    // Mixed deviant utility is the convex combination of its pure utilities.
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (own, other) = (random_dist(&mut rng, 4)?, random_dist(&mut rng, 4)?);
        let (reward, cost) = (10.0 * rng.uniform(), rng.uniform());
        let oracle = TwoUserOracle { slots: 4, candidate: other.clone(), reward, cost };
        let pure: Vec<f64> = (1..=4).map(|d| oracle.utility(d).map(|u| u.value)).collect::<Result<_>>()?;
        let direct: f64 = own
            .iter()
            .flat_map(|(i, pi)| other.iter().map(move |(j, pj)| pi * pj * (reward * two_user_success(i, j, 4) - i as f64 * cost)))
            .sum();
        worst = worst.max((mixed_utility(&own, &pure)? - direct).abs());
    }
    c.holds("convex-combination identity", worst < 1e-12, format!("largest gap {worst:e}"));

    // Relabeling users and slots relabels the decoded set.
    let mut violations = 0;
    for _ in 0..300 {
        let slots = 2 + rng.below(12);
        let users = 1 + rng.below(10);
        let mut placements = Vec::new();
        let mut erased = Vec::new();
        for _ in 0..users {
            let d = 1 + rng.below(slots.min(4));
            let mut all: Vec<usize> = (0..slots).collect();
            for i in 0..d {
                let k = i + rng.below(slots - i);
                all.swap(i, k);
            }
            placements.push(all[..d].to_vec());
            erased.push((0..d).map(|_| rng.bernoulli(0.2)).collect::<Vec<bool>>());
        }
        let base = run_sic(&placements, &erased, slots)?;
        let mut user_perm: Vec<usize> = (0..users).collect();
        let mut slot_perm: Vec<usize> = (0..slots).collect();
        for i in (1..users).rev() {
            user_perm.swap(i, rng.below(i + 1));
        }
        for i in (1..slots).rev() {
            slot_perm.swap(i, rng.below(i + 1));
        }
        let moved: Vec<Vec<usize>> =
            user_perm.iter().map(|&u| placements[u].iter().map(|&s| slot_perm[s]).collect()).collect();
        let moved_erased: Vec<Vec<bool>> = user_perm.iter().map(|&u| erased[u].clone()).collect();
        let out = run_sic(&moved, &moved_erased, slots)?;
        violations += user_perm.iter().enumerate().filter(|&(k, &u)| out.decoded[k] != base.decoded[u]).count();
    }
    c.holds("SIC relabeling invariance", violations == 0, format!("{violations} mismatched users over 300 frames"));

    // Scaling reward and cost together scales every utility and keeps the
    // equilibrium verdict.
    let mut bad = 0;
    for _ in 0..200 {
        let cand = random_dist(&mut rng, 4)?;
        let (reward, cost, k) = (20.0 * rng.uniform(), rng.uniform(), 0.1 + 10.0 * rng.uniform());
        let base = TwoUserOracle { slots: 4, candidate: cand.clone(), reward, cost };
        let scaled = TwoUserOracle { slots: 4, candidate: cand.clone(), reward: k * reward, cost: k * cost };
        for d in 1..=4 {
            let (a, b) = (base.utility(d)?.value, scaled.utility(d)?.value);
            bad += ((k * a - b).abs() > 1e-9 * (1.0 + b.abs())) as usize;
        }
        let cfg = GameConfig::new(4, 2);
        let v1 = check_nash(&cfg, &cand, &base, 4, 1e-3)?.is_ne;
        let v2 = check_nash(&cfg, &cand, &scaled, 4, k * 1e-3)?.is_ne;
        bad += (v1 != v2) as usize;
    }
    c.holds("utility homogeneity", bad == 0, format!("{bad} violations"));

    // Monte Carlo against enumeration on every pure profile of the small
    // instances, plus mixed and lossy cases.
    let mut compared = 0;
    let mut outside = Vec::new();
    let mut compare = |cfg: &GameConfig, profile: &StrategyProfile, tag: u64| -> Result<()> {
        let exact = exact_success_probabilities(cfg, profile, DEFAULT_ENUMERATION_BUDGET)?;
        let s = RandomStream::derive(seed, &[tag]).next_seed();
        let est = estimate_success_probs(cfg, profile, 20_000, s)?;
        for (e, m) in exact.iter().zip(&est) {
            compared += 1;
            let gap = (e - m.mean).abs();
            let ok = if m.std_error == 0.0 { gap < 1e-12 } else { gap <= 4.5 * m.std_error };
            if !ok {
                outside.push(format!("M={} N={} {:.4} vs {:.4}", cfg.slots, cfg.users, m.mean, e));
            }
        }
        Ok(())
    };
    let mut tag = 0;
    for slots in 1..=4 {
        for users in 1..=3 {
            for p in [1.0, 0.7] {
                let cfg = GameConfig::new(slots, users).with_decode_prob(p);
                let mut degrees = vec![1; users];
                loop {
                    tag += 1;
                    compare(&cfg, &StrategyProfile::pure(&degrees), tag)?;
                    let Some(i) = degrees.iter().position(|&d| d < slots) else { break };
                    degrees[i] += 1;
                    degrees[..i].iter_mut().for_each(|d| *d = 1);
                }
                tag += 1;
                let mixed = random_dist(&mut rng, slots)?;
                compare(&cfg, &StrategyProfile::symmetric(&mixed, users), tag)?;
            }
        }
    }
    c.holds(
        "Monte Carlo agrees with enumeration",
        outside.is_empty(),
        format!("{compared} probabilities compared; outside 4.5σ: {outside:?}"),
    );
    Ok(())
}

/// Runs the listed criteria in order, stopping at the first hard error.
pub fn run_all(ids: &[usize], seed: u64) -> Result<Vec<CriterionOutcome>> {
    ids.iter().map(|&id| run_criterion(id, seed)).collect()
}
