//! Asymptotic analysis (`M, N → ∞`) of the SIC decoder and a
//! differential-evolution search for throughput-maximizing distributions.
//!
//! The unresolved-edge recursion is
//!
//! ```text
//! q_0 = 1,  ϱ_i = 1 - exp(-q_i G Λ'(1)),  q_{i+1} = λ(ϱ_i)
//! ```
//!
//! with `λ(x) = Λ'(x) / Λ'(1)`. At the fixpoint the packet loss rate is
//! `Λ(ϱ_∞)` and the throughput `G (1 - P_L)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{make_distribution, DegreeDistribution};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// PLR below which a load counts as decodable.
pub const THRESHOLD_PLR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEvolutionResult {
    pub q_trajectory: Vec<f64>,
    pub rho_limit: f64,
    pub plr: f64,
    pub throughput: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DensityEvolutionResult {
    pub fn below_threshold(&self) -> bool {
        self.plr < THRESHOLD_PLR
    }
}

pub fn de_fixed_point(
    dist: &DegreeDistribution,
    load: f64,
    opts: FixedPointOptions,
) -> Result<DensityEvolutionResult> {
    if !(load > 0.0 && load.is_finite()) {
        return Err(Error::Validation(format!("load must be positive, got {load}")));
    }
    if opts.max_iter == 0 || opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::Validation("need max_iter >= 1 and tol > 0".into()));
    }
    let edge_load = load * dist.average_degree();
    let mut q = 1.0;
    let mut q_trajectory = vec![q];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let rho = -(-q * edge_load).exp_m1();
        // Clamp away round-off so the trajectory stays non-increasing.
        let next = dist.edge_eval(rho).clamp(0.0, q);
        iterations += 1;
        q_trajectory.push(next);
        let step = q - next;
        q = next;
        if step < opts.tol {
            converged = true;
            break;
        }
    }
    let rho_limit = -(-q * edge_load).exp_m1();
    let plr = dist.eval(rho_limit);
    Ok(DensityEvolutionResult {
        q_trajectory,
        rho_limit,
        plr,
        throughput: load * (1.0 - plr),
        iterations,
        converged,
    })
}

/// Asymptotic throughput `T(G, Λ)` alone.
pub fn asymptotic_throughput(dist: &DegreeDistribution, load: f64, opts: FixedPointOptions) -> Result<f64> {
    Ok(de_fixed_point(dist, load, opts)?.throughput)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub load: f64,
    pub throughput: f64,
}

/// Loads `start, start + step, …` up to `stop` inclusive (within `step/1e6`).
pub fn inclusive_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::Validation(format!(
            "grid {start}:{stop}:{step} needs step > 0 and stop >= start"
        )));
    }
    let n = ((stop - start) / step + 1e-6).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Default load grid `0.01..=1.5` in steps of `0.005`.
pub fn default_load_grid() -> Vec<f64> {
    inclusive_grid(0.01, 1.5, 0.005).expect("static grid")
}

/// Maximum of `T(G, Λ)` over `grid`; ties go to the smaller load.
pub fn peak_throughput(dist: &DegreeDistribution, grid: &[f64], opts: FixedPointOptions) -> Result<Peak> {
    if grid.is_empty() {
        return Err(Error::Validation("load grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("load grid must be strictly increasing".into()));
    }
    let mut best = Peak { load: grid[0], throughput: f64::NEG_INFINITY };
    for &load in grid {
        let t = asymptotic_throughput(dist, load, opts)?;
        if t > best.throughput {
            best = Peak { load, throughput: t };
        }
    }
    Ok(best)
}

/// DE/rand/1/bin settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    pub population: usize,
    pub mutation: f64,
    pub crossover: f64,
    pub generations: usize,
}

impl Default for DeParams {
    fn default() -> Self {
        Self { population: 40, mutation: 0.5, crossover: 0.9, generations: 300 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedDistribution {
    pub distribution: DegreeDistribution,
    pub objective: f64,
    /// Best objective after each generation (index 0 is the initial population).
    pub history: Vec<f64>,
}

/// Peak asymptotic throughput over a fixed load grid.
pub fn peak_objective(grid: Vec<f64>, opts: FixedPointOptions) -> impl Fn(&DegreeDistribution) -> f64 + Sync {
    move |dist| peak_throughput(dist, &grid, opts).map(|p| p.throughput).unwrap_or(f64::NEG_INFINITY)
}

/// Clip negatives to zero, then normalize. Falls back to the uniform
/// distribution if nothing positive survives.
fn repair(raw: &[f64]) -> DegreeDistribution {
    let clipped: Vec<f64> = raw.iter().map(|&x| x.max(0.0)).collect();
    make_distribution(&clipped).unwrap_or_else(|_| {
        make_distribution(&vec![1.0; raw.len()]).expect("uniform weights are valid")
    })
}

/// Differential evolution over the simplex of distributions on `1..=d_max`.
///
/// Trial vectors are generated sequentially from the seeded stream; their
/// objective values are evaluated in parallel. Greedy one-to-one selection
/// keeps the best member from ever getting worse.
pub fn optimize_distribution<F>(d_max: usize, objective: F, params: DeParams, seed: u64) -> Result<OptimizedDistribution>
where
    F: Fn(&DegreeDistribution) -> f64 + Sync,
{
    if d_max < 2 {
        return Err(Error::Validation("differential evolution needs d_max >= 2".into()));
    }
    if params.population < 10 {
        return Err(Error::Validation("population must be at least 10".into()));
    }
    let mut rng = RandomStream::from_seed(seed);
    let np = params.population;

    let mut members: Vec<DegreeDistribution> = (0..np)
        .map(|_| {
            let raw: Vec<f64> = (0..d_max).map(|_| rng.uniform()).collect();
            repair(&raw)
        })
        .collect();
    let mut scores: Vec<f64> = members.par_iter().map(&objective).collect();
    let best_of = |scores: &[f64]| {
        scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &s)| if s > b.1 { (i, s) } else { b })
    };
    let mut history = vec![best_of(&scores).1];

    for _ in 0..params.generations {
        let trials: Vec<DegreeDistribution> = (0..np)
            .map(|i| {
                let mut pick = |exclude: &[usize]| loop {
                    let k = rng.below(np);
                    if !exclude.contains(&k) {
                        return k;
                    }
                };
                let a = pick(&[i]);
                let b = pick(&[i, a]);
                let c = pick(&[i, a, b]);
                let forced = rng.below(d_max);
                let raw: Vec<f64> = (0..d_max)
                    .map(|j| {
                        if j == forced || rng.uniform() < params.crossover {
                            members[a].probs()[j]
                                + params.mutation * (members[b].probs()[j] - members[c].probs()[j])
                        } else {
                            members[i].probs()[j]
                        }
                    })
                    .collect();
                repair(&raw)
            })
            .collect();
        let trial_scores: Vec<f64> = trials.par_iter().map(&objective).collect();
        for (i, (trial, score)) in trials.into_iter().zip(trial_scores).enumerate() {
            if score >= scores[i] {
                members[i] = trial;
                scores[i] = score;
            }
        }
        history.push(best_of(&scores).1);
    }

    let (idx, objective) = best_of(&scores);
    Ok(OptimizedDistribution {
        distribution: members.swap_remove(idx),
        objective,
        history,
    })
}
