mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use irsa_game::best_reply::{best_reply_dynamics, sweep_rewards, BestReplyOptions, VisitOrder};
use irsa_game::density::{
    de_fixed_point, default_load_grid, inclusive_grid, optimize_distribution, peak_objective, peak_throughput,
    DeParams, FixedPointOptions,
};
use irsa_game::frame_sim::{estimate_profile_throughput, estimate_throughput};
use irsa_game::ne_solvers::{
    default_composition_oracle, fit_rewards_for_ne, solve_short_frame_ne, two_user_ne, two_user_throughput,
    ExactCompositionOracle, MonteCarloCompositionOracle, CompositionOracle, ShortFrameOptions,
};
use irsa_game::repro::run_criterion;
use irsa_game::{make_distribution, DegreeDistribution, GameConfig, StrategyProfile};

use output::{emit, join, sig6, Format, Table};

#[derive(Parser)]
#[command(name = "irsa", version, about = "Random access games on IRSA frames")]
struct Cli {
    /// Worker threads for Monte Carlo loops. Results do not depend on it.
    #[arg(long, env = "IRSA_WORKERS", global = true)]
    workers: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo throughput of a degree distribution.
    Simulate(SimulateArgs),
    /// Asymptotic analysis.
    #[command(subcommand)]
    Density(DensityCommand),
    /// Equilibrium constructions and dynamics.
    #[command(subcommand)]
    Equilibria(EquilibriaCommand),
    /// Runs the reproduction checks and prints one line per criterion.
    Repro(ReproArgs),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not in [0, 1]"))
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    parse_list_with(s, ',')
}

fn distribution(s: &str) -> Result<DegreeDistribution, String> {
    make_distribution(&parse_list::<f64>(s)?).map_err(|e| e.to_string())
}

/// `start:stop:step`, endpoints included.
fn grid(s: &str) -> Result<Vec<f64>, String> {
    let parts = parse_list_with::<f64>(s, ':')?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("{s:?} is not start:stop:step"));
    };
    inclusive_grid(start, stop, step).map_err(|e| e.to_string())
}

fn parse_list_with<T: std::str::FromStr>(s: &str, sep: char) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(sep).map(|x| x.trim().parse::<T>().map_err(|e| format!("{x:?}: {e}"))).collect()
}

#[derive(Args, Clone, Serialize)]
struct Frame {
    /// Slots per frame (M).
    #[arg(long, value_parser = positive)]
    slots: usize,
    /// Active users (N).
    #[arg(long, value_parser = positive)]
    users: usize,
    /// Probability that a singleton replica decodes.
    #[arg(long, default_value_t = 1.0, value_parser = probability)]
    decode_prob: f64,
}

#[derive(Args, Clone, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    frame: Frame,
    /// Comma-separated weights for degrees 1, 2, ...
    #[arg(long)]
    dist: String,
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum DensityCommand {
    /// Density evolution at one load.
    FixedPoint(FixedPointArgs),
    /// Peak throughput over a load grid.
    Peak(PeakArgs),
    /// Differential-evolution search for the distribution with the best peak.
    Optimize(OptimizeArgs),
}

#[derive(Args, Clone, Serialize)]
struct Iteration {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl Iteration {
    fn options(&self) -> FixedPointOptions {
        FixedPointOptions { tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Args, Clone, Serialize)]
struct FixedPointArgs {
    #[arg(long)]
    dist: String,
    /// Load G = N/M.
    #[arg(long)]
    load: f64,
    #[command(flatten)]
    iteration: Iteration,
}

#[derive(Args, Clone, Serialize)]
struct PeakArgs {
    #[arg(long)]
    dist: String,
    /// Load grid as start:stop:step (default 0.01:1.5:0.005).
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    iteration: Iteration,
}

#[derive(Args, Clone, Serialize)]
struct OptimizeArgs {
    #[arg(long, value_parser = positive)]
    dmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    population: usize,
    #[arg(long, default_value_t = 300)]
    generations: usize,
    #[arg(long, default_value_t = 0.5)]
    mutation: f64,
    #[arg(long, default_value_t = 0.9)]
    crossover: f64,
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    iteration: Iteration,
}

#[derive(Subcommand)]
enum EquilibriaCommand {
    /// Closed-form equilibrium of the two-user game.
    TwoUser(TwoUserArgs),
    /// Equal-utility equilibrium on a fixed support for short frames.
    ShortFrame(ShortFrameArgs),
    /// Per-degree rewards that make a target distribution an equilibrium.
    RewardFit(RewardFitArgs),
    /// Best-reply dynamics from framed ALOHA.
    BestReply(BestReplyArgs),
    /// Best reply over a grid of rewards.
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Serialize)]
struct TwoUserArgs {
    #[arg(long, default_value_t = 4, value_parser = positive)]
    slots: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OracleKind {
    /// Enumeration for small frames, Monte Carlo otherwise.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Args, Clone, Serialize)]
struct ShortFrameArgs {
    #[command(flatten)]
    frame: Frame,
    /// Comma-separated support degrees.
    #[arg(long)]
    support: String,
    #[arg(long)]
    reward: f64,
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    #[arg(long, value_enum, default_value_t = OracleKind::Auto)]
    oracle: OracleKind,
    /// Frames per composition for the Monte Carlo oracle.
    #[arg(long, default_value_t = 100_000)]
    oracle_frames: u64,
    /// Frames for the throughput of the solution.
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone, Serialize)]
struct RewardFitArgs {
    #[command(flatten)]
    frame: Frame,
    /// Target distribution.
    #[arg(long)]
    dist: String,
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Order {
    Fixed,
    Shuffled,
}

#[derive(Args, Clone, Serialize)]
struct Dynamics {
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    #[arg(long, default_value_t = 6, value_parser = positive)]
    dmax: usize,
    #[arg(long, default_value_t = 10_000)]
    frames_per_eval: u64,
    #[arg(long, default_value_t = 50)]
    max_passes: usize,
    #[arg(long, value_enum, default_value_t = Order::Fixed)]
    order: Order,
    /// Frames for the throughput of the converged profile.
    #[arg(long, default_value_t = 100_000)]
    eval_frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Dynamics {
    fn options(&self) -> BestReplyOptions {
        BestReplyOptions {
            d_max: self.dmax,
            frames_per_eval: self.frames_per_eval,
            max_passes: self.max_passes,
            visit_order: match self.order {
                Order::Fixed => VisitOrder::Fixed,
                Order::Shuffled => VisitOrder::Shuffled,
            },
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args, Clone, Serialize)]
struct BestReplyArgs {
    #[command(flatten)]
    frame: Frame,
    #[arg(long)]
    reward: f64,
    #[command(flatten)]
    dynamics: Dynamics,
}

#[derive(Args, Clone, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    frame: Frame,
    /// Reward grid as start:stop:step, endpoints included.
    #[arg(long)]
    rewards: String,
    #[command(flatten)]
    dynamics: Dynamics,
}

#[derive(Args, Clone, Serialize)]
struct ReproArgs {
    /// Comma-separated criterion numbers (default: all).
    #[arg(long)]
    criteria: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn game(frame: &Frame) -> GameConfig {
    GameConfig::new(frame.slots, frame.users).with_decode_prob(frame.decode_prob)
}

fn usage(msg: String) -> anyhow::Error {
    anyhow!(UsageError(msg))
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<irsa_game::Error>(),
                    Some(irsa_game::Error::Validation(_) | irsa_game::Error::Config(_))
                );
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.output.as_deref();
    let fmt = |default| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Simulate(a) => {
            let dist = distribution(&a.dist).map_err(usage)?;
            let cfg = game(&a.frame);
            let est = estimate_throughput(&cfg, &dist, a.frames, a.seed)?;
            emit("simulate", a, fmt(Format::Csv), out, &est, || {
                let mut t = Table::new(&["slots", "users", "load", "decode_prob", "frames", "throughput", "plr", "std_error"]);
                t.push(vec![
                    cfg.slots.to_string(),
                    cfg.users.to_string(),
                    sig6(cfg.load()),
                    sig6(cfg.decode_prob),
                    a.frames.to_string(),
                    sig6(est.throughput),
                    sig6(est.plr),
                    sig6(est.std_error),
                ]);
                t
            })
        }
        Command::Density(DensityCommand::FixedPoint(a)) => {
            let dist = distribution(&a.dist).map_err(usage)?;
            let res = de_fixed_point(&dist, a.load, a.iteration.options())?;
            emit("density fixed-point", a, fmt(Format::Csv), out, &res, || {
                let mut t = Table::new(&["load", "rho", "plr", "throughput", "iterations", "converged"]);
                t.push(vec![
                    sig6(a.load),
                    sig6(res.rho_limit),
                    sig6(res.plr),
                    sig6(res.throughput),
                    res.iterations.to_string(),
                    res.converged.to_string(),
                ]);
                t
            })
        }
        Command::Density(DensityCommand::Peak(a)) => {
            let dist = distribution(&a.dist).map_err(usage)?;
            let loads = match &a.grid {
                Some(g) => grid(g).map_err(usage)?,
                None => default_load_grid(),
            };
            let peak = peak_throughput(&dist, &loads, a.iteration.options())?;
            let row = DistributionRow::new(&dist, peak.load, peak.throughput);
            emit("density peak", a, fmt(Format::Csv), out, &row, || row.table())
        }
        Command::Density(DensityCommand::Optimize(a)) => {
            let loads = match &a.grid {
                Some(g) => grid(g).map_err(usage)?,
                None => default_load_grid(),
            };
            let params = DeParams {
                population: a.population,
                mutation: a.mutation,
                crossover: a.crossover,
                generations: a.generations,
            };
            let opts = a.iteration.options();
            let best = optimize_distribution(a.dmax, peak_objective(loads.clone(), opts), params, a.seed)?;
            let peak = peak_throughput(&best.distribution, &loads, opts)?;
            let row = DistributionRow::new(&best.distribution, peak.load, peak.throughput);
            emit("density optimize", a, fmt(Format::Csv), out, &row, || row.table())
        }
        Command::Equilibria(EquilibriaCommand::TwoUser(a)) => {
            let dist = two_user_ne(a.slots)?;
            let throughput = two_user_throughput(&dist, a.slots);
            let result = TwoUserResult { distribution: dist.probs().to_vec(), throughput };
            emit("equilibria two-user", a, fmt(Format::Csv), out, &result, || {
                let mut header: Vec<String> = (1..=a.slots).map(|d| format!("lambda_{d}")).collect();
                header.push("throughput".into());
                let mut t = Table { header, rows: Vec::new() };
                let mut row: Vec<String> = dist.probs().iter().map(|&p| sig6(p)).collect();
                row.push(sig6(throughput));
                t.push(row);
                t
            })
        }
        Command::Equilibria(EquilibriaCommand::ShortFrame(a)) => {
            let support = parse_list::<usize>(&a.support).map_err(usage)?;
            let cfg = game(&a.frame).with_reward(a.reward).with_cost(a.cost);
            let oracle: Box<dyn CompositionOracle> = match a.oracle {
                OracleKind::Auto => default_composition_oracle(&cfg, a.seed),
                OracleKind::Exact => Box::new(ExactCompositionOracle::new(cfg.clone())),
                OracleKind::MonteCarlo => Box::new(MonteCarloCompositionOracle::new(cfg.clone(), a.oracle_frames, a.seed)),
            };
            let sol = solve_short_frame_ne(&support, &cfg, oracle.as_ref(), ShortFrameOptions::default())?;
            let est = estimate_throughput(&cfg, &sol.distribution, a.frames, a.seed)?;
            let result = ShortFrameResult { solution: sol, throughput: est.throughput, throughput_std_error: est.std_error };
            emit("equilibria short-frame", a, fmt(Format::Json), out, &result, || {
                let mut t = Table::new(&["support", "distribution", "is_ne", "residual", "throughput", "std_error"]);
                t.push(vec![
                    a.support.replace(',', ";"),
                    join(result.solution.distribution.probs(), ";"),
                    result.solution.report.is_ne.to_string(),
                    sig6(result.solution.residual),
                    sig6(result.throughput),
                    sig6(result.throughput_std_error),
                ]);
                t
            })
        }
        Command::Equilibria(EquilibriaCommand::RewardFit(a)) => {
            let target = distribution(&a.dist).map_err(usage)?;
            let cfg = game(&a.frame).with_cost(a.cost);
            let fit = fit_rewards_for_ne(&target, &cfg, a.frames, a.seed)?;
            emit("equilibria reward-fit", a, fmt(Format::Json), out, &fit, || {
                let mut t = Table::new(&["degree", "kind", "reward", "std_error"]);
                for r in &fit.support_rewards {
                    t.push(vec![r.degree.to_string(), "support".into(), sig6(r.reward), sig6(r.std_error)]);
                }
                for b in &fit.bounds {
                    let bound = b.max_reward.map_or("inf".to_string(), sig6);
                    t.push(vec![b.degree.to_string(), "bound".into(), bound, String::new()]);
                }
                t
            })
        }
        Command::Equilibria(EquilibriaCommand::BestReply(a)) => {
            let cfg = game(&a.frame).with_reward(a.reward).with_cost(a.dynamics.cost);
            let state = best_reply_dynamics(&cfg, &a.dynamics.options())?;
            let profile = StrategyProfile::pure(&state.pure_strategies);
            let est = estimate_profile_throughput(&cfg, &profile, a.dynamics.eval_frames, a.dynamics.seed)?;
            let result = BestReplyResult { state, throughput: est.throughput, plr: est.plr, std_error: est.std_error };
            emit("equilibria best-reply", a, fmt(Format::Json), out, &result, || {
                let mut t = Table::new(&["pass", "changes", "mean_utility"]);
                for (i, (c, u)) in result.state.changes_per_pass.iter().zip(&result.state.utility_trace).enumerate() {
                    t.push(vec![(i + 1).to_string(), c.to_string(), sig6(*u)]);
                }
                t
            })
        }
        Command::Equilibria(EquilibriaCommand::Sweep(a)) => {
            let rewards = grid(&a.rewards).map_err(usage)?;
            let cfg = game(&a.frame).with_cost(a.dynamics.cost);
            let rows = sweep_rewards(&cfg, &rewards, &a.dynamics.options(), a.dynamics.eval_frames, a.dynamics.seed)?;
            emit("equilibria sweep", a, fmt(Format::Csv), out, &rows, || {
                let mut header = vec!["r".to_string(), "p".to_string()];
                header.extend((1..=a.dynamics.dmax).map(|d| format!("lambda_{d}")));
                header.extend(["throughput", "plr", "converged"].map(String::from));
                let mut t = Table { header, rows: Vec::new() };
                for r in &rows {
                    let mut row = vec![sig6(r.reward), sig6(r.decode_prob)];
                    row.extend(r.histogram.iter().map(|&h| sig6(h)));
                    row.extend([sig6(r.throughput), sig6(r.plr), r.converged.to_string()]);
                    t.push(row);
                }
                t
            })
        }
        Command::Repro(a) => {
            let ids = match &a.criteria {
                Some(s) => parse_list::<usize>(s).map_err(usage)?,
                None => (1..=10).collect(),
            };
            if let Some(bad) = ids.iter().find(|&&id| !(1..=10).contains(&id)) {
                return Err(usage(format!("no criterion {bad}; expected 1..=10")));
            }
            let mut outcomes = Vec::new();
            for id in ids {
                let outcome = run_criterion(id, a.seed)?;
                println!("{}", outcome.summary());
                outcomes.push(outcome);
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            println!("{passed}/{} criteria passed", outcomes.len());
            if let Some(path) = out {
                output::write_json("repro", a, &outcomes, Some(path))?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DistributionRow {
    d_max: usize,
    distribution: Vec<f64>,
    avg_repetitions: f64,
    peak_load: f64,
    peak_throughput: f64,
}

impl DistributionRow {
    fn new(dist: &DegreeDistribution, load: f64, throughput: f64) -> Self {
        Self {
            d_max: dist.d_max(),
            distribution: dist.probs().to_vec(),
            avg_repetitions: dist.average_degree(),
            peak_load: load,
            peak_throughput: throughput,
        }
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["d_max", "distribution", "avg_repetitions", "peak_load", "peak_throughput"]);
        t.push(vec![
            self.d_max.to_string(),
            join(&self.distribution, ";"),
            sig6(self.avg_repetitions),
            sig6(self.peak_load),
            sig6(self.peak_throughput),
        ]);
        t
    }
}

#[derive(Serialize)]
struct TwoUserResult {
    distribution: Vec<f64>,
    throughput: f64,
}

#[derive(Serialize)]
struct ShortFrameResult {
    solution: irsa_game::ne_solvers::ShortFrameSolution,
    throughput: f64,
    throughput_std_error: f64,
}

#[derive(Serialize)]
struct BestReplyResult {
    state: irsa_game::best_reply::BestReplyState,
    throughput: f64,
    plr: f64,
    std_error: f64,
}
