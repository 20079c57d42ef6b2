//! Frame-level simulation of IRSA on the collision channel with erasures.
//!
//! Each user places its replicas on a uniformly random set of distinct slots.
//! A replica in a slot with no other un-cancelled replica is decoded with
//! probability `p`; the erasure mark is drawn once per replica and holds for
//! the whole frame. Decoding a user cancels all of its replicas (the pointer
//! mechanism), which may turn collided slots into singletons.
//!
//! Slot indices are 0-based (`0..M`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GameConfig, Strategy, StrategyProfile};
use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Default replication count for Monte Carlo estimates.
pub const DEFAULT_FRAMES: u64 = 100_000;

/// Default cap on enumerated placement combinations for the exact oracle.
pub const DEFAULT_ENUMERATION_BUDGET: f64 = 1e8;

/// Frames per work unit. Fixed so results do not depend on the pool size.
const CHUNK: u64 = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub placements: Vec<Vec<usize>>,
    pub erased: Vec<Vec<bool>>,
    pub decoded: Vec<bool>,
    pub sic_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SicResult {
    pub decoded: Vec<bool>,
    /// Passes that decoded at least one user.
    pub iterations: usize,
}

/// Empirical success frequency of one user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl SuccessEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { mean: 0.0, std_error: 0.0, trials };
        }
        let mean = successes as f64 / trials as f64;
        let std_error = (mean * (1.0 - mean) / trials as f64).sqrt();
        Self { mean, std_error, trials }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputEstimate {
    /// Decoded users per slot.
    pub throughput: f64,
    /// Fraction of users left undecoded.
    pub plr: f64,
    /// Standard error of `throughput` across frames.
    pub std_error: f64,
    pub frames: u64,
}

impl ThroughputEstimate {
    fn from_counts(config: &GameConfig, frames: u64, decoded: u64, decoded_sq: u64) -> Self {
        if frames == 0 || config.users == 0 {
            return Self { throughput: 0.0, plr: 0.0, std_error: 0.0, frames };
        }
        let n = frames as f64;
        let plr = 1.0 - decoded as f64 / (n * config.users as f64);
        let throughput = config.load() * (1.0 - plr);
        let mean = decoded as f64 / n;
        let var = if frames > 1 {
            ((decoded_sq as f64 / n - mean * mean) * n / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let std_error = (var / n).sqrt() / config.slots as f64;
        Self { throughput, plr, std_error, frames }
    }
}

/// Flat frame representation reused across replications on hot paths.
#[derive(Clone, Debug)]
pub(crate) struct FrameBuffer {
    slots: usize,
    replica_slot: Vec<u32>,
    replica_user: Vec<u32>,
    replica_erased: Vec<bool>,
    user_start: Vec<usize>,
    count: Vec<u32>,
    xor: Vec<u32>,
    decoded: Vec<bool>,
    frontier: Vec<u32>,
    next: Vec<u32>,
    newly: Vec<u32>,
}

impl FrameBuffer {
    pub(crate) fn new(slots: usize) -> Self {
        Self {
            slots,
            replica_slot: Vec::new(),
            replica_user: Vec::new(),
            replica_erased: Vec::new(),
            user_start: vec![0],
            count: vec![0; slots],
            xor: vec![0; slots],
            decoded: Vec::new(),
            frontier: Vec::new(),
            next: Vec::new(),
            newly: Vec::new(),
        }
    }

    pub(crate) fn clear(&mut self) {
        self.replica_slot.clear();
        self.replica_user.clear();
        self.replica_erased.clear();
        self.user_start.truncate(1);
    }

    pub(crate) fn users(&self) -> usize {
        self.user_start.len() - 1
    }

    /// Places a user on `degree` distinct uniformly chosen slots (Floyd's
    /// subset sampling). Erasure marks start clear.
    pub(crate) fn push_random_user(&mut self, degree: usize, rng: &mut RandomStream) {
        let user = self.users() as u32;
        let first = self.replica_slot.len();
        for j in (self.slots - degree)..self.slots {
            let t = rng.below(j + 1) as u32;
            let slot = if self.replica_slot[first..].contains(&t) { j as u32 } else { t };
            self.replica_slot.push(slot);
            self.replica_user.push(user);
            self.replica_erased.push(false);
        }
        self.user_start.push(self.replica_slot.len());
    }

    pub(crate) fn push_user(&mut self, slots: &[usize], erased: &[bool]) {
        let user = self.users() as u32;
        for (i, &s) in slots.iter().enumerate() {
            self.replica_slot.push(s as u32);
            self.replica_user.push(user);
            self.replica_erased.push(erased.get(i).copied().unwrap_or(false));
        }
        self.user_start.push(self.replica_slot.len());
    }

    /// Drops the most recently pushed user.
    pub(crate) fn pop_user(&mut self) {
        if self.users() == 0 {
            return;
        }
        self.user_start.pop();
        let keep = *self.user_start.last().unwrap();
        self.replica_slot.truncate(keep);
        self.replica_user.truncate(keep);
        self.replica_erased.truncate(keep);
    }

    /// Marks each replica of users `from..` erased with probability `1 - p`.
    pub(crate) fn draw_erasures(&mut self, from_user: usize, p: f64, rng: &mut RandomStream) {
        if p >= 1.0 {
            return;
        }
        let start = self.user_start[from_user];
        for erased in &mut self.replica_erased[start..] {
            *erased = !rng.bernoulli(p);
        }
    }

    /// Runs SIC to its fixpoint; returns the number of productive passes.
    pub(crate) fn decode(&mut self) -> usize {
        self.count.iter_mut().for_each(|c| *c = 0);
        self.xor.iter_mut().for_each(|x| *x = 0);
        for (r, &s) in self.replica_slot.iter().enumerate() {
            self.count[s as usize] += 1;
            self.xor[s as usize] ^= r as u32;
        }
        self.decoded.clear();
        self.decoded.resize(self.users(), false);
        self.frontier.clear();
        self.frontier
            .extend((0..self.slots as u32).filter(|&s| self.count[s as usize] == 1));

        let mut passes = 0;
        loop {
            self.newly.clear();
            for &s in &self.frontier {
                if self.count[s as usize] != 1 {
                    continue;
                }
                let r = self.xor[s as usize] as usize;
                let u = self.replica_user[r] as usize;
                if !self.replica_erased[r] && !self.decoded[u] {
                    self.decoded[u] = true;
                    self.newly.push(u as u32);
                }
            }
            if self.newly.is_empty() {
                return passes;
            }
            passes += 1;
            self.next.clear();
            for &u in &self.newly {
                let u = u as usize;
                for r in self.user_start[u]..self.user_start[u + 1] {
                    let s = self.replica_slot[r] as usize;
                    self.count[s] -= 1;
                    self.xor[s] ^= r as u32;
                    if self.count[s] == 1 {
                        self.next.push(s as u32);
                    }
                }
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
    }

    pub(crate) fn decoded(&self) -> &[bool] {
        &self.decoded
    }

    pub(crate) fn decoded_count(&self) -> usize {
        self.decoded.iter().filter(|&&d| d).count()
    }

    fn outcome(&self, sic_iterations: usize) -> FrameOutcome {
        let users = self.users();
        let mut placements = Vec::with_capacity(users);
        let mut erased = Vec::with_capacity(users);
        for u in 0..users {
            let range = self.user_start[u]..self.user_start[u + 1];
            placements.push(self.replica_slot[range.clone()].iter().map(|&s| s as usize).collect());
            erased.push(self.replica_erased[range].to_vec());
        }
        FrameOutcome {
            placements,
            erased,
            decoded: self.decoded.clone(),
            sic_iterations,
        }
    }
}

fn draw_degree(strategy: &Strategy, rng: &mut RandomStream) -> usize {
    match strategy {
        Strategy::Pure(d) => *d,
        Strategy::Mixed(dist) => dist.sample(rng),
    }
}

/// Draws degrees and placements for every user, then erasure marks.
/// Placements do not depend on `p`, so runs that differ only in `p` are
/// coupled when they share a stream.
fn fill_frame(buf: &mut FrameBuffer, config: &GameConfig, profile: &StrategyProfile, rng: &mut RandomStream) {
    buf.clear();
    for strategy in &profile.0 {
        let d = draw_degree(strategy, rng);
        buf.push_random_user(d, rng);
    }
    buf.draw_erasures(0, config.decode_prob, rng);
}

/// SIC on explicit placements. Each pass decodes every user owning a
/// non-erased replica alone in its slot, then cancels all replicas of those
/// users; stops at the first pass that decodes nobody.
pub fn run_sic(placements: &[Vec<usize>], erased: &[Vec<bool>], slots: usize) -> Result<SicResult> {
    let mut buf = FrameBuffer::new(slots);
    for (u, user_slots) in placements.iter().enumerate() {
        let mut seen = user_slots.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != user_slots.len() || user_slots.iter().any(|&s| s >= slots) {
            return Err(Error::Validation(format!(
                "user {u} placement {user_slots:?} must be distinct slots below {slots}"
            )));
        }
        let flags = erased.get(u).map(Vec::as_slice).unwrap_or(&[]);
        buf.push_user(user_slots, flags);
    }
    let iterations = buf.decode();
    Ok(SicResult {
        decoded: buf.decoded().to_vec(),
        iterations,
    })
}

pub fn simulate_frame(
    config: &GameConfig,
    profile: &StrategyProfile,
    rng: &mut RandomStream,
) -> Result<FrameOutcome> {
    config.validate()?;
    profile.validate(config)?;
    let mut buf = FrameBuffer::new(config.slots);
    fill_frame(&mut buf, config, profile, rng);
    let passes = buf.decode();
    Ok(buf.outcome(passes))
}

/// Runs `frames` replications in fixed-size chunks and merges the per-chunk
/// accumulators in chunk order.
pub(crate) fn run_chunked<A, I, F, M>(frames: u64, init: I, step: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(A, A) -> A + Sync + Send,
{
    let chunks = frames.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for f in c * CHUNK..((c + 1) * CHUNK).min(frames) {
                step(&mut acc, f);
            }
            acc
        })
        .collect();
    parts.into_iter().fold(init(), &merge)
}

/// Per-user decode frequencies over `frames` independent frames.
pub fn estimate_success_probs(
    config: &GameConfig,
    profile: &StrategyProfile,
    frames: u64,
    seed: u64,
) -> Result<Vec<SuccessEstimate>> {
    config.validate()?;
    profile.validate(config)?;
    if frames == 0 {
        return Err(Error::Validation("need at least one frame".into()));
    }
    let users = config.users;
    let counts = run_chunked(
        frames,
        || (FrameBuffer::new(config.slots), vec![0u64; users]),
        |(buf, counts), f| {
            let mut rng = RandomStream::derive(seed, &[f]);
            fill_frame(buf, config, profile, &mut rng);
            buf.decode();
            for (c, &d) in counts.iter_mut().zip(buf.decoded()) {
                *c += d as u64;
            }
        },
        |(buf, mut a), (_, b)| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            (buf, a)
        },
    )
    .1;
    Ok(counts
        .into_iter()
        .map(|c| SuccessEstimate::from_counts(c, frames))
        .collect())
}

/// Throughput and PLR of an arbitrary profile.
pub fn estimate_profile_throughput(
    config: &GameConfig,
    profile: &StrategyProfile,
    frames: u64,
    seed: u64,
) -> Result<ThroughputEstimate> {
    config.validate()?;
    profile.validate(config)?;
    if frames == 0 {
        return Err(Error::Validation("need at least one frame".into()));
    }
    let (_, decoded, decoded_sq) = run_chunked(
        frames,
        || (FrameBuffer::new(config.slots), 0u64, 0u64),
        |(buf, sum, sum_sq), f| {
            let mut rng = RandomStream::derive(seed, &[f]);
            fill_frame(buf, config, profile, &mut rng);
            buf.decode();
            let k = buf.decoded_count() as u64;
            *sum += k;
            *sum_sq += k * k;
        },
        |(buf, a, b), (_, c, d)| (buf, a + c, b + d),
    );
    Ok(ThroughputEstimate::from_counts(config, frames, decoded, decoded_sq))
}

/// Throughput when every user draws its degree from `dist`.
pub fn estimate_throughput(
    config: &GameConfig,
    dist: &DegreeDistribution,
    frames: u64,
    seed: u64,
) -> Result<ThroughputEstimate> {
    config.check_distribution(dist)?;
    let profile = StrategyProfile::symmetric(dist, config.users);
    estimate_profile_throughput(config, &profile, frames, seed)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        let Some(i) = (0..k).rev().find(|&i| current[i] < n - k + i) else {
            return out;
        };
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// SIC with erasures unrevealed until a replica first sits alone in a slot.
/// Each revelation branches with weight `p` / `1 - p`, so only erasure marks
/// that influence the trace are ever summed over.
struct ErasureBrancher<'a> {
    slots: usize,
    replica_slot: &'a [usize],
    replica_user: &'a [usize],
    user_start: &'a [usize],
    p: f64,
}

#[derive(Clone)]
struct BranchState {
    count: Vec<u32>,
    xor: Vec<usize>,
    decoded: Vec<bool>,
    /// `None` while unrevealed.
    erased: Vec<Option<bool>>,
}

impl ErasureBrancher<'_> {
    fn initial(&self, users: usize) -> BranchState {
        let mut count = vec![0; self.slots];
        let mut xor = vec![0; self.slots];
        for (r, &s) in self.replica_slot.iter().enumerate() {
            count[s] += 1;
            xor[s] ^= r;
        }
        BranchState {
            count,
            xor,
            decoded: vec![false; users],
            erased: vec![None; self.replica_slot.len()],
        }
    }

    fn explore(&self, state: BranchState, weight: f64, acc: &mut [f64]) {
        let singles: Vec<usize> = (0..self.slots)
            .filter(|&s| state.count[s] == 1)
            .map(|s| state.xor[s])
            .filter(|&r| state.erased[r] != Some(true))
            .collect();
        let unknown: Vec<usize> = singles.iter().copied().filter(|&r| state.erased[r].is_none()).collect();
        if unknown.is_empty() {
            for (a, &d) in acc.iter_mut().zip(&state.decoded) {
                if d {
                    *a += weight;
                }
            }
            return;
        }
        for mask in 0u64..(1 << unknown.len()) {
            let mut next = state.clone();
            let mut w = weight;
            for (bit, &r) in unknown.iter().enumerate() {
                let erased = mask >> bit & 1 == 1;
                next.erased[r] = Some(erased);
                w *= if erased { 1.0 - self.p } else { self.p };
            }
            if w == 0.0 {
                continue;
            }
            let mut newly: Vec<usize> = unknown
                .iter()
                .filter(|&&r| next.erased[r] == Some(false))
                .map(|&r| self.replica_user[r])
                .collect();
            newly.sort_unstable();
            newly.dedup();
            for &u in &newly {
                next.decoded[u] = true;
                for r in self.user_start[u]..self.user_start[u + 1] {
                    let s = self.replica_slot[r];
                    next.count[s] -= 1;
                    next.xor[s] ^= r;
                }
            }
            self.explore(next, w, acc);
        }
    }
}

/// Exact per-user decode probabilities by enumerating every placement (and
/// every degree of mixed strategies). User 0's placement is pinned to the
/// first slots, which loses nothing because the model is invariant under
/// slot relabeling.
pub fn exact_success_probabilities(
    config: &GameConfig,
    profile: &StrategyProfile,
    budget: f64,
) -> Result<Vec<f64>> {
    config.validate()?;
    profile.validate(config)?;
    let users = config.users;
    if users == 0 {
        return Ok(Vec::new());
    }
    let supports: Vec<Vec<(usize, f64)>> = profile.0.iter().map(Strategy::support_weights).collect();
    let needed: f64 = supports
        .iter()
        .enumerate()
        .map(|(u, s)| {
            if u == 0 {
                s.len() as f64
            } else {
                s.iter().map(|&(d, _)| binomial(config.slots, d)).sum()
            }
        })
        .product();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }

    let max_degree = supports.iter().flatten().map(|&(d, _)| d).max().unwrap_or(1);
    let tables: Vec<Vec<Vec<usize>>> = (0..=max_degree).map(|d| subsets(config.slots, d)).collect();

    let mut choices: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut acc = vec![0.0; users];
    let mut buf = FrameBuffer::new(config.slots);
    enumerate_placements(config, &supports, &tables, 0, 1.0, &mut choices, &mut buf, &mut acc);
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_placements(
    config: &GameConfig,
    supports: &[Vec<(usize, f64)>],
    tables: &[Vec<Vec<usize>>],
    user: usize,
    weight: f64,
    choices: &mut Vec<(Vec<usize>, f64)>,
    buf: &mut FrameBuffer,
    acc: &mut [f64],
) {
    if user == supports.len() {
        accumulate_leaf(config, choices, weight, buf, acc);
        return;
    }
    for &(d, w) in &supports[user] {
        if user == 0 {
            choices.push(((0..d).collect(), 1.0));
            enumerate_placements(config, supports, tables, 1, weight * w, choices, buf, acc);
            choices.pop();
            continue;
        }
        let per = w / tables[d].len() as f64;
        for subset in &tables[d] {
            choices.push((subset.clone(), per));
            enumerate_placements(config, supports, tables, user + 1, weight * per, choices, buf, acc);
            choices.pop();
        }
    }
}

fn accumulate_leaf(
    config: &GameConfig,
    choices: &[(Vec<usize>, f64)],
    weight: f64,
    buf: &mut FrameBuffer,
    acc: &mut [f64],
) {
    if config.decode_prob >= 1.0 {
        buf.clear();
        for (slots, _) in choices {
            buf.push_user(slots, &[]);
        }
        buf.decode();
        for (a, &d) in acc.iter_mut().zip(buf.decoded()) {
            if d {
                *a += weight;
            }
        }
        return;
    }
    let mut replica_slot = Vec::new();
    let mut replica_user = Vec::new();
    let mut user_start = vec![0];
    for (u, (slots, _)) in choices.iter().enumerate() {
        replica_slot.extend_from_slice(slots);
        replica_user.extend(std::iter::repeat_n(u, slots.len()));
        user_start.push(replica_slot.len());
    }
    let brancher = ErasureBrancher {
        slots: config.slots,
        replica_slot: &replica_slot,
        replica_user: &replica_user,
        user_start: &user_start,
        p: config.decode_prob,
    };
    let state = brancher.initial(choices.len());
    brancher.explore(state, weight, acc);
}

/// Expected decoded users per slot from the exact oracle.
pub fn exact_throughput(config: &GameConfig, profile: &StrategyProfile, budget: f64) -> Result<f64> {
    let probs = exact_success_probabilities(config, profile, budget)?;
    Ok(probs.iter().sum::<f64>() / config.slots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_distribution;

    fn sic(placements: &[&[usize]], erased: &[&[bool]], slots: usize) -> SicResult {
        let p: Vec<Vec<usize>> = placements.iter().map(|s| s.to_vec()).collect();
        let e: Vec<Vec<bool>> = erased.iter().map(|s| s.to_vec()).collect();
        run_sic(&p, &e, slots).unwrap()
    }

    #[test]
    fn sic_chain_resolves_everyone() {
        let out = sic(&[&[0, 1], &[1, 2], &[2, 3]], &[], 4);
        assert_eq!(out.decoded, vec![true, true, true]);
        // Slots 0 and 3 are singletons up front, so the middle user falls
        // out on the second pass.
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn sic_full_collision_decodes_nobody() {
        let out = sic(&[&[0, 1], &[0, 1]], &[], 4);
        assert_eq!(out.decoded, vec![false, false]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn sic_erased_singleton_stays_undecoded() {
        let out = sic(&[&[0], &[0, 1]], &[&[true], &[false, false]], 3);
        assert_eq!(out.decoded, vec![false, true]);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn sic_rejects_repeated_slot() {
        assert!(run_sic(&[vec![1, 1]], &[], 3).is_err());
        assert!(run_sic(&[vec![3]], &[], 3).is_err());
    }

    #[test]
    fn distinct_degrees_never_collide_fully() {
        let cfg = GameConfig::new(4, 2);
        let profile = StrategyProfile::pure(&[2, 3]);
        let mut rng = RandomStream::from_seed(9);
        for _ in 0..2000 {
            let out = simulate_frame(&cfg, &profile, &mut rng).unwrap();
            assert_eq!(out.decoded, vec![true, true]);
            assert_eq!(out.placements[0].len(), 2);
            assert_eq!(out.placements[1].len(), 3);
        }
    }

    #[test]
    fn simulate_frame_rejects_oversized_degree() {
        let cfg = GameConfig::new(3, 1);
        let mut rng = RandomStream::from_seed(0);
        assert!(simulate_frame(&cfg, &StrategyProfile::pure(&[4]), &mut rng).is_err());
    }

    #[test]
    fn single_user_erasure_rate() {
        let cfg = GameConfig::new(10, 1).with_decode_prob(0.9);
        let est = estimate_success_probs(&cfg, &StrategyProfile::pure(&[1]), 100_000, 3).unwrap();
        assert!((est[0].mean - 0.9).abs() < 0.01);
    }

    #[test]
    fn equal_degrees_two_users() {
        let cfg = GameConfig::new(4, 2);
        let est = estimate_success_probs(&cfg, &StrategyProfile::pure(&[2, 2]), 100_000, 4).unwrap();
        for e in &est {
            assert!((e.mean - 5.0 / 6.0).abs() < 0.004, "{e:?}");
        }
        let single = estimate_success_probs(&GameConfig::new(4, 1), &StrategyProfile::pure(&[1]), 100, 4).unwrap();
        assert_eq!(single[0].mean, 1.0);
    }

    #[test]
    fn all_single_transmissions() {
        let cfg = GameConfig::new(5, 4);
        let profile = StrategyProfile::pure(&[1, 1, 1, 1]);
        let est = estimate_success_probs(&cfg, &profile, 100_000, 8).unwrap();
        for e in &est {
            assert!((e.mean - 0.512).abs() < 0.005);
        }
        let exact = exact_success_probabilities(&cfg, &profile, DEFAULT_ENUMERATION_BUDGET).unwrap();
        for p in exact {
            assert!((p - 0.512).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_two_user_collision_formula() {
        let cfg = GameConfig::new(4, 2);
        let distinct = exact_success_probabilities(&cfg, &StrategyProfile::pure(&[1, 3]), 1e8).unwrap();
        assert_eq!(distinct, vec![1.0, 1.0]);
        let triple = exact_success_probabilities(&cfg, &StrategyProfile::pure(&[3, 3]), 1e8).unwrap();
        for p in triple {
            assert!((p - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_with_erasures_matches_closed_form() {
        // One user, one replica: success is exactly p.
        let cfg = GameConfig::new(3, 1).with_decode_prob(0.9);
        let p = exact_success_probabilities(&cfg, &StrategyProfile::pure(&[1]), 1e8).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-12);
        // One user, two replicas: fails only if both are erased.
        let p = exact_success_probabilities(&cfg, &StrategyProfile::pure(&[2]), 1e8).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn exact_budget_is_enforced() {
        let cfg = GameConfig::new(20, 6);
        let profile = StrategyProfile::pure(&[3; 6]);
        assert!(matches!(
            exact_success_probabilities(&cfg, &profile, 1e6),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn throughput_identity_and_baseline() {
        let cfg = GameConfig::new(5, 4);
        let dist = DegreeDistribution::degenerate(1).unwrap();
        let est = estimate_throughput(&cfg, &dist, 100_000, 21).unwrap();
        assert!((est.throughput - 0.4096).abs() < 0.005);
        assert!((est.throughput - cfg.load() * (1.0 - est.plr)).abs() < 1e-15);
        assert!(est.std_error > 0.0);
    }

    #[test]
    fn empty_frame() {
        let cfg = GameConfig::new(5, 0);
        let dist = make_distribution(&[1.0]).unwrap();
        let est = estimate_throughput(&cfg, &dist, 10, 1).unwrap();
        assert_eq!((est.throughput, est.plr), (0.0, 0.0));
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let cfg = GameConfig::new(10, 8).with_decode_prob(0.9);
        let dist = make_distribution(&[0.2, 0.5, 0.3]).unwrap();
        let a = estimate_throughput(&cfg, &dist, 3000, 5).unwrap();
        let b = estimate_throughput(&cfg, &dist, 3000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsets_enumerates_binomial_count() {
        assert_eq!(subsets(5, 2).len(), 10);
        assert_eq!(subsets(4, 4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(subsets(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(binomial(6, 3), 20.0);
    }
}
