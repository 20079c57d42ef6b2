//! Browser bindings: a density-evolution throughput curve, the two-user
//! equilibrium, and a Monte Carlo frame simulation.
//!
//! The plain functions are what the bindings call; they also build and test
//! natively.

use irsa_game::density::{asymptotic_throughput, inclusive_grid, FixedPointOptions};
use irsa_game::frame_sim::estimate_throughput;
use irsa_game::ne_solvers::{two_user_ne, two_user_throughput};
use irsa_game::{make_distribution, DegreeDistribution, GameConfig};
use wasm_bindgen::prelude::*;

/// Largest frame count a single call will simulate, to keep the page live.
pub const MAX_FRAMES: u64 = 200_000;

pub fn parse_distribution(text: &str) -> Result<DegreeDistribution, String> {
    let raw = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("{:?} is not a number", x.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    make_distribution(&raw).map_err(|e| e.to_string())
}

/// `(load, throughput)` pairs, flattened.
pub fn curve(dist: &str, start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    let dist = parse_distribution(dist)?;
    let loads = inclusive_grid(start, stop, step).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * loads.len());
    for g in loads {
        let t = asymptotic_throughput(&dist, g, FixedPointOptions::default()).map_err(|e| e.to_string())?;
        out.extend([g, t]);
    }
    Ok(out)
}

/// Equilibrium probabilities for degrees `1..=slots`, then the throughput.
pub fn two_user(slots: usize) -> Result<Vec<f64>, String> {
    let dist = two_user_ne(slots).map_err(|e| e.to_string())?;
    let mut out = dist.probs().to_vec();
    out.push(two_user_throughput(&dist, slots));
    Ok(out)
}

/// `[throughput, plr, std_error]`.
pub fn simulate(slots: usize, users: usize, dist: &str, decode_prob: f64, frames: u64, seed: u64) -> Result<Vec<f64>, String> {
    if frames > MAX_FRAMES {
        return Err(format!("at most {MAX_FRAMES} frames per run"));
    }
    let dist = parse_distribution(dist)?;
    let cfg = GameConfig::new(slots, users).with_decode_prob(decode_prob);
    let est = estimate_throughput(&cfg, &dist, frames, seed).map_err(|e| e.to_string())?;
    Ok(vec![est.throughput, est.plr, est.std_error])
}

#[wasm_bindgen(js_name = throughputCurve)]
pub fn throughput_curve(dist: &str, start: f64, stop: f64, step: f64) -> Result<Vec<f64>, JsError> {
    curve(dist, start, stop, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = twoUserEquilibrium)]
pub fn two_user_equilibrium(slots: usize) -> Result<Vec<f64>, JsError> {
    two_user(slots).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulateFrames)]
pub fn simulate_frames(
    slots: usize,
    users: usize,
    dist: &str,
    decode_prob: f64,
    frames: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    simulate(slots, users, dist, decode_prob, frames.into(), seed.into()).map_err(|e| JsError::new(&e))
}
