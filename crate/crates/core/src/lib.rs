//! Game-theoretic tuning of irregular repetition slotted ALOHA (IRSA).
//!
//! The crate covers frame-level Monte Carlo simulation with successive
//! interference cancellation, asymptotic density evolution, Nash-equilibrium
//! verification, equilibrium constructions and best-reply dynamics.

pub mod best_reply;
pub mod config;
pub mod distribution;
pub mod error;
pub mod frame_sim;
pub mod game;
pub mod ne_solvers;
pub mod repro;
pub mod rng;
pub mod density;

pub use config::{GameConfig, RewardScheme, Strategy, StrategyProfile};
pub use distribution::{average_degree, make_distribution, sample_degree, DegreeDistribution};
pub use error::{Error, Result};
pub use rng::RandomStream;
