//! Statistical-CSI user selection for the downlink of a TDD massive MIMO cell
//! with zero-forcing precoding.
//!
//! The crate has two halves. The analytic half ([`rmt`], [`distance`],
//! [`rate_approx`], [`selection::solve_kstar`]) turns the system parameters
//! into a deterministic sum-rate approximation and the number of users K*
//! that maximizes it. The Monte Carlo half ([`channel`], [`zf`], [`sim`],
//! [`fairness`]) runs the selection rules through a link-level chain and
//! measures ergodic sum rate and Jain fairness.

pub mod channel;
pub mod config;
pub mod distance;
pub mod fairness;
pub mod error;
pub mod hypergeometric;
pub mod parallel;
pub mod quadrature;
pub mod rate_approx;
pub mod rmt;
pub mod selection;
pub mod sim;
pub mod zf;

pub use config::{dbm_to_linear, SystemConfig};
pub use error::{Error, Result};
pub use parallel::Exec;
pub use rate_approx::SelectionRule;
pub use selection::{solve_kstar, KStarResult};
pub use sim::{ergodic_rate, Policy, Scheme, SimulationReport};
