//! Exact analysis and seeded simulation of slotted-time finite-capacity
//! queues.
//!
//! The model: time is divided into unit slots. A buffer of capacity `c`
//! receives at most one packet per slot (Bernoulli arrival with probability
//! `delta`) and, while nonempty, consumes one packet per slot with
//! probability `mu_e` (deterministic consumption at `mu_e = 1`). The crate
//! provides four views of the same queue:
//!
//! - [`chain`] — the exact occupancy Markov chain and its stationary
//!   distribution,
//! - [`closedform`] — the continuous-time M/M/1/c occupancy formula that is
//!   often mistakenly applied to this slotted model, next to the correct
//!   slotted result,
//! - [`sim`] — seeded slot-by-slot Monte Carlo simulation of the queue and
//!   of a source node gated by it,
//! - [`sweep`] — grid evaluation over `(delta, capacity)` with CSV/JSON
//!   emission for plotting.
//!
//! The headline fact the toolkit makes checkable from all three routes:
//! with deterministic per-slot consumption the stationary nonempty
//! probability is exactly `delta` for every capacity, while the M/M/1/c
//! formula `delta (1 - delta^c) / (1 - delta^(c+1))` predicts a
//! capacity-dependent value that is strictly smaller for `delta` in (0, 1).
//!
//! ```
//! use slotq::chain::{self, Capacity, QueueSpec};
//! use slotq::closedform;
//!
//! let spec = QueueSpec::new(0.7, 1.0, Capacity::Finite(10)).unwrap();
//! let matrix = chain::build_energy_chain(&spec).unwrap();
//! let pi = chain::solve_stationary(&matrix, 1e-12).unwrap();
//!
//! let exact = chain::nonempty_prob(&pi);
//! assert!((exact - 0.7).abs() < 1e-12);
//! assert!(closedform::mm1c_nonempty(0.7, 10) < exact);
//! ```

pub mod chain;
pub mod closedform;
mod error;
pub mod render;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
