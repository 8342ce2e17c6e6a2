//! Exact occupancy chain of a slotted battery queue.
//!
//! The queue holds `0..=c` packets. Each slot resolves service before
//! arrival, with the service decision taken on the start-of-slot occupancy:
//! a nonempty queue consumes one packet with probability `mu_e`, then a new
//! packet arrives with probability `delta` and is admitted if the
//! post-service occupancy is below capacity. A packet arriving into an empty
//! queue therefore cannot be consumed in the same slot, and a packet
//! arriving at a full buffer after the service decision is dropped.
//!
//! Under this convention the one-slot transition probabilities are
//!
//! ```text
//! from 0:          -> 0 with 1 - delta,              -> 1 with delta
//! from 0 < j < c:  -> j-1 with mu_e (1 - delta)
//!                  -> j   with mu_e delta + (1 - mu_e)(1 - delta)
//!                  -> j+1 with (1 - mu_e) delta
//! from c:          -> c-1 with mu_e (1 - delta)
//!                  -> c   with mu_e delta + (1 - mu_e)
//! ```
//!
//! With `mu_e = 1` the upward probability from any nonempty state vanishes,
//! so states `>= 2` are unreachable from an empty start and the stationary
//! distribution is `(1 - delta, delta, 0, ..., 0)` for every finite
//! capacity. The matrix is still built over all states `0..=c` so that every
//! row is stochastic; the stationary distribution is defined as the limit of
//! the chain started empty, which assigns probability zero to states that
//! state 0 cannot reach.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default residual tolerance for stationary solves.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Iteration budget for [`power_iteration`].
pub const POWER_ITERATION_BUDGET: usize = 1_000_000;

/// Entries more negative than this are solver failures rather than rounding.
const NEGATIVE_CLAMP: f64 = -1e-14;

/// Buffer capacity in packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Capacity {
    /// A finite buffer of the given number of packets (at least 1).
    Finite(u32),
    /// No admission limit; the exact chain rejects this, the closed forms
    /// and the simulator handle it.
    Unbounded,
}

impl Capacity {
    pub fn is_finite(&self) -> bool {
        matches!(self, Capacity::Finite(_))
    }

    /// The packet count for finite buffers, `None` when unbounded.
    pub fn finite(&self) -> Option<u32> {
        match self {
            Capacity::Finite(c) => Some(*c),
            Capacity::Unbounded => None,
        }
    }
}

impl std::fmt::Display for Capacity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Capacity::Finite(c) => write!(f, "{c}"),
            Capacity::Unbounded => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Capacity {
    type Err = String;

    /// Parses a positive integer or the literal `inf`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(Capacity::Unbounded);
        }
        match s.parse::<u32>() {
            Ok(c) if c >= 1 => Ok(Capacity::Finite(c)),
            Ok(_) => Err("capacity must be at least 1 or `inf`".to_string()),
            Err(_) => Err(format!("expected a positive integer or `inf`, got `{s}`")),
        }
    }
}

/// Parameters of one slotted queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSpec {
    /// Bernoulli arrival probability per slot.
    pub delta: f64,
    /// Per-slot consumption probability while nonempty. `1.0` is the
    /// deterministic one-packet-per-slot model.
    pub mu_e: f64,
    /// Buffer capacity.
    pub capacity: Capacity,
}

impl QueueSpec {
    pub fn new(delta: f64, mu_e: f64, capacity: Capacity) -> Result<Self> {
        let spec = QueueSpec {
            delta,
            mu_e,
            capacity,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the parameter ranges; constructors call this, and operations
    /// re-check because the fields are public.
    pub fn validate(&self) -> Result<()> {
        check_probability("delta", self.delta)?;
        check_probability("mu_e", self.mu_e)?;
        if self.capacity == Capacity::Finite(0) {
            return Err(Error::ZeroCapacity);
        }
        Ok(())
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::ParameterRange {
            name,
            value,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

/// Row-stochastic one-slot transition matrix over occupancy states `0..=c`.
///
/// The band structure (no entry moves the occupancy by two or more) is a
/// construction invariant: at most one arrival and at most one departure
/// resolve per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Number of states, `c + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The capacity the matrix was built for.
    pub fn capacity(&self) -> u32 {
        (self.dim - 1) as u32
    }

    /// Probability of moving from state `from` to state `to` in one slot.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.dim + to]
    }

    /// One row of transition probabilities.
    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.dim..(from + 1) * self.dim]
    }
}

/// Builds the exact one-slot transition matrix for a finite-capacity spec.
///
/// Fails with [`Error::UnboundedCapacity`] when the spec has no finite
/// buffer; the unbounded case is handled analytically and by simulation.
pub fn build_energy_chain(spec: &QueueSpec) -> Result<TransitionMatrix> {
    spec.validate()?;
    let capacity = spec.capacity.finite().ok_or(Error::UnboundedCapacity)? as usize;

    let delta = spec.delta;
    let mu = spec.mu_e;
    let dim = capacity + 1;
    let mut entries = vec![0.0; dim * dim];
    let mut set = |from: usize, to: usize, p: f64| entries[from * dim + to] = p;

    set(0, 0, 1.0 - delta);
    set(0, 1, delta);
    for j in 1..capacity {
        set(j, j - 1, mu * (1.0 - delta));
        set(j, j, mu * delta + (1.0 - mu) * (1.0 - delta));
        set(j, j + 1, (1.0 - mu) * delta);
    }
    set(capacity, capacity - 1, mu * (1.0 - delta));
    set(capacity, capacity, mu * delta + (1.0 - mu));

    Ok(TransitionMatrix { dim, entries })
}

/// Stationary occupancy distribution of the chain started empty.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
    residual: f64,
}

impl StationaryDistribution {
    /// Probability of holding `j` packets, indexed by occupancy `0..=c`.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Achieved max-norm residual of `pi P - pi`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// States reachable from state 0 along strictly positive entries.
fn reachable_from_empty(matrix: &TransitionMatrix) -> Vec<usize> {
    let dim = matrix.dim();
    let mut seen = vec![false; dim];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(state) = stack.pop() {
        for (next, &p) in matrix.row(state).iter().enumerate() {
            if p > 0.0 && !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    (0..dim).filter(|&s| seen[s]).collect()
}

/// Max-norm residual of `pi P - pi` over the full state space.
fn residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    let dim = matrix.dim();
    let mut worst = 0.0f64;
    for to in 0..dim {
        let mut next = 0.0;
        for (from, &weight) in pi.iter().enumerate() {
            next += weight * matrix.entry(from, to);
        }
        worst = worst.max((next - pi[to]).abs());
    }
    worst
}

/// Clamps rounding-level negatives to zero and renormalizes to sum 1.
fn clean_distribution(pi: &mut [f64]) -> Result<()> {
    for (index, value) in pi.iter_mut().enumerate() {
        if *value < 0.0 {
            if *value < NEGATIVE_CLAMP {
                return Err(Error::NegativeProbability {
                    index,
                    value: *value,
                });
            }
            *value = 0.0;
        }
    }
    let sum: f64 = pi.iter().sum();
    if sum <= 0.0 {
        return Err(Error::SingularSystem);
    }
    for value in pi.iter_mut() {
        *value /= sum;
    }
    Ok(())
}

/// Solves `pi P = pi`, `sum pi = 1` by a direct linear solve.
///
/// The system is solved on the set of states reachable from state 0;
/// unreachable states receive probability 0, which makes the result the
/// limiting distribution of the chain started empty. One equation of
/// `(P^T - I) pi = 0` is replaced by the normalization row.
pub fn solve_stationary(matrix: &TransitionMatrix, tol: f64) -> Result<StationaryDistribution> {
    let reachable = reachable_from_empty(matrix);
    let k = reachable.len();

    let mut system = DMatrix::<f64>::zeros(k, k);
    for (row, &to) in reachable.iter().enumerate() {
        for (col, &from) in reachable.iter().enumerate() {
            let mut value = matrix.entry(from, to);
            if from == to {
                value -= 1.0;
            }
            system[(row, col)] = value;
        }
    }
    // Normalization replaces the last balance equation (the dropped one is
    // linearly dependent on the rest).
    for col in 0..k {
        system[(k - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;

    let solution = system.lu().solve(&rhs).ok_or(Error::SingularSystem)?;

    let mut pi = vec![0.0; matrix.dim()];
    for (idx, &state) in reachable.iter().enumerate() {
        pi[state] = solution[idx];
    }
    clean_distribution(&mut pi)?;

    let achieved = residual(matrix, &pi);
    if achieved > tol {
        return Err(Error::NotConverged { tol, achieved });
    }
    Ok(StationaryDistribution {
        pi,
        residual: achieved,
    })
}

/// Stationary distribution by repeated application of `P` to the one-hot
/// empty-queue vector. Independent cross-check for [`solve_stationary`],
/// not the default route.
///
/// Iterates until the max-norm residual drops to `tol` or the budget runs
/// out, whichever comes first.
pub fn power_iteration(
    matrix: &TransitionMatrix,
    tol: f64,
    max_iterations: usize,
) -> Result<StationaryDistribution> {
    let dim = matrix.dim();
    let mut current = vec![0.0; dim];
    current[0] = 1.0;
    let mut next = vec![0.0; dim];
    let mut achieved = f64::INFINITY;

    for _ in 0..max_iterations {
        for value in next.iter_mut() {
            *value = 0.0;
        }
        for (from, &weight) in current.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            for (to, &p) in matrix.row(from).iter().enumerate() {
                next[to] += weight * p;
            }
        }
        achieved = current
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let sum: f64 = next.iter().sum();
        for value in next.iter_mut() {
            *value /= sum;
        }
        std::mem::swap(&mut current, &mut next);

        if achieved <= tol {
            clean_distribution(&mut current)?;
            let certified = residual(matrix, &current);
            return Ok(StationaryDistribution {
                pi: current,
                residual: certified,
            });
        }
    }
    Err(Error::NotConverged { tol, achieved })
}

/// Probability that the queue is nonempty, `1 - pi[0]`, clamped to [0, 1].
pub fn nonempty_prob(distribution: &StationaryDistribution) -> f64 {
    (1.0 - distribution.pi()[0]).clamp(0.0, 1.0)
}
