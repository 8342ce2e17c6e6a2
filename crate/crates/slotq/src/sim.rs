//! Seeded slot-by-slot simulation of the battery queue and of a source node
//! gated by it.
//!
//! Every run is single-threaded and fully determined by its seed. The
//! generator is ChaCha12 seeded through `SeedableRng::seed_from_u64`; a
//! fixed number of uniform draws is consumed per slot regardless of queue
//! state, so trajectories with the same seed stay aligned across parameter
//! changes. Replication `i` of a base seed uses
//! `splitmix64(base_seed ^ i)` (see [`replication_seed`]).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::chain::{Capacity, QueueSpec, check_probability};
use crate::error::{Error, Result};

/// Generator label recorded in results for reproducibility.
pub const RNG_LABEL: &str = "chacha12/seed_from_u64";

/// Number of batches used for batch-means standard errors.
pub const BATCH_COUNT: u64 = 100;

/// Queue-growth slope (packets per slot) above which a run is declared
/// unstable.
pub const SLOPE_THRESHOLD: f64 = 1e-4;

/// SplitMix64 finalizer; the documented mixing function behind
/// [`replication_seed`].
pub fn splitmix64(input: u64) -> u64 {
    let mut z = input.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `index` of a run with `base_seed`:
/// `splitmix64(base_seed ^ index)`. Results are therefore independent of
/// the order in which replications execute.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ index)
}

/// Configuration of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub spec: QueueSpec,
    /// Total slots executed, including warmup.
    pub slots: u64,
    pub seed: u64,
    /// Leading slots excluded from statistics.
    pub warmup_slots: u64,
}

impl SimConfig {
    /// Configuration with the default warmup: 1% of the slots, at least
    /// 1000, clamped to half the run when the run is shorter than that.
    pub fn new(spec: QueueSpec, slots: u64, seed: u64) -> Self {
        SimConfig {
            spec,
            slots,
            seed,
            warmup_slots: default_warmup(slots),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.slots == 0 {
            return Err(Error::InvalidSimConfig {
                reason: "slots must be at least 1".to_string(),
            });
        }
        if self.warmup_slots >= self.slots {
            return Err(Error::InvalidSimConfig {
                reason: format!(
                    "warmup_slots ({}) must be smaller than slots ({})",
                    self.warmup_slots, self.slots
                ),
            });
        }
        Ok(())
    }
}

/// Default warmup for a run of `slots` slots.
pub fn default_warmup(slots: u64) -> u64 {
    let warmup = (slots / 100).max(1000);
    if warmup >= slots { slots / 2 } else { warmup }
}

/// Outcome of one energy-queue run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Fraction of measured slots whose start-of-slot occupancy was >= 1.
    pub nonempty_fraction: f64,
    /// Start-of-slot occupancy counts over the measured slots.
    pub histogram: BTreeMap<u64, u64>,
    pub measured_slots: u64,
    pub seed: u64,
    /// Largest start-of-slot occupancy over the whole run, warmup included.
    pub max_occupancy_seen: u64,
    /// Generator used, for reproducibility.
    pub rng: &'static str,
    /// Per-batch nonempty fractions backing [`SimResult::nonempty_stderr`].
    pub batch_means: Vec<f64>,
    /// Arrivals admitted over the whole run (dropped arrivals excluded).
    pub admitted_arrivals: u64,
    /// Departures over the whole run.
    pub departures: u64,
    /// Occupancy after the final slot.
    pub final_occupancy: u64,
}

impl SimResult {
    /// Batch-means standard error of the nonempty fraction; `None` when
    /// fewer than two batches were formed.
    pub fn nonempty_stderr(&self) -> Option<f64> {
        batch_stderr(&self.batch_means)
    }
}

fn batch_stderr(batch_means: &[f64]) -> Option<f64> {
    let n = batch_means.len();
    if n < 2 {
        return None;
    }
    let mean = batch_means.iter().sum::<f64>() / n as f64;
    let variance = batch_means
        .iter()
        .map(|b| (b - mean) * (b - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    Some((variance / n as f64).sqrt())
}

/// Runs the energy queue slot by slot from an empty start.
///
/// Per slot: statistics are taken on the start-of-slot occupancy (after
/// warmup), then a nonempty queue departs one packet with probability
/// `mu_e`, then an arrival occurs with probability `delta` and is admitted
/// if the post-service occupancy is below capacity. Two uniform draws are
/// consumed every slot.
pub fn simulate_energy_queue(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let spec = config.spec;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let measured = config.slots - config.warmup_slots;
    let batches = measured.min(BATCH_COUNT);
    let batch_len = measured.checked_div(batches).unwrap_or(0);
    let batched_slots = batches * batch_len;
    let mut batch_sums = vec![0u64; batches as usize];

    let mut occupancy: u64 = 0;
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    let mut nonempty_slots: u64 = 0;
    let mut max_occupancy: u64 = 0;
    let mut admitted: u64 = 0;
    let mut departures: u64 = 0;

    for slot in 0..config.slots {
        max_occupancy = max_occupancy.max(occupancy);
        if slot >= config.warmup_slots {
            *histogram.entry(occupancy).or_insert(0) += 1;
            if occupancy >= 1 {
                nonempty_slots += 1;
                let measured_index = slot - config.warmup_slots;
                if measured_index < batched_slots {
                    batch_sums[(measured_index / batch_len) as usize] += 1;
                }
            }
        }

        let serve: f64 = rng.random();
        let arrive: f64 = rng.random();
        if occupancy >= 1 && serve < spec.mu_e {
            occupancy -= 1;
            departures += 1;
        }
        if arrive < spec.delta {
            let admit = match spec.capacity {
                Capacity::Finite(c) => occupancy < c as u64,
                Capacity::Unbounded => true,
            };
            if admit {
                occupancy += 1;
                admitted += 1;
            }
        }
    }
    max_occupancy = max_occupancy.max(occupancy);

    Ok(SimResult {
        nonempty_fraction: nonempty_slots as f64 / measured as f64,
        histogram,
        measured_slots: measured,
        seed: config.seed,
        max_occupancy_seen: max_occupancy,
        rng: RNG_LABEL,
        batch_means: batch_sums
            .iter()
            .map(|&s| s as f64 / batch_len as f64)
            .collect(),
        admitted_arrivals: admitted,
        departures,
        final_occupancy: occupancy,
    })
}

/// Outcome of one gated-source run.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedSourceResult {
    /// Configured data arrival probability per slot.
    pub arrival_rate: f64,
    /// Data packets delivered per measured slot.
    pub delivered_throughput: f64,
    /// Mean start-of-slot data-queue length over the measured slots.
    pub mean_queue_length: f64,
    /// Least-squares slope of the data-queue length over the measured
    /// slots, in packets per slot.
    pub queue_growth_slope: f64,
    /// True when the growth slope is at most [`SLOPE_THRESHOLD`].
    pub stable_verdict: bool,
    /// True when the slope magnitude is below twice the threshold: the
    /// finite run cannot distinguish the trajectory from marginal drift.
    pub borderline: bool,
    /// Fraction of measured slots in which the energy queue was nonempty.
    pub energy_nonempty_fraction: f64,
    /// Data arrivals over the whole run.
    pub data_arrivals: u64,
    /// Data deliveries over the whole run.
    pub data_deliveries: u64,
    /// Data-queue length after the final slot.
    pub final_queue_length: u64,
    pub seed: u64,
    pub rng: &'static str,
}

/// Runs a source node whose transmissions are gated by the energy queue.
///
/// The energy queue evolves exactly as in [`simulate_energy_queue`] and
/// consumes energy every nonempty slot whether or not data is waiting. A
/// data packet departs in a slot only when the energy queue was nonempty at
/// the slot start, the data queue was nonempty at the slot start, and an
/// independent success draw with probability `success_prob` passes. Data
/// arrivals are Bernoulli with probability `lambda_p` into an unbounded
/// queue. Four uniform draws are consumed every slot.
pub fn simulate_gated_source(
    lambda_p: f64,
    success_prob: f64,
    config: &SimConfig,
) -> Result<GatedSourceResult> {
    check_probability("lambda_p", lambda_p)?;
    check_probability("success_prob", success_prob)?;
    config.validate()?;

    let spec = config.spec;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let measured = config.slots - config.warmup_slots;

    let mut energy: u64 = 0;
    let mut data: u64 = 0;
    let mut data_arrivals: u64 = 0;
    let mut data_deliveries: u64 = 0;
    let mut delivered_measured: u64 = 0;
    let mut energy_nonempty_measured: u64 = 0;
    // Exact integer accumulators for the trajectory regression: sums of the
    // start-of-slot lengths and of index * length over the measured window.
    let mut length_sum: u128 = 0;
    let mut weighted_sum: u128 = 0;

    for slot in 0..config.slots {
        let in_window = slot >= config.warmup_slots;
        if in_window {
            let index = (slot - config.warmup_slots) as u128;
            length_sum += data as u128;
            weighted_sum += index * data as u128;
            if energy >= 1 {
                energy_nonempty_measured += 1;
            }
        }
        let energy_was_nonempty = energy >= 1;
        let data_was_nonempty = data >= 1;

        let serve_energy: f64 = rng.random();
        let arrive_energy: f64 = rng.random();
        let arrive_data: f64 = rng.random();
        let deliver_data: f64 = rng.random();

        if energy_was_nonempty && serve_energy < spec.mu_e {
            energy -= 1;
        }
        if arrive_energy < spec.delta {
            let admit = match spec.capacity {
                Capacity::Finite(c) => energy < c as u64,
                Capacity::Unbounded => true,
            };
            if admit {
                energy += 1;
            }
        }
        if energy_was_nonempty && data_was_nonempty && deliver_data < success_prob {
            data -= 1;
            data_deliveries += 1;
            if in_window {
                delivered_measured += 1;
            }
        }
        if arrive_data < lambda_p {
            data += 1;
            data_arrivals += 1;
        }
    }

    let slope = regression_slope(measured, length_sum, weighted_sum);
    Ok(GatedSourceResult {
        arrival_rate: lambda_p,
        delivered_throughput: delivered_measured as f64 / measured as f64,
        mean_queue_length: length_sum as f64 / measured as f64,
        queue_growth_slope: slope,
        stable_verdict: slope <= SLOPE_THRESHOLD,
        borderline: slope.abs() < 2.0 * SLOPE_THRESHOLD,
        energy_nonempty_fraction: energy_nonempty_measured as f64 / measured as f64,
        data_arrivals,
        data_deliveries,
        final_queue_length: data,
        seed: config.seed,
        rng: RNG_LABEL,
    })
}

/// Least-squares slope of `y` against slot index `0..n`, from the exact
/// integer sums `S1 = sum y_i` and `S2 = sum i * y_i`:
/// `slope = (12 S2 - 6 (n-1) S1) / (n^3 - n)`.
fn regression_slope(n: u64, length_sum: u128, weighted_sum: u128) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n = n as i128;
    let numerator = 12 * weighted_sum as i128 - 6 * (n - 1) * length_sum as i128;
    let denominator = n * n * n - n;
    numerator as f64 / denominator as f64
}
