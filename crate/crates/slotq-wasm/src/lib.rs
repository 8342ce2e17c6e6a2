//! Browser bindings for the queue toolkit.
//!
//! Three operations back the demo page in `www/`: the stationary
//! distribution of the exact chain, nonempty-probability curves over the
//! arrival probability, and a seeded simulation run. Each returns a JSON
//! payload; the page parses it and draws onto plain canvases.
//!
//! Build with `wasm-pack build crates/slotq-wasm --target web` and serve
//! the repository root (see `www/index.html`). The payload builders are
//! plain Rust and are unit-tested on the host.

use serde_json::json;
use wasm_bindgen::prelude::*;

use slotq::chain::{self, Capacity, QueueSpec};
use slotq::closedform;
use slotq::sim::{self, SimConfig};

fn queue_spec(delta: f64, mu_e: f64, capacity: u32, unbounded: bool) -> slotq::Result<QueueSpec> {
    let capacity = if unbounded {
        Capacity::Unbounded
    } else {
        Capacity::Finite(capacity)
    };
    QueueSpec::new(delta, mu_e, capacity)
}

fn stationary_payload(delta: f64, mu_e: f64, capacity: u32) -> slotq::Result<String> {
    let spec = queue_spec(delta, mu_e, capacity, false)?;
    let matrix = chain::build_energy_chain(&spec)?;
    let stationary = chain::solve_stationary(&matrix, chain::DEFAULT_TOLERANCE)?;
    Ok(json!({
        "delta": delta,
        "mu_e": mu_e,
        "capacity": capacity,
        "pi": stationary.pi(),
        "nonempty": chain::nonempty_prob(&stationary),
        "residual": stationary.residual(),
    })
    .to_string())
}

fn curves_payload(capacity: u32, mu_e: f64, points: u32) -> slotq::Result<String> {
    let points = points.clamp(2, 2000);
    let mut deltas = Vec::with_capacity(points as usize + 1);
    let mut mm1c = Vec::with_capacity(points as usize + 1);
    let mut exact = Vec::with_capacity(points as usize + 1);
    let mut corrected = Vec::with_capacity(points as usize + 1);
    for step in 0..=points {
        let delta = step as f64 / points as f64;
        let spec = queue_spec(delta, mu_e, capacity, false)?;
        let matrix = chain::build_energy_chain(&spec)?;
        let stationary = chain::solve_stationary(&matrix, chain::DEFAULT_TOLERANCE)?;
        deltas.push(delta);
        mm1c.push(closedform::mm1c_nonempty(delta, capacity));
        exact.push(chain::nonempty_prob(&stationary));
        corrected.push(closedform::md1c_nonempty(delta));
    }
    Ok(json!({
        "capacity": capacity,
        "mu_e": mu_e,
        "delta": deltas,
        "mm1c": mm1c,
        "exact": exact,
        "corrected": corrected,
    })
    .to_string())
}

fn simulate_payload(
    delta: f64,
    mu_e: f64,
    capacity: u32,
    unbounded: bool,
    slots: u32,
    seed: u32,
) -> slotq::Result<String> {
    let spec = queue_spec(delta, mu_e, capacity, unbounded)?;
    let config = SimConfig::new(spec, slots as u64, seed as u64);
    let result = sim::simulate_energy_queue(&config)?;
    let histogram: Vec<(u64, u64)> = result
        .histogram
        .iter()
        .map(|(&occupancy, &count)| (occupancy, count))
        .collect();
    let exact = match spec.capacity {
        Capacity::Finite(_) => {
            let matrix = chain::build_energy_chain(&spec)?;
            let stationary = chain::solve_stationary(&matrix, chain::DEFAULT_TOLERANCE)?;
            Some(chain::nonempty_prob(&stationary))
        }
        Capacity::Unbounded => None,
    };
    Ok(json!({
        "delta": delta,
        "mu_e": mu_e,
        "capacity": if unbounded { json!("inf") } else { json!(capacity) },
        "slots": slots,
        "warmup_slots": config.warmup_slots,
        "seed": seed,
        "rng": result.rng,
        "measured_slots": result.measured_slots,
        "nonempty_fraction": result.nonempty_fraction,
        "nonempty_stderr": result.nonempty_stderr(),
        "max_occupancy_seen": result.max_occupancy_seen,
        "histogram": histogram,
        "exact_nonempty": exact,
        "corrected_nonempty": closedform::md1c_nonempty(delta),
    })
    .to_string())
}

/// Stationary distribution of the exact chain as JSON.
#[wasm_bindgen]
pub fn stationary_json(delta: f64, mu_e: f64, capacity: u32) -> Result<String, JsError> {
    Ok(stationary_payload(delta, mu_e, capacity)?)
}

/// Nonempty-probability curves over a delta grid as JSON: the M/M/1/c
/// formula, the exact chain value, and the corrected line.
#[wasm_bindgen]
pub fn comparison_curves_json(capacity: u32, mu_e: f64, points: u32) -> Result<String, JsError> {
    Ok(curves_payload(capacity, mu_e, points)?)
}

/// One seeded simulation run as JSON, with the exact value for overlay.
#[wasm_bindgen]
pub fn simulate_json(
    delta: f64,
    mu_e: f64,
    capacity: u32,
    unbounded: bool,
    slots: u32,
    seed: u32,
) -> Result<String, JsError> {
    Ok(simulate_payload(delta, mu_e, capacity, unbounded, slots, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_payload_reports_two_point_support() {
        let payload = stationary_payload(0.7, 1.0, 10).unwrap();
        let value: serde_json::Value = serde_json::from_str(&payload).unwrap();
        let pi = value["pi"].as_array().unwrap();
        assert_eq!(pi.len(), 11);
        assert!((pi[0].as_f64().unwrap() - 0.3).abs() < 1e-12);
        assert!((pi[1].as_f64().unwrap() - 0.7).abs() < 1e-12);
        assert!((value["nonempty"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn curves_payload_shows_the_formula_gap() {
        let payload = curves_payload(2, 1.0, 10).unwrap();
        let value: serde_json::Value = serde_json::from_str(&payload).unwrap();
        let deltas = value["delta"].as_array().unwrap();
        let mm1c = value["mm1c"].as_array().unwrap();
        let exact = value["exact"].as_array().unwrap();
        let corrected = value["corrected"].as_array().unwrap();
        assert_eq!(deltas.len(), 11);
        for index in 0..deltas.len() {
            let delta = deltas[index].as_f64().unwrap();
            assert!((exact[index].as_f64().unwrap() - delta).abs() < 1e-12);
            assert!((corrected[index].as_f64().unwrap() - delta).abs() < 1e-15);
            assert!(mm1c[index].as_f64().unwrap() <= delta + 1e-15);
        }
        // Interior points show a strict gap at this capacity.
        assert!(mm1c[9].as_f64().unwrap() < deltas[9].as_f64().unwrap());
    }

    #[test]
    fn simulate_payload_is_deterministic_and_consistent() {
        let first = simulate_payload(0.9, 1.0, 2, false, 100_000, 42).unwrap();
        let second = simulate_payload(0.9, 1.0, 2, false, 100_000, 42).unwrap();
        assert_eq!(first, second);
        let value: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert!((value["nonempty_fraction"].as_f64().unwrap() - 0.9).abs() < 0.01);
        assert_eq!(value["max_occupancy_seen"].as_u64().unwrap(), 1);
        assert!((value["exact_nonempty"].as_f64().unwrap() - 0.9).abs() < 1e-12);

        let unbounded = simulate_payload(0.5, 0.7, 0, true, 50_000, 7).unwrap();
        let value: serde_json::Value = serde_json::from_str(&unbounded).unwrap();
        assert_eq!(value["capacity"], "inf");
        assert!(value["exact_nonempty"].is_null());
    }

    #[test]
    fn invalid_parameters_surface_as_errors() {
        assert!(stationary_payload(1.4, 1.0, 2).is_err());
        assert!(stationary_payload(0.5, 1.0, 0).is_err());
        assert!(simulate_payload(0.5, -0.1, 2, false, 1000, 0).is_err());
    }
}
