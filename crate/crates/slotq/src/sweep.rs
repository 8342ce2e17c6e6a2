//! Grid evaluation over `(delta, capacity)` with CSV and JSON emission.
//!
//! Each grid point carries the exact chain value, the M/M/1/c closed form,
//! the corrected slotted value, and optionally a simulation estimate, so
//! the capacity-(in)dependence of the nonempty probability can be plotted
//! directly from the emitted files.

use std::io::Write;

use crate::chain::{self, Capacity, QueueSpec};
use crate::closedform;
use crate::error::Result;
use crate::render::sig12;
use crate::sim::{self, SimConfig};

/// Column order of the CSV emission; JSON objects use the same field names.
pub const CSV_HEADER: &str =
    "delta,capacity,exact_nonempty,mm1c_nonempty,corrected_nonempty,mc_nonempty,mc_stderr,err_mm1c_vs_exact";

/// One `(delta, capacity)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub capacity: Capacity,
    /// Chain-solver nonempty probability; absent for unbounded capacity.
    pub exact_nonempty: Option<f64>,
    /// M/M/1/c closed form; the `c -> inf` limit (= delta) for unbounded
    /// capacity.
    pub mm1c_nonempty: f64,
    /// Corrected slotted value, always equal to `delta`.
    pub corrected_nonempty: f64,
    /// Simulated nonempty fraction, when simulation was enabled.
    pub mc_nonempty: Option<f64>,
    /// Batch-means standard error of `mc_nonempty`.
    pub mc_stderr: Option<f64>,
    /// `mm1c_nonempty - exact_nonempty`, when the exact value is present.
    pub err_mm1c_vs_exact: Option<f64>,
    /// Row-level failure marker; other fields stay absent rather than
    /// aborting the sweep.
    pub error: Option<String>,
}

/// Sweep parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub capacities: Vec<Capacity>,
    pub mu_e: f64,
    pub simulate: bool,
    pub sim_slots: u64,
    pub base_seed: u64,
}

impl SweepConfig {
    /// Analytical sweep (no simulation) over the given grid, `mu_e = 1`.
    pub fn new(deltas: Vec<f64>, capacities: Vec<Capacity>) -> Self {
        SweepConfig {
            deltas,
            capacities,
            mu_e: 1.0,
            simulate: false,
            sim_slots: 1_000_000,
            base_seed: 0,
        }
    }

    /// The bundled preset grid: arrival probabilities 0.1..0.9 plus 0.95
    /// and 0.99, capacities {1, 2, 5, 10, 50}. It spans the regimes where
    /// the M/M/1/c formula is close to the truth and where it is far off.
    pub fn reproduce_comment() -> Self {
        let mut deltas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        deltas.extend([0.95, 0.99]);
        let capacities = [1, 2, 5, 10, 50]
            .into_iter()
            .map(Capacity::Finite)
            .collect();
        SweepConfig::new(deltas, capacities)
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(crate::Error::InvalidSimConfig {
                reason: "deltas list is empty".to_string(),
            });
        }
        if self.capacities.is_empty() {
            return Err(crate::Error::InvalidSimConfig {
                reason: "capacities list is empty".to_string(),
            });
        }
        for &delta in &self.deltas {
            QueueSpec::new(delta, self.mu_e, Capacity::Unbounded)?;
        }
        for &capacity in &self.capacities {
            QueueSpec::new(0.0, self.mu_e, capacity)?;
        }
        if self.simulate && self.sim_slots == 0 {
            return Err(crate::Error::InvalidSimConfig {
                reason: "sim_slots must be at least 1".to_string(),
            });
        }
        Ok(())
    }

    /// The evaluation grid, sorted by `(delta, capacity)` with duplicates
    /// removed; row indices into this grid seed the per-row simulations.
    pub fn grid(&self) -> Vec<(f64, Capacity)> {
        let mut points: Vec<(f64, Capacity)> = self
            .deltas
            .iter()
            .flat_map(|&delta| self.capacities.iter().map(move |&cap| (delta, cap)))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        points.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        points
    }
}

/// Evaluates a single grid point. `row_index` is the point's position in
/// [`SweepConfig::grid`] and determines the simulation seed, so rows may be
/// computed concurrently in any order without changing the results.
pub fn compute_row(config: &SweepConfig, row_index: usize, delta: f64, capacity: Capacity) -> SweepRow {
    let mut errors: Vec<String> = Vec::new();

    let exact_nonempty = match capacity {
        Capacity::Unbounded => None,
        Capacity::Finite(_) => {
            let solved = QueueSpec::new(delta, config.mu_e, capacity)
                .and_then(|spec| chain::build_energy_chain(&spec))
                .and_then(|matrix| chain::solve_stationary(&matrix, chain::DEFAULT_TOLERANCE));
            match solved {
                Ok(distribution) => Some(chain::nonempty_prob(&distribution)),
                Err(err) => {
                    errors.push(format!("exact: {err}"));
                    None
                }
            }
        }
    };

    let mm1c_nonempty = match capacity {
        Capacity::Finite(c) => closedform::mm1c_nonempty(delta, c),
        // The finite formula converges to delta from below as c grows.
        Capacity::Unbounded => delta,
    };
    let corrected_nonempty = closedform::md1c_nonempty(delta);

    let (mc_nonempty, mc_stderr) = if config.simulate {
        let seed = sim::replication_seed(config.base_seed, row_index as u64);
        let simulated = QueueSpec::new(delta, config.mu_e, capacity)
            .map(|spec| SimConfig::new(spec, config.sim_slots, seed))
            .and_then(|sim_config| sim::simulate_energy_queue(&sim_config));
        match simulated {
            Ok(result) => (Some(result.nonempty_fraction), result.nonempty_stderr()),
            Err(err) => {
                errors.push(format!("simulation: {err}"));
                (None, None)
            }
        }
    } else {
        (None, None)
    };

    SweepRow {
        delta,
        capacity,
        exact_nonempty,
        mm1c_nonempty,
        corrected_nonempty,
        mc_nonempty,
        mc_stderr,
        err_mm1c_vs_exact: exact_nonempty.map(|exact| mm1c_nonempty - exact),
        error: if errors.is_empty() {
            None
        } else {
            Some(errors.join("; "))
        },
    }
}

/// Evaluates the whole grid in row order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    Ok(config
        .grid()
        .into_iter()
        .enumerate()
        .map(|(index, (delta, capacity))| compute_row(config, index, delta, capacity))
        .collect())
}

fn opt(value: Option<f64>) -> String {
    value.map(sig12).unwrap_or_default()
}

/// Writes the rows as CSV and returns the number of bytes written.
///
/// Header exactly [`CSV_HEADER`], `\n` line endings, unbounded capacity as
/// `inf`, absent fields empty, reals rendered with 12 significant digits.
pub fn emit_csv<W: Write>(rows: &[SweepRow], destination: &mut W) -> std::io::Result<u64> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sig12(row.delta),
            row.capacity,
            opt(row.exact_nonempty),
            sig12(row.mm1c_nonempty),
            sig12(row.corrected_nonempty),
            opt(row.mc_nonempty),
            opt(row.mc_stderr),
            opt(row.err_mm1c_vs_exact),
        ));
    }
    destination.write_all(text.as_bytes())?;
    Ok(text.len() as u64)
}

/// Writes the rows as a JSON array and returns the number of bytes written.
///
/// Field names and number rendering match the CSV emission; absent fields
/// are omitted rather than null; unbounded capacity is the string `"inf"`.
pub fn emit_json<W: Write>(rows: &[SweepRow], destination: &mut W) -> std::io::Result<u64> {
    let mut text = String::with_capacity(96 * (rows.len() + 1));
    if rows.is_empty() {
        text.push_str("[]\n");
    } else {
        text.push_str("[\n");
        for (index, row) in rows.iter().enumerate() {
            text.push_str("  {");
            let mut fields: Vec<String> = Vec::with_capacity(9);
            fields.push(format!("\"delta\":{}", sig12(row.delta)));
            let capacity = match row.capacity {
                Capacity::Finite(c) => c.to_string(),
                Capacity::Unbounded => "\"inf\"".to_string(),
            };
            fields.push(format!("\"capacity\":{capacity}"));
            if let Some(exact) = row.exact_nonempty {
                fields.push(format!("\"exact_nonempty\":{}", sig12(exact)));
            }
            fields.push(format!("\"mm1c_nonempty\":{}", sig12(row.mm1c_nonempty)));
            fields.push(format!(
                "\"corrected_nonempty\":{}",
                sig12(row.corrected_nonempty)
            ));
            if let Some(mc) = row.mc_nonempty {
                fields.push(format!("\"mc_nonempty\":{}", sig12(mc)));
            }
            if let Some(stderr) = row.mc_stderr {
                fields.push(format!("\"mc_stderr\":{}", sig12(stderr)));
            }
            if let Some(err) = row.err_mm1c_vs_exact {
                fields.push(format!("\"err_mm1c_vs_exact\":{}", sig12(err)));
            }
            if let Some(ref message) = row.error {
                fields.push(format!(
                    "\"error\":{}",
                    serde_json::to_string(message).expect("strings serialize")
                ));
            }
            text.push_str(&fields.join(","));
            text.push('}');
            if index + 1 < rows.len() {
                text.push(',');
            }
            text.push('\n');
        }
        text.push_str("]\n");
    }
    destination.write_all(text.as_bytes())?;
    Ok(text.len() as u64)
}

/// Parses rows emitted by [`emit_json`]. Re-emitting the parsed rows
/// reproduces the input byte for byte.
pub fn parse_json_rows(text: &str) -> std::result::Result<Vec<SweepRow>, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|err| format!("invalid JSON: {err}"))?;
    let array = value.as_array().ok_or("expected a JSON array")?;

    let number = |object: &serde_json::Map<String, serde_json::Value>,
                  key: &str|
     -> std::result::Result<Option<f64>, String> {
        match object.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| format!("field {key} is not a number")),
        }
    };

    let mut rows = Vec::with_capacity(array.len());
    for item in array {
        let object = item.as_object().ok_or("expected row objects")?;
        let capacity = match object.get("capacity") {
            Some(serde_json::Value::String(s)) if s == "inf" => Capacity::Unbounded,
            Some(v) => Capacity::Finite(
                v.as_u64()
                    .ok_or("capacity must be an integer or \"inf\"")? as u32,
            ),
            None => return Err("missing capacity".to_string()),
        };
        rows.push(SweepRow {
            delta: number(object, "delta")?.ok_or("missing delta")?,
            capacity,
            exact_nonempty: number(object, "exact_nonempty")?,
            mm1c_nonempty: number(object, "mm1c_nonempty")?.ok_or("missing mm1c_nonempty")?,
            corrected_nonempty: number(object, "corrected_nonempty")?
                .ok_or("missing corrected_nonempty")?,
            mc_nonempty: number(object, "mc_nonempty")?,
            mc_stderr: number(object, "mc_stderr")?,
            err_mm1c_vs_exact: number(object, "err_mm1c_vs_exact")?,
            error: match object.get("error") {
                None => None,
                Some(v) => Some(
                    v.as_str()
                        .ok_or("error field must be a string")?
                        .to_string(),
                ),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(c: u32) -> Capacity {
        Capacity::Finite(c)
    }

    #[test]
    fn single_point_row_values() {
        let config = SweepConfig::new(vec![0.9], vec![finite(2)]);
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert!((row.exact_nonempty.unwrap() - 0.9).abs() < 1e-12);
        assert!((row.mm1c_nonempty - 0.171 / 0.271).abs() < 1e-12);
        assert!((row.err_mm1c_vs_exact.unwrap() - (0.171 / 0.271 - 0.9)).abs() < 1e-12);
        assert_eq!(row.corrected_nonempty, 0.9);
        assert!(row.mc_nonempty.is_none());
        assert!(row.error.is_none());
    }

    #[test]
    fn zero_arrivals_rows_are_all_zero() {
        let config = SweepConfig::new(vec![0.0], vec![finite(1), finite(5)]);
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.exact_nonempty.unwrap(), 0.0);
            assert_eq!(row.mm1c_nonempty, 0.0);
            assert_eq!(row.corrected_nonempty, 0.0);
            assert_eq!(row.err_mm1c_vs_exact.unwrap(), 0.0);
        }
    }

    #[test]
    fn exact_value_ignores_capacity() {
        let config = SweepConfig::new(
            vec![0.7],
            vec![finite(1), finite(2), finite(10), finite(1000)],
        );
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!(
                (row.exact_nonempty.unwrap() - 0.7).abs() < 1e-12,
                "capacity {}",
                row.capacity
            );
        }
    }

    #[test]
    fn grid_is_sorted_and_unbounded_rows_have_no_exact_column() {
        let config = SweepConfig::new(
            vec![0.9, 0.1],
            vec![Capacity::Unbounded, finite(2)],
        );
        let rows = run_sweep(&config).unwrap();
        let points: Vec<(f64, Capacity)> = rows.iter().map(|r| (r.delta, r.capacity)).collect();
        assert_eq!(
            points,
            vec![
                (0.1, finite(2)),
                (0.1, Capacity::Unbounded),
                (0.9, finite(2)),
                (0.9, Capacity::Unbounded),
            ]
        );
        let unbounded = &rows[1];
        assert!(unbounded.exact_nonempty.is_none());
        assert!(unbounded.err_mm1c_vs_exact.is_none());
        assert_eq!(unbounded.mm1c_nonempty, 0.1);
        assert_eq!(unbounded.corrected_nonempty, 0.1);
    }

    #[test]
    fn csv_empty_rows_is_header_only() {
        let mut buffer = Vec::new();
        let bytes = emit_csv(&[], &mut buffer).unwrap();
        let expected = format!("{CSV_HEADER}\n");
        assert_eq!(buffer, expected.as_bytes());
        assert_eq!(bytes, expected.len() as u64);
    }

    #[test]
    fn csv_single_row_rendering() {
        let config = SweepConfig::new(vec![0.9], vec![finite(2)]);
        let rows = run_sweep(&config).unwrap();
        let mut buffer = Vec::new();
        emit_csv(&rows, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "0.9,2,0.9,0.630996309963,0.9,,,-0.269003690037"
        );
        assert!(lines.next().is_none());
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_unbounded_capacity_serializes_as_inf() {
        let config = SweepConfig::new(vec![0.5], vec![Capacity::Unbounded]);
        let rows = run_sweep(&config).unwrap();
        let mut buffer = Vec::new();
        emit_csv(&rows, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0.5,inf,,0.5,0.5,,,");
    }

    #[test]
    fn json_empty_rows_is_empty_array() {
        let mut buffer = Vec::new();
        let bytes = emit_json(&[], &mut buffer).unwrap();
        assert_eq!(buffer, b"[]\n");
        assert_eq!(bytes, 3);
    }

    #[test]
    fn json_round_trips_byte_identically() {
        let mut config = SweepConfig::new(
            vec![0.3, 0.9],
            vec![finite(2), Capacity::Unbounded],
        );
        config.simulate = true;
        config.sim_slots = 20_000;
        let rows = run_sweep(&config).unwrap();

        let mut first = Vec::new();
        emit_json(&rows, &mut first).unwrap();
        let parsed = parse_json_rows(std::str::from_utf8(&first).unwrap()).unwrap();
        let mut second = Vec::new();
        emit_json(&parsed, &mut second).unwrap();
        assert_eq!(first, second);
        assert!(serde_json::from_slice::<serde_json::Value>(&first).is_ok());
    }

    #[test]
    fn csv_and_json_carry_identical_values() {
        let mut config = SweepConfig::reproduce_comment();
        config.deltas.truncate(4);
        config.simulate = true;
        config.sim_slots = 10_000;
        let rows = run_sweep(&config).unwrap();

        let mut csv = Vec::new();
        emit_csv(&rows, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let mut json = Vec::new();
        emit_json(&rows, &mut json).unwrap();
        let parsed = parse_json_rows(std::str::from_utf8(&json).unwrap()).unwrap();

        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        for (line, row) in csv.lines().skip(1).zip(parsed.iter()) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), header.len());
            assert_eq!(cells[0], sig12(row.delta));
            assert_eq!(cells[1], row.capacity.to_string());
            assert_eq!(cells[2], opt(row.exact_nonempty));
            assert_eq!(cells[3], sig12(row.mm1c_nonempty));
            assert_eq!(cells[4], sig12(row.corrected_nonempty));
            assert_eq!(cells[5], opt(row.mc_nonempty));
            assert_eq!(cells[6], opt(row.mc_stderr));
            assert_eq!(cells[7], opt(row.err_mm1c_vs_exact));
        }
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }

    #[test]
    fn preset_rows_confirm_capacity_invariance_and_underestimate() {
        let rows = run_sweep(&SweepConfig::reproduce_comment()).unwrap();
        assert_eq!(rows.len(), 11 * 5);
        for row in &rows {
            let exact = row.exact_nonempty.unwrap();
            assert!(
                (exact - row.corrected_nonempty).abs() <= 1e-12,
                "delta {} capacity {}",
                row.delta,
                row.capacity
            );
            if row.delta > 0.0 && row.delta < 1.0 {
                // Strictly negative wherever the shortfall is representable
                // in f64; where it underflows, the stored error is rounding
                // noise around zero and strictness comes from the log-space
                // shortfall.
                let err = row.err_mm1c_vs_exact.unwrap();
                let capacity = row.capacity.finite().unwrap();
                let shortfall = closedform::mm1c_shortfall(row.delta, capacity);
                assert!(shortfall > 0.0);
                if shortfall > 1e-13 {
                    assert!(err < 0.0, "delta {} capacity {capacity}", row.delta);
                } else {
                    assert!(err.abs() <= 5e-16, "delta {} capacity {capacity}", row.delta);
                }
            }
        }
    }

    #[test]
    fn simulated_sweeps_are_reproducible() {
        let mut config = SweepConfig::new(vec![0.4, 0.8], vec![finite(1), finite(3)]);
        config.simulate = true;
        config.sim_slots = 5_000;
        config.base_seed = 11;
        let first = run_sweep(&config).unwrap();
        let second = run_sweep(&config).unwrap();
        assert_eq!(first, second);
        assert!(first.iter().all(|row| row.mc_nonempty.is_some()));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let empty = SweepConfig::new(vec![], vec![finite(1)]);
        assert!(run_sweep(&empty).is_err());
        let bad_delta = SweepConfig::new(vec![1.5], vec![finite(1)]);
        assert!(run_sweep(&bad_delta).is_err());
    }

    #[test]
    fn row_error_marker_survives_emission() {
        // A failed row keeps its computed fields absent; the marker rides
        // along in JSON and the fixed CSV schema just leaves cells empty.
        let row = SweepRow {
            delta: 0.5,
            capacity: finite(3),
            exact_nonempty: None,
            mm1c_nonempty: 0.4,
            corrected_nonempty: 0.5,
            mc_nonempty: None,
            mc_stderr: None,
            err_mm1c_vs_exact: None,
            error: Some("exact: stationary system is singular".to_string()),
        };
        let mut json = Vec::new();
        emit_json(std::slice::from_ref(&row), &mut json).unwrap();
        let parsed = parse_json_rows(std::str::from_utf8(&json).unwrap()).unwrap();
        assert_eq!(parsed[0].error.as_deref(), row.error.as_deref());

        let mut csv = Vec::new();
        emit_csv(std::slice::from_ref(&row), &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0.5,3,,0.4,0.5,,,");
    }
}
