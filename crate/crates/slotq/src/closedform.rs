//! Closed-form occupancy probabilities.
//!
//! [`mm1c_nonempty`] evaluates the continuous-time M/M/1/c nonempty
//! probability
//!
//! ```text
//! delta (1 - delta^c) / (1 - delta^(c+1))
//! ```
//!
//! which describes a queue with Poisson arrivals and exponential unit-rate
//! service. Applied to the slotted queue with Bernoulli arrivals and
//! deterministic one-packet-per-slot consumption this formula is wrong:
//! the slotted queue's nonempty probability is exactly `delta` for every
//! capacity ([`md1c_nonempty`]), and the M/M/1/c value is strictly smaller
//! for `delta` in (0, 1). [`compare`] quantifies the gap.

use crate::chain::check_probability;

/// An M/M/1/c evaluation, with a marker for the removable singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mm1cValue {
    pub value: f64,
    /// True when `delta = 1` forced the limit `c / (c + 1)` instead of the
    /// literal 0/0 expression.
    pub at_limit: bool,
}

/// Side-by-side values of the two formulas at one `(delta, capacity)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulaComparison {
    pub delta: f64,
    pub capacity: u32,
    /// Continuous-time M/M/1/c nonempty probability.
    pub mm1c_value: f64,
    /// Slotted-queue nonempty probability (= delta, capacity-independent).
    pub corrected_value: f64,
    /// `|mm1c_value - corrected_value|`.
    pub abs_error: f64,
    pub mm1c_at_limit: bool,
}

/// M/M/1/c nonempty probability with the limit marker.
///
/// Evaluated as `delta * expm1(c ln delta) / expm1((c+1) ln delta)`, which
/// avoids the cancellation in `1 - delta^c` when `delta^c` is close to 1.
/// At `delta = 1` the expression is 0/0; the limit is `c / (c + 1)`.
///
/// Panics if `delta` is outside [0, 1] or `capacity` is zero.
pub fn mm1c_nonempty_eval(delta: f64, capacity: u32) -> Mm1cValue {
    check_probability("delta", delta).expect("delta must be a probability");
    assert!(capacity >= 1, "capacity must be at least 1");

    if delta == 1.0 {
        let c = capacity as f64;
        return Mm1cValue {
            value: c / (c + 1.0),
            at_limit: true,
        };
    }
    // ln(0) = -inf makes expm1 return -1 exactly, so delta = 0 needs no
    // special case.
    let log_delta = delta.ln();
    let one_minus_pow_c = -(capacity as f64 * log_delta).exp_m1();
    let one_minus_pow_c1 = -((capacity as f64 + 1.0) * log_delta).exp_m1();
    Mm1cValue {
        value: delta * one_minus_pow_c / one_minus_pow_c1,
        at_limit: false,
    }
}

/// M/M/1/c nonempty probability (value only).
pub fn mm1c_nonempty(delta: f64, capacity: u32) -> f64 {
    mm1c_nonempty_eval(delta, capacity).value
}

/// Stationary occupancy vector of the continuous-time M/M/1/c queue,
/// `pi[j] = (1 - delta) delta^j / (1 - delta^(c+1))`.
///
/// This is where [`mm1c_nonempty`] comes from: summing `pi[1..]` reproduces
/// it, which the tests use as a cross-check.
pub fn mm1c_stationary(delta: f64, capacity: u32) -> Vec<f64> {
    check_probability("delta", delta).expect("delta must be a probability");
    assert!(capacity >= 1, "capacity must be at least 1");

    let dim = capacity as usize + 1;
    if delta == 1.0 {
        return vec![1.0 / dim as f64; dim];
    }
    let normalizer = -((capacity as f64 + 1.0) * delta.ln()).exp_m1();
    let mut pi = Vec::with_capacity(dim);
    let mut power = 1.0;
    for _ in 0..dim {
        pi.push((1.0 - delta) * power / normalizer);
        power *= delta;
    }
    pi
}

/// Slotted-queue nonempty probability under deterministic per-slot
/// consumption: exactly `delta`, for every buffer capacity. Capacity is
/// deliberately absent from the signature.
///
/// Panics if `delta` is outside [0, 1].
pub fn md1c_nonempty(delta: f64) -> f64 {
    check_probability("delta", delta).expect("delta must be a probability");
    delta
}

/// The amount by which the M/M/1/c formula undershoots `delta`:
///
/// ```text
/// delta - mm1c = delta^(c+1) (1 - delta) / (1 - delta^(c+1))
/// ```
///
/// Computed in log space, so it stays meaningful even when the shortfall is
/// far below the resolution of the direct f64 difference (for small `delta`
/// and large `c` the difference `mm1c_nonempty(delta, c) - delta` rounds to
/// zero while the true shortfall is a tiny positive number). Returns 0 for
/// `delta = 0` and `1 / (c + 1)` for `delta = 1`.
pub fn mm1c_shortfall(delta: f64, capacity: u32) -> f64 {
    mm1c_log_shortfall(delta, capacity).exp()
}

/// Natural log of [`mm1c_shortfall`]. Finite for every `delta` in (0, 1],
/// which certifies a strictly positive shortfall even where the linear
/// value underflows to zero (it does below about 1e-308). `-inf` for
/// `delta = 0`.
pub fn mm1c_log_shortfall(delta: f64, capacity: u32) -> f64 {
    check_probability("delta", delta).expect("delta must be a probability");
    assert!(capacity >= 1, "capacity must be at least 1");

    if delta == 0.0 {
        return f64::NEG_INFINITY;
    }
    if delta == 1.0 {
        return -(capacity as f64 + 1.0).ln();
    }
    let log_delta = delta.ln();
    let log_numerator = (capacity as f64 + 1.0) * log_delta + (-delta).ln_1p();
    let log_denominator = (-((capacity as f64 + 1.0) * log_delta).exp_m1()).ln();
    log_numerator - log_denominator
}

/// Evaluates both formulas at one point and their absolute gap.
pub fn compare(delta: f64, capacity: u32) -> FormulaComparison {
    let mm1c = mm1c_nonempty_eval(delta, capacity);
    let corrected = md1c_nonempty(delta);
    FormulaComparison {
        delta,
        capacity,
        mm1c_value: mm1c.value,
        corrected_value: corrected,
        abs_error: (mm1c.value - corrected).abs(),
        mm1c_at_limit: mm1c.at_limit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Geometric-sum oracle: with T = sum_{j=1..c} delta^j accumulated term
    /// by term, the M/M/1/c nonempty probability equals T / (1 + T). All
    /// terms are positive, so there is no cancellation, and delta = 1 gives
    /// T = c, reproducing the limit c / (c + 1).
    fn sum_form(delta: f64, capacity: u32) -> f64 {
        let mut term = 1.0f64;
        let mut total = 0.0f64;
        for _ in 0..capacity {
            term *= delta;
            total += term;
        }
        total / (1.0 + total)
    }

    #[test]
    fn mm1c_at_point_nine_capacity_two() {
        // 0.9 (1 - 0.81) / (1 - 0.729) = 0.171 / 0.271
        let expected = 0.171 / 0.271;
        assert!((mm1c_nonempty(0.9, 2) - expected).abs() < 1e-12);
        let naive = 0.9 * (1.0 - 0.9f64.powi(2)) / (1.0 - 0.9f64.powi(3));
        assert!((mm1c_nonempty(0.9, 2) - naive).abs() < 1e-14);
    }

    #[test]
    fn mm1c_without_arrivals_is_zero() {
        assert_eq!(mm1c_nonempty(0.0, 1), 0.0);
        assert_eq!(mm1c_nonempty(0.0, 10), 0.0);
    }

    #[test]
    fn mm1c_limit_at_saturation() {
        let eval = mm1c_nonempty_eval(1.0, 3);
        assert_eq!(eval.value, 0.75);
        assert!(eval.at_limit);
        assert!(!mm1c_nonempty_eval(0.999, 3).at_limit);
    }

    #[test]
    fn mm1c_matches_sum_form_oracle() {
        let deltas = [
            0.0,
            1e-9,
            0.1,
            0.3,
            0.5,
            0.9,
            0.99,
            0.999999,
            1.0 - 1e-12,
            1.0,
        ];
        let capacities = [1u32, 2, 3, 10, 100, 10_000];
        for &delta in &deltas {
            for &capacity in &capacities {
                let stable = mm1c_nonempty(delta, capacity);
                let oracle = sum_form(delta, capacity);
                let scale = oracle.abs().max(1e-30);
                assert!(
                    ((stable - oracle) / scale).abs() < 1e-11,
                    "delta={delta} c={capacity}: {stable} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn mm1c_equals_tail_of_its_stationary_vector() {
        for &(delta, capacity) in &[(0.3, 5u32), (0.9, 2), (0.5, 17), (0.99, 40), (1.0, 7)] {
            let pi = mm1c_stationary(delta, capacity);
            let total: f64 = pi.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let tail: f64 = pi[1..].iter().sum();
            assert!(
                (tail - mm1c_nonempty(delta, capacity)).abs() < 1e-12,
                "delta={delta} c={capacity}"
            );
        }
    }

    #[test]
    fn corrected_value_is_delta() {
        assert_eq!(md1c_nonempty(0.7), 0.7);
        assert_eq!(md1c_nonempty(0.0), 0.0);
        assert_eq!(md1c_nonempty(1.0), 1.0);
    }

    #[test]
    fn compare_quantifies_the_gap() {
        let at_nine = compare(0.9, 2);
        assert!((at_nine.abs_error - (0.9 - 0.171 / 0.271)).abs() < 1e-12);
        assert!((at_nine.abs_error - 0.269).abs() < 5e-4);
        assert!(!at_nine.mm1c_at_limit);

        // Direct arithmetic at delta = 0.3, c = 5: a small positive gap.
        let naive = (0.3 - 0.3 * (1.0 - 0.3f64.powi(5)) / (1.0 - 0.3f64.powi(6))).abs();
        let at_three = compare(0.3, 5);
        assert!((at_three.abs_error - naive).abs() < 1e-15);
        assert!(at_three.abs_error > 0.0);
        assert!(at_three.abs_error < 1e-3);

        let at_zero = compare(0.0, 10);
        assert_eq!(at_zero.abs_error, 0.0);
    }

    #[test]
    fn mm1c_underestimates_for_interior_delta() {
        // The shortfall delta - mm1c is positive for every delta in (0, 1),
        // but for small delta and large c it drops below f64 resolution and
        // the computed values coincide. Strict inequality is asserted where
        // the shortfall is representable; elsewhere the log-space shortfall
        // carries the strictness.
        for &delta in &[0.01, 0.1, 0.5, 0.9, 0.99, 0.999] {
            for &capacity in &[1u32, 2, 5, 50, 1000] {
                let value = mm1c_nonempty(delta, capacity);
                let log_shortfall = mm1c_log_shortfall(delta, capacity);
                assert!(log_shortfall.is_finite(), "delta={delta} c={capacity}");
                assert!(value <= delta * (1.0 + 1e-15), "delta={delta} c={capacity}");
                if mm1c_shortfall(delta, capacity) > 1e-13 {
                    assert!(value < delta, "delta={delta} c={capacity}");
                }
            }
        }
    }

    #[test]
    fn shortfall_matches_direct_difference_when_representable() {
        for &(delta, capacity) in &[(0.9, 2u32), (0.5, 5), (0.3, 5), (0.99, 10), (0.7, 30)] {
            let direct = delta - mm1c_nonempty(delta, capacity);
            let logspace = mm1c_shortfall(delta, capacity);
            assert!(
                ((direct - logspace) / direct).abs() < 1e-10,
                "delta={delta} c={capacity}: {direct} vs {logspace}"
            );
        }
        // Below f64 resolution the direct difference collapses to rounding
        // noise while the log-space value stays exact.
        assert_eq!(mm1c_nonempty(0.1, 50), 0.1);
        let tiny = mm1c_shortfall(0.1, 50);
        assert!(tiny > 0.0 && tiny < 1e-50);
        assert_eq!(mm1c_shortfall(0.0, 5), 0.0);
        assert_eq!(mm1c_shortfall(1.0, 3), 0.25);
    }

    #[test]
    fn mm1c_recovers_delta_for_huge_buffers() {
        for step in 1..=9 {
            let delta = step as f64 / 10.0;
            assert!((mm1c_nonempty(delta, 10_000) - delta).abs() <= 1e-9);
        }
    }

    #[test]
    #[should_panic(expected = "delta must be a probability")]
    fn mm1c_rejects_out_of_range_delta() {
        mm1c_nonempty(1.2, 3);
    }
}
