//! Plain-text rendering of reals with 12 significant digits.
//!
//! All file output funnels through [`sig12`] so that emitted CSV and JSON
//! are byte-stable across runs and platforms and diffable against files
//! produced in other languages with `%.12g`.

/// Formats a finite value with up to 12 significant digits, trimming
/// trailing zeros, using `%.12g`-style notation: positional for decimal
/// exponents in [-4, 12), scientific (`1.5e-07`) otherwise.
///
/// The output parses back to a value that renders identically, so emitted
/// files round-trip byte-for-byte.
pub fn sig12(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if value.is_nan() {
        return "nan".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }

    let magnitude = value.abs();
    let sci = format!("{magnitude:.11e}");
    let (mantissa, exponent) = sci.split_once('e').expect("{:e} always has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 12);

    let body = if (-4..12).contains(&exponent) {
        if exponent >= 0 {
            let split = exponent as usize + 1;
            let integer = &digits[..split];
            let fraction = digits[split..].trim_end_matches('0');
            if fraction.is_empty() {
                integer.to_string()
            } else {
                format!("{integer}.{fraction}")
            }
        } else {
            let leading_zeros = "0".repeat((-exponent - 1) as usize);
            let fraction = digits.trim_end_matches('0');
            format!("0.{leading_zeros}{fraction}")
        }
    } else {
        let head = &digits[..1];
        let tail = digits[1..].trim_end_matches('0');
        let mantissa = if tail.is_empty() {
            head.to_string()
        } else {
            format!("{head}.{tail}")
        };
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    };

    if value < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}
