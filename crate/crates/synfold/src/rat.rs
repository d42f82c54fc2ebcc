//! Exact rational arithmetic helpers.
//!
//! Every distance in this crate is a `BigRational`. The axiom checks in
//! [`crate::space`] are equality- and inequality-sensitive, so floats are
//! never used; file formats carry rationals as `"p/q"` or integer strings.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Exact nonnegative-or-signed rational used for all distances and heights.
pub type Rat = BigRational;

/// Shorthand for an integer-valued rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for `p/q`. Panics if `q == 0`; intended for literals in code.
pub fn ratio(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"` or a plain integer string into a rational.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational literal".to_string());
    }
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: BigInt = q
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {s:?}"))?;
            if q.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rat::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| format!("bad integer {s:?}"))?;
            Ok(Rat::from_integer(p))
        }
    }
}

/// Renders a rational as `"p"` when integral, `"p/q"` otherwise (reduced form).
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering for text tables.
///
/// Terminating decimals render exactly; anything else is rounded to four
/// places and prefixed with `~` so approximation is visible.
pub fn approx_rat(r: &Rat) -> String {
    let mut denom = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&denom % &two).is_zero() {
        denom /= &two;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
    }
    let exact = denom.is_one() || denom == BigInt::from(-1);
    if exact {
        // Scale to at most the needed number of decimal places.
        let mut places = 0u32;
        let mut d = r.denom().clone();
        while !d.is_one() {
            if (&d % &two).is_zero() {
                d /= &two;
            } else {
                d /= &five;
            }
            places += 1;
        }
        let scaled = (r * Rat::from_integer(BigInt::from(10).pow(places)))
            .to_integer()
            .to_string();
        if places == 0 {
            return scaled;
        }
        let neg = scaled.starts_with('-');
        let digits = scaled.trim_start_matches('-');
        let digits = format!("{:0>width$}", digits, width = places as usize + 1);
        let split = digits.len() - places as usize;
        format!(
            "{}{}.{}",
            if neg { "-" } else { "" },
            &digits[..split],
            &digits[split..]
        )
    } else {
        let approx = r.to_f64().unwrap_or(f64::NAN);
        format!("~{approx:.4}")
    }
}
