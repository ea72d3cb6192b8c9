//! Arbitrary-precision rational scalars and their `"p/q"` text form.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::fmt::Write as _;

/// Exact scalar used for every coordinate and length computation.
pub type Rational = num_rational::BigRational;
/// Arbitrary-precision integer.
pub type Int = BigInt;

/// Parses a rational from `"p/q"` (or plain `"p"`) with an optional sign.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: Int = num
        .parse()
        .map_err(|_| format!("invalid integer {num:?} in rational {s:?}"))?;
    let d: Int = den
        .parse()
        .map_err(|_| format!("invalid integer {den:?} in rational {s:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in rational {s:?}"));
    }
    Ok(Rational::new(n, d))
}

/// Formats a rational as `"p/q"`, omitting `/q` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders a rational as a fixed-point decimal with the given number of
/// fractional digits, for presentation only (SVG coordinates).
pub fn decimal_string(r: &Rational, digits: u32) -> String {
    let scale = Int::from(10u32).pow(digits);
    let scaled = (r * Rational::from_integer(scale.clone())).round();
    let val = scaled.numer().clone();
    let neg = val.is_negative();
    let abs = val.abs();
    let (int_part, frac_part) = abs.div_rem(&scale);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    let _ = write!(out, "{int_part}.{:0width$}", frac_part, width = digits as usize);
    out
}

/// Divides a pair of integers by their gcd; `(0, 0)` is returned unchanged.
pub fn primitive_int_pair(a: Int, b: Int) -> (Int, Int) {
    let g = a.gcd(&b);
    if g.is_zero() {
        (a, b)
    } else {
        (a / &g, b / g)
    }
}

/// Clears denominators of a rational pair and divides by the gcd, preserving
/// the direction (sign) of the input.
pub fn primitive_pair(x: &Rational, y: &Rational) -> (Int, Int) {
    let lcm = x.denom().lcm(y.denom());
    let a = x.numer() * (&lcm / x.denom());
    let b = y.numer() * (&lcm / y.denom());
    primitive_int_pair(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["3/4", "-7/2", "5", "0", "-12"] {
            let r = parse_rational(s).unwrap();
            assert_eq!(format_rational(&r), s);
        }
        assert_eq!(format_rational(&parse_rational("6/4").unwrap()), "3/2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn primitive_pairs() {
        let (a, b) = primitive_pair(&parse_rational("2/3").unwrap(), &parse_rational("-4/5").unwrap());
        assert_eq!((a.to_string().as_str(), b.to_string().as_str()), ("5", "-6"));
        let (a, b) = primitive_int_pair(Int::from(-6), Int::from(-9));
        // gcd is positive; signs are preserved up to the common factor
        assert_eq!((a.to_string().as_str(), b.to_string().as_str()), ("-2", "-3"));
    }

    #[test]
    fn decimal_rendering() {
        let r = parse_rational("1/3").unwrap();
        assert_eq!(decimal_string(&r, 6), "0.333333");
        let r = parse_rational("-5/4").unwrap();
        assert_eq!(decimal_string(&r, 3), "-1.250");
    }
}
