//! Decimal rendering of exact rationals, and exact parsing of decimal
//! literals. Every printed probability goes through here.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Significant digits used for probabilities in reports.
pub const PROBABILITY_DIGITS: usize = 12;

fn pow10(k: usize) -> BigInt {
    num_traits::pow(BigInt::from(10u32), k)
}

/// Rounds `r * 10^shift` half away from zero.
fn scaled_round(r: &BigRational, shift: i64) -> BigInt {
    let scaled = if shift >= 0 {
        r * BigRational::from_integer(pow10(shift as usize))
    } else {
        r / BigRational::from_integer(pow10((-shift) as usize))
    };
    let (q, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem.abs() * 2u32;
    if twice >= *scaled.denom() {
        if scaled.is_negative() {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

/// Renders `r` with exactly `digits` significant digits (trailing zeros kept).
pub fn render_sig(r: &BigRational, digits: usize) -> String {
    assert!(digits > 0);
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let x = r.abs();
    // decimal exponent: 10^e <= x < 10^(e+1)
    let mut e = x.to_f64().map(|f| f.log10().floor() as i64).unwrap_or(0);
    let ten = BigRational::from_integer(BigInt::from(10));
    let pow = |k: i64| -> BigRational {
        if k >= 0 {
            num_traits::pow(ten.clone(), k as usize)
        } else {
            BigRational::one() / num_traits::pow(ten.clone(), (-k) as usize)
        }
    };
    while pow(e) > x {
        e -= 1;
    }
    while pow(e + 1) <= x {
        e += 1;
    }
    let mut mant = scaled_round(&x, digits as i64 - 1 - e);
    if mant == pow10(digits) {
        mant /= 10;
        e += 1;
    }
    let s = mant.to_string();
    let body = if e >= 0 {
        let int_len = e as usize + 1;
        if int_len >= digits {
            format!("{}{}", s, "0".repeat(int_len - digits))
        } else {
            format!("{}.{}", &s[..int_len], &s[int_len..])
        }
    } else {
        format!("0.{}{}", "0".repeat((-e - 1) as usize), s)
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Fixed number of decimals after the point.
pub fn render_fixed(r: &BigRational, decimals: usize) -> String {
    let m = scaled_round(r, decimals as i64);
    let neg = m.is_negative();
    let s = m.abs().to_string();
    let s = if s.len() <= decimals {
        format!("{}{}", "0".repeat(decimals + 1 - s.len()), s)
    } else {
        s
    };
    let cut = s.len() - decimals;
    let body = if decimals == 0 {
        s
    } else {
        format!("{}.{}", &s[..cut], &s[cut..])
    };
    if neg && m != BigInt::zero() {
        format!("-{body}")
    } else {
        body
    }
}

/// Significant-digit rendering with trailing zeros removed.
pub fn render_trimmed(r: &BigRational, digits: usize) -> String {
    let s = render_sig(r, digits);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn probability(r: &BigRational) -> String {
    render_sig(r, PROBABILITY_DIGITS)
}

/// Parses a plain decimal literal (`"0.05"`, `"-12"`, `"3."`) exactly.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let r = BigRational::new(numer, pow10(frac.len()));
    Some(if neg { -r } else { r })
}

/// The exact rational a user meant when they typed `x`: the shortest decimal
/// that round-trips to `x`, not its binary expansion.
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    parse_decimal(&format!("{x}"))
}

pub fn ratio_of(numer: &BigUint, denom: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(numer.clone()), BigInt::from(denom.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn significant_digits() {
        assert_eq!(render_sig(&r(4, 10), 12), "0.400000000000");
        assert_eq!(render_sig(&r(1, 1), 12), "1.00000000000");
        assert_eq!(render_sig(&r(1, 3), 4), "0.3333");
        assert_eq!(render_sig(&r(2, 3), 4), "0.6667");
        assert_eq!(render_sig(&r(1, 300), 3), "0.00333");
        assert_eq!(render_sig(&r(9999, 10000), 3), "1.00");
        assert_eq!(render_sig(&r(123456, 1), 3), "123000");
        assert_eq!(render_sig(&r(-1, 8), 2), "-0.13");
        assert_eq!(render_sig(&r(0, 1), 5), "0");
    }

    #[test]
    fn fixed_and_trimmed() {
        assert_eq!(render_fixed(&r(951, 1000), 3), "0.951");
        assert_eq!(render_fixed(&r(9505, 10000), 3), "0.951");
        assert_eq!(render_fixed(&r(1, 2000), 3), "0.001");
        assert_eq!(render_fixed(&r(1, 3000), 3), "0.000");
        assert_eq!(render_fixed(&r(7, 2), 0), "4");
        assert_eq!(render_trimmed(&r(3, 10), 12), "0.3");
        assert_eq!(render_trimmed(&r(1, 1), 12), "1");
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("0.05"), Some(r(1, 20)));
        assert_eq!(parse_decimal("-2.5"), Some(r(-5, 2)));
        assert_eq!(parse_decimal(".5"), Some(r(1, 2)));
        assert_eq!(parse_decimal("7"), Some(r(7, 1)));
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(parse_decimal("."), None);
        assert_eq!(rational_from_f64(0.05), Some(r(1, 20)));
        assert_eq!(rational_from_f64(f64::NAN), None);
    }
}
