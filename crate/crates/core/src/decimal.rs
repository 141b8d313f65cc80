//! Decimal-faithful arithmetic for reported risk figures.
//!
//! Each operand is read as its shortest round-trip decimal (the digits `{}`
//! would print), the operation is done exactly on integers, and the result is
//! rounded to `f64` once. So `0.017 * 100000` is `1700`, not
//! `1700.0000000000002`. Results stay within two ulps of the plain binary
//! operation; when the exact integer form would overflow, the binary
//! result is returned.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Dec {
    mantissa: i128,
    exponent: i32,
}

fn to_dec(x: f64) -> Option<Dec> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(Dec { mantissa: 0, exponent: 0 });
    }
    // Shortest round-trip digits, e.g. "-1.7e-2".
    let text = format!("{x:e}");
    let (digits, exp) = text.split_once('e')?;
    let exp: i32 = exp.parse().ok()?;
    let (negative, digits) = match digits.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, digits),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut mantissa: i128 = format!("{int_part}{frac_part}").parse().ok()?;
    if negative {
        mantissa = -mantissa;
    }
    Some(Dec {
        mantissa,
        exponent: exp - frac_part.len() as i32,
    })
}

fn to_f64(d: Dec) -> f64 {
    format!("{}e{}", d.mantissa, d.exponent)
        .parse()
        .unwrap_or(f64::NAN)
}

fn pow10(n: u32) -> Option<i128> {
    10i128.checked_pow(n)
}

/// `a * b`, computed on the shortest decimal forms of `a` and `b`.
pub fn product(a: f64, b: f64) -> f64 {
    let exact = || {
        let (x, y) = (to_dec(a)?, to_dec(b)?);
        Some(Dec {
            mantissa: x.mantissa.checked_mul(y.mantissa)?,
            exponent: x.exponent.checked_add(y.exponent)?,
        })
    };
    exact().map_or(a * b, to_f64)
}

/// `a - b`, computed on the shortest decimal forms of `a` and `b`.
pub fn difference(a: f64, b: f64) -> f64 {
    let exact = || {
        let (x, y) = (to_dec(a)?, to_dec(b)?);
        let exponent = x.exponent.min(y.exponent);
        let scale = |d: Dec| d.mantissa.checked_mul(pow10((d.exponent - exponent) as u32)?);
        Some(Dec {
            mantissa: scale(x)?.checked_sub(scale(y)?)?,
            exponent,
        })
    };
    exact().map_or(a - b, to_f64)
}
