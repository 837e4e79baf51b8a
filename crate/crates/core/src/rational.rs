//! Exact rational scalars and helpers shared by every module.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision exact rational; always kept in canonical form by its
/// arithmetic.
pub type Rational = num_rational::BigRational;

/// Error produced when a textual number cannot be read as an exact rational.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRationalError {
    #[error("empty number")]
    Empty,
    #[error("invalid number literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"`, integers, and decimal literals (optionally with an
/// exponent, e.g. `"-1.25e-3"`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n =
            parse_bigint(num.trim()).ok_or_else(|| ParseRationalError::Invalid(s.to_string()))?;
        let d =
            parse_bigint(den.trim()).ok_or_else(|| ParseRationalError::Invalid(s.to_string()))?;
        if d.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(n, d));
    }
    parse_decimal(s).ok_or_else(|| ParseRationalError::Invalid(s.to_string()))
}

fn parse_bigint(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.strip_prefix('+').unwrap_or(s).parse().ok()
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().ok()?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, body) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole
        .bytes()
        .chain(frac.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let mut digits = String::with_capacity(whole.len() + frac.len());
    digits.push_str(whole);
    digits.push_str(frac);
    let mut numer: BigInt = digits.parse().ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    Some(if scale >= 0 {
        Rational::from_integer(numer * pow)
    } else {
        Rational::new(numer, pow)
    })
}

/// Canonical exact text: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        alloc::format!("{}/{}", r.numer(), r.denom())
    }
}

/// Advisory decimal rendering with `sig` significant digits, computed exactly
/// and rounded half away from zero.
pub fn to_decimal_string(r: &Rational, sig: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let sig = sig.max(1);
    let negative = r.is_negative();
    let a = r.abs();
    let ten = Rational::from_integer(BigInt::from(10));
    // exponent e with 10^e <= a < 10^(e+1)
    let mut e: i64 = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    loop {
        let p = pow10(e);
        if a < p {
            e -= 1;
        } else if a >= &p * &ten {
            e += 1;
        } else {
            break;
        }
    }
    let shift = sig as i64 - 1 - e;
    let scaled = &a * pow10(shift);
    let mut digits = round_half_up(&scaled);
    if digits.to_string().len() > sig {
        digits /= BigInt::from(10);
        e += 1;
    }
    let mut ds = digits.to_string();
    while ds.len() < sig {
        ds.push('0');
    }
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-7..sig as i64).contains(&e) {
        if e >= 0 {
            let split = (e + 1) as usize;
            out.push_str(&ds[..split]);
            let rest = ds[split..].trim_end_matches('0');
            if !rest.is_empty() {
                out.push('.');
                out.push_str(rest);
            }
        } else {
            out.push_str("0.");
            for _ in 0..(-e - 1) {
                out.push('0');
            }
            out.push_str(ds.trim_end_matches('0'));
        }
    } else {
        out.push_str(&ds[..1]);
        let rest = ds[1..].trim_end_matches('0');
        if !rest.is_empty() {
            out.push('.');
            out.push_str(rest);
        }
        out.push_str(&alloc::format!("e{}", e));
    }
    out
}

fn pow10(e: i64) -> Rational {
    let p = num_traits::pow(BigInt::from(10), e.unsigned_abs() as usize);
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

fn round_half_up(r: &Rational) -> BigInt {
    let (q, rem) = r.numer().div_rem(r.denom());
    if BigInt::from(2) * rem >= *r.denom() {
        q + 1
    } else {
        q
    }
}

/// True when the value is in canonical form: positive denominator and
/// coprime numerator/denominator.
pub fn is_canonical(r: &Rational) -> bool {
    r.denom().sign() == Sign::Plus && r.numer().gcd(r.denom()).is_one()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| {
        if x.is_zero() || y.is_zero() {
            acc
        } else {
            acc + x * y
        }
    })
}

pub fn zeros(n: usize) -> Vec<Rational> {
    alloc::vec![Rational::zero(); n]
}

/// A rational value extended with `+∞`; used for bounds that may be
/// unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(Rational),
    PosInfinity,
}

impl ExtRational {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::Finite(r) => Some(r),
            ExtRational::PosInfinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::PosInfinity)
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => a.cmp(b),
            (ExtRational::Finite(_), ExtRational::PosInfinity) => Ordering::Less,
            (ExtRational::PosInfinity, ExtRational::Finite(_)) => Ordering::Greater,
            (ExtRational::PosInfinity, ExtRational::PosInfinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(r) => f.write_str(&format_rational(r)),
            ExtRational::PosInfinity => f.write_str("inf"),
        }
    }
}
