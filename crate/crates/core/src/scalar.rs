//! Exact scalar types for influence weights.
//!
//! Every comparison against one half in this crate is semantically load-bearing
//! (strict versus non-strict majorities), so weights are required to be totally
//! ordered exact numbers. Floating-point types do not implement [`Ord`] and are
//! rejected at the type level.

use std::fmt::{Debug, Display};
use std::ops::Add;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};

/// Anything that can be summed and compared against half of a known total.
///
/// Implemented for exact weights as well as for the scaled integer rows used
/// on hot paths, so the median core is written once for both.
pub trait Mass: Clone + Ord + Zero + Add<Output = Self> {}

impl<T: Clone + Ord + Zero + Add<Output = T>> Mass for T {}

/// Exact, totally ordered weight scalar.
pub trait Scalar: Num + Mass + Debug + Display + Send + Sync + 'static {
    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    /// `numerator / denominator` as machine integers when the value is
    /// non-negative and both parts fit.
    fn to_fraction(&self) -> Option<(u64, u64)>;

    fn from_fraction(numer: i64, denom: i64) -> Self;

    /// Parses `p/q`, integers, and finite decimals (`-0.125`) exactly.
    fn parse_exact(s: &str) -> Option<Self>;
}

impl<T> Scalar for Ratio<T>
where
    T: Clone
        + Integer
        + ToPrimitive
        + FromPrimitive
        + FromStr
        + Display
        + Debug
        + Send
        + Sync
        + 'static,
{
    fn to_fraction(&self) -> Option<(u64, u64)> {
        if *self < Self::zero() {
            return None;
        }
        Some((self.numer().to_u64()?, self.denom().to_u64()?))
    }

    fn from_fraction(numer: i64, denom: i64) -> Self {
        let n = T::from_i64(numer).expect("numerator representable");
        let d = T::from_i64(denom).expect("denominator representable");
        Ratio::new(n, d)
    }

    fn parse_exact(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.is_empty() {
            return None;
        }
        if let Some((p, q)) = s.split_once('/') {
            let p = parse_decimal::<T>(p.trim())?;
            let q = parse_decimal::<T>(q.trim())?;
            if q.is_zero() {
                return None;
            }
            return Some(p / q);
        }
        parse_decimal(s)
    }
}

fn parse_decimal<T>(s: &str) -> Option<Ratio<T>>
where
    T: Clone + Integer + FromPrimitive + FromStr,
{
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = T::from_str(&digits).ok()?;
    let ten = T::from_u8(10)?;
    let mut denom = T::one();
    for _ in 0..frac_part.len() {
        denom = denom * ten.clone();
    }
    let value = Ratio::new(numer, denom);
    Some(if negative { Ratio::zero() - value } else { value })
}
