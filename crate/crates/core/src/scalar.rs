//! Scalar arithmetic in two modes: exact rationals and binary floating point.
//!
//! The mode is chosen per run by instantiating the generic machinery with
//! [`Rational`] or `f64`. Coefficients of a system are always held as exact
//! rationals and converted on the fly.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Result;
use crate::linalg::{self, NumVec, SquareMat};

pub type Rational = num_rational::BigRational;

/// Arithmetic mode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        }
    }
}

/// Run-wide numeric parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Arith {
    /// Float mode: pivots with magnitude below this are treated as zero.
    pub pivot_tolerance: f64,
    /// Float mode: mantissa bits kept in stored iterates (1..=53).
    pub float_bits: u32,
    /// Exact mode: iterates whose numerator or denominator exceeds this many
    /// bits are rounded down to this many fractional bits. `None` keeps every
    /// iterate exact.
    pub iterate_bits: Option<u64>,
    /// Exact mode: ceiling on the residual-driven growth of the rounding
    /// precision beyond `iterate_bits`. `None` leaves it unbounded.
    pub iterate_bits_limit: Option<u64>,
}

impl Default for Arith {
    fn default() -> Self {
        Arith {
            pivot_tolerance: 1e-12,
            float_bits: 53,
            iterate_bits: Some(256),
            iterate_bits_limit: None,
        }
    }
}

pub trait Scalar:
    Clone
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + 'static
{
    const MODE: Mode;

    fn from_rational(r: &Rational) -> Self;

    /// Exact rational value, `None` for non-finite floats.
    fn to_rational(&self) -> Option<Rational>;

    fn to_f64(&self) -> f64;

    fn is_finite(&self) -> bool;

    fn solve_linear(a: &SquareMat<Self>, b: &NumVec<Self>, arith: &Arith) -> Result<NumVec<Self>>;

    /// Shrink a stored iterate component to the configured precision, never
    /// rounding up.
    fn round_iterate(&self, arith: &Arith) -> Self;

    fn from_u64(v: u64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(v)))
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for Rational {
    const MODE: Mode = Mode::Exact;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn solve_linear(a: &SquareMat<Self>, b: &NumVec<Self>, _arith: &Arith) -> Result<NumVec<Self>> {
        linalg::solve_exact(a, b)
    }

    fn round_iterate(&self, arith: &Arith) -> Self {
        match arith.iterate_bits {
            Some(p) if size_bits(self) > p => floor_to_bits(self, p),
            _ => self.clone(),
        }
    }

    fn pow(&self, e: u32) -> Self {
        num_traits::Pow::pow(self, e)
    }
}

impl Scalar for f64 {
    const MODE: Mode = Mode::Float;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn solve_linear(a: &SquareMat<Self>, b: &NumVec<Self>, arith: &Arith) -> Result<NumVec<Self>> {
        linalg::solve_float(a, b, arith.pivot_tolerance)
    }

    fn round_iterate(&self, arith: &Arith) -> Self {
        round_mantissa_down(*self, arith.float_bits)
    }

    fn pow(&self, e: u32) -> Self {
        self.powi(e as i32)
    }
}

/// Number of bits of |n|; 0 for zero.
pub fn bit_length(n: &BigInt) -> u64 {
    n.bits()
}

/// Larger of the bit lengths of numerator and denominator.
pub fn size_bits(r: &Rational) -> u64 {
    bit_length(r.numer()).max(bit_length(r.denom()))
}

/// Largest multiple of 2^-p that is <= r.
pub fn floor_to_bits(r: &Rational, p: u64) -> Rational {
    let scaled = r.numer() << p as usize;
    let q = scaled.div_floor(r.denom());
    Rational::new(q, BigInt::one() << p as usize)
}

/// Smallest multiple of 2^-p that is >= r.
pub fn ceil_to_bits(r: &Rational, p: u64) -> Rational {
    -floor_to_bits(&-r, p)
}

/// Round a finite float towards zero so that at most `bits` mantissa bits remain.
pub fn round_mantissa_down(x: f64, bits: u32) -> f64 {
    if bits >= 53 || x == 0.0 || !x.is_finite() {
        return x;
    }
    let drop = 53 - bits.max(1);
    let raw = x.to_bits();
    let mask = !((1u64 << drop) - 1);
    f64::from_bits(raw & mask)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    // Shift so that the quotient carries 64 significant bits, then rescale.
    let nb = bit_length(r.numer()) as i64;
    let db = bit_length(r.denom()) as i64;
    let shift = 64 - (nb - db);
    let q = if shift >= 0 {
        (r.numer() << shift as usize) / r.denom()
    } else {
        r.numer() / (r.denom() << (-shift) as usize)
    };
    let mant = q.to_f64().unwrap_or(f64::NAN);
    mant * 2f64.powi(-shift.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Parse a non-negative or negative literal `INT`, `INT/INT` or `DECIMAL`
/// into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !int_digits.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || (int_digits.is_empty() && frac.is_empty())
        {
            return None;
        }
        let digits = format!("{int_digits}{frac}");
        let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        let r = Rational::new(n, d);
        return Some(if negative { -r } else { r });
    }
    let n: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(n))
}

/// `num/den` rendering, used for bit-exact serialization.
pub fn ratio_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Compact rendering: integers without a denominator.
pub fn compact_string(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        ratio_string(r)
    }
}

pub fn parse_ratio_string(s: &str) -> Option<Rational> {
    let (n, d) = s.split_once('/')?;
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rational::new(n, d))
}

/// A rational upper bound on log2(r) for r > 0.
///
/// Splits off the binary exponent exactly and bounds the log of the remaining
/// factor in [1/2, 2] with a float evaluation plus a margin far larger than the
/// float error.
pub fn log2_upper(r: &Rational) -> Rational {
    if let Some(e) = exact_log2(r) {
        return Rational::from_integer(BigInt::from(e));
    }
    let (e, rest) = log2_split(r);
    let approx = rest.log2() + 1e-12;
    Rational::from_integer(BigInt::from(e)) + Rational::from_float(approx).expect("finite")
}

/// A rational lower bound on log2(r) for r > 0.
pub fn log2_lower(r: &Rational) -> Rational {
    if let Some(e) = exact_log2(r) {
        return Rational::from_integer(BigInt::from(e));
    }
    let (e, rest) = log2_split(r);
    let approx = rest.log2() - 1e-12;
    Rational::from_integer(BigInt::from(e)) + Rational::from_float(approx).expect("finite")
}

/// `Some(e)` when r is exactly 2^e.
pub fn exact_log2(r: &Rational) -> Option<i64> {
    let pow2 = |n: &BigInt| n.is_positive() && (n & (n - BigInt::one())).is_zero();
    if r.numer().is_one() && pow2(r.denom()) {
        Some(-(bit_length(r.denom()) as i64 - 1))
    } else if r.denom().is_one() && pow2(r.numer()) {
        Some(bit_length(r.numer()) as i64 - 1)
    } else {
        None
    }
}

fn log2_split(r: &Rational) -> (i64, f64) {
    assert!(r.is_positive(), "log2 of a non-positive value");
    let e = bit_length(r.numer()) as i64 - bit_length(r.denom()) as i64;
    let scaled = if e >= 0 {
        r / Rational::from_integer(BigInt::one() << e as usize)
    } else {
        r * Rational::from_integer(BigInt::one() << (-e) as usize)
    };
    (e, rational_to_f64(&scaled))
}

/// Ceiling of a rational as a signed integer.
pub fn ceil_int(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

/// Largest i >= 0 with r <= 2^-i, for 0 < r <= 1; `None` when r is zero
/// (infinitely many bits).
pub fn bits_below(r: &Rational) -> Option<u64> {
    if r.is_zero() {
        return None;
    }
    if r > &Rational::one() {
        return Some(0);
    }
    // r <= 2^-i  <=>  den >= num * 2^i
    let num = r.numer();
    let den = r.denom();
    let mut i = (bit_length(den) - bit_length(num)).saturating_sub(1);
    while (num << (i + 1) as usize) <= *den {
        i += 1;
    }
    while i > 0 && (num << i as usize) > *den {
        i -= 1;
    }
    Some(i)
}

pub fn is_nonneg(r: &Rational) -> bool {
    !r.is_negative()
}
