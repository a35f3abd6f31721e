use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::datalang::Rational;

use super::QuantError;

/// A real number or one of the two infinities.
///
/// The derived order is the intended one: `NegInf < Finite(q) < PosInf`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtReal {
    NegInf,
    Finite(BigRational),
    PosInf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Min,
    Max,
}

impl ExtReal {
    pub fn zero() -> ExtReal {
        ExtReal::Finite(<BigRational as Zero>::zero())
    }

    pub fn from_i64(i: i64) -> ExtReal {
        ExtReal::Finite(BigRational::from_integer(i.into()))
    }

    pub fn ratio(n: i64, d: i64) -> ExtReal {
        ExtReal::Finite(BigRational::new(n.into(), d.into()))
    }

    pub fn from_bool(b: bool) -> ExtReal {
        if b {
            ExtReal::PosInf
        } else {
            ExtReal::NegInf
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExtReal::Finite(q) => Some(q),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::Finite(q) => big_to_f64(q),
        }
    }

    /// Decimal rendering with `digits` fractional digits, rounding half to even.
    pub fn to_decimal(&self, digits: u32) -> String {
        match self {
            ExtReal::NegInf => "-inf".into(),
            ExtReal::PosInf => "inf".into(),
            ExtReal::Finite(q) => decimal(q, digits),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::PosInf => f.write_str("inf"),
            ExtReal::Finite(q) if q.is_integer() => write!(f, "{}", q.numer()),
            ExtReal::Finite(q) => write!(f, "{}/{}", q.numer(), q.denom()),
        }
    }
}

pub(crate) fn big_to_f64(q: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Huge numerator and denominator: scale down before dividing.
    let shift = q.denom().bits().max(q.numer().bits()) as i64 - 1000;
    let shift = shift.max(0) as usize;
    let n = (q.numer() >> shift).to_f64().unwrap_or(0.0);
    let d = (q.denom() >> shift).to_f64().unwrap_or(1.0);
    if d == 0.0 {
        if Signed::is_negative(q) {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        n / d
    }
}

/// Rounds `q` to `digits` decimals, half to even.
pub fn decimal(q: &BigRational, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = q * BigRational::from_integer(scale.clone());
    let neg = Signed::is_negative(&scaled);
    let abs = scaled.abs();
    let (mut whole, rem) = abs.numer().div_rem(abs.denom());
    let twice = rem * 2u32;
    match twice.cmp(abs.denom()) {
        Ordering::Greater => whole += 1u32,
        Ordering::Equal if whole.is_odd() => whole += 1u32,
        _ => {}
    }
    let (int, frac) = whole.div_rem(&scale);
    let mut s = String::new();
    if neg && !(int.is_zero() && frac.is_zero()) {
        s.push('-');
    }
    s.push_str(&int.to_string());
    if digits > 0 {
        let f = frac.to_string();
        s.push('.');
        for _ in f.len()..digits as usize {
            s.push('0');
        }
        s.push_str(&f);
    }
    s
}

/// One arithmetic step on extended reals.
///
/// `0 * inf = 0`; `inf + -inf` and `inf - inf` are undefined.
pub fn ext_arith(op: ArithOp, a: &ExtReal, b: &ExtReal) -> Result<ExtReal, QuantError> {
    use ExtReal::*;
    let undefined = || QuantError::UndefinedArithmetic(format!("{a} {op:?} {b}"));
    Ok(match op {
        ArithOp::Min => a.clone().min(b.clone()),
        ArithOp::Max => a.clone().max(b.clone()),
        ArithOp::Add => match (a, b) {
            (Finite(x), Finite(y)) => Finite(x + y),
            (NegInf, PosInf) | (PosInf, NegInf) => return Err(undefined()),
            (NegInf, _) | (_, NegInf) => NegInf,
            _ => PosInf,
        },
        ArithOp::Sub => match (a, b) {
            (Finite(x), Finite(y)) => Finite(x - y),
            (NegInf, NegInf) | (PosInf, PosInf) => return Err(undefined()),
            (NegInf, _) | (_, PosInf) => NegInf,
            _ => PosInf,
        },
        ArithOp::Mul => match (a, b) {
            (Finite(x), Finite(y)) => Finite(x * y),
            (Finite(x), inf) | (inf, Finite(x)) => {
                if Zero::is_zero(x) {
                    ExtReal::zero()
                } else if x.is_positive() == (*inf == PosInf) {
                    PosInf
                } else {
                    NegInf
                }
            }
            (x, y) if x == y => PosInf,
            _ => NegInf,
        },
    })
}

/// Number type the engines compute with: exact rationals or doubles.
pub(crate) trait Scalar: Clone + PartialEq + PartialOrd + fmt::Debug + Send + Sync {
    const EXACT: bool;
    fn zero() -> Self;
    fn from_ratio(r: &Rational) -> Self;
    fn from_big(r: &BigRational) -> Self;
    fn to_ext(&self) -> BigRational;
    fn to_f64(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
    /// Equality up to rounding noise.
    fn close(&self, o: &Self) -> bool;
    /// Keeps the representation small between fixpoint sweeps.
    fn round(&self) -> Self;
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_ratio(r: &Rational) -> Self {
        BigRational::new((*r.numer()).into(), (*r.denom()).into())
    }
    fn from_big(r: &BigRational) -> Self {
        r.clone()
    }
    fn to_ext(&self) -> BigRational {
        self.clone()
    }
    fn to_f64(&self) -> f64 {
        big_to_f64(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn close(&self, o: &Self) -> bool {
        self == o
    }
    fn round(&self) -> Self {
        if self.denom().bits() <= 96 {
            return self.clone();
        }
        let scale = BigInt::one() << 96usize;
        let n = (self * BigRational::from_integer(scale.clone())).round();
        BigRational::new(n.to_integer(), scale)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_ratio(r: &Rational) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }
    fn from_big(r: &BigRational) -> Self {
        big_to_f64(r)
    }
    fn to_ext(&self) -> BigRational {
        BigRational::from_float(*self).unwrap_or_else(<BigRational as Zero>::zero)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn close(&self, o: &Self) -> bool {
        (self - o).abs() <= 1e-12 * (1.0 + self.abs().max(o.abs()))
    }
    fn round(&self) -> Self {
        *self
    }
}

/// Engine value: an extended real, or the affine function `a + b * acc` of
/// the accumulator parameter of the fixpoint being solved (`b = 0` outside
/// such a fixpoint).
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum V<S> {
    NegInf,
    PosInf,
    Fin(S, S),
}

impl<S: Scalar> V<S> {
    pub fn num(a: S) -> Self {
        V::Fin(a, S::zero())
    }

    pub fn zero() -> Self {
        V::Fin(S::zero(), S::zero())
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            V::PosInf
        } else {
            V::NegInf
        }
    }

    /// Value at accumulator `acc`.
    pub fn at(&self, acc: &S) -> ExtReal {
        match self {
            V::NegInf => ExtReal::NegInf,
            V::PosInf => ExtReal::PosInf,
            V::Fin(a, b) => ExtReal::Finite(a.add(&b.mul(acc)).to_ext()),
        }
    }

    pub fn to_ext(&self) -> ExtReal {
        self.at(&S::zero())
    }

    pub fn add(&self, o: &Self) -> Result<Self, QuantError> {
        Ok(match (self, o) {
            (V::Fin(a, b), V::Fin(c, d)) => V::Fin(a.add(c), b.add(d)),
            (V::NegInf, V::PosInf) | (V::PosInf, V::NegInf) => {
                return Err(QuantError::UndefinedArithmetic("inf + -inf".into()))
            }
            (V::NegInf, _) | (_, V::NegInf) => V::NegInf,
            _ => V::PosInf,
        })
    }

    pub fn sub(&self, o: &Self) -> Result<Self, QuantError> {
        Ok(match (self, o) {
            (V::Fin(a, b), V::Fin(c, d)) => V::Fin(a.sub(c), b.sub(d)),
            (V::NegInf, V::NegInf) | (V::PosInf, V::PosInf) => {
                return Err(QuantError::UndefinedArithmetic("inf - inf".into()))
            }
            (V::NegInf, _) | (_, V::PosInf) => V::NegInf,
            _ => V::PosInf,
        })
    }

    /// `c * self` for a nonnegative factor; `0 * inf = 0`.
    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return V::zero();
        }
        match self {
            V::Fin(a, b) => V::Fin(c.mul(a), c.mul(b)),
            inf => inf.clone(),
        }
    }

    /// Compares two values whose accumulator slopes agree.
    pub fn cmp_value(&self, o: &Self) -> Result<Ordering, QuantError> {
        Ok(match (self, o) {
            (V::Fin(a, b), V::Fin(c, d)) => {
                if !b.close(d) {
                    return Err(QuantError::NonAffine);
                }
                a.partial_cmp(c).unwrap_or(Ordering::Equal)
            }
            (x, y) => rank(x).cmp(&rank(y)),
        })
    }

    /// Like `cmp_value`, but treats values within rounding noise as equal.
    pub fn cmp_close(&self, o: &Self) -> Result<Ordering, QuantError> {
        if let (V::Fin(a, _), V::Fin(c, _)) = (self, o) {
            if a.close(c) {
                self.cmp_value(o)?;
                return Ok(Ordering::Equal);
            }
        }
        self.cmp_value(o)
    }

    pub fn max(self, o: Self) -> Result<Self, QuantError> {
        Ok(match self.cmp_value(&o)? {
            Ordering::Less => o,
            _ => self,
        })
    }

    pub fn min(self, o: Self) -> Result<Self, QuantError> {
        Ok(match self.cmp_value(&o)? {
            Ordering::Greater => o,
            _ => self,
        })
    }

    pub fn round(&self) -> Self {
        match self {
            V::Fin(a, b) => V::Fin(a.round(), b.round()),
            v => v.clone(),
        }
    }

    /// Distance between two approximations, infinite if their kinds differ.
    pub fn distance(&self, o: &Self) -> f64 {
        match (self, o) {
            (V::Fin(a, b), V::Fin(c, d)) => (a.to_f64() - c.to_f64()).abs().max((b.to_f64() - d.to_f64()).abs()),
            (x, y) if rank(x) == rank(y) => 0.0,
            _ => f64::INFINITY,
        }
    }
}

fn rank<S>(v: &V<S>) -> u8 {
    match v {
        V::NegInf => 0,
        V::Fin(..) => 1,
        V::PosInf => 2,
    }
}

/// The simplest fraction in the closed interval `[lo, hi]` (smallest
/// denominator, then smallest numerator magnitude).
pub(crate) fn simplest_between(lo: &BigRational, hi: &BigRational) -> BigRational {
    if lo > hi {
        return simplest_between(hi, lo);
    }
    if lo.is_positive() {
        return simplest_positive(lo, hi);
    }
    if Signed::is_negative(hi) {
        return -simplest_positive(&-hi, &-lo);
    }
    <BigRational as Zero>::zero()
}

fn simplest_positive(lo: &BigRational, hi: &BigRational) -> BigRational {
    // Continued-fraction descent on 0 < lo <= hi.
    let fl = lo.floor();
    if fl == *lo {
        return fl;
    }
    if fl < hi.floor() {
        return fl + <BigRational as One>::one();
    }
    let inner = simplest_positive(&(hi - &fl).recip(), &(lo - &fl).recip());
    fl + inner.recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn half_even() {
        assert_eq!(decimal(&q(1, 3), 4), "0.3333");
        assert_eq!(decimal(&q(-149, 500), 4), "-0.2980");
        assert_eq!(decimal(&q(5, 100000), 4), "0.0000");
        assert_eq!(decimal(&q(15, 100000), 4), "0.0002");
        assert_eq!(decimal(&q(-7, 9), 4), "-0.7778");
        assert_eq!(decimal(&q(3, 1), 0), "3");
    }

    #[test]
    fn table() {
        use ExtReal::*;
        let third = ExtReal::ratio(1, 3);
        assert_eq!(
            ext_arith(ArithOp::Max, &NegInf, &ExtReal::zero()).unwrap(),
            ExtReal::zero()
        );
        assert_eq!(ext_arith(ArithOp::Mul, &third, &NegInf).unwrap(), NegInf);
        assert_eq!(
            ext_arith(ArithOp::Mul, &ExtReal::zero(), &PosInf).unwrap(),
            ExtReal::zero()
        );
        assert!(ext_arith(ArithOp::Add, &PosInf, &NegInf).is_err());
        assert!(ext_arith(ArithOp::Sub, &NegInf, &NegInf).is_err());
        assert_eq!(ext_arith(ArithOp::Sub, &third, &PosInf).unwrap(), NegInf);
    }

    #[test]
    fn simplest() {
        let eps = q(1, 1_000_000_000);
        let near = |x: BigRational| simplest_between(&(&x - &eps), &(&x + &eps));
        assert_eq!(near(q(2999999999, 1000000000)), q(3, 1));
        assert_eq!(near(q(333333333, 1000000000)), q(1, 3));
        assert_eq!(near(q(-7777777777, 10000000000)), q(-7, 9));
        assert_eq!(simplest_between(&q(-1, 2), &q(1, 2)), q(0, 1));
    }
}
