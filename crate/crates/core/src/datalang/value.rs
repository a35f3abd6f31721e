use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use super::sort::{Sort, SortTable};

/// Exact rational used throughout the data layer.
pub type Rational = Ratio<i64>;

/// An enumeration constructor: index of the enum sort and of the constructor
/// within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnumVal {
    pub sort: u32,
    pub ctor: u32,
}

/// A datum of the data language.
///
/// Numbers are kept in a canonical form: every integer-valued number is an
/// `Int`, whatever its declared sort, and `Real` only holds proper fractions.
/// This keeps equality and hashing consistent across `Nat`, `Int` and `Real`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(Rational),
    Enum(EnumVal),
    List(Arc<[Value]>),
}

impl Value {
    pub fn number(r: Rational) -> Value {
        if r.is_integer() {
            Value::Int(r.to_integer())
        } else {
            Value::Real(r)
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Value::Int(i) => Some(Rational::from_integer(*i)),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(r.numer().to_f64()? / r.denom().to_f64()?),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Int(i) => *i == 0,
            Value::Real(r) => r.is_zero(),
            _ => false,
        }
    }

    /// Checks the value against a sort. Numeric sorts accept any number in
    /// range (`Nat` requires non-negative integers).
    pub fn fits(&self, sort: &Sort) -> bool {
        match (self, sort) {
            (Value::Bool(_), Sort::Bool) => true,
            (Value::Int(i), Sort::Nat) => *i >= 0,
            (Value::Int(_), Sort::Int) => true,
            (Value::Int(_) | Value::Real(_), Sort::Real) => true,
            (Value::Enum(e), Sort::Enum(id)) => e.sort == *id,
            (Value::List(items), Sort::List(elem)) => items.iter().all(|v| v.fits(elem)),
            _ => false,
        }
    }

    /// Renders the value using constructor names from `sorts`.
    pub fn display<'a>(&'a self, sorts: &'a SortTable) -> ValueDisplay<'a> {
        ValueDisplay { value: self, sorts }
    }
}

pub struct ValueDisplay<'a> {
    value: &'a Value,
    sorts: &'a SortTable,
}

impl fmt::Display for ValueDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Enum(e) => f.write_str(self.sorts.ctor_name(*e)),
            Value::List(items) => {
                f.write_str("[")?;
                for (k, v) in items.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", v.display(self.sorts))?;
                }
                f.write_str("]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_valued_rationals_are_ints() {
        assert_eq!(Value::number(Rational::new(6, 3)), Value::Int(2));
        assert_eq!(Value::number(Rational::new(1, 3)), Value::Real(Rational::new(1, 3)));
    }

    #[test]
    fn nat_rejects_negative() {
        assert!(Value::Int(0).fits(&Sort::Nat));
        assert!(!Value::Int(-1).fits(&Sort::Nat));
        assert!(Value::Int(-1).fits(&Sort::Int));
        assert!(Value::Real(Rational::new(1, 2)).fits(&Sort::Real));
    }
}
