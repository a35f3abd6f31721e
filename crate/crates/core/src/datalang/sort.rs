use std::fmt;

use super::value::{EnumVal, Value};
use super::DataError;

/// A sort of the data language.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Nat,
    Int,
    Real,
    /// Index into the [`SortTable`] enum list.
    Enum(u32),
    List(Box<Sort>),
}

impl Sort {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Sort::Nat | Sort::Int | Sort::Real)
    }

    /// Smallest numeric sort containing both, if both are numeric.
    pub fn numeric_join(&self, other: &Sort) -> Option<Sort> {
        fn rank(s: &Sort) -> Option<u8> {
            match s {
                Sort::Nat => Some(0),
                Sort::Int => Some(1),
                Sort::Real => Some(2),
                _ => None,
            }
        }
        let r = rank(self)?.max(rank(other)?);
        Some(match r {
            0 => Sort::Nat,
            1 => Sort::Int,
            _ => Sort::Real,
        })
    }

    /// Whether a value of sort `self` can be used where `target` is expected.
    pub fn conforms_to(&self, target: &Sort) -> bool {
        if self == target {
            return true;
        }
        match (self, target) {
            (Sort::Nat, Sort::Int | Sort::Real) | (Sort::Int, Sort::Real) => true,
            (Sort::List(a), Sort::List(b)) => a.conforms_to(b),
            _ => false,
        }
    }

    pub fn display<'a>(&'a self, sorts: &'a SortTable) -> SortDisplay<'a> {
        SortDisplay { sort: self, sorts }
    }
}

pub struct SortDisplay<'a> {
    sort: &'a Sort,
    sorts: &'a SortTable,
}

impl fmt::Display for SortDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sort {
            Sort::Bool => f.write_str("Bool"),
            Sort::Nat => f.write_str("Nat"),
            Sort::Int => f.write_str("Int"),
            Sort::Real => f.write_str("Real"),
            Sort::Enum(id) => f.write_str(&self.sorts.enums[*id as usize].name),
            Sort::List(e) => write!(f, "List({})", e.display(self.sorts)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    pub ctors: Vec<String>,
}

/// Enumerated sorts of a specification.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SortTable {
    pub enums: Vec<EnumDef>,
}

impl SortTable {
    pub fn add_enum(&mut self, name: &str, ctors: Vec<String>) -> Result<u32, DataError> {
        for (i, c) in ctors.iter().enumerate() {
            if ctors[..i].contains(c) {
                return Err(DataError::DuplicateConstructor {
                    sort: name.to_string(),
                    ctor: c.clone(),
                });
            }
        }
        self.enums.push(EnumDef {
            name: name.to_string(),
            ctors,
        });
        Ok(self.enums.len() as u32 - 1)
    }

    pub fn enum_by_name(&self, name: &str) -> Option<u32> {
        self.enums.iter().position(|e| e.name == name).map(|i| i as u32)
    }

    pub fn ctor_name(&self, e: EnumVal) -> &str {
        &self.enums[e.sort as usize].ctors[e.ctor as usize]
    }

    /// Resolves a constructor name to its value. Constructor names are
    /// required to be unique across sorts.
    pub fn ctor(&self, name: &str) -> Option<EnumVal> {
        self.enums.iter().enumerate().find_map(|(s, def)| {
            def.ctors.iter().position(|c| c == name).map(|c| EnumVal {
                sort: s as u32,
                ctor: c as u32,
            })
        })
    }

    /// All values of a finite sort in declaration order.
    pub fn enumerate(&self, sort: &Sort) -> Result<Vec<Value>, DataError> {
        match sort {
            Sort::Bool => Ok(vec![Value::Bool(false), Value::Bool(true)]),
            Sort::Enum(id) => {
                let def = &self.enums[*id as usize];
                Ok((0..def.ctors.len() as u32)
                    .map(|ctor| Value::Enum(EnumVal { sort: *id, ctor }))
                    .collect())
            }
            other => Err(DataError::InfiniteSort(other.display(self).to_string())),
        }
    }

    pub fn is_finite(&self, sort: &Sort) -> bool {
        matches!(sort, Sort::Bool | Sort::Enum(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symbols() -> SortTable {
        let mut t = SortTable::default();
        let names = [
            "orange",
            "grapes",
            "pear",
            "melon",
            "blueberry",
            "strawberry",
            "bell",
            "seven",
            "star",
        ];
        t.add_enum("Symbol", names.iter().map(|s| s.to_string()).collect())
            .unwrap();
        t
    }

    #[test]
    fn enumerate_bool() {
        let t = SortTable::default();
        assert_eq!(
            t.enumerate(&Sort::Bool).unwrap(),
            vec![Value::Bool(false), Value::Bool(true)]
        );
    }

    #[test]
    fn enumerate_top_spinner_symbols() {
        let t = symbols();
        let vals = t.enumerate(&Sort::Enum(0)).unwrap();
        assert_eq!(vals.len(), 9);
        let first = match &vals[0] {
            Value::Enum(e) => t.ctor_name(*e),
            _ => unreachable!(),
        };
        let last = match &vals[8] {
            Value::Enum(e) => t.ctor_name(*e),
            _ => unreachable!(),
        };
        assert_eq!((first, last), ("orange", "star"));
    }

    #[test]
    fn enumerate_nat_is_infinite() {
        let t = SortTable::default();
        assert!(matches!(t.enumerate(&Sort::Nat), Err(DataError::InfiniteSort(_))));
    }

    #[test]
    fn duplicate_constructors_rejected() {
        let mut t = SortTable::default();
        let r = t.add_enum("S", vec!["a".into(), "a".into()]);
        assert!(matches!(r, Err(DataError::DuplicateConstructor { .. })));
    }
}
