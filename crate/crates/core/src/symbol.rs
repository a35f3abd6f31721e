//! Process-wide string interner for identifiers.

use std::fmt;
use std::sync::{OnceLock, RwLock};

use indexmap::IndexSet;

/// An interned identifier. Cheap to copy, compare and hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

fn table() -> &'static RwLock<IndexSet<Box<str>>> {
    static TABLE: OnceLock<RwLock<IndexSet<Box<str>>>> = OnceLock::new();
    TABLE.get_or_init(Default::default)
}

impl Sym {
    pub fn new(name: &str) -> Sym {
        if let Some(i) = table().read().unwrap().get_index_of(name) {
            return Sym(i as u32);
        }
        let mut t = table().write().unwrap();
        let (i, _) = t.insert_full(name.into());
        Sym(i as u32)
    }

    pub fn as_str(&self) -> String {
        table().read().unwrap()[self.0 as usize].to_string()
    }

    pub fn with_str<R>(&self, f: impl FnOnce(&str) -> R) -> R {
        f(&table().read().unwrap()[self.0 as usize])
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.with_str(|s| write!(f, "{s}"))
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.with_str(|s| f.write_str(s))
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Sym {
        Sym::new(s)
    }
}
