use crate::datalang::Expr;
use crate::symbol::Sym;

pub use super::lexer::Span;

/// A sort as written in the source, before resolution.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SortRef {
    Named(String),
    List(Box<SortRef>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SortBody {
    Struct(Vec<String>),
    Alias(SortRef),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SortDecl {
    pub name: String,
    pub body: SortBody,
    pub span: Span,
}

/// `map name: A # B -> C;` (no `->` for constants).
#[derive(Clone, Debug, PartialEq)]
pub struct MapDecl {
    pub name: String,
    pub args: Vec<SortRef>,
    pub result: SortRef,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub name: Sym,
    pub sort: SortRef,
    pub span: Span,
}

/// `eqn name(x, y) = body;`
#[derive(Clone, Debug, PartialEq)]
pub struct EqnDecl {
    pub name: String,
    pub params: Vec<Sym>,
    pub body: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActDecl {
    pub name: String,
    pub args: Vec<SortRef>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobDecl {
    pub name: Sym,
    pub sort: SortRef,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcDecl {
    pub name: String,
    pub params: Vec<(Sym, SortRef)>,
    pub body: ProcTerm,
    pub span: Span,
}

/// Process expression as parsed.
#[derive(Clone, Debug, PartialEq)]
pub enum ProcTerm {
    Delta,
    /// Action or process reference; which one is decided by validation.
    Call {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    Seq(Box<ProcTerm>, Box<ProcTerm>),
    Choice(Box<ProcTerm>, Box<ProcTerm>),
    Sum {
        vars: Vec<(Sym, SortRef)>,
        body: Box<ProcTerm>,
    },
    Dist {
        vars: Vec<(Sym, SortRef)>,
        weight: Expr,
        body: Box<ProcTerm>,
        span: Span,
    },
    Cond {
        cond: Expr,
        then: Box<ProcTerm>,
        els: Option<Box<ProcTerm>>,
    },
}

/// A parsed `.psm` file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelSpec {
    pub sorts: Vec<SortDecl>,
    pub maps: Vec<MapDecl>,
    pub vars: Vec<VarDecl>,
    pub eqns: Vec<EqnDecl>,
    pub acts: Vec<ActDecl>,
    pub globs: Vec<GlobDecl>,
    pub procs: Vec<ProcDecl>,
    pub inits: Vec<(ProcTerm, Span)>,
    /// `%@` metadata lines.
    pub pragmas: Vec<String>,
}

impl ModelSpec {
    /// Words following `%@ key`, if the pragma is present.
    pub fn pragma(&self, key: &str) -> Option<&str> {
        self.pragmas.iter().find_map(|p| {
            let mut it = p.splitn(2, char::is_whitespace);
            (it.next() == Some(key)).then(|| it.next().unwrap_or("").trim())
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixKind {
    Mu,
    Nu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quant {
    Sup,
    Inf,
    /// Sum over a finite sort; used to average over choices.
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Modality {
    /// Any single action.
    True,
    /// Any finite sequence of actions.
    TrueStar,
    /// Action name with argument patterns.
    Action { name: String, args: Vec<Expr> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixParam {
    pub name: Sym,
    pub sort: SortRef,
    pub init: Expr,
}

/// A parsed quantitative formula.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    /// Number or boolean valued data term; booleans read as plus or minus
    /// infinity.
    Data(Expr),
    Add(Box<Formula>, Box<Formula>),
    Sub(Box<Formula>, Box<Formula>),
    /// Nonnegative data factor times a formula.
    Scale(Expr, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Diamond(Modality, Box<Formula>),
    Box(Modality, Box<Formula>),
    Quant {
        q: Quant,
        vars: Vec<(Sym, SortRef)>,
        body: Box<Formula>,
    },
    Fix {
        kind: FixKind,
        name: Sym,
        params: Vec<FixParam>,
        body: Box<Formula>,
    },
    /// Reference to an enclosing fixpoint variable.
    Call(Sym, Vec<Expr>),
}

/// A parsed `.qmf` file.
#[derive(Clone, Debug, PartialEq)]
pub struct FormulaSpec {
    pub formula: Formula,
    pub pragmas: Vec<String>,
}
