use crate::datalang::{BinOp, Expr, UnOp, Value};
use crate::symbol::Sym;

use super::ast::*;
use super::lexer::{pragmas, tokenize, Tok, Token};
use super::{DiagKind, Diagnostic, SpecError};

const KEYWORDS: &[&str] = &[
    "sort", "struct", "map", "var", "eqn", "act", "glob", "proc", "init", "sum", "dist", "delta", "if", "mod", "in",
    "true", "false", "mu", "nu", "sup", "inf",
];

const SECTIONS: &[&str] = &["sort", "map", "var", "eqn", "act", "glob", "proc", "init"];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Data,
    Formula,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Fixpoint variables in scope with their arity.
    fix_scope: Vec<(Sym, usize)>,
    /// Set while parsing the guard of `c -> p`, where an unbracketed `.`
    /// is sequencing rather than list indexing.
    guard_top: bool,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, SpecError>;

/// Parses a process model (`.psm`).
pub fn parse_model(text: &str) -> Result<ModelSpec, SpecError> {
    let mut p = Parser::new(text)?;
    let mut spec = p.model()?;
    spec.pragmas = pragmas(text);
    Ok(spec)
}

/// Parses a quantitative formula (`.qmf`). Fixpoint variable arities are
/// checked here; sorts are checked against a model at compile time.
pub fn parse_formula(text: &str) -> Result<FormulaSpec, SpecError> {
    let mut p = Parser::new(text)?;
    let formula = p.expr(Mode::Formula)?;
    p.eat_sym(";");
    p.expect_eof()?;
    if !p.diags.is_empty() {
        return Err(SpecError::Validation(p.diags));
    }
    Ok(FormulaSpec {
        formula,
        pragmas: pragmas(text),
    })
}

/// Parses a standalone data expression.
pub fn parse_expr(text: &str) -> Result<Expr, SpecError> {
    let mut p = Parser::new(text)?;
    let e = p.data()?;
    p.expect_eof()?;
    Ok(e)
}

impl Parser {
    fn new(text: &str) -> PResult<Parser> {
        let toks = tokenize(text).map_err(|e| SpecError::Syntax {
            line: e.span.line,
            col: e.span.col,
            expected: e.message,
            found: String::new(),
        })?;
        Ok(Parser {
            toks,
            pos: 0,
            fix_scope: Vec::new(),
            guard_top: false,
            diags: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(SpecError::Syntax {
            line: t.span.line,
            col: t.span.col,
            expected: expected.to_string(),
            found: t.tok.to_string(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err("end of input")
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err("identifier"),
        }
    }

    fn ident_list(&mut self) -> PResult<Vec<String>> {
        let mut v = vec![self.ident()?];
        while self.eat_sym(",") {
            v.push(self.ident()?);
        }
        Ok(v)
    }

    fn at_section_end(&self) -> bool {
        match self.peek() {
            Tok::Eof => true,
            Tok::Ident(s) => SECTIONS.contains(&s.as_str()),
            _ => false,
        }
    }

    // ---- models ----

    fn model(&mut self) -> PResult<ModelSpec> {
        let mut m = ModelSpec::default();
        loop {
            let kw = match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) if SECTIONS.contains(&s.as_str()) => s.clone(),
                _ => return self.err("a section keyword (sort, map, var, eqn, act, glob, proc, init)"),
            };
            self.bump();
            let mut any = false;
            while !self.at_section_end() {
                any = true;
                match kw.as_str() {
                    "sort" => self.sort_decl(&mut m)?,
                    "map" => self.map_decl(&mut m)?,
                    "var" => self.var_decl(&mut m)?,
                    "eqn" => self.eqn_decl(&mut m)?,
                    "act" => self.act_decl(&mut m)?,
                    "glob" => self.glob_decl(&mut m)?,
                    "proc" => self.proc_decl(&mut m)?,
                    "init" => {
                        let span = self.span();
                        let p = self.proc_choice()?;
                        self.expect_sym(";")?;
                        m.inits.push((p, span));
                    }
                    _ => unreachable!(),
                }
            }
            if !any {
                return self.err(&format!("a declaration after `{kw}`"));
            }
        }
        Ok(m)
    }

    fn sort_ref(&mut self) -> PResult<SortRef> {
        let span_ok = matches!(self.peek(), Tok::Ident(_));
        if !span_ok {
            return self.err("sort");
        }
        let name = self.ident()?;
        if name == "List" && self.eat_sym("(") {
            let inner = self.sort_ref()?;
            self.expect_sym(")")?;
            return Ok(SortRef::List(Box::new(inner)));
        }
        Ok(SortRef::Named(name))
    }

    fn sort_product(&mut self) -> PResult<Vec<SortRef>> {
        let mut v = vec![self.sort_ref()?];
        while self.eat_sym("#") {
            v.push(self.sort_ref()?);
        }
        Ok(v)
    }

    fn sort_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let name = self.ident()?;
        self.expect_sym("=")?;
        let body = if self.eat_kw("struct") {
            let mut ctors = vec![self.ident()?];
            while self.eat_sym("|") {
                ctors.push(self.ident()?);
            }
            SortBody::Struct(ctors)
        } else {
            SortBody::Alias(self.sort_ref()?)
        };
        self.expect_sym(";")?;
        m.sorts.push(SortDecl { name, body, span });
        Ok(())
    }

    fn map_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let names = self.ident_list()?;
        self.expect_sym(":")?;
        let mut sorts = self.sort_product()?;
        let (args, result) = if self.eat_sym("->") {
            (sorts, self.sort_ref()?)
        } else if sorts.len() == 1 {
            (vec![], sorts.pop().unwrap())
        } else {
            return self.err("`->`");
        };
        self.expect_sym(";")?;
        for name in names {
            m.maps.push(MapDecl {
                name,
                args: args.clone(),
                result: result.clone(),
                span,
            });
        }
        Ok(())
    }

    fn var_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let names = self.ident_list()?;
        self.expect_sym(":")?;
        let sort = self.sort_ref()?;
        self.expect_sym(";")?;
        for n in names {
            m.vars.push(VarDecl {
                name: Sym::new(&n),
                sort: sort.clone(),
                span,
            });
        }
        Ok(())
    }

    fn eqn_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat_sym("(") {
            params = self.ident_list()?.iter().map(|s| Sym::new(s)).collect();
            self.expect_sym(")")?;
        }
        self.expect_sym("=")?;
        let body = self.data()?;
        self.expect_sym(";")?;
        m.eqns.push(EqnDecl {
            name,
            params,
            body,
            span,
        });
        Ok(())
    }

    fn act_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let names = self.ident_list()?;
        let args = if self.eat_sym(":") {
            self.sort_product()?
        } else {
            vec![]
        };
        self.expect_sym(";")?;
        for name in names {
            m.acts.push(ActDecl {
                name,
                args: args.clone(),
                span,
            });
        }
        Ok(())
    }

    fn glob_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let names = self.ident_list()?;
        self.expect_sym(":")?;
        let sort = self.sort_ref()?;
        self.expect_sym(";")?;
        for n in names {
            m.globs.push(GlobDecl {
                name: Sym::new(&n),
                sort: sort.clone(),
                span,
            });
        }
        Ok(())
    }

    /// `x, y: A, z: B`
    fn typed_vars(&mut self) -> PResult<Vec<(Sym, SortRef)>> {
        let mut out = Vec::new();
        loop {
            let names = self.ident_list()?;
            self.expect_sym(":")?;
            let sort = self.sort_ref()?;
            out.extend(names.iter().map(|n| (Sym::new(n), sort.clone())));
            if !(self.is_sym(",") && matches!(self.peek_at(1), Tok::Ident(_))) {
                break;
            }
            self.bump();
        }
        Ok(out)
    }

    fn proc_decl(&mut self, m: &mut ModelSpec) -> PResult<()> {
        let span = self.span();
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat_sym("(") {
            params = self.typed_vars()?;
            self.expect_sym(")")?;
        }
        self.expect_sym("=")?;
        let body = self.proc_choice()?;
        self.expect_sym(";")?;
        m.procs.push(ProcDecl {
            name,
            params,
            body,
            span,
        });
        Ok(())
    }

    fn proc_choice(&mut self) -> PResult<ProcTerm> {
        let mut left = self.proc_cond()?;
        while self.eat_sym("+") {
            let right = self.proc_cond()?;
            left = ProcTerm::Choice(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn proc_cond(&mut self) -> PResult<ProcTerm> {
        let save = self.pos;
        let diags = self.diags.len();
        self.guard_top = true;
        let cond = self.data();
        self.guard_top = false;
        if let Ok(cond) = cond {
            if self.eat_sym("->") {
                return self.cond_tail(cond);
            }
        }
        self.pos = save;
        self.diags.truncate(diags);
        self.proc_seq()
    }

    fn cond_tail(&mut self, cond: Expr) -> PResult<ProcTerm> {
        let then = self.proc_cond()?;
        let els = if self.eat_sym("<>") {
            Some(Box::new(self.proc_cond()?))
        } else {
            None
        };
        Ok(ProcTerm::Cond {
            cond,
            then: Box::new(then),
            els,
        })
    }

    fn proc_seq(&mut self) -> PResult<ProcTerm> {
        let first = self.proc_atom()?;
        if !self.eat_sym(".") {
            return Ok(first);
        }
        // `a . (c) -> p <> q`: a bracketed guard may follow a dot, as in
        // the paper's listings.
        if self.is_sym("(") {
            let save = self.pos;
            let diags = self.diags.len();
            if let Ok(Formula::Data(cond)) = self.atom(Mode::Data) {
                if self.eat_sym("->") {
                    let rest = self.cond_tail(cond)?;
                    return Ok(ProcTerm::Seq(Box::new(first), Box::new(rest)));
                }
            }
            self.pos = save;
            self.diags.truncate(diags);
        }
        let rest = self.proc_seq()?;
        Ok(ProcTerm::Seq(Box::new(first), Box::new(rest)))
    }

    fn proc_atom(&mut self) -> PResult<ProcTerm> {
        if self.eat_kw("delta") {
            return Ok(ProcTerm::Delta);
        }
        if self.eat_kw("sum") {
            let vars = self.typed_vars()?;
            self.expect_sym(".")?;
            let body = self.proc_choice()?;
            return Ok(ProcTerm::Sum {
                vars,
                body: Box::new(body),
            });
        }
        if self.is_kw("dist") {
            let span = self.span();
            self.bump();
            let vars = self.typed_vars()?;
            self.expect_sym("[")?;
            let weight = self.data()?;
            self.expect_sym("]")?;
            self.expect_sym(".")?;
            let body = self.proc_choice()?;
            return Ok(ProcTerm::Dist {
                vars,
                weight,
                body: Box::new(body),
                span,
            });
        }
        if self.eat_sym("(") {
            let p = self.proc_choice()?;
            self.expect_sym(")")?;
            return Ok(p);
        }
        let span = self.span();
        let name = match self.ident() {
            Ok(n) => n,
            Err(_) => return self.err("process expression"),
        };
        let args = self.call_args()?;
        Ok(ProcTerm::Call { name, args, span })
    }

    /// Runs `f` inside brackets, where indexing is unambiguous.
    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let saved = std::mem::replace(&mut self.guard_top, false);
        let r = f(self);
        self.guard_top = saved;
        r
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.nested(Self::call_args_inner)
    }

    fn call_args_inner(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat_sym("(") {
            args.push(self.data()?);
            while self.eat_sym(",") {
                args.push(self.data()?);
            }
            self.expect_sym(")")?;
        }
        Ok(args)
    }

    // ---- expressions and formulas ----

    fn data(&mut self) -> PResult<Expr> {
        let f = self.expr(Mode::Data)?;
        self.to_data(f)
    }

    fn to_data(&self, f: Formula) -> PResult<Expr> {
        match f {
            Formula::Data(e) => Ok(e),
            Formula::And(a, b) => Ok(Expr::bin(BinOp::And, self.to_data(*a)?, self.to_data(*b)?)),
            Formula::Or(a, b) => Ok(Expr::bin(BinOp::Or, self.to_data(*a)?, self.to_data(*b)?)),
            _ => self.err("a data expression"),
        }
    }

    fn expr(&mut self, mode: Mode) -> PResult<Formula> {
        if mode == Mode::Formula {
            if self.is_kw("mu") || self.is_kw("nu") {
                return self.fixpoint();
            }
            if self.is_kw("sup") || self.is_kw("inf") || self.is_kw("sum") {
                return self.quantifier();
            }
        }
        self.or(mode)
    }

    fn fixpoint(&mut self) -> PResult<Formula> {
        let kind = if self.eat_kw("mu") {
            FixKind::Mu
        } else {
            self.expect_kw("nu")?;
            FixKind::Nu
        };
        let name = Sym::new(&self.ident()?);
        let mut params = Vec::new();
        if self.eat_sym("(") {
            loop {
                let p = Sym::new(&self.ident()?);
                self.expect_sym(":")?;
                let sort = self.sort_ref()?;
                self.expect_sym("=")?;
                let init = self.data()?;
                params.push(FixParam { name: p, sort, init });
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
        }
        self.expect_sym(".")?;
        self.fix_scope.push((name, params.len()));
        let body = self.expr(Mode::Formula);
        self.fix_scope.pop();
        Ok(Formula::Fix {
            kind,
            name,
            params,
            body: Box::new(body?),
        })
    }

    fn quantifier(&mut self) -> PResult<Formula> {
        let q = match self.bump() {
            Tok::Ident(s) if s == "sup" => Quant::Sup,
            Tok::Ident(s) if s == "inf" => Quant::Inf,
            _ => Quant::Sum,
        };
        let vars = self.typed_vars()?;
        self.expect_sym(".")?;
        let body = self.expr(Mode::Formula)?;
        Ok(Formula::Quant {
            q,
            vars,
            body: Box::new(body),
        })
    }

    fn or(&mut self, mode: Mode) -> PResult<Formula> {
        let mut left = self.and(mode)?;
        while self.eat_sym("||") {
            let right = self.and(mode)?;
            left = self.connective(BinOp::Or, left, right, mode)?;
        }
        Ok(left)
    }

    fn and(&mut self, mode: Mode) -> PResult<Formula> {
        let mut left = self.cmp(mode)?;
        while self.eat_sym("&&") {
            let right = self.cmp(mode)?;
            left = self.connective(BinOp::And, left, right, mode)?;
        }
        Ok(left)
    }

    fn connective(&self, op: BinOp, a: Formula, b: Formula, mode: Mode) -> PResult<Formula> {
        if mode == Mode::Data {
            return Ok(Formula::Data(Expr::bin(op, self.to_data(a)?, self.to_data(b)?)));
        }
        Ok(match op {
            BinOp::And => Formula::And(Box::new(a), Box::new(b)),
            _ => Formula::Or(Box::new(a), Box::new(b)),
        })
    }

    fn cmp(&mut self, mode: Mode) -> PResult<Formula> {
        let left = self.add(mode)?;
        let op = match self.peek() {
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Ident(s) if s == "in" => {
                self.bump();
                let x = self.to_data(left)?;
                self.expect_sym("{")?;
                let mut set = vec![self.data()?];
                while self.eat_sym(",") {
                    set.push(self.data()?);
                }
                self.expect_sym("}")?;
                return Ok(Formula::Data(Expr::In(Box::new(x), set)));
            }
            _ => return Ok(left),
        };
        self.bump();
        let right = self.add(mode)?;
        Ok(Formula::Data(Expr::bin(op, self.to_data(left)?, self.to_data(right)?)))
    }

    fn add(&mut self, mode: Mode) -> PResult<Formula> {
        let mut left = self.mul(mode)?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(left);
            };
            let right = self.mul(mode)?;
            left = match (left, right) {
                (Formula::Data(a), Formula::Data(b)) => Formula::Data(Expr::bin(op, a, b)),
                (a, b) if op == BinOp::Add => Formula::Add(Box::new(a), Box::new(b)),
                (a, b) => Formula::Sub(Box::new(a), Box::new(b)),
            };
        }
    }

    fn mul(&mut self, mode: Mode) -> PResult<Formula> {
        let mut left = self.unary(mode)?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else if self.eat_kw("mod") {
                BinOp::Mod
            } else {
                return Ok(left);
            };
            let right = self.unary(mode)?;
            left = match (left, right) {
                (Formula::Data(a), Formula::Data(b)) => Formula::Data(Expr::bin(op, a, b)),
                (Formula::Data(c), f) | (f, Formula::Data(c)) if op == BinOp::Mul => Formula::Scale(c, Box::new(f)),
                _ if op == BinOp::Mul => return self.err("a data factor (a product needs one constant side)"),
                _ => return self.err("data operands for `/` and `mod`"),
            };
        }
    }

    fn unary(&mut self, mode: Mode) -> PResult<Formula> {
        if self.eat_sym("-") {
            let f = self.unary(mode)?;
            let e = self.to_data(f)?;
            return Ok(Formula::Data(match e {
                Expr::Lit(Value::Int(i)) => Expr::Lit(Value::Int(-i)),
                e => Expr::Un(UnOp::Neg, Box::new(e)),
            }));
        }
        if self.eat_sym("!") {
            let f = self.unary(mode)?;
            return Ok(Formula::Data(Expr::Un(UnOp::Not, Box::new(self.to_data(f)?))));
        }
        if mode == Mode::Formula {
            if self.eat_sym("<") {
                let m = self.modality()?;
                self.expect_sym(">")?;
                let body = self.unary(mode)?;
                return Ok(Formula::Diamond(m, Box::new(body)));
            }
            if self.eat_sym("[") {
                let m = self.modality()?;
                self.expect_sym("]")?;
                let body = self.unary(mode)?;
                return Ok(Formula::Box(m, Box::new(body)));
            }
        }
        self.postfix(mode)
    }

    fn modality(&mut self) -> PResult<Modality> {
        if self.eat_kw("true") {
            if self.eat_sym("*") {
                return Ok(Modality::TrueStar);
            }
            return Ok(Modality::True);
        }
        let name = self.ident()?;
        let args = self.call_args()?;
        Ok(Modality::Action { name, args })
    }

    fn postfix(&mut self, mode: Mode) -> PResult<Formula> {
        let mut f = self.atom(mode)?;
        while !self.guard_top && self.is_sym(".") && matches!(self.peek_at(1), Tok::Sym("(") | Tok::Int(_)) {
            self.bump();
            let list = self.to_data(f)?;
            let idx = match self.peek().clone() {
                Tok::Int(i) => {
                    self.bump();
                    Expr::int(i)
                }
                _ => {
                    self.expect_sym("(")?;
                    let e = self.data()?;
                    self.expect_sym(")")?;
                    e
                }
            };
            f = Formula::Data(Expr::Index(Box::new(list), Box::new(idx)));
        }
        Ok(f)
    }

    fn atom(&mut self, mode: Mode) -> PResult<Formula> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Formula::Data(Expr::int(i)))
            }
            Tok::Sym("(") => {
                self.bump();
                let f = self.nested(|p| p.expr(mode))?;
                self.expect_sym(")")?;
                Ok(f)
            }
            Tok::Sym("[") if mode == Mode::Data => {
                self.bump();
                self.nested(|p| {
                    let mut items = vec![p.data()?];
                    while p.eat_sym(",") {
                        items.push(p.data()?);
                    }
                    p.expect_sym("]")?;
                    Ok(Formula::Data(Expr::List(items)))
                })
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Formula::Data(Expr::Lit(Value::Bool(s == "true"))))
                }
                "if" => {
                    self.bump();
                    self.expect_sym("(")?;
                    self.nested(|p| {
                        let c = p.data()?;
                        p.expect_sym(",")?;
                        let a = p.data()?;
                        p.expect_sym(",")?;
                        let b = p.data()?;
                        p.expect_sym(")")?;
                        Ok(Formula::Data(Expr::If(Box::new(c), Box::new(a), Box::new(b))))
                    })
                }
                "mu" | "nu" | "sup" | "inf" | "sum" if mode == Mode::Formula => self.expr(mode),
                _ if is_keyword(&s) => self.err("expression"),
                _ => {
                    self.bump();
                    let name = Sym::new(&s);
                    let has_args = self.is_sym("(");
                    let args = self.call_args()?;
                    if mode == Mode::Formula {
                        if let Some(&(_, arity)) = self.fix_scope.iter().rev().find(|(n, _)| *n == name) {
                            if arity != args.len() {
                                self.diags.push(Diagnostic {
                                    kind: DiagKind::ArityMismatch,
                                    message: format!(
                                        "fixpoint variable {s} takes {arity} argument(s), got {}",
                                        args.len()
                                    ),
                                    span,
                                });
                            }
                            return Ok(Formula::Call(name, args));
                        }
                    }
                    Ok(Formula::Data(if has_args {
                        Expr::App(name, args)
                    } else {
                        Expr::Var(name)
                    }))
                }
            },
            _ => self.err("expression"),
        }
    }
}
