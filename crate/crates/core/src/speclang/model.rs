use std::collections::{HashMap, HashSet};

use crate::datalang::{assignable, resolve, Expr, FuncTable, Sort, SortTable, TypeCtx, Value};
use crate::symbol::Sym;

use super::ast::*;
use super::bounds::support_interval;
use super::{DiagKind, Diagnostic};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionDef {
    pub name: String,
    pub args: Vec<Sort>,
}

/// Values a `dist` variable ranges over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    Finite(Vec<Value>),
    /// Integers in `[lo, hi)`.
    Range(i64, i64),
}

impl Domain {
    pub fn len(&self) -> usize {
        match self {
            Domain::Finite(v) => v.len(),
            Domain::Range(lo, hi) => (hi - lo).max(0) as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Value {
        match self {
            Domain::Finite(v) => v[i].clone(),
            Domain::Range(lo, _) => Value::Int(lo + i as i64),
        }
    }
}

/// Resolved, well-typed process term.
#[derive(Clone, Debug, PartialEq)]
pub enum Proc {
    Delta,
    Action {
        act: u32,
        args: Vec<Expr>,
        then: Box<Proc>,
    },
    Call {
        proc: u32,
        args: Vec<Expr>,
    },
    Choice(Box<Proc>, Box<Proc>),
    Sum {
        var: Sym,
        sort: Sort,
        body: Box<Proc>,
    },
    Dist {
        vars: Vec<(Sym, Sort, Domain)>,
        weight: Expr,
        body: Box<Proc>,
    },
    Cond {
        cond: Expr,
        then: Box<Proc>,
        els: Box<Proc>,
    },
}

impl Proc {
    /// Whether `name` occurs free.
    pub fn mentions(&self, name: Sym) -> bool {
        match self {
            Proc::Delta => false,
            Proc::Action { args, then, .. } => args.iter().any(|a| a.mentions(name)) || then.mentions(name),
            Proc::Call { args, .. } => args.iter().any(|a| a.mentions(name)),
            Proc::Choice(a, b) => a.mentions(name) || b.mentions(name),
            Proc::Sum { var, body, .. } => *var != name && body.mentions(name),
            Proc::Dist { vars, weight, body } => {
                !vars.iter().any(|(v, ..)| *v == name) && (weight.mentions(name) || body.mentions(name))
            }
            Proc::Cond { cond, then, els } => cond.mentions(name) || then.mentions(name) || els.mentions(name),
        }
    }

    /// Replaces a free data variable by a value.
    pub fn substitute(&self, name: Sym, v: &Value) -> Proc {
        let s = |p: &Proc| Box::new(p.substitute(name, v));
        let se = |es: &[Expr]| es.iter().map(|e| e.substitute(name, v)).collect();
        match self {
            Proc::Delta => Proc::Delta,
            Proc::Action { act, args, then } => Proc::Action {
                act: *act,
                args: se(args),
                then: s(then),
            },
            Proc::Call { proc, args } => Proc::Call {
                proc: *proc,
                args: se(args),
            },
            Proc::Choice(a, b) => Proc::Choice(s(a), s(b)),
            Proc::Sum { var, sort, body } if *var != name => Proc::Sum {
                var: *var,
                sort: sort.clone(),
                body: s(body),
            },
            Proc::Sum { .. } => self.clone(),
            Proc::Dist { vars, weight, body } => {
                if vars.iter().any(|(x, ..)| *x == name) {
                    return self.clone();
                }
                Proc::Dist {
                    vars: vars.clone(),
                    weight: weight.substitute(name, v),
                    body: s(body),
                }
            }
            Proc::Cond { cond, then, els } => Proc::Cond {
                cond: cond.substitute(name, v),
                then: s(then),
                els: s(els),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcDef {
    pub name: String,
    pub params: Vec<(Sym, Sort)>,
    pub body: Proc,
}

/// A validated model, ready for exploration.
#[derive(Clone, Debug)]
pub struct Model {
    pub sorts: SortTable,
    pub funcs: FuncTable,
    pub actions: Vec<ActionDef>,
    pub globs: Vec<(Sym, Sort)>,
    pub procs: Vec<ProcDef>,
    pub init: Proc,
    pub pragmas: Vec<String>,
}

impl Model {
    pub fn action_by_name(&self, name: &str) -> Option<u32> {
        self.actions.iter().position(|a| a.name == name).map(|i| i as u32)
    }

    pub fn proc_by_name(&self, name: &str) -> Option<u32> {
        self.procs.iter().position(|p| p.name == name).map(|i| i as u32)
    }

    pub fn pragma(&self, key: &str) -> Option<&str> {
        self.pragmas.iter().find_map(|p| {
            let mut it = p.splitn(2, char::is_whitespace);
            (it.next() == Some(key)).then(|| it.next().unwrap_or("").trim())
        })
    }

    /// Default glob values: the first value of each glob's sort.
    pub fn default_globs(&self) -> Vec<(Sym, Value)> {
        self.globs
            .iter()
            .map(|(n, s)| {
                let v = self
                    .sorts
                    .enumerate(s)
                    .ok()
                    .and_then(|vs| vs.into_iter().next())
                    .unwrap_or(Value::Int(0));
                (*n, v)
            })
            .collect()
    }

    /// Substitutes glob values into every process body. Globs missing from
    /// `values` take their default.
    pub fn instantiate_globs(&self, values: &[(Sym, Value)]) -> Model {
        let mut m = self.clone();
        for (name, default) in self.default_globs() {
            let v = values
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| v.clone())
                .unwrap_or(default);
            for p in &mut m.procs {
                p.body = p.body.substitute(name, &v);
            }
            m.init = m.init.substitute(name, &v);
        }
        m.globs.clear();
        m
    }
}

/// Diagnostics for a parsed model; empty iff it is valid.
pub fn validate_model(spec: &ModelSpec) -> Vec<Diagnostic> {
    match check_model(spec) {
        Ok(_) => vec![],
        Err(d) => d,
    }
}

struct Checker {
    sorts: SortTable,
    aliases: HashMap<String, Sort>,
    funcs: FuncTable,
    actions: Vec<ActionDef>,
    proc_sigs: Vec<(String, Vec<(Sym, Sort)>)>,
    globs: Vec<(Sym, Sort)>,
    diags: Vec<Diagnostic>,
}

fn diag(kind: DiagKind, span: Span, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind,
        message: message.into(),
        span,
    }
}

fn data_diag(e: crate::datalang::DataError, span: Span, context: &str) -> Diagnostic {
    use crate::datalang::DataError as D;
    let kind = match &e {
        D::UnknownName(_) | D::Unresolved(_) => DiagKind::UnknownName,
        D::ArityMismatch { .. } => DiagKind::ArityMismatch,
        D::DuplicateName(_) | D::DuplicateConstructor { .. } => DiagKind::DuplicateName,
        D::InfiniteSort(_) => DiagKind::InfiniteSort,
        D::TypeMismatch(_) => DiagKind::TypeMismatch,
        _ => DiagKind::Evaluation,
    };
    diag(kind, span, format!("{context}: {e}"))
}

/// Validates a parsed model and resolves it.
pub fn check_model(spec: &ModelSpec) -> Result<Model, Vec<Diagnostic>> {
    let mut c = Checker {
        sorts: SortTable::default(),
        aliases: HashMap::new(),
        funcs: FuncTable::default(),
        actions: Vec::new(),
        proc_sigs: Vec::new(),
        globs: Vec::new(),
        diags: Vec::new(),
    };
    c.declare_sorts(spec);
    c.define_functions(spec);
    c.declare_actions_and_procs(spec);
    let procs: Vec<ProcDef> = spec
        .procs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let params = c.proc_sigs[i].1.clone();
            let mut vars = c.globs.clone();
            vars.extend(params.iter().cloned());
            let body = c.proc(&p.body, &vars, false, p.span, None);
            ProcDef {
                name: p.name.clone(),
                params,
                body,
            }
        })
        .collect();
    let init = match spec.inits.as_slice() {
        [] => {
            c.diags
                .push(diag(DiagKind::MissingInit, Span::default(), "no `init` given"));
            Proc::Delta
        }
        [(p, span)] => {
            let vars = c.globs.clone();
            c.proc(p, &vars, false, *span, None)
        }
        [_, (_, span), ..] => {
            c.diags
                .push(diag(DiagKind::MultipleInit, *span, "more than one `init`"));
            Proc::Delta
        }
    };
    if !c.diags.is_empty() {
        return Err(c.diags);
    }
    Ok(Model {
        sorts: c.sorts,
        funcs: c.funcs,
        actions: c.actions,
        globs: c.globs,
        procs,
        init,
        pragmas: spec.pragmas.clone(),
    })
}

impl Checker {
    fn sort(&mut self, r: &SortRef, span: Span) -> Sort {
        match self.try_sort(r) {
            Some(s) => s,
            None => {
                self.diags.push(diag(
                    DiagKind::UnknownName,
                    span,
                    format!("unknown sort {}", super::sort_ref_to_string(r)),
                ));
                Sort::Bool
            }
        }
    }

    fn try_sort(&self, r: &SortRef) -> Option<Sort> {
        match r {
            SortRef::List(e) => Some(Sort::List(Box::new(self.try_sort(e)?))),
            SortRef::Named(n) => match n.as_str() {
                "Bool" => Some(Sort::Bool),
                "Nat" => Some(Sort::Nat),
                "Int" => Some(Sort::Int),
                "Real" => Some(Sort::Real),
                _ => self
                    .sorts
                    .enum_by_name(n)
                    .map(Sort::Enum)
                    .or_else(|| self.aliases.get(n).cloned()),
            },
        }
    }

    fn declare_sorts(&mut self, spec: &ModelSpec) {
        let mut ctors = HashSet::new();
        for d in &spec.sorts {
            if self.try_sort(&SortRef::Named(d.name.clone())).is_some() {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    d.span,
                    format!("sort {} declared twice", d.name),
                ));
                continue;
            }
            match &d.body {
                SortBody::Struct(cs) => {
                    let mut clash = false;
                    for ctor in cs {
                        if !ctors.insert(ctor.clone()) {
                            clash = true;
                            self.diags.push(diag(
                                DiagKind::DuplicateName,
                                d.span,
                                format!("constructor {ctor} declared twice"),
                            ));
                        }
                    }
                    if clash {
                        continue;
                    }
                    if let Err(e) = self.sorts.add_enum(&d.name, cs.clone()) {
                        self.diags.push(data_diag(e, d.span, &d.name));
                    }
                }
                SortBody::Alias(r) => {
                    let s = self.sort(r, d.span);
                    self.aliases.insert(d.name.clone(), s);
                }
            }
        }
    }

    fn define_functions(&mut self, spec: &ModelSpec) {
        let mut sigs: HashMap<&str, &MapDecl> = HashMap::new();
        for m in &spec.maps {
            if sigs.insert(&m.name, m).is_some() {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    m.span,
                    format!("map {} declared twice", m.name),
                ));
            }
            if self.sorts.ctor(&m.name).is_some() {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    m.span,
                    format!("map {} clashes with a constructor", m.name),
                ));
            }
        }
        let var_sorts: HashMap<Sym, &VarDecl> = spec.vars.iter().map(|v| (v.name, v)).collect();
        let mut eqns: HashMap<&str, &EqnDecl> = HashMap::new();
        for e in &spec.eqns {
            if !sigs.contains_key(e.name.as_str()) {
                self.diags.push(diag(
                    DiagKind::UnknownName,
                    e.span,
                    format!("equation for undeclared map {}", e.name),
                ));
            } else if eqns.insert(&e.name, e).is_some() {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    e.span,
                    format!("second equation for {}", e.name),
                ));
            }
        }
        for m in &spec.maps {
            if !eqns.contains_key(m.name.as_str()) {
                self.diags.push(diag(
                    DiagKind::MissingEquation,
                    m.span,
                    format!("map {} has no equation", m.name),
                ));
            }
        }
        // Definition order: dependencies first.
        let mut order = Vec::new();
        let mut state: HashMap<&str, u8> = HashMap::new();
        fn visit<'a>(
            name: &'a str,
            eqns: &HashMap<&'a str, &'a EqnDecl>,
            state: &mut HashMap<&'a str, u8>,
            order: &mut Vec<&'a str>,
            diags: &mut Vec<Diagnostic>,
        ) {
            match state.get(name) {
                Some(2) => return,
                Some(1) => {
                    diags.push(diag(
                        DiagKind::RecursiveFunction,
                        eqns[name].span,
                        format!("{name} is defined recursively"),
                    ));
                    return;
                }
                _ => {}
            }
            state.insert(name, 1);
            let e = eqns[name];
            let mut refs = Vec::new();
            collect_refs(&e.body, &mut refs);
            for r in refs {
                let r = r.as_str();
                if let Some((k, _)) = eqns.get_key_value(r.as_str()) {
                    if !e.params.iter().any(|p| p.with_str(|s| s == r)) {
                        visit(k, eqns, state, order, diags);
                    }
                }
            }
            state.insert(name, 2);
            order.push(name);
        }
        for e in &spec.eqns {
            if eqns.get(e.name.as_str()).is_some_and(|x| std::ptr::eq(*x, e)) {
                visit(&e.name, &eqns, &mut state, &mut order, &mut self.diags);
            }
        }
        for name in order {
            let e = eqns[name];
            let sig = sigs[name];
            if sig.args.len() != e.params.len() {
                self.diags.push(diag(
                    DiagKind::ArityMismatch,
                    e.span,
                    format!(
                        "{} declared with {} argument(s), equation has {}",
                        name,
                        sig.args.len(),
                        e.params.len()
                    ),
                ));
                continue;
            }
            let mut params = Vec::new();
            for (p, s) in e.params.iter().zip(&sig.args) {
                let s = self.sort(s, sig.span);
                if let Some(v) = var_sorts.get(p) {
                    if self.try_sort(&v.sort).as_ref() != Some(&s) {
                        self.diags.push(diag(
                            DiagKind::TypeMismatch,
                            e.span,
                            format!("variable {p} of {name} declared with a different sort"),
                        ));
                    }
                }
                params.push((*p, s));
            }
            let result = self.sort(&sig.result, sig.span);
            if let Err(err) = self.funcs.define(&self.sorts, name, params, result, &e.body) {
                self.diags.push(data_diag(err, e.span, name));
            }
        }
    }

    fn declare_actions_and_procs(&mut self, spec: &ModelSpec) {
        let mut names = HashSet::new();
        for a in &spec.acts {
            if !names.insert(a.name.clone()) {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    a.span,
                    format!("action {} declared twice", a.name),
                ));
            }
            let args = a.args.iter().map(|s| self.sort(s, a.span)).collect();
            self.actions.push(ActionDef {
                name: a.name.clone(),
                args,
            });
        }
        for g in &spec.globs {
            let s = self.sort(&g.sort, g.span);
            if !self.sorts.is_finite(&s) {
                self.diags.push(diag(
                    DiagKind::InfiniteSort,
                    g.span,
                    format!("glob {} must have a finite sort", g.name),
                ));
            }
            self.globs.push((g.name, s));
        }
        // Processes may be overloaded on arity, as `Gamble` and `Gamble(s)`.
        let mut sigs = HashSet::new();
        for p in &spec.procs {
            if !sigs.insert((p.name.clone(), p.params.len())) || names.contains(&p.name) {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    p.span,
                    format!("{} declared twice", p.name),
                ));
            }
            let params: Vec<(Sym, Sort)> = p.params.iter().map(|(n, s)| (*n, self.sort(s, p.span))).collect();
            for (n, _) in &params {
                if self.globs.iter().any(|(g, _)| g == n) {
                    self.diags.push(diag(
                        DiagKind::DuplicateName,
                        p.span,
                        format!("parameter {n} of {} shadows a glob", p.name),
                    ));
                }
            }
            self.proc_sigs.push((p.name.clone(), params));
        }
    }

    fn typed(&mut self, e: &Expr, vars: &[(Sym, Sort)], span: Span, what: &str) -> Option<(Expr, Sort)> {
        let ctx = TypeCtx {
            sorts: &self.sorts,
            funcs: &self.funcs,
            vars: vars.to_vec(),
        };
        match resolve(e, &ctx) {
            Ok(r) => Some(r),
            Err(err) => {
                self.diags.push(data_diag(err, span, what));
                None
            }
        }
    }

    fn args(&mut self, name: &str, args: &[Expr], expected: &[Sort], vars: &[(Sym, Sort)], span: Span) -> Vec<Expr> {
        if args.len() != expected.len() {
            self.diags.push(diag(
                DiagKind::ArityMismatch,
                span,
                format!("{name} expects {} argument(s), got {}", expected.len(), args.len()),
            ));
            return vec![];
        }
        let mut out = Vec::new();
        for (a, s) in args.iter().zip(expected) {
            if let Some((a, sa)) = self.typed(a, vars, span, name) {
                if !assignable(&sa, s) {
                    self.diags.push(diag(
                        DiagKind::TypeMismatch,
                        span,
                        format!(
                            "argument of {name} has sort {}, expected {}",
                            sa.display(&self.sorts),
                            s.display(&self.sorts)
                        ),
                    ));
                }
                out.push(a);
            }
        }
        out
    }

    fn binders(&mut self, vars: &[(Sym, SortRef)], span: Span) -> Vec<(Sym, Sort)> {
        vars.iter().map(|(n, s)| (*n, self.sort(s, span))).collect()
    }

    /// `in_choice`: directly under `+` or `sum`, where `dist` is not allowed.
    /// `cont`: what follows successful termination (from an enclosing `.`).
    fn proc(&mut self, t: &ProcTerm, vars: &[(Sym, Sort)], in_choice: bool, span: Span, cont: Option<&Proc>) -> Proc {
        match t {
            ProcTerm::Delta => Proc::Delta,
            ProcTerm::Call { name, args, span } => {
                if let Some(i) = self.actions.iter().position(|a| a.name == *name) {
                    let expected = self.actions[i].args.clone();
                    let args = self.args(name, args, &expected, vars, *span);
                    return Proc::Action {
                        act: i as u32,
                        args,
                        then: Box::new(cont.cloned().unwrap_or(Proc::Delta)),
                    };
                }
                let found = self
                    .proc_sigs
                    .iter()
                    .position(|(n, ps)| n == name && ps.len() == args.len())
                    .or_else(|| self.proc_sigs.iter().position(|(n, _)| n == name));
                if let Some(i) = found {
                    if cont.is_some() {
                        self.diags.push(diag(
                            DiagKind::SequentialComposition,
                            *span,
                            format!("process {name} may not be followed by `.`"),
                        ));
                    }
                    let expected: Vec<Sort> = self.proc_sigs[i].1.iter().map(|(_, s)| s.clone()).collect();
                    let args = self.args(name, args, &expected, vars, *span);
                    return Proc::Call { proc: i as u32, args };
                }
                self.diags.push(diag(
                    DiagKind::UnknownName,
                    *span,
                    format!("unknown action or process {name}"),
                ));
                Proc::Delta
            }
            ProcTerm::Seq(a, b) => {
                let tail = self.proc(b, vars, false, span, cont);
                self.proc(a, vars, in_choice, span, Some(&tail))
            }
            ProcTerm::Choice(a, b) => Proc::Choice(
                Box::new(self.proc(a, vars, true, span, cont)),
                Box::new(self.proc(b, vars, true, span, cont)),
            ),
            ProcTerm::Sum { vars: bs, body } => {
                let bs = self.binders(bs, span);
                for (n, s) in &bs {
                    if !self.sorts.is_finite(s) {
                        self.diags.push(diag(
                            DiagKind::InfiniteSort,
                            span,
                            format!("sum over {n} ranges over an infinite sort"),
                        ));
                    }
                }
                self.check_capture(&bs, cont, span);
                let mut inner = vars.to_vec();
                inner.extend(bs.iter().cloned());
                let mut p = self.proc(body, &inner, true, span, cont);
                for (n, s) in bs.into_iter().rev() {
                    p = Proc::Sum {
                        var: n,
                        sort: s,
                        body: Box::new(p),
                    };
                }
                p
            }
            ProcTerm::Dist {
                vars: bs,
                weight,
                body,
                span,
            } => {
                if in_choice {
                    self.diags.push(diag(
                        DiagKind::MisplacedDist,
                        *span,
                        "`dist` may not occur directly under `+` or `sum`",
                    ));
                }
                let bs = self.binders(bs, *span);
                self.check_capture(&bs, cont, *span);
                let mut inner = vars.to_vec();
                inner.extend(bs.iter().cloned());
                let Some((w, ws)) = self.typed(weight, &inner, *span, "dist weight") else {
                    return Proc::Delta;
                };
                if !ws.is_numeric() {
                    self.diags
                        .push(diag(DiagKind::TypeMismatch, *span, "dist weight must be a number"));
                }
                let mut out_vars = Vec::new();
                for (n, s) in bs {
                    let dom = self.domain(n, &s, &w, *span);
                    out_vars.push((n, s, dom));
                }
                let body = self.proc(body, &inner, false, *span, cont);
                Proc::Dist {
                    vars: out_vars,
                    weight: w,
                    body: Box::new(body),
                }
            }
            ProcTerm::Cond { cond, then, els } => {
                let c = match self.typed(cond, vars, span, "condition") {
                    Some((c, Sort::Bool)) => c,
                    Some(_) => {
                        self.diags
                            .push(diag(DiagKind::TypeMismatch, span, "condition must be Bool"));
                        Expr::Lit(Value::Bool(false))
                    }
                    None => Expr::Lit(Value::Bool(false)),
                };
                let then = self.proc(then, vars, in_choice, span, cont);
                let els = match els {
                    Some(e) => self.proc(e, vars, in_choice, span, cont),
                    None => Proc::Delta,
                };
                Proc::Cond {
                    cond: c,
                    then: Box::new(then),
                    els: Box::new(els),
                }
            }
        }
    }

    fn check_capture(&mut self, bs: &[(Sym, Sort)], cont: Option<&Proc>, span: Span) {
        let Some(cont) = cont else { return };
        for (n, _) in bs {
            if cont.mentions(*n) {
                self.diags.push(diag(
                    DiagKind::DuplicateName,
                    span,
                    format!("binder {n} would capture a variable of the continuation"),
                ));
            }
        }
    }

    fn domain(&mut self, n: Sym, s: &Sort, w: &Expr, span: Span) -> Domain {
        match s {
            Sort::Bool | Sort::Enum(_) => Domain::Finite(self.sorts.enumerate(s).unwrap_or_default()),
            Sort::Nat | Sort::Int => {
                let iv = support_interval(w, n, &self.funcs);
                let lo = match s {
                    Sort::Nat => Some(iv.lo.unwrap_or(0).max(0)),
                    _ => iv.lo,
                };
                match (lo, iv.hi) {
                    (Some(lo), Some(hi)) => Domain::Range(lo, hi.max(lo)),
                    _ => {
                        self.diags.push(diag(
                            DiagKind::UnboundedDistribution,
                            span,
                            format!("cannot bound the support of {n}; guard the weight with e.g. if({n} < k, w, 0)"),
                        ));
                        Domain::Range(0, 0)
                    }
                }
            }
            _ => {
                self.diags.push(diag(
                    DiagKind::UnboundedDistribution,
                    span,
                    format!("dist over {n} of sort {}", s.display(&self.sorts)),
                ));
                Domain::Range(0, 0)
            }
        }
    }
}

fn collect_refs(e: &Expr, out: &mut Vec<Sym>) {
    match e {
        Expr::Var(s) | Expr::App(s, _) => out.push(*s),
        _ => {}
    }
    for c in e.children() {
        collect_refs(c, out);
    }
}
