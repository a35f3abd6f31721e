use std::collections::BTreeMap;

use crate::datalang::{assignable, resolve, DataError, Expr, FuncTable, Sort, SortTable, TypeCtx, Value};
use crate::speclang::{FixKind, Formula, Modality, Quant, SortRef};
use crate::statespace::Plts;
use crate::symbol::Sym;

use super::QuantError;

pub(crate) type NodeId = u32;
pub(crate) type FixId = u32;

#[derive(Clone, Debug)]
pub(crate) enum Pat {
    /// Binds the label argument to a quantified variable.
    Bind(Sym),
    /// The label argument must equal the value of the expression.
    Eq(Expr),
}

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    Data {
        expr: Expr,
        boolean: bool,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(Expr, NodeId),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    /// `<R>f` (diamond) or `[R]f`; `act = None` matches every action.
    /// Variables bound by patterns range over the matching labels.
    Modal {
        diamond: bool,
        act: Option<u32>,
        pats: Vec<Pat>,
        body: NodeId,
    },
    /// Data quantifier over finite domains.
    Quant {
        q: Quant,
        vars: Vec<(Sym, Vec<Value>)>,
        body: NodeId,
    },
    /// Occurrence of a fixpoint, applied to its initial arguments.
    Fix(FixId),
    Call {
        fix: FixId,
        args: Vec<Expr>,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub kind: Kind,
    /// Data variables the value depends on, sorted.
    pub free: Vec<Sym>,
    /// No fixpoint variable occurs below.
    pub pure: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct FixDef {
    pub kind: FixKind,
    pub name: Sym,
    pub params: Vec<(Sym, Sort)>,
    pub init: Vec<Expr>,
    pub body: NodeId,
    /// Free data variables of the body other than the parameters.
    pub outer: Vec<Sym>,
}

#[derive(Clone, Debug)]
pub(crate) struct Ir {
    pub nodes: Vec<Node>,
    pub fixes: Vec<FixDef>,
    pub root: NodeId,
}

impl Ir {
    pub fn node(&self, n: NodeId) -> &Node {
        &self.nodes[n as usize]
    }

    pub fn children(&self, n: NodeId) -> Vec<NodeId> {
        match &self.node(n).kind {
            Kind::Data { .. } | Kind::Call { .. } => vec![],
            Kind::Add(a, b) | Kind::Sub(a, b) | Kind::And(a, b) | Kind::Or(a, b) => vec![*a, *b],
            Kind::Scale(_, a) => vec![*a],
            Kind::Modal { body, .. } | Kind::Quant { body, .. } => vec![*body],
            Kind::Fix(f) => vec![self.fixes[*f as usize].body],
        }
    }

    /// Every node below `n`, including `n`.
    pub fn subtree(&self, n: NodeId) -> Vec<NodeId> {
        let mut out = vec![];
        let mut stack = vec![n];
        while let Some(m) = stack.pop() {
            out.push(m);
            stack.extend(self.children(m));
        }
        out
    }
}

struct Compiler<'a> {
    sorts: &'a SortTable,
    funcs: &'a FuncTable,
    plts: &'a Plts,
    consts: &'a BTreeMap<String, Value>,
    nodes: Vec<Node>,
    fixes: Vec<FixDef>,
    vars: Vec<(Sym, Sort)>,
    fix_scope: Vec<(Sym, FixId)>,
}

/// Compiles a formula whose `true*` modalities have been lowered.
pub(crate) fn compile(f: &Formula, plts: &Plts, consts: &BTreeMap<String, Value>) -> Result<Ir, QuantError> {
    let mut c = Compiler {
        sorts: &plts.sorts,
        funcs: &plts.funcs,
        plts,
        consts,
        nodes: vec![],
        fixes: vec![],
        vars: vec![],
        fix_scope: vec![],
    };
    let root = c.formula(f)?;
    let mut ir = Ir {
        nodes: c.nodes,
        fixes: c.fixes,
        root,
    };
    compute_free(&mut ir);
    Ok(ir)
}

impl Compiler<'_> {
    fn push(&mut self, kind: Kind) -> NodeId {
        self.nodes.push(Node {
            kind,
            free: vec![],
            pure: true,
        });
        (self.nodes.len() - 1) as NodeId
    }

    fn sort(&self, r: &SortRef) -> Result<Sort, QuantError> {
        match r {
            SortRef::List(e) => Ok(Sort::List(Box::new(self.sort(e)?))),
            SortRef::Named(n) => match n.as_str() {
                "Bool" => Ok(Sort::Bool),
                "Nat" => Ok(Sort::Nat),
                "Int" => Ok(Sort::Int),
                "Real" => Ok(Sort::Real),
                _ => self
                    .sorts
                    .enum_by_name(n)
                    .map(Sort::Enum)
                    .ok_or_else(|| QuantError::Type(format!("unknown sort {n}"))),
            },
        }
    }

    /// Resolves a data expression in the current scope, substituting
    /// command-line constants for names that are not bound.
    fn expr(&self, e: &Expr) -> Result<(Expr, Sort), QuantError> {
        let mut e = e.clone();
        for v in e.free_vars() {
            if self.vars.iter().any(|(n, _)| *n == v) {
                continue;
            }
            if let Some(val) = self.consts.get(&v.as_str()) {
                e = e.substitute(v, val);
            }
        }
        let mut ctx = TypeCtx::new(self.sorts, self.funcs);
        ctx.vars = self.vars.clone();
        resolve(&e, &ctx).map_err(|err| match err {
            DataError::UnknownName(n) if self.sorts.ctor(&n).is_none() && self.funcs.lookup(&n).is_none() => {
                QuantError::UnboundParameter(n)
            }
            other => QuantError::Type(other.to_string()),
        })
    }

    fn data(&mut self, e: &Expr) -> Result<NodeId, QuantError> {
        let (expr, sort) = self.expr(e)?;
        let boolean = match sort {
            Sort::Bool => true,
            Sort::Nat | Sort::Int | Sort::Real => false,
            other => {
                return Err(QuantError::Type(format!(
                    "formula term of sort {}",
                    other.display(self.sorts)
                )))
            }
        };
        Ok(self.push(Kind::Data { expr, boolean }))
    }

    fn numeric(&self, e: &Expr) -> Result<Expr, QuantError> {
        let (expr, sort) = self.expr(e)?;
        if !sort.is_numeric() {
            return Err(QuantError::Type(format!(
                "expected a number, got sort {}",
                sort.display(self.sorts)
            )));
        }
        Ok(expr)
    }

    fn formula(&mut self, f: &Formula) -> Result<NodeId, QuantError> {
        Ok(match f {
            Formula::Data(e) => self.data(e)?,
            Formula::Add(a, b) => {
                let (a, b) = (self.formula(a)?, self.formula(b)?);
                self.push(Kind::Add(a, b))
            }
            Formula::Sub(a, b) => {
                let (a, b) = (self.formula(a)?, self.formula(b)?);
                self.push(Kind::Sub(a, b))
            }
            Formula::And(a, b) => {
                let (a, b) = (self.formula(a)?, self.formula(b)?);
                self.push(Kind::And(a, b))
            }
            Formula::Or(a, b) => {
                let (a, b) = (self.formula(a)?, self.formula(b)?);
                self.push(Kind::Or(a, b))
            }
            Formula::Scale(e, body) => {
                let e = self.numeric(e)?;
                let body = self.formula(body)?;
                self.push(Kind::Scale(e, body))
            }
            Formula::Diamond(m, body) => self.modal(true, m, body, &[])?,
            Formula::Box(m, body) => self.modal(false, m, body, &[])?,
            Formula::Quant { q, vars, body } => self.quant(*q, vars, body)?,
            Formula::Fix {
                kind,
                name,
                params,
                body,
            } => {
                let mut ps = Vec::with_capacity(params.len());
                let mut init = Vec::with_capacity(params.len());
                for p in params {
                    let sort = self.sort(&p.sort)?;
                    let (e, s) = self.expr(&p.init)?;
                    if !assignable(&s, &sort) {
                        return Err(QuantError::Type(format!(
                            "initial value of {} has sort {}, expected {}",
                            p.name,
                            s.display(self.sorts),
                            sort.display(self.sorts)
                        )));
                    }
                    ps.push((p.name, sort));
                    init.push(e);
                }
                let id = self.fixes.len() as FixId;
                self.fixes.push(FixDef {
                    kind: *kind,
                    name: *name,
                    params: ps.clone(),
                    init,
                    body: 0,
                    outer: vec![],
                });
                let mark = self.vars.len();
                self.vars.extend(ps);
                self.fix_scope.push((*name, id));
                let body = self.formula(body);
                self.fix_scope.pop();
                self.vars.truncate(mark);
                self.fixes[id as usize].body = body?;
                self.push(Kind::Fix(id))
            }
            Formula::Call(name, args) => {
                let fix = self
                    .fix_scope
                    .iter()
                    .rev()
                    .find(|(n, _)| n == name)
                    .map(|(_, f)| *f)
                    .ok_or_else(|| QuantError::Type(format!("unknown fixpoint variable {name}")))?;
                let params = self.fixes[fix as usize].params.clone();
                if params.len() != args.len() {
                    return Err(QuantError::Type(format!(
                        "{name} expects {} argument(s), got {}",
                        params.len(),
                        args.len()
                    )));
                }
                let mut out = Vec::with_capacity(args.len());
                for (a, (p, sort)) in args.iter().zip(&params) {
                    let (e, s) = self.expr(a)?;
                    if !assignable(&s, sort) {
                        return Err(QuantError::Type(format!(
                            "argument {p} of {name} has sort {}, expected {}",
                            s.display(self.sorts),
                            sort.display(self.sorts)
                        )));
                    }
                    out.push(e);
                }
                self.push(Kind::Call { fix, args: out })
            }
        })
    }

    /// Compiles a modality; argument patterns that are bare occurrences of
    /// the variables in `binds` bind those variables.
    fn modal(
        &mut self,
        diamond: bool,
        m: &Modality,
        body: &Formula,
        binds: &[(Sym, Sort)],
    ) -> Result<NodeId, QuantError> {
        let (act, args) = match m {
            Modality::True => (None, &[][..]),
            Modality::TrueStar => return Err(QuantError::UnsupportedRegex("true* must be lowered first".into())),
            Modality::Action { name, args } => {
                let act = self
                    .plts
                    .action_id(name)
                    .ok_or_else(|| QuantError::UnknownAction(name.clone()))?;
                let def = &self.plts.actions[act as usize];
                if def.args.len() != args.len() {
                    return Err(QuantError::Type(format!(
                        "action {name} has {} argument(s), pattern has {}",
                        def.args.len(),
                        args.len()
                    )));
                }
                (Some(act), &args[..])
            }
        };
        let mut pats = Vec::with_capacity(args.len());
        let mark = self.vars.len();
        for (i, a) in args.iter().enumerate() {
            let arg_sort = self.plts.actions[act.unwrap() as usize].args[i].clone();
            if let Expr::Var(v) = a {
                let unbound = !self.vars[mark..].iter().any(|(n, _)| n == v);
                if let Some((_, s)) = binds.iter().find(|(n, _)| n == v) {
                    if unbound {
                        if !(s.conforms_to(&arg_sort) || arg_sort.conforms_to(s)) {
                            return Err(QuantError::Type(format!(
                                "{v} has sort {}, action argument {}",
                                s.display(self.sorts),
                                arg_sort.display(self.sorts)
                            )));
                        }
                        pats.push(Pat::Bind(*v));
                        self.vars.push((*v, s.clone()));
                        continue;
                    }
                }
            }
            let (e, s) = self.expr(a)?;
            if !(assignable(&s, &arg_sort) || s.numeric_join(&arg_sort).is_some()) {
                self.vars.truncate(mark);
                return Err(QuantError::Type(format!(
                    "pattern argument of sort {}, action argument {}",
                    s.display(self.sorts),
                    arg_sort.display(self.sorts)
                )));
            }
            pats.push(Pat::Eq(e));
        }
        let body = self.formula(body);
        self.vars.truncate(mark);
        let body = body?;
        Ok(self.push(Kind::Modal {
            diamond,
            act,
            pats,
            body,
        }))
    }

    fn quant(&mut self, q: Quant, vars: &[(Sym, SortRef)], body: &Formula) -> Result<NodeId, QuantError> {
        let mut typed = Vec::with_capacity(vars.len());
        for (v, r) in vars {
            typed.push((*v, self.sort(r)?));
        }
        // sup x. <a(x)>f is the maximum over a-transitions with x taken
        // from the label; likewise inf with a box.
        let direct = match (q, body) {
            (Quant::Sup, Formula::Diamond(m, f)) => Some((true, m, f)),
            (Quant::Inf, Formula::Box(m, f)) => Some((false, m, f)),
            _ => None,
        };
        if let Some((diamond, m @ Modality::Action { args, .. }, f)) = direct {
            let all_bound = typed
                .iter()
                .all(|(v, _)| args.iter().any(|a| matches!(a, Expr::Var(x) if x == v)));
            if all_bound {
                return self.modal(diamond, m, f, &typed);
            }
        }
        let mut domains = Vec::with_capacity(typed.len());
        for (v, s) in &typed {
            if !self.sorts.is_finite(s) {
                return Err(QuantError::UnboundedQuantifier(v.to_string()));
            }
            let vals = self.sorts.enumerate(s).map_err(|e| QuantError::Type(e.to_string()))?;
            domains.push((*v, vals));
        }
        let mark = self.vars.len();
        self.vars.extend(typed);
        let body = self.formula(body);
        self.vars.truncate(mark);
        let body = body?;
        Ok(self.push(Kind::Quant { q, vars: domains, body }))
    }
}

fn union(a: &mut Vec<Sym>, b: &[Sym]) {
    a.extend_from_slice(b);
    a.sort();
    a.dedup();
}

/// Free variables and purity. Calls depend on the outer variables of their
/// fixpoint, which in turn depend on the calls in its body, hence the loop.
fn compute_free(ir: &mut Ir) {
    loop {
        let mut changed = false;
        for i in 0..ir.nodes.len() {
            let (free, pure) = {
                let n = &ir.nodes[i];
                let node = |k: &NodeId| &ir.nodes[*k as usize];
                let mut free: Vec<Sym> = vec![];
                let mut pure = true;
                match &n.kind {
                    Kind::Data { expr, .. } => free = expr.free_vars(),
                    Kind::Add(a, b) | Kind::Sub(a, b) | Kind::And(a, b) | Kind::Or(a, b) => {
                        free = node(a).free.clone();
                        union(&mut free, &node(b).free);
                        pure = node(a).pure && node(b).pure;
                    }
                    Kind::Scale(e, a) => {
                        free = e.free_vars();
                        union(&mut free, &node(a).free);
                        pure = node(a).pure;
                    }
                    Kind::Modal { pats, body, .. } => {
                        let mut inner = node(body).free.clone();
                        for p in pats {
                            if let Pat::Eq(e) = p {
                                union(&mut inner, &e.free_vars());
                            }
                        }
                        // A pattern expression may read a variable bound
                        // by an earlier pattern; the order does not matter
                        // for the free set.
                        free = inner
                            .into_iter()
                            .filter(|v| !pats.iter().any(|p| matches!(p, Pat::Bind(x) if x == v)))
                            .collect();
                        pure = node(body).pure;
                    }
                    Kind::Quant { vars, body, .. } => {
                        free = node(body)
                            .free
                            .iter()
                            .copied()
                            .filter(|v| !vars.iter().any(|(x, _)| x == v))
                            .collect();
                        pure = node(body).pure;
                    }
                    Kind::Fix(f) => {
                        let def = &ir.fixes[*f as usize];
                        free = def.outer.clone();
                        for e in &def.init {
                            union(&mut free, &e.free_vars());
                        }
                        pure = false;
                    }
                    Kind::Call { fix, args } => {
                        free = ir.fixes[*fix as usize].outer.clone();
                        for e in args {
                            union(&mut free, &e.free_vars());
                        }
                        pure = false;
                    }
                }
                (free, pure)
            };
            let n = &mut ir.nodes[i];
            if n.free != free || n.pure != pure {
                n.free = free;
                n.pure = pure;
                changed = true;
            }
        }
        for f in 0..ir.fixes.len() {
            let def = &ir.fixes[f];
            let outer: Vec<Sym> = ir.nodes[def.body as usize]
                .free
                .iter()
                .copied()
                .filter(|v| !def.params.iter().any(|(p, _)| p == v))
                .collect();
            if outer != def.outer {
                ir.fixes[f].outer = outer;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Rewrites `<true*>f` to `mu X. f || <true>X` and `[true*]f` to
/// `nu X. f && [true]X`.
pub fn lower_formula(f: &Formula, fresh: &mut u32) -> Formula {
    let mut go = |g: &Formula| lower_formula(g, fresh);
    match f {
        Formula::Data(_) | Formula::Call(..) => f.clone(),
        Formula::Add(a, b) => Formula::Add(Box::new(go(a)), Box::new(go(b))),
        Formula::Sub(a, b) => Formula::Sub(Box::new(go(a)), Box::new(go(b))),
        Formula::And(a, b) => Formula::And(Box::new(go(a)), Box::new(go(b))),
        Formula::Or(a, b) => Formula::Or(Box::new(go(a)), Box::new(go(b))),
        Formula::Scale(e, a) => Formula::Scale(e.clone(), Box::new(go(a))),
        Formula::Quant { q, vars, body } => Formula::Quant {
            q: *q,
            vars: vars.clone(),
            body: Box::new(go(body)),
        },
        Formula::Fix {
            kind,
            name,
            params,
            body,
        } => Formula::Fix {
            kind: *kind,
            name: *name,
            params: params.clone(),
            body: Box::new(go(body)),
        },
        Formula::Diamond(Modality::TrueStar, body) | Formula::Box(Modality::TrueStar, body) => {
            let diamond = matches!(f, Formula::Diamond(..));
            let body = go(body);
            *fresh += 1;
            let x = Sym::new(&format!("_reach{fresh}"));
            let step = Box::new(Formula::Call(x, vec![]));
            let (kind, inner) = if diamond {
                (
                    FixKind::Mu,
                    Formula::Or(Box::new(body), Box::new(Formula::Diamond(Modality::True, step))),
                )
            } else {
                (
                    FixKind::Nu,
                    Formula::And(Box::new(body), Box::new(Formula::Box(Modality::True, step))),
                )
            };
            Formula::Fix {
                kind,
                name: x,
                params: vec![],
                body: Box::new(inner),
            }
        }
        Formula::Diamond(m, a) => Formula::Diamond(m.clone(), Box::new(go(a))),
        Formula::Box(m, a) => Formula::Box(m.clone(), Box::new(go(a))),
    }
}
