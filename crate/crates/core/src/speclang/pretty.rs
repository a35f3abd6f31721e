//! Printers for both languages. `parse(print(x)) == x` for parsed ASTs.

use std::fmt::Write;

use crate::datalang::{BinOp, Expr, UnOp, Value};
use crate::symbol::Sym;

use super::ast::*;

fn bin_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(op, ..) => bin_prec(*op),
        Expr::In(..) => 3,
        Expr::Un(..) => 6,
        Expr::Lit(Value::Int(i)) if *i < 0 => 6,
        Expr::Lit(Value::Real(_)) => 5,
        Expr::Index(..) => 7,
        _ => 8,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_paren(out: &mut String, e: &Expr, paren: bool) {
    if paren {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Lit(v) => match v {
            Value::Bool(b) => write!(out, "{b}").unwrap(),
            Value::Int(i) => write!(out, "{i}").unwrap(),
            Value::Real(r) => write!(out, "{}/{}", r.numer(), r.denom()).unwrap(),
            Value::Enum(ev) => write!(out, "enum{}_{}", ev.sort, ev.ctor).unwrap(),
            Value::List(items) => {
                let items: Vec<Expr> = items.iter().cloned().map(Expr::Lit).collect();
                out.push('[');
                write_list(out, &items);
                out.push(']');
            }
        },
        Expr::Var(s) => write!(out, "{s}").unwrap(),
        Expr::App(f, args) => {
            write!(out, "{f}(").unwrap();
            write_list(out, args);
            out.push(')');
        }
        Expr::Func(id, args) => {
            write!(out, "f{}(", id.0).unwrap();
            write_list(out, args);
            out.push(')');
        }
        Expr::Builtin(b, args) => {
            write!(out, "{}(", b.name()).unwrap();
            write_list(out, args);
            out.push(')');
        }
        Expr::Bin(op, a, b) => {
            let p = bin_prec(*op);
            let cmp = op.is_comparison();
            write_paren(out, a, expr_prec(a) < p || (cmp && expr_prec(a) == p));
            write!(out, " {} ", op.symbol()).unwrap();
            write_paren(out, b, expr_prec(b) <= p);
        }
        Expr::Un(op, a) => {
            out.push(if *op == UnOp::Neg { '-' } else { '!' });
            // `-(1)` would reparse as a negative literal.
            let lit = *op == UnOp::Neg && matches!(**a, Expr::Lit(Value::Int(_)));
            write_paren(out, a, expr_prec(a) < 6 || lit);
        }
        Expr::If(c, a, b) => {
            out.push_str("if(");
            write_list(out, &[(**c).clone(), (**a).clone(), (**b).clone()]);
            out.push(')');
        }
        Expr::List(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        Expr::Index(l, i) => {
            write_paren(out, l, expr_prec(l) < 7);
            match &**i {
                Expr::Lit(Value::Int(k)) if *k >= 0 => write!(out, ".{k}").unwrap(),
                _ => {
                    out.push_str(".(");
                    write_expr(out, i);
                    out.push(')');
                }
            }
        }
        Expr::In(x, set) => {
            write_paren(out, x, expr_prec(x) <= 3);
            out.push_str(" in {");
            write_list(out, set);
            out.push('}');
        }
    }
}

pub fn sort_ref_to_string(s: &SortRef) -> String {
    match s {
        SortRef::Named(n) => n.clone(),
        SortRef::List(e) => format!("List({})", sort_ref_to_string(e)),
    }
}

fn write_typed_vars(out: &mut String, vars: &[(Sym, SortRef)]) {
    let mut i = 0;
    while i < vars.len() {
        if i > 0 {
            out.push_str(", ");
        }
        let mut j = i;
        while j + 1 < vars.len() && vars[j + 1].1 == vars[i].1 {
            j += 1;
        }
        let names: Vec<String> = vars[i..=j].iter().map(|(n, _)| n.to_string()).collect();
        write!(out, "{}: {}", names.join(", "), sort_ref_to_string(&vars[i].1)).unwrap();
        i = j + 1;
    }
}

fn proc_prec(p: &ProcTerm) -> u8 {
    match p {
        ProcTerm::Sum { .. } | ProcTerm::Dist { .. } => 0,
        ProcTerm::Choice(..) => 1,
        ProcTerm::Cond { .. } => 2,
        ProcTerm::Seq(..) => 3,
        ProcTerm::Delta | ProcTerm::Call { .. } => 4,
    }
}

pub fn proc_to_string(p: &ProcTerm) -> String {
    let mut s = String::new();
    write_proc(&mut s, p, 0, true);
    s
}

/// `min` is the lowest precedence allowed without parentheses; binders
/// extend to the right and are only safe where nothing follows.
fn write_proc(out: &mut String, p: &ProcTerm, min: u8, rightmost: bool) {
    let binder = proc_prec(p) == 0;
    if (binder && !rightmost) || (!binder && proc_prec(p) < min) {
        out.push('(');
        write_proc(out, p, 0, true);
        out.push(')');
        return;
    }
    match p {
        ProcTerm::Delta => out.push_str("delta"),
        ProcTerm::Call { name, args, .. } => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                write_list(out, args);
                out.push(')');
            }
        }
        ProcTerm::Seq(a, b) => {
            write_proc(out, a, 4, false);
            out.push_str(" . ");
            write_proc(out, b, 3, rightmost);
        }
        ProcTerm::Choice(a, b) => {
            write_proc(out, a, 1, false);
            out.push_str(" + ");
            write_proc(out, b, 2, rightmost);
        }
        ProcTerm::Cond { cond, then, els } => {
            // A bracketed guard keeps `L.(i)` from reading as sequencing.
            out.push('(');
            write_expr(out, cond);
            out.push_str(") -> ");
            let then_min = if matches!(**then, ProcTerm::Cond { .. }) { 3 } else { 2 };
            write_proc(out, then, then_min, rightmost && els.is_none());
            if let Some(e) = els {
                out.push_str(" <> ");
                write_proc(out, e, 2, rightmost);
            }
        }
        ProcTerm::Sum { vars, body } => {
            out.push_str("sum ");
            write_typed_vars(out, vars);
            out.push_str(" . ");
            write_proc(out, body, 0, true);
        }
        ProcTerm::Dist { vars, weight, body, .. } => {
            out.push_str("dist ");
            write_typed_vars(out, vars);
            out.push('[');
            write_expr(out, weight);
            out.push_str("] . ");
            write_proc(out, body, 0, true);
        }
    }
}

pub fn model_to_string(m: &ModelSpec) -> String {
    let mut out = String::new();
    for p in &m.pragmas {
        writeln!(out, "%@ {p}").unwrap();
    }
    if !m.sorts.is_empty() {
        out.push_str("sort\n");
        for s in &m.sorts {
            match &s.body {
                SortBody::Struct(c) => writeln!(out, "  {} = struct {};", s.name, c.join(" | ")),
                SortBody::Alias(r) => writeln!(out, "  {} = {};", s.name, sort_ref_to_string(r)),
            }
            .unwrap();
        }
    }
    if !m.maps.is_empty() {
        out.push_str("map\n");
        for d in &m.maps {
            let args: Vec<String> = d.args.iter().map(sort_ref_to_string).collect();
            if args.is_empty() {
                writeln!(out, "  {}: {};", d.name, sort_ref_to_string(&d.result)).unwrap();
            } else {
                writeln!(
                    out,
                    "  {}: {} -> {};",
                    d.name,
                    args.join(" # "),
                    sort_ref_to_string(&d.result)
                )
                .unwrap();
            }
        }
    }
    if !m.vars.is_empty() {
        out.push_str("var\n");
        for v in &m.vars {
            writeln!(out, "  {}: {};", v.name, sort_ref_to_string(&v.sort)).unwrap();
        }
    }
    if !m.eqns.is_empty() {
        out.push_str("eqn\n");
        for e in &m.eqns {
            out.push_str("  ");
            out.push_str(&e.name);
            if !e.params.is_empty() {
                let ps: Vec<String> = e.params.iter().map(|p| p.to_string()).collect();
                write!(out, "({})", ps.join(", ")).unwrap();
            }
            out.push_str(" = ");
            write_expr(&mut out, &e.body);
            out.push_str(";\n");
        }
    }
    if !m.acts.is_empty() {
        out.push_str("act\n");
        for a in &m.acts {
            if a.args.is_empty() {
                writeln!(out, "  {};", a.name).unwrap();
            } else {
                let args: Vec<String> = a.args.iter().map(sort_ref_to_string).collect();
                writeln!(out, "  {}: {};", a.name, args.join(" # ")).unwrap();
            }
        }
    }
    if !m.globs.is_empty() {
        out.push_str("glob\n");
        for g in &m.globs {
            writeln!(out, "  {}: {};", g.name, sort_ref_to_string(&g.sort)).unwrap();
        }
    }
    if !m.procs.is_empty() {
        out.push_str("proc\n");
        for p in &m.procs {
            out.push_str("  ");
            out.push_str(&p.name);
            if !p.params.is_empty() {
                out.push('(');
                write_typed_vars(&mut out, &p.params);
                out.push(')');
            }
            out.push_str(" = ");
            write_proc(&mut out, &p.body, 0, true);
            out.push_str(";\n");
        }
    }
    for (i, _) in &m.inits {
        out.push_str("init ");
        write_proc(&mut out, i, 0, true);
        out.push_str(";\n");
    }
    out
}

fn formula_prec(f: &Formula) -> u8 {
    match f {
        Formula::Quant { .. } | Formula::Fix { .. } => 0,
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Add(..) | Formula::Sub(..) => 4,
        Formula::Scale(..) => 5,
        Formula::Diamond(..) | Formula::Box(..) => 6,
        Formula::Data(e) => expr_prec(e),
        Formula::Call(..) => 8,
    }
}

fn write_modality(out: &mut String, m: &Modality) {
    match m {
        Modality::True => out.push_str("true"),
        Modality::TrueStar => out.push_str("true*"),
        Modality::Action { name, args } => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                write_list(out, args);
                out.push(')');
            }
        }
    }
}

pub fn formula_to_string(f: &Formula) -> String {
    let mut s = String::new();
    write_formula(&mut s, f, 0, true);
    s
}

pub fn formula_spec_to_string(f: &FormulaSpec) -> String {
    let mut s = String::new();
    for p in &f.pragmas {
        writeln!(s, "%@ {p}").unwrap();
    }
    write_formula(&mut s, &f.formula, 0, true);
    s.push('\n');
    s
}

fn write_formula(out: &mut String, f: &Formula, min: u8, rightmost: bool) {
    let prec = formula_prec(f);
    let binder = prec == 0;
    if (binder && !rightmost) || (!binder && prec < min) {
        out.push('(');
        write_formula(out, f, 0, true);
        out.push(')');
        return;
    }
    let infix = |out: &mut String, a: &Formula, op: &str, b: &Formula, p: u8| {
        write_formula(out, a, p, false);
        write!(out, " {op} ").unwrap();
        write_formula(out, b, p + 1, rightmost);
    };
    match f {
        Formula::Data(e) => write_expr(out, e),
        Formula::Or(a, b) => infix(out, a, "||", b, 1),
        Formula::And(a, b) => infix(out, a, "&&", b, 2),
        Formula::Add(a, b) => infix(out, a, "+", b, 4),
        Formula::Sub(a, b) => infix(out, a, "-", b, 4),
        Formula::Scale(c, g) => {
            write_paren(out, c, expr_prec(c) < 5);
            out.push_str(" * ");
            write_formula(out, g, 6, rightmost);
        }
        Formula::Diamond(m, g) => {
            out.push('<');
            write_modality(out, m);
            out.push('>');
            write_formula(out, g, 6, rightmost);
        }
        Formula::Box(m, g) => {
            out.push('[');
            write_modality(out, m);
            out.push(']');
            write_formula(out, g, 6, rightmost);
        }
        Formula::Quant { q, vars, body } => {
            out.push_str(match q {
                Quant::Sup => "sup ",
                Quant::Inf => "inf ",
                Quant::Sum => "sum ",
            });
            write_typed_vars(out, vars);
            out.push_str(". ");
            write_formula(out, body, 0, true);
        }
        Formula::Fix {
            kind,
            name,
            params,
            body,
        } => {
            out.push_str(if *kind == FixKind::Mu { "mu " } else { "nu " });
            write!(out, "{name}").unwrap();
            if !params.is_empty() {
                out.push('(');
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write!(out, "{}: {} = ", p.name, sort_ref_to_string(&p.sort)).unwrap();
                    write_expr(out, &p.init);
                }
                out.push(')');
            }
            out.push_str(". ");
            write_formula(out, body, 0, true);
        }
        Formula::Call(name, args) => {
            write!(out, "{name}").unwrap();
            if !args.is_empty() {
                out.push('(');
                write_list(out, args);
                out.push(')');
            }
        }
    }
}
