use std::fs;
use std::path::PathBuf;

use spinspec::speclang::*;

fn asset_dir(kind: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets").join(kind)
}

fn assets(kind: &str) -> Vec<(String, String)> {
    let mut out: Vec<_> = fs::read_dir(asset_dir(kind))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_stem().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn model_text(name: &str) -> String {
    fs::read_to_string(asset_dir("models").join(format!("{name}.psm"))).unwrap()
}

#[test]
fn one_column_parses() {
    let m = parse_model(&model_text("one_column")).unwrap();
    assert_eq!(m.sorts.len(), 1);
    assert_eq!(m.acts.len(), 3);
    assert_eq!(m.procs.len(), 1);
    assert_eq!(m.inits.len(), 1);
}

#[test]
fn reel_model_shape() {
    let m = parse_model(&model_text("reel_always_hold")).unwrap();
    assert_eq!(m.procs[0].params.len(), 8);
    assert_eq!(m.globs.len(), 1);
    assert_eq!(m.pragma("features"), Some("s1,s2,s3,s4 special star"));
}

#[test]
fn every_model_validates() {
    let all = assets("models");
    assert_eq!(all.len(), 9);
    for (name, text) in all {
        let spec = parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let diags = validate_model(&spec);
        assert!(diags.is_empty(), "{name}: {diags:?}");
    }
}

#[test]
fn every_formula_parses() {
    for (name, text) in assets("formulas") {
        parse_formula(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn models_round_trip() {
    for (name, text) in assets("models") {
        let a = parse_model(&text).unwrap();
        let printed = model_to_string(&a);
        let b = parse_model(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn formulas_round_trip() {
    for (name, text) in assets("formulas") {
        let a = parse_formula(&text).unwrap();
        let printed = formula_spec_to_string(&a);
        let b = parse_formula(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn formula6_has_one_nat_parameter() {
    let f = parse_formula(&fs::read_to_string(asset_dir("formulas").join("formula6.qmf")).unwrap()).unwrap();
    let Formula::Scale(_, body) = f.formula else {
        panic!("expected a scaled fixpoint");
    };
    let Formula::Fix { params, .. } = *body else {
        panic!("expected a fixpoint");
    };
    assert_eq!(params.len(), 1);
    assert_eq!(params[0].name.as_str(), "rounds");
    assert_eq!(params[0].sort, SortRef::Named("Nat".into()));
}

#[test]
fn empty_process_body_is_a_syntax_error() {
    let e = parse_model("act a; proc P = ; init P;").unwrap_err();
    assert!(matches!(e, SpecError::Syntax { line: 1, .. }), "{e:?}");
}

#[test]
fn fixpoint_arity_mismatch() {
    let e = parse_formula("mu X. X(1)").unwrap_err();
    match e {
        SpecError::Validation(d) => assert_eq!(d[0].kind, DiagKind::ArityMismatch),
        other => panic!("{other:?}"),
    }
}

fn kinds(src: &str) -> Vec<DiagKind> {
    validate_model(&parse_model(src).unwrap())
        .into_iter()
        .map(|d| d.kind)
        .collect()
}

#[test]
fn action_arity_mismatch() {
    assert_eq!(
        kinds("act win; proc P = win(1) . P; init P;"),
        vec![DiagKind::ArityMismatch]
    );
}

#[test]
fn unguarded_nat_distribution() {
    assert_eq!(
        kinds("act d: Nat; init dist i: Nat[1/24] . d(i) . delta;"),
        vec![DiagKind::UnboundedDistribution]
    );
    assert!(kinds("act d: Nat; init dist i: Nat[if(i < 24, 1/24, 0)] . d(i) . delta;").is_empty());
}

#[test]
fn structural_errors() {
    assert_eq!(kinds("act a; proc P = a . P;"), vec![DiagKind::MissingInit]);
    assert_eq!(
        kinds("act a; proc P = a . P; init P; init P;"),
        vec![DiagKind::MultipleInit]
    );
    assert_eq!(kinds("act a; proc P = Q . a; init P;"), vec![DiagKind::UnknownName]);
    assert_eq!(
        kinds("sort S = struct x | x; act a; init a;"),
        vec![DiagKind::DuplicateName]
    );
    assert_eq!(
        kinds("map f: Nat -> Nat; act a; init a;"),
        vec![DiagKind::MissingEquation]
    );
    assert_eq!(
        kinds("act a: Nat; init sum n: Nat . a(n);"),
        vec![DiagKind::InfiniteSort]
    );
    assert_eq!(kinds("act a; init (1 + 1) -> a;"), vec![DiagKind::TypeMismatch]);
}

#[test]
fn literal_three_column_sequencing() {
    // `(c -> win <> lose) . Play` puts Play behind both branches.
    let m = load_model_text(&model_text("three_column")).unwrap();
    let text = format!("{:?}", m.procs[0].body);
    assert_eq!(text.matches("Call").count(), 2, "{text}");
}
