//! Source rendering. Output reparses to the same tree (modulo locations).

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) | Expr::AddrOf(_) => 7,
        Expr::Lval(lv) => lvalue_prec(lv),
        Expr::Int(v) if *v < 0 => 7,
        Expr::Int(_) | Expr::Null => 8,
    }
}

fn lvalue_prec(lv: &Lvalue) -> u8 {
    match lv {
        Lvalue::Deref(_) => 7,
        _ => 8,
    }
}

fn wrap(s: String, prec: u8, min: u8) -> String {
    if prec < min {
        format!("({s})")
    } else {
        s
    }
}

pub(crate) fn expr_at(e: &Expr, min: u8) -> String {
    let s = match e {
        Expr::Int(v) => v.to_string(),
        Expr::Null => "NULL".to_string(),
        Expr::Lval(lv) => return lvalue_at(lv, min),
        Expr::AddrOf(lv) => format!("&{}", lvalue_at(lv, 7)),
        Expr::Unary(op, x) => {
            let inner = expr_at(x, 7);
            let inner = if inner.starts_with('-') {
                format!("({inner})")
            } else {
                inner
            };
            match op {
                UnOp::Neg => format!("-{inner}"),
                UnOp::Not => format!("!{inner}"),
            }
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            format!("{} {} {}", expr_at(l, p), op.symbol(), expr_at(r, p + 1))
        }
    };
    wrap(s, expr_prec(e), min)
}

pub fn expr_to_string(e: &Expr) -> String {
    expr_at(e, 0)
}

fn lvalue_at(lv: &Lvalue, min: u8) -> String {
    let s = match lv {
        Lvalue::Var(n) => n.clone(),
        Lvalue::Field(base, f) => match &**base {
            Lvalue::Deref(e) => format!("{}->{f}", expr_at(e, 8)),
            b => format!("{}.{f}", lvalue_at(b, 8)),
        },
        Lvalue::Index(base, i) => format!("{}[{}]", lvalue_at(base, 8), expr_at(i, 0)),
        Lvalue::Deref(e) => format!("*{}", expr_at(e, 7)),
    };
    wrap(s, lvalue_prec(lv), min)
}

pub fn lvalue_to_string(lv: &Lvalue) -> String {
    lvalue_at(lv, 0)
}

/// Base type text and array suffix, e.g. `("char", "[4][8]")`.
fn type_parts(t: &TypeRef) -> (String, String) {
    match t {
        TypeRef::Int => ("int".into(), String::new()),
        TypeRef::Char => ("char".into(), String::new()),
        TypeRef::Void => ("void".into(), String::new()),
        TypeRef::Enum(n) => (format!("enum {n}"), String::new()),
        TypeRef::Record(n) => (format!("struct {n}"), String::new()),
        TypeRef::Pointer(inner) => {
            let (b, s) = type_parts(inner);
            (format!("{b}*"), s)
        }
        TypeRef::Array(inner, n) => {
            let (b, s) = type_parts(inner);
            (b, format!("[{}]{s}", expr_to_string(n)))
        }
    }
}

pub fn type_to_string(t: &TypeRef) -> String {
    let (b, s) = type_parts(t);
    format!("{b}{s}")
}

pub fn declaration(t: &TypeRef, name: &str) -> String {
    let (b, s) = type_parts(t);
    if name.is_empty() {
        format!("{b}{s}")
    } else {
        format!("{b} {name}{s}")
    }
}

/// Annotation text to interleave with the program when rendering. Each
/// returned string is the inside of one `/*@ ... */` comment.
pub trait AnnotationSource {
    fn contract(&self, f: &FunctionDef) -> Option<String> {
        f.contract.clone()
    }
    fn before(&self, _func: &str, _s: &Stmt) -> Vec<String> {
        Vec::new()
    }
    fn after(&self, _func: &str, _s: &Stmt) -> Vec<String> {
        Vec::new()
    }
    /// Whether global annotation blocks are rendered.
    fn keep_global_annotations(&self) -> bool {
        true
    }
}

/// Renders the annotations stored in the tree itself.
pub struct Verbatim;

impl AnnotationSource for Verbatim {}

pub fn pretty_print(p: &Program) -> String {
    render(p, &Verbatim)
}

pub fn render(p: &Program, ann: &dyn AnnotationSource) -> String {
    let mut out = String::new();
    for c in &p.constants {
        let _ = writeln!(out, "const int {} = {};", c.name, expr_to_string(&c.value));
    }
    for e in &p.enums {
        let mut next = 0;
        let vs: Vec<String> = e
            .variants
            .iter()
            .map(|(n, v)| {
                let s = if *v == next {
                    n.clone()
                } else {
                    format!("{n} = {v}")
                };
                next = v + 1;
                s
            })
            .collect();
        let _ = writeln!(out, "enum {} {{ {} }};", e.name, vs.join(", "));
    }
    for r in &p.records {
        let _ = writeln!(out, "struct {} {{", r.name);
        for (f, t) in &r.fields {
            let _ = writeln!(out, "{INDENT}{};", declaration(t, f));
        }
        out.push_str("};\n");
    }
    for g in &p.globals {
        match &g.init {
            Some(i) => {
                let _ = writeln!(
                    out,
                    "{} = {};",
                    declaration(&g.ty, &g.name),
                    expr_to_string(i)
                );
            }
            None => {
                let _ = writeln!(out, "{};", declaration(&g.ty, &g.name));
            }
        }
    }
    if ann.keep_global_annotations() {
        for a in &p.annotations {
            let _ = writeln!(out, "/*@{a}*/");
        }
    }
    for f in &p.functions {
        out.push('\n');
        function(&mut out, f, ann);
    }
    out
}

pub fn render_function(f: &FunctionDef, ann: &dyn AnnotationSource) -> String {
    let mut out = String::new();
    function(&mut out, f, ann);
    out
}

fn function(out: &mut String, f: &FunctionDef, ann: &dyn AnnotationSource) {
    if let Some(c) = ann.contract(f) {
        let _ = writeln!(out, "/*@{c}*/");
    }
    let params: Vec<String> = f.params.iter().map(|(n, t)| declaration(t, n)).collect();
    let sig = format!(
        "{}({})",
        declaration(&f.return_type, &f.name),
        params.join(", ")
    );
    if f.is_declared_only {
        let _ = writeln!(out, "{sig};");
        return;
    }
    let _ = writeln!(out, "{sig} {{");
    block(out, &f.name, &f.body, 1, ann);
    out.push_str("}\n");
}

fn annot_lines(out: &mut String, texts: Vec<String>, depth: usize) {
    for t in texts {
        let _ = writeln!(out, "{}/*@{t}*/", INDENT.repeat(depth));
    }
}

/// The statement that initializes the local declared by `decl`, if `next` is one.
fn is_initializer(decl: &Stmt, next: &Stmt) -> bool {
    let StmtKind::Decl { name, ty } = &decl.kind else {
        return false;
    };
    if matches!(ty, TypeRef::Array(..)) {
        return false;
    }
    match &next.kind {
        StmtKind::Assign {
            lhs: Lvalue::Var(n),
            ..
        } => n == name,
        StmtKind::Call {
            dest: Some(Lvalue::Var(n)),
            ..
        } => n == name,
        _ => false,
    }
}

fn block(out: &mut String, func: &str, stmts: &[Stmt], depth: usize, ann: &dyn AnnotationSource) {
    let pad = INDENT.repeat(depth);
    let mut i = 0;
    while i < stmts.len() {
        let s = &stmts[i];
        annot_lines(out, ann.before(func, s), depth);
        if let (StmtKind::Decl { name, ty }, Some(next)) = (&s.kind, stmts.get(i + 1)) {
            if is_initializer(s, next)
                && ann.after(func, s).is_empty()
                && ann.before(func, next).is_empty()
            {
                let rhs = match &next.kind {
                    StmtKind::Assign { rhs, .. } => expr_to_string(rhs),
                    StmtKind::Call { callee, args, .. } => call_text(callee, args),
                    _ => unreachable!(),
                };
                let _ = writeln!(out, "{pad}{} = {rhs};", declaration(ty, name));
                annot_lines(out, ann.after(func, next), depth);
                i += 2;
                continue;
            }
        }
        match &s.kind {
            StmtKind::Decl { name, ty } => {
                let _ = writeln!(out, "{pad}{};", declaration(ty, name));
            }
            StmtKind::Assign { lhs, rhs } => {
                let _ = writeln!(
                    out,
                    "{pad}{} = {};",
                    lvalue_to_string(lhs),
                    expr_to_string(rhs)
                );
            }
            StmtKind::Call { dest, callee, args } => {
                let call = call_text(callee, args);
                match dest {
                    Some(d) => {
                        let _ = writeln!(out, "{pad}{} = {call};", lvalue_to_string(d));
                    }
                    None => {
                        let _ = writeln!(out, "{pad}{call};");
                    }
                }
            }
            StmtKind::Return(None) => {
                let _ = writeln!(out, "{pad}return;");
            }
            StmtKind::Return(Some(e)) => {
                let _ = writeln!(out, "{pad}return {};", expr_to_string(e));
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let _ = writeln!(out, "{pad}if ({}) {{", expr_to_string(cond));
                block(out, func, then_branch, depth + 1, ann);
                if else_branch.is_empty() {
                    let _ = writeln!(out, "{pad}}}");
                } else {
                    let _ = writeln!(out, "{pad}}} else {{");
                    block(out, func, else_branch, depth + 1, ann);
                    let _ = writeln!(out, "{pad}}}");
                }
            }
            StmtKind::While { cond, body } => {
                let _ = writeln!(out, "{pad}while ({}) {{", expr_to_string(cond));
                block(out, func, body, depth + 1, ann);
                let _ = writeln!(out, "{pad}}}");
            }
            StmtKind::Block(b) => {
                let _ = writeln!(out, "{pad}{{");
                block(out, func, b, depth + 1, ann);
                let _ = writeln!(out, "{pad}}}");
            }
            StmtKind::Annotation(t) => {
                let _ = writeln!(out, "{pad}/*@{t}*/");
            }
        }
        annot_lines(out, ann.after(func, s), depth);
        i += 1;
    }
}

fn call_text(callee: &str, args: &[Expr]) -> String {
    let a: Vec<String> = args.iter().map(expr_to_string).collect();
    format!("{callee}({})", a.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::parse_program;

    fn roundtrip(src: &str) {
        let p = parse_program(src).unwrap();
        let printed = pretty_print(&p);
        let q = parse_program(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(p.without_locs(), q.without_locs(), "\n{printed}");
    }

    #[test]
    fn precedence_is_preserved() {
        roundtrip("void f() { x = (a + b) * c - (d - e); y = -(-z); w = !(a && b) || c; }");
    }

    #[test]
    fn pointers_and_fields() {
        roundtrip("void f() { (*p).x = 1; q = &a[2].y; r = *p->n; (*pp)[1] = 2; }");
    }

    #[test]
    fn declarations_with_initializers_merge() {
        let p = parse_program("void f() { struct Page* fp = find(); int k; k = 2; }").unwrap();
        let s = pretty_print(&p);
        assert!(s.contains("struct Page* fp = find();"), "{s}");
        assert!(s.contains("int k = 2;"), "{s}");
    }

    #[test]
    fn no_annotations_means_plain_minic() {
        let p = parse_program("int g; void f() { g = 1; }").unwrap();
        assert!(!pretty_print(&p).contains("/*@"));
    }

    #[test]
    fn top_level_items() {
        roundtrip(
            "const int N = 3; enum E { A, B = 5, C }; struct S { int a[N]; struct S* n; };
             int g = 2; enum E e = B; struct S* p = NULL; char buf[2][N];
             /*@ meta X: \\forall function f; \\weak_invariant(f), 1 == 1; */
             int h(int, char* c); void k(void) { if (g) { g = 1; } else { return; } while (g < 3) g++; }",
        );
    }
}
