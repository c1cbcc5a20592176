//! Three-address style normalization.
//!
//! After normalization every memory access is syntactically visible:
//!
//! * an assignment has a register-addressed left-hand side and a right-hand
//!   side that is either register-only or a single register-addressed load;
//! * branch and loop conditions, call arguments and return values read no
//!   memory (loop conditions are recomputed at the end of each iteration);
//! * `&&`/`||` whose right operand reads memory become nested `if`s, so only
//!   evaluated reads remain;
//! * a call result stored to memory goes through a temporary.
//!
//! Temporaries are named `__tN`, declared at the top of the function body and
//! are registers by construction.

mod access;

use std::collections::BTreeMap;

use crate::minic::types::{is_temp, NameKind, TEMP_PREFIX};
use crate::minic::{
    typecheck, BinOp, Expr, FunctionDef, Lvalue, Program, Scope, Stmt, StmtKind, Ty, TypeRef,
    TypedProgram,
};

pub use access::{classify_accesses, AccessInfo, AccessMap, LocDesc};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedProgram {
    pub typed: TypedProgram,
    /// Temporaries of each defined function, in declaration order.
    pub temp_vars: BTreeMap<String, Vec<String>>,
}

impl NormalizedProgram {
    pub fn program(&self) -> &Program {
        &self.typed.program
    }
}

pub fn normalize_program(tp: &TypedProgram) -> NormalizedProgram {
    let mut out = tp.program.clone();
    out.annotations.clear();
    let mut temp_vars = BTreeMap::new();
    for f in &mut out.functions {
        f.contract = None;
        if !f.has_body() {
            continue;
        }
        let temps = normalize_function(tp, f);
        temp_vars.insert(f.name.clone(), temps);
    }
    out.renumber();
    let typed = typecheck(&out).unwrap_or_else(|errs| {
        panic!(
            "normalization produced an ill-typed program: {errs:?}\n{}",
            crate::minic::pretty_print(&out)
        )
    });
    NormalizedProgram { typed, temp_vars }
}

fn normalize_function(tp: &TypedProgram, f: &mut FunctionDef) -> Vec<String> {
    let mut n = FnNorm {
        sc: Scope::function(&tp.env, &f.name),
        next: 1,
        temps: Vec::new(),
        line: f.line,
    };
    let mut existing = Vec::new();
    crate::minic::walk_stmts(&f.body, &mut |s| {
        if let StmtKind::Decl { name, ty } = &s.kind {
            if is_temp(name) {
                existing.push((name.clone(), ty.clone()));
            }
        }
    });
    for (name, _) in &existing {
        let k: usize = name[TEMP_PREFIX.len()..].parse().unwrap_or(0);
        n.next = n.next.max(k + 1);
    }
    let body = n.block(&f.body);
    let mut decls: Vec<(usize, String, TypeRef)> = existing
        .into_iter()
        .map(|(name, ty)| (name[TEMP_PREFIX.len()..].parse().unwrap_or(0), name, ty))
        .collect();
    for (name, ty) in &n.temps {
        decls.push((
            name[TEMP_PREFIX.len()..].parse().unwrap_or(0),
            name.clone(),
            type_ref(ty),
        ));
    }
    decls.sort_by_key(|d| d.0);
    let names = decls.iter().map(|d| d.1.clone()).collect();
    let mut new_body: Vec<Stmt> = decls
        .into_iter()
        .map(|(_, name, ty)| Stmt::at_line(StmtKind::Decl { name, ty }, f.line))
        .collect();
    new_body.extend(body);
    f.body = new_body;
    names
}

/// Source form of a resolved type.
pub fn type_ref(t: &Ty) -> TypeRef {
    match t {
        Ty::Int | Ty::Null => TypeRef::Int,
        Ty::Char => TypeRef::Char,
        Ty::Void => TypeRef::Void,
        Ty::Enum(n) => TypeRef::Enum(n.clone()),
        Ty::Record(n) => TypeRef::Record(n.clone()),
        Ty::Ptr(t) => TypeRef::ptr(type_ref(t)),
        Ty::Array(t, n) => TypeRef::Array(Box::new(type_ref(t)), Box::new(Expr::Int(*n as i64))),
    }
}

struct FnNorm<'a> {
    sc: Scope<'a>,
    next: usize,
    temps: Vec<(String, Ty)>,
    line: u32,
}

/// Whether `name` denotes storage in memory (a global or a memory local).
pub(crate) fn is_memory_var(sc: &Scope<'_>, name: &str) -> bool {
    matches!(
        sc.resolve(name),
        Some(NameKind::Global(_) | NameKind::LocalMemory(_))
    )
}

/// Whether evaluating `e` loads from memory.
pub(crate) fn expr_reads_memory(sc: &Scope<'_>, e: &Expr) -> bool {
    match e {
        Expr::Int(_) | Expr::Null => false,
        Expr::Lval(Lvalue::Var(n)) => is_memory_var(sc, n),
        Expr::Lval(_) => true,
        Expr::AddrOf(lv) => addr_reads_memory(sc, lv),
        Expr::Unary(_, x) => expr_reads_memory(sc, x),
        Expr::Binary(_, l, r) => expr_reads_memory(sc, l) || expr_reads_memory(sc, r),
    }
}

/// Whether computing the address of `lv` loads from memory.
pub(crate) fn addr_reads_memory(sc: &Scope<'_>, lv: &Lvalue) -> bool {
    match lv {
        Lvalue::Var(_) => false,
        Lvalue::Field(b, _) => addr_reads_memory(sc, b),
        Lvalue::Index(b, i) => {
            let base = if base_is_array(sc, b) {
                addr_reads_memory(sc, b)
            } else {
                expr_reads_memory(sc, &Expr::Lval((**b).clone()))
            };
            base || expr_reads_memory(sc, i)
        }
        Lvalue::Deref(e) => expr_reads_memory(sc, e),
    }
}

pub(crate) fn base_is_array(sc: &Scope<'_>, b: &Lvalue) -> bool {
    matches!(sc.lvalue_type(b), Ok(Ty::Array(..)))
}

impl FnNorm<'_> {
    fn fresh(&mut self, ty: Ty) -> String {
        let name = format!("{TEMP_PREFIX}{}", self.next);
        self.next += 1;
        self.temps.push((name.clone(), ty));
        name
    }

    fn ty(&self, e: &Expr) -> Ty {
        self.sc
            .expr_type(e)
            .expect("normalizing a typechecked program")
    }

    fn assign(&self, lhs: Lvalue, rhs: Expr) -> Stmt {
        Stmt::at_line(StmtKind::Assign { lhs, rhs }, self.line)
    }

    fn block(&mut self, stmts: &[Stmt]) -> Vec<Stmt> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, &mut out);
        }
        out
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<Stmt>) {
        self.line = s.loc.line;
        match &s.kind {
            StmtKind::Decl { name, .. } if is_temp(name) => {}
            StmtKind::Decl { .. } => out.push(s.clone()),
            StmtKind::Annotation(_) => {}
            StmtKind::Assign { lhs, rhs } => {
                let lhs = self.addr(lhs, out);
                let rhs = match rhs {
                    Expr::Lval(lv) if !matches!(lv, Lvalue::Var(n) if !is_memory_var(&self.sc, n)) => {
                        Expr::Lval(self.addr(lv, out))
                    }
                    e => self.expr(e, out),
                };
                out.push(self.assign(lhs, rhs));
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let cond = self.expr(cond, out);
                let then_branch = self.block(then_branch);
                let else_branch = self.block(else_branch);
                out.push(Stmt::at_line(
                    StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                    s.loc.line,
                ));
            }
            StmtKind::While { cond, body } => {
                let mut pre = Vec::new();
                let cond = self.expr(cond, &mut pre);
                let mut body = self.block(body);
                body.extend(pre.iter().cloned());
                out.extend(pre);
                out.push(Stmt::at_line(StmtKind::While { cond, body }, s.loc.line));
            }
            StmtKind::Block(b) => {
                let b = self.block(b);
                out.push(Stmt::at_line(StmtKind::Block(b), s.loc.line));
            }
            StmtKind::Return(e) => {
                let e = e.as_ref().map(|e| self.expr(e, out));
                out.push(Stmt::at_line(StmtKind::Return(e), s.loc.line));
            }
            StmtKind::Call { dest, callee, args } => {
                let args: Vec<Expr> = args.iter().map(|a| self.operand(a, out)).collect();
                let line = s.loc.line;
                match dest {
                    Some(Lvalue::Var(n)) if !is_memory_var(&self.sc, n) => out.push(Stmt::at_line(
                        StmtKind::Call {
                            dest: Some(Lvalue::Var(n.clone())),
                            callee: callee.clone(),
                            args,
                        },
                        line,
                    )),
                    Some(d) => {
                        let t = self.fresh(self.sc.lvalue_type(d).expect("typechecked"));
                        out.push(Stmt::at_line(
                            StmtKind::Call {
                                dest: Some(Lvalue::Var(t.clone())),
                                callee: callee.clone(),
                                args,
                            },
                            line,
                        ));
                        self.line = line;
                        let d = self.addr(d, out);
                        out.push(self.assign(d, Expr::Lval(Lvalue::Var(t))));
                    }
                    None => out.push(Stmt::at_line(
                        StmtKind::Call {
                            dest: None,
                            callee: callee.clone(),
                            args,
                        },
                        line,
                    )),
                }
            }
        }
    }

    /// A register, a constant or a literal.
    fn operand(&mut self, e: &Expr, out: &mut Vec<Stmt>) -> Expr {
        let r = self.expr(e, out);
        match &r {
            Expr::Int(_) | Expr::Null => r,
            Expr::Lval(Lvalue::Var(_)) => r,
            _ => {
                let t = self.fresh(self.ty(e));
                out.push(self.assign(Lvalue::Var(t.clone()), r));
                Expr::Lval(Lvalue::Var(t))
            }
        }
    }

    /// Register-only equivalent of `e`; loads are hoisted into `out`.
    fn expr(&mut self, e: &Expr, out: &mut Vec<Stmt>) -> Expr {
        match e {
            Expr::Int(_) | Expr::Null => e.clone(),
            Expr::Lval(Lvalue::Var(n)) if !is_memory_var(&self.sc, n) => e.clone(),
            Expr::Lval(lv) => {
                let lv2 = self.addr(lv, out);
                let t = self.fresh(self.ty(e));
                out.push(self.assign(Lvalue::Var(t.clone()), Expr::Lval(lv2)));
                Expr::Lval(Lvalue::Var(t))
            }
            Expr::AddrOf(lv) => Expr::AddrOf(self.addr(lv, out)),
            Expr::Unary(op, x) => Expr::Unary(op.clone(), Box::new(self.expr(x, out))),
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) if expr_reads_memory(&self.sc, r) => {
                let l2 = self.expr(l, out);
                let t = self.fresh(Ty::Int);
                let tv = Lvalue::Var(t.clone());
                out.push(self.assign(tv.clone(), Expr::Int(0)));
                let mut rhs = Vec::new();
                let r2 = self.expr(r, &mut rhs);
                let set = self.assign(tv.clone(), Expr::Int(1));
                rhs.push(Stmt::at_line(
                    StmtKind::If {
                        cond: r2,
                        then_branch: vec![set.clone()],
                        else_branch: Vec::new(),
                    },
                    self.line,
                ));
                let kind = if *op == BinOp::And {
                    StmtKind::If {
                        cond: l2,
                        then_branch: rhs,
                        else_branch: Vec::new(),
                    }
                } else {
                    StmtKind::If {
                        cond: l2,
                        then_branch: vec![set],
                        else_branch: rhs,
                    }
                };
                out.push(Stmt::at_line(kind, self.line));
                Expr::Lval(tv)
            }
            Expr::Binary(op, l, r) => {
                let l2 = self.expr(l, out);
                let r2 = self.expr(r, out);
                Expr::binary(*op, l2, r2)
            }
        }
    }

    /// Equivalent lvalue whose address computation reads no memory.
    fn addr(&mut self, lv: &Lvalue, out: &mut Vec<Stmt>) -> Lvalue {
        match lv {
            Lvalue::Var(_) => lv.clone(),
            Lvalue::Field(b, f) => Lvalue::Field(Box::new(self.addr(b, out)), f.clone()),
            Lvalue::Index(b, i) => {
                let base = if base_is_array(&self.sc, b) {
                    self.addr(b, out)
                } else {
                    match self.expr(&Expr::Lval((**b).clone()), out) {
                        Expr::Lval(v) => v,
                        other => unreachable!("pointer base normalized to {other:?}"),
                    }
                };
                let i = self.expr(i, out);
                Lvalue::Index(Box::new(base), Box::new(i))
            }
            Lvalue::Deref(e) => Lvalue::Deref(Box::new(self.expr(e, out))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::{parse_program, pretty_print};

    pub(crate) const PAGES_HEAD: &str = "
        const int PAGE_NB = 4;
        const int PAGE_LENGTH = 8;
        enum allocation { FREE, ALLOCATED };
        enum confidentiality { PUBLIC, CONFIDENTIAL };
        struct Page { char* data; enum allocation status; enum confidentiality level; };
        enum confidentiality user_level;
        struct Page metadata[PAGE_NB];
    ";

    fn norm(src: &str) -> NormalizedProgram {
        normalize_program(&typecheck(&parse_program(src).unwrap()).unwrap())
    }

    fn body_text(np: &NormalizedProgram, f: &str) -> String {
        let text = pretty_print(np.program());
        let start = text.find(&format!(" {f}(")).unwrap();
        text[start..].split("\n}\n").next().unwrap().to_string()
    }

    #[test]
    fn page_read_copy_splits_pointer_load() {
        let np = norm(&format!(
            "{PAGES_HEAD} void page_read(struct Page* from, char* buffer) {{
                for (int i = 0; i < PAGE_LENGTH; ++i) buffer[i] = from->data[i];
            }}"
        ));
        let t = body_text(&np, "page_read");
        assert!(t.contains("__t1 = from->data;"), "{t}");
        assert!(t.contains("buffer[i] = __t1[i];"), "{t}");
        assert_eq!(np.temp_vars["page_read"], vec!["__t1".to_string()]);
    }

    #[test]
    fn page_alloc_is_already_normal() {
        let src = format!(
            "{PAGES_HEAD} struct Page* find_free_page();
            struct Page* page_alloc() {{
                struct Page* fp = find_free_page();
                if (fp != NULL) {{ fp->status = ALLOCATED; fp->level = user_level; }}
                return fp;
            }}"
        );
        let np = norm(&src);
        assert!(np.temp_vars["page_alloc"].is_empty());
        let orig = parse_program(&src).unwrap();
        assert_eq!(
            np.program().function("page_alloc").unwrap().body.len(),
            orig.function("page_alloc").unwrap().body.len()
        );
    }

    #[test]
    fn global_constant_assignment_unchanged() {
        let np = norm("int x; void f() { x = 1; }");
        assert_eq!(np.program().function("f").unwrap().body.len(), 1);
    }

    #[test]
    fn loop_condition_recomputed_each_iteration() {
        let np = norm("int g; void f() { while (g < 3) { g = g + 1; } }");
        let t = body_text(&np, "f");
        assert_eq!(t.matches("= g;").count(), 3, "{t}");
        assert!(t.contains("while (__t1 < 3)"), "{t}");
    }

    #[test]
    fn short_circuit_lowered_only_when_needed() {
        let np =
            norm("int g; int h; void f(int a) { if (a && g) { h = 1; } if (a && a) { h = 2; } }");
        let t = body_text(&np, "f");
        assert!(t.contains("if (a) {"), "{t}");
        assert!(t.contains("if (a && a)"), "{t}");
    }

    #[test]
    fn memory_call_destination_goes_through_temp() {
        let np = norm("int g; int k() { return 1; } void f() { g = k(); }");
        let t = body_text(&np, "f");
        assert!(t.contains("__t1 = k();") && t.contains("g = __t1;"), "{t}");
    }

    #[test]
    fn call_arguments_become_operands() {
        let np = norm("int g[2]; void k(int* p, int v) { } void f() { k(&g[1], g[0] + 1); }");
        let t = body_text(&np, "f");
        assert!(t.contains("k(__t1, __t3);"), "{t}");
    }

    #[test]
    fn idempotent() {
        let src = format!(
            "{PAGES_HEAD} int g; int h;
            int k(int a) {{ return a + g; }}
            void f(struct Page* p, int* q) {{
                int loc[3];
                while (g < 3 && loc[g] != 2) {{ loc[g] = loc[g + 1] + *q; g = k(h); }}
                p->level = metadata[g].level;
                loc[0] = k(g);
            }}"
        );
        let once = norm(&src);
        let twice = normalize_program(&once.typed);
        assert_eq!(
            once.program().without_locs(),
            twice.program().without_locs(),
            "{}",
            pretty_print(once.program())
        );
    }
}
