use std::collections::BTreeSet;

use crate::minic::types::NameKind;
use crate::minic::{Expr, Lvalue, Scope, Ty, TypeEnv};
use crate::normalize::LocDesc;
use crate::spec::{LocTerm, Predicate};

/// What a predicate's truth value can depend on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Footprint {
    /// Globals whose cells the predicate may read.
    pub globals: BTreeSet<String>,
    /// `(record, field)` pairs selected on the way to a read cell.
    pub fields: BTreeSet<(String, String)>,
    /// Cell types read through a bare pointer (`*p`, `p[i]`).
    pub deref_types: BTreeSet<Ty>,
}

impl Footprint {
    pub fn is_empty(&self) -> bool {
        self.globals.is_empty() && self.fields.is_empty() && self.deref_types.is_empty()
    }
}

/// Every memory read a predicate's evaluation may perform, abstracted.
/// Address-of terms contribute only the reads needed to compute the address.
pub fn free_footprint(pred: &Predicate, env: &TypeEnv) -> Footprint {
    let mut fp = Footprint::default();
    let mut bound = Vec::new();
    pred_fp(pred, env, &mut bound, &mut fp);
    fp
}

fn pred_fp(p: &Predicate, env: &TypeEnv, bound: &mut Vec<String>, fp: &mut Footprint) {
    match p {
        Predicate::BoundedForallInt { var, lo, hi, body } => {
            expr_fp(lo, env, bound, fp);
            expr_fp(hi, env, bound, fp);
            bound.push(var.clone());
            pred_fp(body, env, bound, fp);
            bound.pop();
        }
        Predicate::UnboundedForall { var, body } => {
            bound.push(var.clone());
            pred_fp(body, env, bound, fp);
            bound.pop();
        }
        Predicate::Implies(a, b) | Predicate::And(a, b) | Predicate::Or(a, b) => {
            pred_fp(a, env, bound, fp);
            pred_fp(b, env, bound, fp);
        }
        Predicate::Not(a) => pred_fp(a, env, bound, fp),
        Predicate::Compare(_, a, b) => {
            expr_fp(a, env, bound, fp);
            expr_fp(b, env, bound, fp);
        }
        Predicate::BoolAtom(e) => expr_fp(e, env, bound, fp),
        Predicate::Separated(a, b) => {
            for l in [a, b] {
                match l {
                    LocTerm::AddrOf(lv) => addr_fp(lv, env, bound, fp),
                    LocTerm::PtrRange { ptr, lo, hi } => {
                        expr_fp(ptr, env, bound, fp);
                        expr_fp(lo, env, bound, fp);
                        expr_fp(hi, env, bound, fp);
                    }
                    LocTerm::MetaWritten | LocTerm::MetaRead => {}
                }
            }
        }
    }
}

fn scope<'a>(env: &'a TypeEnv, bound: &'a [String]) -> Scope<'a> {
    Scope::global(env).with_bound(bound)
}

fn expr_fp(e: &Expr, env: &TypeEnv, bound: &mut Vec<String>, fp: &mut Footprint) {
    match e {
        Expr::Int(_) | Expr::Null => {}
        Expr::Lval(lv) => {
            if let Lvalue::Var(n) = lv {
                if !matches!(scope(env, bound).resolve(n), Some(NameKind::Global(_))) {
                    return;
                }
            }
            addr_fp(lv, env, bound, fp);
            let sc = scope(env, bound);
            let d = LocDesc::new(&sc, lv);
            if let Some(g) = d.root_global {
                fp.globals.insert(g);
            }
            if d.through_pointer {
                fp.deref_types.insert(d.ty);
            }
        }
        Expr::AddrOf(lv) => addr_fp(lv, env, bound, fp),
        Expr::Unary(_, x) => expr_fp(x, env, bound, fp),
        Expr::Binary(_, l, r) => {
            expr_fp(l, env, bound, fp);
            expr_fp(r, env, bound, fp);
        }
    }
}

/// Reads needed to locate `lv`, plus the fields it selects.
fn addr_fp(lv: &Lvalue, env: &TypeEnv, bound: &mut Vec<String>, fp: &mut Footprint) {
    match lv {
        Lvalue::Var(_) => {}
        Lvalue::Field(b, f) => {
            if let Ok(Ty::Record(r)) = scope(env, bound).lvalue_type(b) {
                fp.fields.insert((r, f.clone()));
            }
            addr_fp(b, env, bound, fp);
        }
        Lvalue::Index(b, i) => {
            if matches!(scope(env, bound).lvalue_type(b), Ok(Ty::Array(..))) {
                addr_fp(b, env, bound, fp);
            } else {
                expr_fp(&Expr::Lval((**b).clone()), env, bound, fp);
            }
            expr_fp(i, env, bound, fp);
        }
        Lvalue::Deref(e) => expr_fp(e, env, bound, fp),
    }
}

/// Conservative: false only if the write provably leaves every cell the
/// footprint covers untouched.
pub fn may_affect(w: &LocDesc, fp: &Footprint, env: &TypeEnv) -> bool {
    if fp.is_empty() {
        return false;
    }
    if w.root_global
        .as_ref()
        .is_some_and(|g| fp.globals.contains(g))
    {
        return true;
    }
    if w.field.as_ref().is_some_and(|f| fp.fields.contains(f)) {
        return true;
    }
    if fp.deref_types.contains(&w.ty) {
        return true;
    }
    if w.through_pointer {
        // Worst case: the pointer may target any cell of its type.
        let in_globals = fp.globals.iter().any(|g| {
            env.globals
                .get(g)
                .is_some_and(|t| env.contains_cell_type(t, &w.ty))
        });
        let in_fields = fp.fields.iter().any(|(r, f)| {
            env.record(r)
                .and_then(|l| l.field(f))
                .is_some_and(|fi| env.contains_cell_type(&fi.ty, &w.ty))
        });
        return in_globals || in_fields;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::{parse_program, typecheck};
    use crate::spec::{parse_meta_block, PAGE_METAS};

    const HEAD: &str = "
        const int PAGE_NB = 4;
        const int PAGE_LENGTH = 8;
        enum allocation { FREE, ALLOCATED };
        enum confidentiality { PUBLIC, CONFIDENTIAL };
        struct Page { char* data; enum allocation status; enum confidentiality level; };
        enum confidentiality user_level;
        struct Page metadata[PAGE_NB];
        int counter; char name[4]; int* cursor;
    ";

    fn env() -> TypeEnv {
        typecheck(&parse_program(HEAD).unwrap()).unwrap().env
    }

    fn fields(pairs: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    fn globals(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn page_meta_footprints() {
        let env = env();
        let ms = parse_meta_block(PAGE_METAS).unwrap();
        let m1 = free_footprint(&ms[0].predicate, &env);
        assert_eq!(m1.globals, globals(&["metadata"]));
        assert_eq!(m1.fields, fields(&[("Page", "status")]));
        assert!(m1.deref_types.is_empty());

        let m3 = free_footprint(&ms[2].predicate, &env);
        assert_eq!(m3.globals, globals(&["metadata", "user_level"]));
        assert_eq!(
            m3.fields,
            fields(&[("Page", "status"), ("Page", "level"), ("Page", "data")])
        );
    }

    #[test]
    fn closed_predicate_has_empty_footprint() {
        assert!(free_footprint(&Predicate::is_true(), &env()).is_empty());
    }

    fn write(src_lv: &str, params: &str) -> LocDesc {
        let src = format!("{HEAD} void f({params}) {{ {src_lv} = {src_lv}; }}");
        let tp = typecheck(&parse_program(&src).unwrap()).unwrap();
        let crate::minic::StmtKind::Assign { lhs, .. } =
            &tp.program.function("f").unwrap().body[0].kind
        else {
            panic!()
        };
        LocDesc::new(&Scope::function(&tp.env, "f"), lhs)
    }

    #[test]
    fn status_write_may_affect_m1_level_write_does_not() {
        let env = env();
        let m1 = free_footprint(&parse_meta_block(PAGE_METAS).unwrap()[0].predicate, &env);
        assert!(may_affect(
            &write("fp->status", "struct Page* fp"),
            &m1,
            &env
        ));
        assert!(may_affect(&write("metadata[2].status", ""), &m1, &env));
        assert!(!may_affect(
            &write("fp->level", "struct Page* fp"),
            &m1,
            &env
        ));
        assert!(!may_affect(
            &write("fp->status", "struct Page* fp"),
            &Footprint::default(),
            &env
        ));
    }

    #[test]
    fn char_pointer_writes_hit_char_regions() {
        let env = env();
        let p = crate::spec::parse_predicate("name[0] == 1").unwrap();
        let fp = free_footprint(&p, &env);
        assert!(may_affect(&write("c[2]", "char* c"), &fp, &env));
        assert!(!may_affect(&write("*k", "int* k"), &fp, &env));
        let q = crate::spec::parse_predicate("*cursor == 1").unwrap();
        let fq = free_footprint(&q, &env);
        assert_eq!(fq.globals, globals(&["cursor"]));
        assert!(fq.deref_types.contains(&Ty::Int));
        assert!(may_affect(&write("counter", ""), &fq, &env));
        assert!(!may_affect(&write("name[1]", ""), &fq, &env));
    }
}
