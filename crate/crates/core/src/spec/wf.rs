use crate::minic::types::NameKind;
use crate::minic::{Expr, Lvalue, Scope, Ty, TypeEnv, TypedProgram};

use super::{ContextKind, LocTerm, MetaProperty, MetaVar, Predicate, SpecError};

/// Checks a meta-property against a typed program: targets exist, names
/// resolve to globals/constants/bound variables, quantifiers are bounded,
/// meta-variables match the context, and every term is well-typed.
pub fn check_well_formed(m: &MetaProperty, tp: &TypedProgram) -> Result<(), Vec<SpecError>> {
    let mut errs = Vec::new();
    for name in m
        .targets
        .includes
        .iter()
        .chain(m.targets.excludes.iter())
        .flatten()
    {
        if !tp.env.functions.get(name).is_some_and(|f| f.has_body) {
            errs.push(SpecError::UnknownTargetFunction {
                meta: m.name.clone(),
                name: name.clone(),
            });
        }
    }
    let allowed = m.context.meta_var();
    for v in [MetaVar::Written, MetaVar::Read] {
        if m.predicate.mentions(v) && allowed != Some(v) {
            errs.push(SpecError::MetaVarWrongContext {
                meta: m.name.clone(),
                var: v.keyword().to_string(),
                context: context_name(m.context).to_string(),
            });
        }
    }
    errs.extend(check_predicate_in(&m.name, &m.predicate, &tp.env, None));
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

fn context_name(c: ContextKind) -> &'static str {
    match c {
        ContextKind::WeakInvariant => "weak invariant",
        ContextKind::StrongInvariant => "strong invariant",
        ContextKind::Writing => "writing",
        ContextKind::Reading => "reading",
    }
}

/// Name resolution and typing of a predicate, at global scope (`func` is
/// `None`) or inside a function, where its locals are visible as well.
pub fn check_predicate_in(
    meta: &str,
    p: &Predicate,
    env: &TypeEnv,
    func: Option<&str>,
) -> Vec<SpecError> {
    let mut ck = Wf {
        meta,
        env,
        func,
        bound: Vec::new(),
        errs: Vec::new(),
    };
    ck.pred(p);
    ck.errs
}

struct Wf<'a> {
    meta: &'a str,
    env: &'a TypeEnv,
    func: Option<&'a str>,
    bound: Vec<String>,
    errs: Vec<SpecError>,
}

impl Wf<'_> {
    fn scope(&self) -> Scope<'_> {
        Scope {
            env: self.env,
            func: self.func,
            bound: &self.bound,
        }
    }

    fn type_err(&mut self, message: String) {
        self.errs.push(SpecError::Type {
            meta: self.meta.to_string(),
            message,
        });
    }

    /// Reports unresolved names; returns false if there were any.
    fn names_resolve(&mut self, e: &Expr) -> bool {
        let mut missing = Vec::new();
        collect_vars(e, &mut |n| {
            if self.scope().resolve(n).is_none() {
                missing.push(n.to_string());
            }
        });
        let ok = missing.is_empty();
        for name in missing {
            let err = SpecError::UnknownGlobal {
                meta: self.meta.to_string(),
                name,
            };
            if !self.errs.contains(&err) {
                self.errs.push(err);
            }
        }
        ok
    }

    fn expr(&mut self, e: &Expr) -> Option<Ty> {
        if !self.names_resolve(e) {
            return None;
        }
        match self.scope().expr_type(e) {
            Ok(t) => Some(t),
            Err(err) => {
                self.type_err(err.message);
                None
            }
        }
    }

    fn integer(&mut self, e: &Expr, what: &str) {
        if let Some(t) = self.expr(e) {
            if !t.is_integer() {
                self.type_err(format!("{what} has type `{t}`, expected an integer"));
            }
        }
    }

    fn pred(&mut self, p: &Predicate) {
        match p {
            Predicate::UnboundedForall { var, body } => {
                self.errs.push(SpecError::UnboundedQuantifier {
                    meta: self.meta.to_string(),
                    var: var.clone(),
                });
                self.bound.push(var.clone());
                self.pred(body);
                self.bound.pop();
            }
            Predicate::BoundedForallInt { var, lo, hi, body } => {
                if let Some(k) = self.scope().resolve(var) {
                    if !matches!(k, NameKind::Bound) {
                        self.type_err(format!(
                            "quantified variable `{var}` shadows a program name"
                        ));
                    }
                }
                for (b, what) in [(lo, "lower bound"), (hi, "upper bound")] {
                    let mut self_ref = false;
                    collect_vars(b, &mut |n| self_ref |= n == var);
                    if self_ref {
                        self.type_err(format!("{what} of `{var}` mentions `{var}`"));
                    } else {
                        self.integer(b, &format!("{what} of `{var}`"));
                    }
                }
                self.bound.push(var.clone());
                self.pred(body);
                self.bound.pop();
            }
            Predicate::Implies(a, b) | Predicate::And(a, b) | Predicate::Or(a, b) => {
                self.pred(a);
                self.pred(b);
            }
            Predicate::Not(a) => self.pred(a),
            Predicate::Compare(op, a, b) => {
                let (Some(lt), Some(rt)) = (self.expr(a), self.expr(b)) else {
                    return;
                };
                if let Err(e) = crate::minic::types::binary_result(*op, &lt, &rt) {
                    self.type_err(e.message);
                }
            }
            Predicate::BoolAtom(e) => {
                if let Some(t) = self.expr(e) {
                    if !t.is_truthy() {
                        self.type_err(format!("`{t}` used as a condition"));
                    }
                }
            }
            Predicate::Separated(a, b) => {
                self.loc(a);
                self.loc(b);
            }
        }
    }

    fn loc(&mut self, l: &LocTerm) {
        match l {
            LocTerm::MetaWritten | LocTerm::MetaRead => {}
            LocTerm::AddrOf(lv) => {
                self.expr(&Expr::AddrOf(lv.clone()));
            }
            LocTerm::PtrRange { ptr, lo, hi } => {
                if let Some(t) = self.expr(ptr) {
                    if !matches!(t, Ty::Ptr(_)) {
                        self.type_err(format!("range base has type `{t}`, expected a pointer"));
                    }
                }
                self.integer(lo, "range lower bound");
                self.integer(hi, "range upper bound");
            }
        }
    }
}

fn collect_vars(e: &Expr, f: &mut dyn FnMut(&str)) {
    match e {
        Expr::Int(_) | Expr::Null => {}
        Expr::Lval(lv) | Expr::AddrOf(lv) => lvalue_vars(lv, f),
        Expr::Unary(_, x) => collect_vars(x, f),
        Expr::Binary(_, l, r) => {
            collect_vars(l, f);
            collect_vars(r, f);
        }
    }
}

fn lvalue_vars(lv: &Lvalue, f: &mut dyn FnMut(&str)) {
    match lv {
        Lvalue::Var(n) => f(n),
        Lvalue::Field(b, _) => lvalue_vars(b, f),
        Lvalue::Index(b, i) => {
            lvalue_vars(b, f);
            collect_vars(i, f);
        }
        Lvalue::Deref(e) => collect_vars(e, f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::{parse_program, typecheck};
    use crate::spec::parse_meta_block;

    const PAGES: &str = "
        const int PAGE_NB = 4;
        const int PAGE_LENGTH = 8;
        enum allocation { FREE, ALLOCATED };
        enum confidentiality { PUBLIC, CONFIDENTIAL };
        struct Page { char* data; enum allocation status; enum confidentiality level; };
        enum confidentiality user_level;
        struct Page metadata[PAGE_NB];
        void page_alloc() { } void page_encrypt() { } void ext();
    ";

    fn check(meta: &str) -> Result<(), Vec<SpecError>> {
        let tp = typecheck(&parse_program(PAGES).unwrap()).unwrap();
        let ms = parse_meta_block(meta).unwrap();
        check_well_formed(&ms[0], &tp)
    }

    #[test]
    fn page_metas_are_well_formed() {
        for m in parse_meta_block(crate::spec::PAGE_METAS).unwrap() {
            let tp = typecheck(&parse_program(PAGES).unwrap()).unwrap();
            check_well_formed(&m, &tp).unwrap_or_else(|e| panic!("{}: {e:?}", m.name));
        }
    }

    #[test]
    fn unknown_global() {
        let e =
            check(r"meta X: \forall function f; \weak_invariant(f), pages_nb > 0;").unwrap_err();
        assert_eq!(
            e,
            vec![SpecError::UnknownGlobal {
                meta: "X".into(),
                name: "pages_nb".into()
            }]
        );
    }

    #[test]
    fn written_outside_writing_context() {
        let e =
            check(r"meta X: \forall function f; \reading(f), \separated(\written, &user_level);")
                .unwrap_err();
        assert!(
            matches!(&e[0], SpecError::MetaVarWrongContext { var, .. } if var == "written"),
            "{e:?}"
        );
    }

    #[test]
    fn unbounded_quantifier() {
        let e = check(r"meta X: \forall function f; \weak_invariant(f), \forall int i; metadata[i].status == FREE;").unwrap_err();
        assert!(
            matches!(&e[0], SpecError::UnboundedQuantifier { var, .. } if var == "i"),
            "{e:?}"
        );
    }

    #[test]
    fn bound_mentioning_itself() {
        assert!(check(r"meta X: \forall function f; \weak_invariant(f), \forall int i; 0 <= i < i + 1 ==> i >= 0;").is_err());
    }

    #[test]
    fn targets_must_have_bodies() {
        let e =
            check(r"meta X: \forall function f; \subset(f, {ext, nope}) ==> \writing(f), \true;")
                .unwrap_err();
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn enum_int_comparison_is_a_type_error() {
        let e =
            check(r"meta X: \forall function f; \weak_invariant(f), user_level == 1;").unwrap_err();
        assert!(matches!(e[0], SpecError::Type { .. }));
    }

    #[test]
    fn range_base_must_be_a_pointer() {
        assert!(check(
            r"meta X: \forall function f; \reading(f), \separated(\read, user_level + (0 .. 1));"
        )
        .is_err());
    }

    #[test]
    fn function_scope_sees_locals() {
        let tp =
            typecheck(&parse_program("int g; void f(int* p) { int k; k = 1; }").unwrap()).unwrap();
        let p = crate::spec::parse_predicate(r"\separated(p + (0 .. k), &g)").unwrap();
        assert!(check_predicate_in("X", &p, &tp.env, Some("f")).is_empty());
        assert!(!check_predicate_in("X", &p, &tp.env, None).is_empty());
    }
}
