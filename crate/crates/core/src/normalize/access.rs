use std::collections::BTreeMap;

use crate::minic::types::NameKind;
use crate::minic::{Expr, Lvalue, Scope, SourceLoc, StmtKind, StmtPath, Ty};

use super::{base_is_array, is_memory_var, NormalizedProgram};

/// Abstract description of one accessed memory location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocDesc {
    pub lvalue: Lvalue,
    /// Type of the accessed cell(s).
    pub ty: Ty,
    /// The global the location lies in, when known syntactically.
    pub root_global: Option<String>,
    /// `(record, field)` of the innermost field containing the location.
    pub field: Option<(String, String)>,
    /// Reached through a pointer with no field selection in between
    /// (`*p`, `p[i]`): the pointee could be any cell of this type.
    pub through_pointer: bool,
}

impl LocDesc {
    pub fn new(sc: &Scope<'_>, lv: &Lvalue) -> LocDesc {
        let ty = sc.lvalue_type(lv).expect("typechecked lvalue");
        let mut field = None;
        let mut through_pointer = false;
        let mut cur = lv;
        // Walk from the location towards its root.
        loop {
            match cur {
                Lvalue::Var(_) => break,
                Lvalue::Field(b, f) => {
                    if field.is_none() && !through_pointer {
                        if let Ok(Ty::Record(r)) = sc.lvalue_type(b) {
                            field = Some((r, f.clone()));
                        }
                    }
                    cur = b;
                }
                Lvalue::Index(b, _) if base_is_array(sc, b) => cur = b,
                Lvalue::Index(..) | Lvalue::Deref(_) => {
                    if field.is_none() {
                        through_pointer = true;
                    }
                    break;
                }
            }
        }
        let root_global = match cur {
            Lvalue::Var(n) if matches!(sc.resolve(n), Some(NameKind::Global(_))) => Some(n.clone()),
            _ => None,
        };
        LocDesc {
            lvalue: lv.clone(),
            ty,
            root_global,
            field,
            through_pointer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessInfo {
    pub function: String,
    pub stmt: SourceLoc,
    pub write: Option<LocDesc>,
    pub reads: Vec<LocDesc>,
}

/// Keyed by function name and statement path.
pub type AccessMap = BTreeMap<(String, StmtPath), AccessInfo>;

/// Memory accesses of every statement that performs any. Registers
/// (temporaries, non-address-taken scalar locals and parameters) are not
/// memory; calls contribute nothing at the call site.
pub fn classify_accesses(np: &NormalizedProgram) -> AccessMap {
    let mut out = AccessMap::new();
    for f in np.program().functions.iter().filter(|f| f.has_body()) {
        let sc = Scope::function(&np.typed.env, &f.name);
        crate::minic::walk_stmts(&f.body, &mut |s| {
            let mut reads = Vec::new();
            let mut write = None;
            match &s.kind {
                StmtKind::Assign { lhs, rhs } => {
                    addr_loads(&sc, lhs, &mut reads);
                    expr_loads(&sc, rhs, &mut reads);
                    if !matches!(lhs, Lvalue::Var(n) if !is_memory_var(&sc, n)) {
                        write = Some(LocDesc::new(&sc, lhs));
                    }
                }
                StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
                    expr_loads(&sc, cond, &mut reads)
                }
                StmtKind::Return(Some(e)) => expr_loads(&sc, e, &mut reads),
                _ => {}
            }
            if write.is_some() || !reads.is_empty() {
                out.insert(
                    (f.name.clone(), s.loc.stmt_index.clone()),
                    AccessInfo {
                        function: f.name.clone(),
                        stmt: s.loc.clone(),
                        write,
                        reads,
                    },
                );
            }
        });
    }
    out
}

/// Memory loads performed when evaluating `e`, in evaluation order.
pub(crate) fn expr_loads(sc: &Scope<'_>, e: &Expr, out: &mut Vec<LocDesc>) {
    match e {
        Expr::Int(_) | Expr::Null => {}
        Expr::Lval(Lvalue::Var(n)) if !is_memory_var(sc, n) => {}
        Expr::Lval(lv) => {
            addr_loads(sc, lv, out);
            out.push(LocDesc::new(sc, lv));
        }
        Expr::AddrOf(lv) => addr_loads(sc, lv, out),
        Expr::Unary(_, x) => expr_loads(sc, x, out),
        Expr::Binary(_, l, r) => {
            expr_loads(sc, l, out);
            expr_loads(sc, r, out);
        }
    }
}

pub(crate) fn addr_loads(sc: &Scope<'_>, lv: &Lvalue, out: &mut Vec<LocDesc>) {
    match lv {
        Lvalue::Var(_) => {}
        Lvalue::Field(b, _) => addr_loads(sc, b, out),
        Lvalue::Index(b, i) => {
            if base_is_array(sc, b) {
                addr_loads(sc, b, out);
            } else {
                expr_loads(sc, &Expr::Lval((**b).clone()), out);
            }
            expr_loads(sc, i, out);
        }
        Lvalue::Deref(e) => expr_loads(sc, e, out),
    }
}
