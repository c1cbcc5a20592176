use crate::minic::pretty::{expr_at, expr_to_string, lvalue_to_string};
use crate::minic::Expr;

use super::{LocTerm, MetaProperty, Predicate};

pub fn loc_term_to_string(l: &LocTerm) -> String {
    match l {
        LocTerm::AddrOf(lv) => format!("&{}", lvalue_to_string(lv)),
        LocTerm::PtrRange { ptr, lo, hi } => {
            format!(
                "{} + ({} .. {})",
                expr_at(ptr, 7),
                expr_to_string(lo),
                expr_to_string(hi)
            )
        }
        LocTerm::MetaWritten => "\\written".into(),
        LocTerm::MetaRead => "\\read".into(),
    }
}

fn prec(p: &Predicate) -> u8 {
    match p {
        Predicate::BoundedForallInt { .. } | Predicate::UnboundedForall { .. } => 0,
        Predicate::Implies(..) => 1,
        Predicate::Or(..) => 2,
        Predicate::And(..) => 3,
        Predicate::Not(_) => 4,
        Predicate::Compare(..) => 5,
        Predicate::Separated(..) | Predicate::BoolAtom(_) => 6,
    }
}

fn pred_at(p: &Predicate, min: u8) -> String {
    let s = match p {
        Predicate::BoundedForallInt { var, lo, hi, body } => {
            let range = format!("{} <= {var} < {}", expr_at(lo, 5), expr_at(hi, 5));
            // A guarded body folds back into the range guard when the
            // reparse would rebuild the same left-nested conjunction.
            match &**body {
                Predicate::Implies(g, c) if is_left_nested(g) => {
                    format!(
                        "\\forall int {var}; {range} && {} ==> {}",
                        pred_at(g, 3),
                        pred_at(c, 1)
                    )
                }
                b => format!("\\forall int {var}; {range} ==> {}", pred_at(b, 1)),
            }
        }
        Predicate::UnboundedForall { var, body } => {
            format!("\\forall int {var}; {}", pred_at(body, 0))
        }
        Predicate::Implies(a, b) => format!("{} ==> {}", pred_at(a, 2), pred_at(b, 1)),
        Predicate::Or(a, b) => format!("{} || {}", pred_at(a, 2), pred_at(b, 3)),
        Predicate::And(a, b) => format!("{} && {}", pred_at(a, 3), pred_at(b, 4)),
        Predicate::Not(a) => format!("!{}", pred_at(a, 6)),
        Predicate::Compare(op, a, b) => {
            format!("{} {} {}", expr_at(a, 5), op.symbol(), expr_at(b, 5))
        }
        Predicate::Separated(a, b) => {
            format!(
                "\\separated({}, {})",
                loc_term_to_string(a),
                loc_term_to_string(b)
            )
        }
        Predicate::BoolAtom(Expr::Int(1)) => "\\true".into(),
        Predicate::BoolAtom(Expr::Int(0)) => "\\false".into(),
        Predicate::BoolAtom(e) => expr_at(e, 5),
    };
    // A quantifier extends as far right as possible, so it only goes bare
    // where nothing follows it.
    let p_prec = prec(p);
    if p_prec < min && !(p_prec == 0 && min <= 1) {
        format!("({s})")
    } else {
        s
    }
}

fn is_left_nested(p: &Predicate) -> bool {
    match p {
        Predicate::And(a, b) => !matches!(**b, Predicate::And(..)) && is_left_nested(a),
        _ => true,
    }
}

pub fn predicate_to_string(p: &Predicate) -> String {
    pred_at(p, 0)
}

fn targets_text(m: &MetaProperty) -> String {
    let mut parts = Vec::new();
    if let Some(inc) = &m.targets.includes {
        parts.push(format!("\\subset(f, {{{}}})", inc.join(", ")));
    }
    if let Some(exc) = &m.targets.excludes {
        parts.push(format!("!\\subset(f, {{{}}})", exc.join(", ")));
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!("{} ==> ", parts.join(" && "))
    }
}

/// One `meta` clause in concrete syntax, without the comment delimiters.
pub fn render_meta(m: &MetaProperty) -> String {
    format!(
        "meta {}: \\forall function f; {}\\{}(f), {};",
        m.name,
        targets_text(m),
        m.context.keyword(),
        predicate_to_string(&m.predicate)
    )
}
