//! Meta-properties: the context/targets/predicate triples attached to a
//! program, their concrete syntax, and well-formedness.

mod parse;
mod print;
mod wf;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::minic::{BinOp, Expr, Lvalue, ParseError, Program};

pub use parse::{
    parse_meta_block, parse_meta_block_at, parse_meta_file, parse_predicate, PredicateParser,
};
pub use print::{loc_term_to_string, predicate_to_string, render_meta};
pub use wf::{check_predicate_in, check_well_formed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextKind {
    WeakInvariant,
    StrongInvariant,
    Writing,
    Reading,
}

impl ContextKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ContextKind::WeakInvariant => "weak_invariant",
            ContextKind::StrongInvariant => "strong_invariant",
            ContextKind::Writing => "writing",
            ContextKind::Reading => "reading",
        }
    }

    pub fn from_keyword(k: &str) -> Option<Self> {
        Some(match k {
            "weak_invariant" => ContextKind::WeakInvariant,
            "strong_invariant" => ContextKind::StrongInvariant,
            "writing" => ContextKind::Writing,
            "reading" => ContextKind::Reading,
            _ => return None,
        })
    }

    /// The meta-variable this context provides, if any.
    pub fn meta_var(self) -> Option<MetaVar> {
        match self {
            ContextKind::Writing => Some(MetaVar::Written),
            ContextKind::Reading => Some(MetaVar::Read),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetaVar {
    Written,
    Read,
}

impl MetaVar {
    pub fn keyword(self) -> &'static str {
        match self {
            MetaVar::Written => "written",
            MetaVar::Read => "read",
        }
    }
}

/// `F = F+ \ F-`; `None` means the default (all defined functions / nothing).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetSpec {
    pub includes: Option<Vec<String>>,
    pub excludes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocTerm {
    AddrOf(Lvalue),
    /// `ptr + (lo .. hi)`, both bounds inclusive, in units of the pointee.
    PtrRange {
        ptr: Expr,
        lo: Expr,
        hi: Expr,
    },
    MetaWritten,
    MetaRead,
}

impl LocTerm {
    pub fn meta(v: MetaVar) -> LocTerm {
        match v {
            MetaVar::Written => LocTerm::MetaWritten,
            MetaVar::Read => LocTerm::MetaRead,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// `\forall int var; lo <= var < hi ==> body`
    BoundedForallInt {
        var: String,
        lo: Expr,
        hi: Expr,
        body: Box<Predicate>,
    },
    /// A quantifier without a recognizable range guard. Parsed so that the
    /// well-formedness check can report it; never evaluated.
    UnboundedForall {
        var: String,
        body: Box<Predicate>,
    },
    Implies(Box<Predicate>, Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
    Compare(BinOp, Expr, Expr),
    Separated(LocTerm, LocTerm),
    BoolAtom(Expr),
}

impl Predicate {
    pub fn and(a: Predicate, b: Predicate) -> Predicate {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Predicate, b: Predicate) -> Predicate {
        Predicate::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Predicate, b: Predicate) -> Predicate {
        Predicate::Implies(Box::new(a), Box::new(b))
    }

    pub fn negate(a: Predicate) -> Predicate {
        Predicate::Not(Box::new(a))
    }

    pub fn is_true() -> Predicate {
        Predicate::Compare(BinOp::Eq, Expr::Int(1), Expr::Int(1))
    }

    /// Whether `\written` / `\read` occur anywhere.
    pub fn mentions(&self, v: MetaVar) -> bool {
        let mut found = false;
        self.visit_locs(&mut |l| {
            found |= matches!(
                (l, v),
                (LocTerm::MetaWritten, MetaVar::Written) | (LocTerm::MetaRead, MetaVar::Read)
            );
        });
        found
    }

    pub fn is_meta_free(&self) -> bool {
        !self.mentions(MetaVar::Written) && !self.mentions(MetaVar::Read)
    }

    pub fn visit_locs(&self, f: &mut dyn FnMut(&LocTerm)) {
        match self {
            Predicate::BoundedForallInt { body, .. }
            | Predicate::UnboundedForall { body, .. }
            | Predicate::Not(body) => body.visit_locs(f),
            Predicate::Implies(a, b) | Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.visit_locs(f);
                b.visit_locs(f);
            }
            Predicate::Separated(a, b) => {
                f(a);
                f(b);
            }
            Predicate::Compare(..) | Predicate::BoolAtom(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaProperty {
    pub name: String,
    pub context: ContextKind,
    pub targets: TargetSpec,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("duplicate meta-property name `{0}`")]
    DuplicateName(String),
    #[error("{meta}: `{name}` is not a global, constant or bound variable")]
    UnknownGlobal { meta: String, name: String },
    #[error("{meta}: `\\{var}` is not available in the {context} context")]
    MetaVarWrongContext {
        meta: String,
        var: String,
        context: String,
    },
    #[error("{meta}: quantifier over `{var}` is not bounded by `lo <= {var} < hi`")]
    UnboundedQuantifier { meta: String, var: String },
    #[error("{meta}: target `{name}` is not a function with a body")]
    UnknownTargetFunction { meta: String, name: String },
    #[error("{meta}: {message}")]
    Type { meta: String, message: String },
}

/// `(includes or 𝓕) \ (excludes or ∅)`, where 𝓕 is the set of functions
/// with bodies. Unknown names are dropped (they are reported by
/// [`check_well_formed`]).
pub fn resolve_targets(t: &TargetSpec, p: &Program) -> BTreeSet<String> {
    let defined: BTreeSet<String> = p.defined_functions().into_iter().collect();
    let base: BTreeSet<String> = match &t.includes {
        Some(inc) => inc
            .iter()
            .filter(|n| defined.contains(*n))
            .cloned()
            .collect(),
        None => defined,
    };
    match &t.excludes {
        Some(exc) => base.into_iter().filter(|n| !exc.contains(n)).collect(),
        None => base,
    }
}

#[cfg(test)]
pub(crate) const PAGE_METAS: &str = r"
    meta M1: \forall function f; \strong_invariant(f),
        \forall int page; 0 <= page < PAGE_NB ==>
        metadata[page].status == FREE || metadata[page].status == ALLOCATED;
    meta M2: \forall function f;
        ! \subset(f, {page_encrypt}) ==> \writing(f),
        \forall int page; 0 <= page < PAGE_NB && metadata[page].status == ALLOCATED
        ==> \separated(\written, &metadata[page].level);
    meta M3: \forall function f; \reading(f),
        \forall int page; 0 <= page < PAGE_NB && metadata[page].status == ALLOCATED
        && user_level == PUBLIC && metadata[page].level == CONFIDENTIAL
        ==> \separated(\read, metadata[page].data + (0 .. PAGE_LENGTH - 1));
";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::parse_program;

    fn prog() -> Program {
        parse_program(
            "void page_alloc() { } void page_read() { } void page_encrypt() { } void proto();",
        )
        .unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn excluding_encrypt() {
        let t = TargetSpec {
            includes: None,
            excludes: Some(vec!["page_encrypt".into()]),
        };
        assert_eq!(
            resolve_targets(&t, &prog()),
            set(&["page_alloc", "page_read"])
        );
    }

    #[test]
    fn default_is_every_defined_function() {
        assert_eq!(
            resolve_targets(&TargetSpec::default(), &prog()),
            set(&["page_alloc", "page_read", "page_encrypt"])
        );
    }

    #[test]
    fn include_minus_same_exclude_is_empty() {
        let t = TargetSpec {
            includes: Some(vec!["page_read".into()]),
            excludes: Some(vec!["page_read".into()]),
        };
        assert!(resolve_targets(&t, &prog()).is_empty());
    }
}
