//! Lowering of meta-properties into contracts and point assertions.

mod emit;
mod footprint;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::minic::types::ANY_INT;
use crate::minic::{walk_stmts, StmtKind, StmtPath};
use crate::normalize::{classify_accesses, AccessMap, LocDesc, NormalizedProgram};
use crate::spec::{
    check_well_formed, resolve_targets, ContextKind, LocTerm, MetaProperty, MetaVar, Predicate,
    SpecError,
};

pub use emit::{emit_annotated_function, emit_annotated_source, from_emitted, EmitError};
pub use footprint::{free_footprint, may_affect, Footprint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Before,
    After,
}

/// Why an annotation was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Pre,
    Post,
    AfterWrite,
    BeforeWrite,
    BeforeRead,
    AfterCall,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::Pre => "pre",
            Origin::Post => "post",
            Origin::AfterWrite => "after_write",
            Origin::BeforeWrite => "before_write",
            Origin::BeforeRead => "before_read",
            Origin::AfterCall => "after_call",
        }
    }

    pub fn from_label(s: &str) -> Option<Origin> {
        [
            Origin::Pre,
            Origin::Post,
            Origin::AfterWrite,
            Origin::BeforeWrite,
            Origin::BeforeRead,
            Origin::AfterCall,
        ]
        .into_iter()
        .find(|o| o.label() == s)
    }

    /// Phase of a point assertion with this origin.
    pub fn phase(self) -> Phase {
        match self {
            Origin::BeforeWrite | Origin::BeforeRead => Phase::Before,
            _ => Phase::After,
        }
    }
}

/// A meta-variable-free predicate tagged with the meta-property it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedPred {
    pub meta: String,
    pub pred: Predicate,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Contract {
    pub requires: Vec<TaggedPred>,
    pub ensures: Vec<TaggedPred>,
}

pub type PointKey = (String, StmtPath, Phase);

/// Contracts and point assertions, without the program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub contracts: BTreeMap<String, Contract>,
    pub point_asserts: BTreeMap<PointKey, Vec<TaggedPred>>,
}

impl Annotations {
    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty() && self.point_asserts.is_empty()
    }

    fn extend(&mut self, other: Annotations) {
        for (f, c) in other.contracts {
            let e = self.contracts.entry(f).or_default();
            e.requires.extend(c.requires);
            e.ensures.extend(c.ensures);
        }
        for (k, v) in other.point_asserts {
            self.point_asserts.entry(k).or_default().extend(v);
        }
    }

    pub fn assertion_count(&self) -> usize {
        self.point_asserts.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedProgram {
    pub program: NormalizedProgram,
    pub annotations: Annotations,
    pub warnings: Vec<String>,
}

impl AnnotatedProgram {
    pub fn asserts_at(&self, func: &str, path: &StmtPath, phase: Phase) -> &[TaggedPred] {
        self.annotations
            .point_asserts
            .get(&(func.to_string(), path.clone(), phase))
            .map_or(&[], Vec::as_slice)
    }
}

/// Replaces the meta-variable by a location.
pub fn instantiate(pred: &Predicate, var: MetaVar, loc: &LocTerm) -> Predicate {
    let sub = |l: &LocTerm| match (l, var) {
        (LocTerm::MetaWritten, MetaVar::Written) | (LocTerm::MetaRead, MetaVar::Read) => {
            loc.clone()
        }
        _ => l.clone(),
    };
    match pred {
        Predicate::BoundedForallInt {
            var: v,
            lo,
            hi,
            body,
        } => Predicate::BoundedForallInt {
            var: v.clone(),
            lo: lo.clone(),
            hi: hi.clone(),
            body: Box::new(instantiate(body, var, loc)),
        },
        Predicate::UnboundedForall { var: v, body } => Predicate::UnboundedForall {
            var: v.clone(),
            body: Box::new(instantiate(body, var, loc)),
        },
        Predicate::Implies(a, b) => {
            Predicate::implies(instantiate(a, var, loc), instantiate(b, var, loc))
        }
        Predicate::And(a, b) => Predicate::and(instantiate(a, var, loc), instantiate(b, var, loc)),
        Predicate::Or(a, b) => Predicate::or(instantiate(a, var, loc), instantiate(b, var, loc)),
        Predicate::Not(a) => Predicate::negate(instantiate(a, var, loc)),
        Predicate::Separated(a, b) => Predicate::Separated(sub(a), sub(b)),
        Predicate::Compare(..) | Predicate::BoolAtom(_) => pred.clone(),
    }
}

/// Direct and transitive effects of calling a function.
#[derive(Debug, Clone, Default)]
struct Effects {
    /// Some reachable function has no body.
    unknown: bool,
    writes: Vec<LocDesc>,
}

fn call_effects(np: &NormalizedProgram, acc: &AccessMap) -> BTreeMap<String, Effects> {
    let p = np.program();
    let mut direct: BTreeMap<&str, (Vec<LocDesc>, BTreeSet<String>)> = BTreeMap::new();
    for f in p.functions.iter().filter(|f| f.has_body()) {
        let writes = acc
            .values()
            .filter(|a| a.function == f.name)
            .filter_map(|a| a.write.clone())
            .collect();
        let mut callees = BTreeSet::new();
        walk_stmts(&f.body, &mut |s| {
            if let StmtKind::Call { callee, .. } = &s.kind {
                if callee != ANY_INT {
                    callees.insert(callee.clone());
                }
            }
        });
        direct.insert(&f.name, (writes, callees));
    }
    let mut out = BTreeMap::new();
    for f in &p.functions {
        let mut eff = Effects::default();
        let mut seen = BTreeSet::new();
        let mut stack = vec![f.name.clone()];
        while let Some(g) = stack.pop() {
            if !seen.insert(g.clone()) {
                continue;
            }
            match direct.get(g.as_str()) {
                Some((w, cs)) => {
                    eff.writes.extend(w.iter().cloned());
                    stack.extend(cs.iter().cloned());
                }
                None => eff.unknown = true,
            }
        }
        out.insert(f.name.clone(), eff);
    }
    out
}

/// Annotations one meta-property contributes.
pub fn apply_meta(np: &NormalizedProgram, m: &MetaProperty) -> Annotations {
    let acc = classify_accesses(np);
    apply_meta_with(np, m, &acc, None)
}

fn apply_meta_with(
    np: &NormalizedProgram,
    m: &MetaProperty,
    acc: &AccessMap,
    effects: Option<&BTreeMap<String, Effects>>,
) -> Annotations {
    let env = &np.typed.env;
    let targets = resolve_targets(&m.targets, np.program());
    let mut out = Annotations::default();
    let tag = |pred: Predicate, origin: Origin| TaggedPred {
        meta: m.name.clone(),
        pred,
        origin,
    };
    let mut point = |f: &str, path: &StmtPath, t: TaggedPred| {
        out.point_asserts
            .entry((f.to_string(), path.clone(), t.origin.phase()))
            .or_default()
            .push(t);
    };
    let mut contracts = BTreeMap::new();
    match m.context {
        ContextKind::WeakInvariant | ContextKind::StrongInvariant => {
            for f in &targets {
                contracts.insert(
                    f.clone(),
                    Contract {
                        requires: vec![tag(m.predicate.clone(), Origin::Pre)],
                        ensures: vec![tag(m.predicate.clone(), Origin::Post)],
                    },
                );
            }
            if m.context == ContextKind::StrongInvariant {
                let fp = free_footprint(&m.predicate, env);
                let owned;
                let effects = match effects {
                    Some(e) => e,
                    None => {
                        owned = call_effects(np, acc);
                        &owned
                    }
                };
                for f in &targets {
                    let func = np.program().function(f).expect("target exists");
                    let mut points: Vec<(StmtPath, Origin)> = Vec::new();
                    walk_stmts(&func.body, &mut |s| match &s.kind {
                        StmtKind::Assign { .. } => {
                            let key = (f.clone(), s.loc.stmt_index.clone());
                            if let Some(w) = acc.get(&key).and_then(|a| a.write.as_ref()) {
                                if may_affect(w, &fp, env) {
                                    points.push((s.loc.stmt_index.clone(), Origin::AfterWrite));
                                }
                            }
                        }
                        StmtKind::Call { callee, .. }
                            if callee != ANY_INT && !targets.contains(callee) =>
                        {
                            let e = &effects[callee];
                            if !fp.is_empty()
                                && (e.unknown || e.writes.iter().any(|w| may_affect(w, &fp, env)))
                            {
                                points.push((s.loc.stmt_index.clone(), Origin::AfterCall));
                            }
                        }
                        _ => {}
                    });
                    for (path, origin) in points {
                        point(f, &path, tag(m.predicate.clone(), origin));
                    }
                }
            }
        }
        ContextKind::Writing | ContextKind::Reading => {
            let var = m.context.meta_var().expect("access context");
            for info in acc.values().filter(|a| targets.contains(&a.function)) {
                let (locs, origin): (Vec<&LocDesc>, Origin) = match var {
                    MetaVar::Written => (info.write.iter().collect(), Origin::BeforeWrite),
                    MetaVar::Read => (info.reads.iter().collect(), Origin::BeforeRead),
                };
                for d in locs {
                    let pred = instantiate(&m.predicate, var, &LocTerm::AddrOf(d.lvalue.clone()));
                    point(&info.function, &info.stmt.stmt_index, tag(pred, origin));
                }
            }
        }
    }
    out.contracts = contracts;
    out
}

/// Applies every meta-property in order. Ill-formed properties are refused.
pub fn apply_all(
    np: &NormalizedProgram,
    metas: &[MetaProperty],
) -> Result<AnnotatedProgram, Vec<SpecError>> {
    let errs: Vec<SpecError> = metas
        .iter()
        .filter_map(|m| check_well_formed(m, &np.typed).err())
        .flatten()
        .collect();
    if !errs.is_empty() {
        return Err(errs);
    }
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for m in metas {
        if !seen.insert(&m.name) {
            warnings.push(format!(
                "meta-property `{}` is applied more than once; its assertions are duplicated",
                m.name
            ));
        }
    }
    let acc = classify_accesses(np);
    let effects = call_effects(np, &acc);
    let mut annotations = Annotations::default();
    for m in metas {
        annotations.extend(apply_meta_with(np, m, &acc, Some(&effects)));
    }
    Ok(AnnotatedProgram {
        program: np.clone(),
        annotations,
        warnings,
    })
}
