//! Dynamic checking: a concrete interpreter, predicate evaluation, the
//! instrumented checker, the unpruned reference oracle and report diffing.

mod eval;
mod interp;
mod machine;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minic::{FunctionDef, Stmt, StmtPath, TypedProgram};
use crate::normalize::NormalizedProgram;
use crate::spec::{
    check_well_formed, resolve_targets, ContextKind, MetaProperty, MetaVar, Predicate, SpecError,
};
use crate::transform::{AnnotatedProgram, Phase, TaggedPred};

pub use eval::{eval_predicate, Evaluation};
pub use interp::{Access, Interp, Monitor, NoMonitor};
pub use machine::{separated, Loc, Machine, Region, RuntimeError, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportPhase {
    Pre,
    Post,
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

/// One dynamic evaluation of one assertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub meta: String,
    pub function: String,
    pub line: u32,
    pub stmt_index: StmtPath,
    pub phase: ReportPhase,
    pub verdict: Outcome,
    pub witness: BTreeMap<String, i64>,
    /// Hash of the cells the predicate read, with their values.
    pub digest: String,
    /// Hash of all global memory.
    pub state_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub driver: String,
    pub seed: u64,
    /// In execution order.
    pub verdicts: Vec<Verdict>,
    /// Set when execution stopped early; the verdicts are then partial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_error: Option<String>,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.verdict == Outcome::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    /// `(meta, digest)` of every failure.
    pub fn failure_set(&self) -> BTreeSet<FailureKey> {
        self.failures()
            .map(|v| FailureKey {
                meta: v.meta.clone(),
                digest: v.digest.clone(),
            })
            .collect()
    }

    /// Copy with source lines erased, for comparing runs of the same program
    /// printed differently.
    pub fn without_lines(&self) -> CheckReport {
        let mut r = self.clone();
        for v in &mut r.verdicts {
            v.line = 0;
        }
        r
    }

    pub fn for_meta<'a>(&'a self, meta: &'a str) -> impl Iterator<Item = &'a Verdict> + 'a {
        self.verdicts.iter().filter(move |v| v.meta == meta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureKey {
    pub meta: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equivalence {
    Equivalent,
    Different {
        only_in_first: Vec<FailureKey>,
        only_in_second: Vec<FailureKey>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("reports come from different runs ({0})")]
    IncomparableRuns(String),
}

/// Compares the failure sets of two runs of the same driver and seed.
pub fn diff_reports(a: &CheckReport, b: &CheckReport) -> Result<Equivalence, DiffError> {
    if a.driver != b.driver || a.seed != b.seed {
        return Err(DiffError::IncomparableRuns(format!(
            "driver {} seed {} vs driver {} seed {}",
            a.driver, a.seed, b.driver, b.seed
        )));
    }
    let fa = a.failure_set();
    let fb = b.failure_set();
    if fa == fb {
        Ok(Equivalence::Equivalent)
    } else {
        Ok(Equivalence::Different {
            only_in_first: fa.difference(&fb).cloned().collect(),
            only_in_second: fb.difference(&fa).cloned().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("driver `{0}` is not a function with a body")]
    UnknownDriver(String),
    #[error("driver `{0}` takes parameters")]
    DriverHasParameters(String),
    #[error("ill-formed meta-properties: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    IllFormed(Vec<SpecError>),
}

fn check_driver(tp: &TypedProgram, driver: &str) -> Result<(), CheckError> {
    match tp.program.function(driver) {
        Some(f) if f.has_body() && f.params.is_empty() => Ok(()),
        Some(f) if f.has_body() => Err(CheckError::DriverHasParameters(driver.to_string())),
        _ => Err(CheckError::UnknownDriver(driver.to_string())),
    }
}

fn verdict(
    m: &Machine<'_>,
    meta: &str,
    func: &str,
    at: (u32, &StmtPath),
    phase: ReportPhase,
    pred: &Predicate,
    binding: Option<(MetaVar, Region)>,
) -> Verdict {
    let ev = eval_predicate(m, pred, binding);
    Verdict {
        meta: meta.to_string(),
        function: func.to_string(),
        line: at.0,
        stmt_index: at.1.clone(),
        phase,
        verdict: if ev.holds {
            Outcome::Pass
        } else {
            Outcome::Fail
        },
        witness: ev.witness,
        digest: m.cells_digest(ev.reads.iter()),
        state_digest: m.globals_digest(),
        reason: ev.error.map(|e| e.to_string()),
    }
}

fn exit_point<'a>(
    f: &FunctionDef,
    at: Option<&'a Stmt>,
    root: &'a StmtPath,
) -> (u32, &'a StmtPath) {
    match at {
        Some(s) => (s.loc.line, &s.loc.stmt_index),
        None => (f.line, root),
    }
}

/// Evaluates the assertions of an annotated program.
struct Instrumented<'a> {
    ap: &'a AnnotatedProgram,
    root: StmtPath,
    out: Vec<Verdict>,
}

impl Instrumented<'_> {
    fn point(&mut self, m: &Machine<'_>, func: &str, s: &Stmt, phase: Phase) {
        let rp = if phase == Phase::Before {
            ReportPhase::Before
        } else {
            ReportPhase::After
        };
        for t in self.ap.asserts_at(func, &s.loc.stmt_index, phase) {
            self.out.push(verdict(
                m,
                &t.meta,
                func,
                (s.loc.line, &s.loc.stmt_index),
                rp,
                &t.pred,
                None,
            ));
        }
    }

    fn clauses(
        &mut self,
        m: &Machine<'_>,
        f: &FunctionDef,
        at: (u32, &StmtPath),
        phase: ReportPhase,
        ts: &[TaggedPred],
    ) {
        for t in ts {
            self.out
                .push(verdict(m, &t.meta, &f.name, at, phase, &t.pred, None));
        }
    }
}

impl Monitor for Instrumented<'_> {
    fn entry(&mut self, m: &Machine<'_>, f: &FunctionDef) {
        if let Some(c) = self.ap.annotations.contracts.get(&f.name) {
            let root = self.root.clone();
            self.clauses(m, f, (f.line, &root), ReportPhase::Pre, &c.requires);
        }
    }

    fn exit(&mut self, m: &Machine<'_>, f: &FunctionDef, at: Option<&Stmt>) {
        if let Some(c) = self.ap.annotations.contracts.get(&f.name) {
            let root = self.root.clone();
            self.clauses(
                m,
                f,
                exit_point(f, at, &root),
                ReportPhase::Post,
                &c.ensures,
            );
        }
    }

    fn before(&mut self, m: &Machine<'_>, func: &str, s: &Stmt) {
        self.point(m, func, s, Phase::Before);
    }

    fn after(&mut self, m: &Machine<'_>, func: &str, s: &Stmt) {
        self.point(m, func, s, Phase::After);
    }
}

/// Runs `driver` over an annotated program, evaluating every contract
/// clause and point assertion as execution reaches it. Execution continues
/// past failed assertions; a runtime error ends the run early.
pub fn run_with_checks(
    ap: &AnnotatedProgram,
    driver: &str,
    seed: u64,
) -> Result<CheckReport, CheckError> {
    let tp = &ap.program.typed;
    check_driver(tp, driver)?;
    let mut mon = Instrumented {
        ap,
        root: StmtPath::root(),
        out: Vec::new(),
    };
    let mut it = Interp::new(tp, seed);
    let err = it.call(driver, Vec::new(), &mut mon).err();
    Ok(CheckReport {
        driver: driver.into(),
        seed,
        verdicts: mon.out,
        runtime_error: err.map(|e| e.to_string()),
    })
}

/// Unpruned reference: invariants at every sequence point of their target
/// functions, access properties at every dynamic access.
struct Naive<'a> {
    metas: Vec<(&'a MetaProperty, BTreeSet<String>)>,
    root: StmtPath,
    out: Vec<Verdict>,
}

impl Naive<'_> {
    fn invariants(
        &mut self,
        m: &Machine<'_>,
        func: &str,
        at: (u32, &StmtPath),
        phase: ReportPhase,
        strong_only: bool,
    ) {
        for (meta, targets) in &self.metas {
            let applies = match meta.context {
                ContextKind::StrongInvariant => true,
                ContextKind::WeakInvariant => !strong_only,
                _ => false,
            };
            if applies && targets.contains(func) {
                self.out.push(verdict(
                    m,
                    &meta.name,
                    func,
                    at,
                    phase,
                    &meta.predicate,
                    None,
                ));
            }
        }
    }
}

impl Monitor for Naive<'_> {
    fn entry(&mut self, m: &Machine<'_>, f: &FunctionDef) {
        let root = self.root.clone();
        self.invariants(m, &f.name, (f.line, &root), ReportPhase::Pre, false);
    }

    fn exit(&mut self, m: &Machine<'_>, f: &FunctionDef, at: Option<&Stmt>) {
        let root = self.root.clone();
        self.invariants(
            m,
            &f.name,
            exit_point(f, at, &root),
            ReportPhase::Post,
            false,
        );
    }

    fn after(&mut self, m: &Machine<'_>, func: &str, s: &Stmt) {
        self.invariants(
            m,
            func,
            (s.loc.line, &s.loc.stmt_index),
            ReportPhase::After,
            true,
        );
    }

    fn returned(&mut self, m: &Machine<'_>, func: &str, s: &Stmt) {
        self.invariants(
            m,
            func,
            (s.loc.line, &s.loc.stmt_index),
            ReportPhase::After,
            true,
        );
    }

    fn access(&mut self, m: &Machine<'_>, func: &str, s: &Stmt, kind: Access, r: Region) {
        let want = match kind {
            Access::Write => ContextKind::Writing,
            Access::Read => ContextKind::Reading,
        };
        for (meta, targets) in &self.metas {
            if meta.context == want && targets.contains(func) {
                let var = want.meta_var().expect("access context");
                let at = (s.loc.line, &s.loc.stmt_index);
                self.out.push(verdict(
                    m,
                    &meta.name,
                    func,
                    at,
                    ReportPhase::Before,
                    &meta.predicate,
                    Some((var, r)),
                ));
            }
        }
    }
}

/// Reference checker over a normalized program. See [`naive_oracle_typed`].
pub fn naive_oracle(
    np: &NormalizedProgram,
    metas: &[MetaProperty],
    driver: &str,
    seed: u64,
) -> Result<CheckReport, CheckError> {
    naive_oracle_typed(&np.typed, metas, driver, seed)
}

/// Reference checker over any typed program, normalized or not: needs no
/// instrumentation, so it also serves to compare a program with its
/// normalized form.
pub fn naive_oracle_typed(
    tp: &TypedProgram,
    metas: &[MetaProperty],
    driver: &str,
    seed: u64,
) -> Result<CheckReport, CheckError> {
    check_driver(tp, driver)?;
    let errs: Vec<SpecError> = metas
        .iter()
        .filter_map(|m| check_well_formed(m, tp).err())
        .flatten()
        .collect();
    if !errs.is_empty() {
        return Err(CheckError::IllFormed(errs));
    }
    let metas = metas
        .iter()
        .map(|m| (m, resolve_targets(&m.targets, &tp.program)))
        .collect();
    let mut mon = Naive {
        metas,
        root: StmtPath::root(),
        out: Vec::new(),
    };
    let mut it = Interp::new(tp, seed);
    let err = it.call(driver, Vec::new(), &mut mon).err();
    Ok(CheckReport {
        driver: driver.into(),
        seed,
        verdicts: mon.out,
        runtime_error: err.map(|e| e.to_string()),
    })
}

/// Outcome of an unchecked run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainRun {
    pub globals_digest: String,
    pub trace: Vec<String>,
    pub runtime_error: Option<RuntimeError>,
}

/// Runs `driver` without any checks.
pub fn plain_run(tp: &TypedProgram, driver: &str, seed: u64) -> Result<PlainRun, CheckError> {
    check_driver(tp, driver)?;
    let mut it = Interp::new(tp, seed);
    let err = it.call(driver, Vec::new(), &mut NoMonitor).err();
    Ok(PlainRun {
        globals_digest: it.machine.globals_digest(),
        trace: it.trace,
        runtime_error: err,
    })
}
