//! Loading programs with their metas, and running the bundled case studies.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::checker::{diff_reports, naive_oracle, run_with_checks, Equivalence, Outcome};
use crate::minic::{parse_program_named, typecheck, ParseError, Program, TypeError, TypedProgram};
use crate::normalize::{normalize_program, NormalizedProgram};
use crate::spec::{parse_meta_block, parse_meta_file, MetaProperty, SpecError};
use crate::transform::{apply_all, emit_annotated_source};

/// Directory of the bundled case studies.
pub const BUNDLED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus");

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("{}", join(.0))]
    Type(Vec<TypeError>),
    #[error("{}", join(.0))]
    Spec(Vec<SpecError>),
}

fn join<T: fmt::Display>(errs: &[T]) -> String {
    errs.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// A parsed, typed and normalized program with its metas.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub typed: TypedProgram,
    pub normalized: NormalizedProgram,
    pub metas: Vec<MetaProperty>,
}

/// Metas declared in the source, followed by those of the sidecar spec.
/// A name defined in both is an error.
pub fn collect_metas(p: &Program, sidecar: Option<&str>) -> Result<Vec<MetaProperty>, SpecError> {
    let mut out: Vec<MetaProperty> = Vec::new();
    for block in &p.annotations {
        for m in parse_meta_block(block)? {
            if out.iter().any(|o| o.name == m.name) {
                return Err(SpecError::DuplicateName(m.name));
            }
            out.push(m);
        }
    }
    if let Some(text) = sidecar {
        for m in parse_meta_file(text)? {
            if out.iter().any(|o| o.name == m.name) {
                return Err(SpecError::DuplicateName(m.name));
            }
            out.push(m);
        }
    }
    Ok(out)
}

pub fn load_source(source: &str, file: &str, sidecar: Option<&str>) -> Result<Loaded, LoadError> {
    let program = parse_program_named(source, file)?;
    let metas = collect_metas(&program, sidecar).map_err(|e| LoadError::Spec(vec![e]))?;
    let typed = typecheck(&program).map_err(LoadError::Type)?;
    let normalized = normalize_program(&typed);
    Ok(Loaded {
        typed,
        normalized,
        metas,
    })
}

pub fn load_files(program: &Path, spec: Option<&Path>) -> Result<Loaded, LoadError> {
    let source = read(program)?;
    let sidecar = spec.map(read).transpose()?;
    load_source(&source, &program.display().to_string(), sidecar.as_deref())
}

fn read(p: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(p).map_err(|e| LoadError::Io(format!("{}: {e}", p.display())))
}

#[derive(Debug, Clone, Deserialize)]
struct Manifest {
    cases: Vec<CorpusCase>,
}

/// One program variant with its expected verdict per meta.
#[derive(Debug, Clone, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub program: PathBuf,
    #[serde(default)]
    pub spec: Option<PathBuf>,
    pub drivers: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    pub expected: BTreeMap<String, Outcome>,
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    /// `apply_all` plus emission.
    pub transform_time: Duration,
    /// Per driver, per meta: Fail if any of its verdicts failed.
    pub observed: BTreeMap<String, BTreeMap<String, Outcome>>,
    pub problems: Vec<String>,
}

impl CaseResult {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusSummary {
    pub cases: Vec<CaseResult>,
}

impl CorpusSummary {
    pub fn ok(&self) -> bool {
        self.cases.iter().all(CaseResult::ok)
    }
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            let status = if c.ok() { "ok" } else { "MISMATCH" };
            let secs = c.transform_time.as_secs_f64();
            writeln!(f, "{:<16} transform {secs:.4}s  {status}", c.name)?;
            for (driver, verdicts) in &c.observed {
                let shown: Vec<String> = verdicts
                    .iter()
                    .map(|(m, o)| format!("{m}={}", outcome(*o)))
                    .collect();
                writeln!(f, "    {driver}: {}", shown.join(" "))?;
            }
            for p in &c.problems {
                writeln!(f, "    {p}")?;
            }
        }
        let failed = self.cases.iter().filter(|c| !c.ok()).count();
        write!(f, "{} case(s), {failed} mismatch(es)", self.cases.len())
    }
}

fn outcome(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "pass",
        Outcome::Fail => "fail",
    }
}

/// Reads every `*/expected.json` under `dir`, in name order.
pub fn discover(dir: &Path) -> Result<Vec<(PathBuf, CorpusCase)>, LoadError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| LoadError::Io(format!("{}: {e}", dir.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::new();
    for d in dirs {
        let manifest = d.join("expected.json");
        if !manifest.is_file() {
            continue;
        }
        let m: Manifest = serde_json::from_str(&read(&manifest)?)
            .map_err(|e| LoadError::Io(format!("{}: {e}", manifest.display())))?;
        out.extend(m.cases.into_iter().map(|c| (d.clone(), c)));
    }
    Ok(out)
}

pub fn run_case(dir: &Path, case: &CorpusCase) -> CaseResult {
    let mut r = CaseResult {
        name: case.name.clone(),
        transform_time: Duration::ZERO,
        observed: BTreeMap::new(),
        problems: Vec::new(),
    };
    let loaded = match load_files(
        &dir.join(&case.program),
        case.spec.as_ref().map(|s| dir.join(s)).as_deref(),
    ) {
        Ok(l) => l,
        Err(e) => {
            r.problems.push(e.to_string());
            return r;
        }
    };
    let start = Instant::now();
    let ap = apply_all(&loaded.normalized, &loaded.metas);
    let ap = match ap {
        Ok(ap) => {
            emit_annotated_source(&ap);
            ap
        }
        Err(es) => {
            r.problems.push(join(&es));
            return r;
        }
    };
    r.transform_time = start.elapsed();
    for driver in &case.drivers {
        let run = run_with_checks(&ap, driver, case.seed).and_then(|a| {
            Ok((
                naive_oracle(&loaded.normalized, &loaded.metas, driver, case.seed)?,
                a,
            ))
        });
        let (naive, pruned) = match run {
            Ok(x) => x,
            Err(e) => {
                r.problems.push(format!("{driver}: {}", e));
                continue;
            }
        };
        if let Some(e) = &pruned.runtime_error {
            r.problems.push(format!("{driver}: runtime error: {e}"));
        }
        match diff_reports(&pruned, &naive) {
            Ok(Equivalence::Equivalent) => {}
            Ok(d) => r
                .problems
                .push(format!("{driver}: pruned and naive checks disagree: {d:?}")),
            Err(e) => r.problems.push(format!("{driver}: {e}")),
        }
        let mut seen = BTreeMap::new();
        for m in &loaded.metas {
            let failed = pruned.for_meta(&m.name).any(|v| v.verdict == Outcome::Fail);
            seen.insert(
                m.name.clone(),
                if failed { Outcome::Fail } else { Outcome::Pass },
            );
        }
        for (meta, want) in &case.expected {
            match seen.get(meta) {
                Some(got) if got == want => {}
                Some(got) => r.problems.push(format!(
                    "{driver}: {meta} expected {} got {}",
                    outcome(*want),
                    outcome(*got)
                )),
                None => r.problems.push(format!("{driver}: no meta named {meta}")),
            }
        }
        r.observed.insert(driver.clone(), seen);
    }
    r
}

pub fn run_corpus(dir: &Path) -> Result<CorpusSummary, LoadError> {
    let cases = discover(dir)?;
    Ok(CorpusSummary {
        cases: cases.iter().map(|(d, c)| run_case(d, c)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpus_matches_expectations() {
        let s = run_corpus(Path::new(BUNDLED)).unwrap();
        assert_eq!(s.cases.len(), 4);
        assert!(s.ok(), "{s}");
        for c in &s.cases {
            assert!(c.transform_time < Duration::from_secs(1));
        }
    }

    #[test]
    fn empty_directory_has_no_cases() {
        let d = std::env::temp_dir().join(format!("metaspec-empty-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        let s = run_corpus(&d).unwrap();
        std::fs::remove_dir(&d).unwrap();
        assert!(s.cases.is_empty() && s.ok());
    }

    #[test]
    fn sidecar_clash_is_an_error() {
        let src =
            "/*@ meta A: \\forall function f; \\weak_invariant(f), 1 == 1; */ void main() { }";
        let side = "/*@ meta A: \\forall function f; \\weak_invariant(f), 1 == 1; */";
        let e = load_source(src, "x.mc", Some(side)).unwrap_err();
        assert!(matches!(e, LoadError::Spec(ref v) if matches!(v[0], SpecError::DuplicateName(_))));
        let side = "/*@ meta B: \\forall function f; \\weak_invariant(f), 1 == 1; */";
        let l = load_source(src, "x.mc", Some(side)).unwrap();
        let names: Vec<&str> = l.metas.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["A", "B"]);
    }
}
