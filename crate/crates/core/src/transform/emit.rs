use thiserror::Error;

use crate::minic::{
    parse_program_named, render, render_function, typecheck, AnnotationSource, FunctionDef,
    ParseError, Stmt, StmtKind, StmtPath, TypeError,
};
use crate::normalize::normalize_program;
use crate::spec::{predicate_to_string, PredicateParser};

use super::{AnnotatedProgram, Annotations, Contract, Origin, Phase, TaggedPred};

#[derive(Debug, Error)]
pub enum EmitError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("type errors in emitted source: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Type(Vec<TypeError>),
    #[error("line {line}: {message}")]
    Placement { line: u32, message: String },
    #[error("emitted program is not in normal form")]
    NotNormal,
}

struct Emitter<'a>(&'a Annotations);

fn assert_text(t: &TaggedPred) -> String {
    format!(
        " assert {}: {}: {}; ",
        t.meta,
        t.origin.label(),
        predicate_to_string(&t.pred)
    )
}

impl AnnotationSource for Emitter<'_> {
    fn contract(&self, f: &FunctionDef) -> Option<String> {
        let c = self.0.contracts.get(&f.name)?;
        let clauses: Vec<String> = c
            .requires
            .iter()
            .map(|t| format!("requires {}: {};", t.meta, predicate_to_string(&t.pred)))
            .chain(
                c.ensures
                    .iter()
                    .map(|t| format!("ensures {}: {};", t.meta, predicate_to_string(&t.pred))),
            )
            .collect();
        if clauses.is_empty() {
            return None;
        }
        Some(format!(" {} ", clauses.join("\n    ")))
    }

    fn before(&self, func: &str, s: &Stmt) -> Vec<String> {
        self.at(func, s, Phase::Before)
    }

    fn after(&self, func: &str, s: &Stmt) -> Vec<String> {
        self.at(func, s, Phase::After)
    }

    fn keep_global_annotations(&self) -> bool {
        false
    }
}

impl Emitter<'_> {
    fn at(&self, func: &str, s: &Stmt, phase: Phase) -> Vec<String> {
        let key = (func.to_string(), s.loc.stmt_index.clone(), phase);
        self.0
            .point_asserts
            .get(&key)
            .map(|v| v.iter().map(assert_text).collect())
            .unwrap_or_default()
    }
}

/// The normalized program with contracts and assertions as annotation
/// comments. Reparseable with [`from_emitted`].
pub fn emit_annotated_source(ap: &AnnotatedProgram) -> String {
    render(ap.program.program(), &Emitter(&ap.annotations))
}

pub fn emit_annotated_function(ap: &AnnotatedProgram, name: &str) -> Option<String> {
    let f = ap.program.program().function(name)?;
    Some(render_function(f, &Emitter(&ap.annotations)))
}

/// Reads back the output of [`emit_annotated_source`]. Before-phase
/// assertions attach to the following statement, After-phase ones to the
/// preceding statement.
pub fn from_emitted(text: &str, file: &str) -> Result<AnnotatedProgram, EmitError> {
    let mut p = parse_program_named(text, file)?;
    let mut ann = Annotations::default();
    for f in &mut p.functions {
        if let Some(c) = f.contract.take() {
            ann.contracts
                .insert(f.name.clone(), parse_contract(&c, f.line)?);
        }
        if f.has_body() {
            let mut pending = Vec::new();
            f.body = strip_list(&f.name, std::mem::take(&mut f.body), None, &mut pending)?;
            for p in pending {
                let mut v = p.parent.unwrap_or_default();
                v.push(p.anchor);
                let key = (f.name.clone(), StmtPath(v), p.pred.origin.phase());
                ann.point_asserts.entry(key).or_default().push(p.pred);
            }
        }
    }
    p.annotations.clear();
    let typed = typecheck(&p).map_err(EmitError::Type)?;
    let np = normalize_program(&typed);
    if np.program().without_locs() != p.without_locs() {
        return Err(EmitError::NotNormal);
    }
    Ok(AnnotatedProgram {
        program: np,
        annotations: ann,
        warnings: Vec::new(),
    })
}

fn parse_contract(text: &str, line: u32) -> Result<Contract, EmitError> {
    let mut pp = PredicateParser::new(text, line, 1)?;
    let mut c = Contract::default();
    while !pp.at_end() {
        let (origin, list) = if pp.eat_keyword("requires") {
            (Origin::Pre, &mut c.requires)
        } else if pp.eat_keyword("ensures") {
            (Origin::Post, &mut c.ensures)
        } else {
            return Err(pp.error("expected `requires` or `ensures`").into());
        };
        let meta = pp
            .label()
            .ok_or_else(|| pp.error("expected a meta-property label"))?;
        let pred = pp.predicate()?;
        pp.expect_punct(";")?;
        list.push(TaggedPred { meta, pred, origin });
    }
    Ok(c)
}

fn parse_assert(text: &str, line: u32) -> Result<TaggedPred, EmitError> {
    let mut pp = PredicateParser::new(text, line, 1)?;
    if !pp.eat_keyword("assert") {
        return Err(pp.error("expected `assert`").into());
    }
    let meta = pp
        .label()
        .ok_or_else(|| pp.error("expected a meta-property label"))?;
    let label = pp
        .label()
        .ok_or_else(|| pp.error("expected an origin label"))?;
    let origin = match Origin::from_label(&label) {
        Some(
            o @ (Origin::AfterWrite | Origin::BeforeWrite | Origin::BeforeRead | Origin::AfterCall),
        ) => o,
        _ => {
            return Err(EmitError::Placement {
                line,
                message: format!("`{label}` is not a point-assertion origin"),
            })
        }
    };
    let pred = pp.predicate()?;
    pp.expect_punct(";")?;
    pp.expect_end()?;
    Ok(TaggedPred { meta, pred, origin })
}

/// An assertion and the position of its statement in the stripped tree.
struct Pending {
    parent: Option<Vec<usize>>,
    anchor: usize,
    pred: TaggedPred,
}

/// Removes annotation statements, remembering where each belongs.
fn strip_list(
    func: &str,
    stmts: Vec<Stmt>,
    parent: Option<Vec<usize>>,
    pending: &mut Vec<Pending>,
) -> Result<Vec<Stmt>, EmitError> {
    let mut out: Vec<Stmt> = Vec::new();
    let mut waiting: Vec<TaggedPred> = Vec::new();
    let mut waiting_line = 0;
    for mut s in stmts {
        if let StmtKind::Annotation(text) = &s.kind {
            let t = parse_assert(text, s.loc.line)?;
            match t.origin.phase() {
                Phase::Before => {
                    waiting_line = s.loc.line;
                    waiting.push(t);
                }
                Phase::After => {
                    let Some(anchor) = out.len().checked_sub(1) else {
                        return Err(EmitError::Placement {
                            line: s.loc.line,
                            message: format!("after-assertion in `{func}` follows no statement"),
                        });
                    };
                    pending.push(Pending {
                        parent: parent.clone(),
                        anchor,
                        pred: t,
                    });
                }
            }
            continue;
        }
        let index = out.len();
        for t in waiting.drain(..) {
            pending.push(Pending {
                parent: parent.clone(),
                anchor: index,
                pred: t,
            });
        }
        let mut here = parent.clone().unwrap_or_default();
        here.push(index);
        let lists: Vec<Vec<Stmt>> = s.children_mut().into_iter().map(std::mem::take).collect();
        let mut stripped = Vec::new();
        for (li, l) in lists.into_iter().enumerate() {
            let mut p = here.clone();
            p.push(li);
            stripped.push(strip_list(func, l, Some(p), pending)?);
        }
        for (slot, l) in s.children_mut().into_iter().zip(stripped) {
            *slot = l;
        }
        out.push(s);
    }
    if !waiting.is_empty() {
        return Err(EmitError::Placement {
            line: waiting_line,
            message: format!("before-assertion in `{func}` precedes no statement"),
        });
    }
    Ok(out)
}
