use std::collections::{BTreeMap, BTreeSet};

use crate::minic::{Expr, Scope};
use crate::spec::{LocTerm, MetaVar, Predicate};

use super::machine::{separated, type_of, Loc, Machine, Place, Region, RuntimeError, Value};

/// Result of evaluating one predicate in one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub holds: bool,
    /// Quantifier valuation at the first violation (or at the error).
    pub witness: BTreeMap<String, i64>,
    /// Memory cells the evaluation read.
    pub reads: BTreeSet<Loc>,
    pub error: Option<RuntimeError>,
}

/// Evaluates `pred` in the innermost frame of `m` (or at global scope when
/// no frame is active). `meta` binds `\written` / `\read` to a region.
/// Evaluation errors make the predicate fail.
pub fn eval_predicate(
    m: &Machine<'_>,
    pred: &Predicate,
    meta: Option<(MetaVar, Region)>,
) -> Evaluation {
    let func = m.frame().map(|f| f.func.clone());
    let mut ev = Ev {
        m,
        func: func.as_deref(),
        names: Vec::new(),
        vals: Vec::new(),
        meta,
        reads: BTreeSet::new(),
        err_witness: None,
    };
    match ev.pred(pred) {
        Ok((holds, witness)) => Evaluation {
            holds,
            witness: if holds { BTreeMap::new() } else { witness },
            reads: ev.reads,
            error: None,
        },
        Err(e) => {
            let witness = ev.err_witness.take().unwrap_or_default();
            Evaluation {
                holds: false,
                witness,
                reads: ev.reads,
                error: Some(e),
            }
        }
    }
}

type Res = Result<(bool, BTreeMap<String, i64>), RuntimeError>;

struct Ev<'a, 'p> {
    m: &'a Machine<'p>,
    func: Option<&'a str>,
    names: Vec<String>,
    vals: Vec<i64>,
    meta: Option<(MetaVar, Region)>,
    reads: BTreeSet<Loc>,
    err_witness: Option<BTreeMap<String, i64>>,
}

impl Ev<'_, '_> {
    fn expr(&mut self, e: &Expr) -> Result<Value, RuntimeError> {
        let sc = Scope {
            env: self.m.env,
            func: self.func,
            bound: &self.names,
        };
        let reads = &mut self.reads;
        self.m.eval(&sc, &self.vals, e, &mut |r| {
            reads.insert(Loc {
                obj: r.object,
                off: r.offset,
            });
        })
    }

    fn int(&mut self, e: &Expr) -> Result<i64, RuntimeError> {
        match self.expr(e)? {
            Value::Int(v) => Ok(v),
            _ => Err(RuntimeError::Other("pointer used as an integer".into())),
        }
    }

    fn pred(&mut self, p: &Predicate) -> Res {
        let none = BTreeMap::new;
        match p {
            Predicate::BoundedForallInt { var, lo, hi, body } => {
                let lo = self.int(lo)?;
                let hi = self.int(hi)?;
                for v in lo..hi {
                    self.names.push(var.clone());
                    self.vals.push(v);
                    let r = self.pred(body);
                    if r.is_err() && self.err_witness.is_none() {
                        self.err_witness = Some(
                            self.names
                                .iter()
                                .cloned()
                                .zip(self.vals.iter().copied())
                                .collect(),
                        );
                    }
                    self.names.pop();
                    self.vals.pop();
                    let (ok, mut w) = r?;
                    if !ok {
                        w.insert(var.clone(), v);
                        return Ok((false, w));
                    }
                }
                Ok((true, none()))
            }
            Predicate::UnboundedForall { var, .. } => Err(RuntimeError::Other(format!(
                "quantifier over `{var}` is unbounded"
            ))),
            Predicate::Implies(a, b) => {
                if !self.pred(a)?.0 {
                    return Ok((true, none()));
                }
                self.pred(b)
            }
            Predicate::And(a, b) => {
                let ra = self.pred(a)?;
                if !ra.0 {
                    return Ok(ra);
                }
                self.pred(b)
            }
            Predicate::Or(a, b) => {
                if self.pred(a)?.0 {
                    return Ok((true, none()));
                }
                self.pred(b)
            }
            Predicate::Not(a) => Ok((!self.pred(a)?.0, none())),
            Predicate::Compare(op, a, b) => {
                let x = self.expr(a)?;
                let y = self.expr(b)?;
                Ok((super::machine::binop(*op, x, y)?.truthy(), none()))
            }
            Predicate::BoolAtom(e) => Ok((self.expr(e)?.truthy(), none())),
            Predicate::Separated(a, b) => {
                let ra = self.regions(a)?;
                let rb = self.regions(b)?;
                Ok((separated(&ra, &rb), none()))
            }
        }
    }

    fn regions(&mut self, l: &LocTerm) -> Result<Vec<Region>, RuntimeError> {
        match l {
            LocTerm::MetaWritten | LocTerm::MetaRead => {
                let want = if matches!(l, LocTerm::MetaWritten) {
                    MetaVar::Written
                } else {
                    MetaVar::Read
                };
                match self.meta {
                    Some((v, r)) if v == want => Ok(vec![r]),
                    _ => Err(RuntimeError::Other(format!(
                        "`\\{}` is not bound here",
                        want.keyword()
                    ))),
                }
            }
            LocTerm::AddrOf(lv) => {
                let sc = Scope {
                    env: self.m.env,
                    func: self.func,
                    bound: &self.names,
                };
                let reads = &mut self.reads;
                let place = self.m.place(&sc, &self.vals, lv, &mut |r| {
                    reads.insert(Loc {
                        obj: r.object,
                        off: r.offset,
                    });
                })?;
                match place {
                    Place::Mem(loc) => Ok(vec![self.m.region(loc, &type_of(&sc, lv)?)?]),
                    _ => Err(RuntimeError::Other("location term is not in memory".into())),
                }
            }
            LocTerm::PtrRange { ptr, lo, hi } => {
                let sc = Scope {
                    env: self.m.env,
                    func: self.func,
                    bound: &self.names,
                };
                let elem = match sc.expr_type(ptr) {
                    Ok(crate::minic::Ty::Ptr(t)) => self.m.env.size_of(&t) as i64,
                    _ => return Err(RuntimeError::Other("range base is not a pointer".into())),
                };
                let p = self.expr(ptr)?;
                let lo = self.int(lo)?;
                let hi = self.int(hi)?;
                let Value::Ptr(base) = p else {
                    return Err(RuntimeError::NullDereference);
                };
                if lo > hi {
                    return Err(RuntimeError::Other(format!("empty range {lo} .. {hi}")));
                }
                let r = Region {
                    object: base.obj,
                    offset: base.off + lo * elem,
                    length: (hi - lo + 1) * elem,
                };
                let len = self.m.objects[r.object].cells.len() as i64;
                if r.offset < 0 || r.offset + r.length > len {
                    return Err(RuntimeError::OutOfBounds {
                        object: self.m.objects[r.object].name.clone(),
                        offset: r.offset,
                    });
                }
                Ok(vec![r])
            }
        }
    }
}
