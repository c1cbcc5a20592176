use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::minic::types::{fold_binop, NameKind};
use crate::minic::{BinOp, Expr, Lvalue, Scope, Ty, TypeEnv, UnOp};

pub type ObjId = usize;

/// A cell address. The offset is signed so that a pointer may transiently
/// leave its object; every access checks bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Loc {
    pub obj: ObjId,
    pub off: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Null,
    Ptr(Loc),
}

impl Value {
    pub fn truthy(self) -> bool {
        !matches!(self, Value::Int(0) | Value::Null)
    }

    fn int(self) -> Result<i64, RuntimeError> {
        match self {
            Value::Int(v) => Ok(v),
            _ => Err(RuntimeError::Other("pointer used as an integer".into())),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Null => write!(f, "NULL"),
            Value::Ptr(l) => write!(f, "&#{}+{}", l.obj, l.off),
        }
    }
}

/// `length` cells of one object starting at `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    pub object: ObjId,
    pub offset: i64,
    pub length: i64,
}

impl Region {
    pub fn cell(l: Loc) -> Region {
        Region {
            object: l.obj,
            offset: l.off,
            length: 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.length <= 0
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self.object == other.object
            && self.offset < other.offset + other.length
            && other.offset < self.offset + self.length
    }
}

/// Every region of `a` is disjoint from every region of `b`.
pub fn separated(a: &[Region], b: &[Region]) -> bool {
    a.iter().all(|x| b.iter().all(|y| !x.overlaps(y)))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("null pointer dereference")]
    NullDereference,
    #[error("access outside `{object}` at cell {offset}")]
    OutOfBounds { object: String, offset: i64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("call to `{0}`, which has no body")]
    MissingStub(String),
    #[error("`any_int({0}, {1})`: empty range")]
    EmptyChoice(i64, i64),
    #[error("step limit exceeded")]
    StepLimit,
    #[error("call depth limit exceeded")]
    CallDepth,
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone)]
pub struct Object {
    pub name: String,
    pub cells: Vec<Value>,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub func: String,
    pub regs: BTreeMap<String, Value>,
    pub mem: BTreeMap<String, ObjId>,
}

/// Where an lvalue lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Reg(String),
    Mem(Loc),
    /// Constants and quantifier variables: readable, not addressable.
    Value(Value),
}

/// Memory plus the call stack.
#[derive(Debug, Clone)]
pub struct Machine<'p> {
    pub env: &'p TypeEnv,
    pub objects: Vec<Object>,
    pub globals: BTreeMap<String, ObjId>,
    pub frames: Vec<Frame>,
}

pub fn zero_cells(env: &TypeEnv, ty: &Ty, out: &mut Vec<Value>) {
    match ty {
        Ty::Array(t, n) => {
            for _ in 0..*n {
                zero_cells(env, t, out);
            }
        }
        Ty::Record(r) => {
            if let Some(l) = env.record(r) {
                for f in &l.fields {
                    zero_cells(env, &f.ty, out);
                }
            }
        }
        Ty::Ptr(_) | Ty::Null => out.push(Value::Null),
        _ => out.push(Value::Int(0)),
    }
}

/// Value as stored in a location of type `ty`.
pub fn coerce(ty: &Ty, v: Value) -> Value {
    match (ty, v) {
        (Ty::Char, Value::Int(x)) => Value::Int(x as i8 as i64),
        _ => v,
    }
}

impl<'p> Machine<'p> {
    pub fn new(env: &'p TypeEnv) -> Self {
        Machine {
            env,
            objects: Vec::new(),
            globals: BTreeMap::new(),
            frames: Vec::new(),
        }
    }

    pub fn alloc(&mut self, name: String, ty: &Ty) -> ObjId {
        let mut cells = Vec::new();
        zero_cells(self.env, ty, &mut cells);
        self.objects.push(Object { name, cells });
        self.objects.len() - 1
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.frames.last()
    }

    fn frame_mut(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("active frame")
    }

    fn check(&self, r: Region) -> Result<(), RuntimeError> {
        let len = self.objects[r.object].cells.len() as i64;
        if r.offset < 0 || r.offset + r.length > len {
            return Err(RuntimeError::OutOfBounds {
                object: self.objects[r.object].name.clone(),
                offset: r.offset,
            });
        }
        Ok(())
    }

    /// Region covered by an lvalue of type `ty` at `l`.
    pub fn region(&self, l: Loc, ty: &Ty) -> Result<Region, RuntimeError> {
        let r = Region {
            object: l.obj,
            offset: l.off,
            length: self.env.size_of(ty) as i64,
        };
        self.check(r)?;
        Ok(r)
    }

    pub fn read_cell(&self, l: Loc) -> Result<Value, RuntimeError> {
        self.check(Region::cell(l))?;
        Ok(self.objects[l.obj].cells[l.off as usize])
    }

    pub fn load(&self, p: &Place) -> Result<Value, RuntimeError> {
        match p {
            Place::Reg(n) => Ok(self
                .frame()
                .and_then(|f| f.regs.get(n))
                .copied()
                .unwrap_or(Value::Int(0))),
            Place::Mem(l) => self.read_cell(*l),
            Place::Value(v) => Ok(*v),
        }
    }

    pub fn store(&mut self, p: &Place, v: Value) -> Result<(), RuntimeError> {
        match p {
            Place::Reg(n) => {
                self.frame_mut().regs.insert(n.clone(), v);
            }
            Place::Mem(l) => {
                self.check(Region::cell(*l))?;
                self.objects[l.obj].cells[l.off as usize] = v;
            }
            Place::Value(_) => return Err(RuntimeError::Other("assignment to a constant".into())),
        }
        Ok(())
    }

    /// Locates `lv`. `bound` holds the values of `sc.bound`, position by
    /// position; `rd` sees every memory cell read on the way.
    pub fn place(
        &self,
        sc: &Scope<'_>,
        bound: &[i64],
        lv: &Lvalue,
        rd: &mut dyn FnMut(Region),
    ) -> Result<Place, RuntimeError> {
        match lv {
            Lvalue::Var(n) => {
                if let Some(i) = sc.bound.iter().rposition(|b| b == n) {
                    return Ok(Place::Value(Value::Int(bound[i])));
                }
                match sc.resolve(n) {
                    Some(NameKind::Register(_)) => Ok(Place::Reg(n.clone())),
                    Some(NameKind::LocalMemory(_)) => {
                        let obj = self.frame().and_then(|f| f.mem.get(n)).copied();
                        obj.map(|obj| Place::Mem(Loc { obj, off: 0 }))
                            .ok_or_else(|| {
                                RuntimeError::Other(format!("`{n}` is not in the current frame"))
                            })
                    }
                    Some(NameKind::Global(_)) => Ok(Place::Mem(Loc {
                        obj: self.globals[n],
                        off: 0,
                    })),
                    Some(NameKind::Const(v)) | Some(NameKind::EnumConst(_, v)) => {
                        Ok(Place::Value(Value::Int(v)))
                    }
                    Some(NameKind::Bound) | None => {
                        Err(RuntimeError::Other(format!("unbound name `{n}`")))
                    }
                }
            }
            Lvalue::Field(b, f) => {
                let Ty::Record(r) = type_of(sc, b)? else {
                    return Err(RuntimeError::Other("field of a non-record".into()));
                };
                let fi = self
                    .env
                    .record(&r)
                    .and_then(|l| l.field(f))
                    .expect("typechecked field");
                match self.place(sc, bound, b, rd)? {
                    Place::Mem(l) => Ok(Place::Mem(Loc {
                        obj: l.obj,
                        off: l.off + fi.offset as i64,
                    })),
                    _ => Err(RuntimeError::Other("record outside memory".into())),
                }
            }
            Lvalue::Index(b, i) => match type_of(sc, b)? {
                Ty::Array(t, n) => {
                    let Place::Mem(l) = self.place(sc, bound, b, rd)? else {
                        return Err(RuntimeError::Other("array outside memory".into()));
                    };
                    let k = self.eval(sc, bound, i, rd)?.int()?;
                    if k < 0 || k >= n as i64 {
                        return Err(RuntimeError::OutOfBounds {
                            object: self.objects[l.obj].name.clone(),
                            offset: l.off + k * self.env.size_of(&t) as i64,
                        });
                    }
                    Ok(Place::Mem(Loc {
                        obj: l.obj,
                        off: l.off + k * self.env.size_of(&t) as i64,
                    }))
                }
                Ty::Ptr(t) => {
                    let p = self.eval(sc, bound, &Expr::Lval((**b).clone()), rd)?;
                    let k = self.eval(sc, bound, i, rd)?.int()?;
                    match p {
                        Value::Ptr(l) => Ok(Place::Mem(Loc {
                            obj: l.obj,
                            off: l.off + k * self.env.size_of(&t) as i64,
                        })),
                        _ => Err(RuntimeError::NullDereference),
                    }
                }
                t => Err(RuntimeError::Other(format!("indexing `{t}`"))),
            },
            Lvalue::Deref(e) => match self.eval(sc, bound, e, rd)? {
                Value::Ptr(l) => Ok(Place::Mem(l)),
                _ => Err(RuntimeError::NullDereference),
            },
        }
    }

    pub fn eval(
        &self,
        sc: &Scope<'_>,
        bound: &[i64],
        e: &Expr,
        rd: &mut dyn FnMut(Region),
    ) -> Result<Value, RuntimeError> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Null => Ok(Value::Null),
            Expr::Lval(lv) => {
                let p = self.place(sc, bound, lv, rd)?;
                let v = self.load(&p)?;
                if let Place::Mem(l) = p {
                    rd(Region::cell(l));
                }
                Ok(v)
            }
            Expr::AddrOf(lv) => match self.place(sc, bound, lv, rd)? {
                Place::Mem(l) => Ok(Value::Ptr(l)),
                _ => Err(RuntimeError::Other("address of a register".into())),
            },
            Expr::Unary(UnOp::Neg, x) => Ok(Value::Int(
                self.eval(sc, bound, x, rd)?.int()?.wrapping_neg(),
            )),
            Expr::Unary(UnOp::Not, x) => {
                Ok(Value::Int(!self.eval(sc, bound, x, rd)?.truthy() as i64))
            }
            Expr::Binary(BinOp::And, l, r) => Ok(Value::Int(
                (self.eval(sc, bound, l, rd)?.truthy() && self.eval(sc, bound, r, rd)?.truthy())
                    as i64,
            )),
            Expr::Binary(BinOp::Or, l, r) => Ok(Value::Int(
                (self.eval(sc, bound, l, rd)?.truthy() || self.eval(sc, bound, r, rd)?.truthy())
                    as i64,
            )),
            Expr::Binary(op, l, r) => {
                let a = self.eval(sc, bound, l, rd)?;
                let b = self.eval(sc, bound, r, rd)?;
                binop(*op, a, b)
            }
        }
    }

    /// Order-independent hash of every global object's cells.
    pub fn globals_digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, &obj) in &self.globals {
            h.update(name.as_bytes());
            h.update(b"=");
            for v in &self.objects[obj].cells {
                h.update(value_bytes(*v));
            }
            h.update(b";");
        }
        short_hex(h)
    }

    /// Hash of the given cells and their current values.
    pub fn cells_digest<'a>(&self, cells: impl IntoIterator<Item = &'a Loc>) -> String {
        let mut h = Sha256::new();
        for l in cells {
            h.update(format!("{}:{}=", l.obj, l.off).as_bytes());
            h.update(value_bytes(self.read_cell(*l).unwrap_or(Value::Int(0))));
            h.update(b";");
        }
        short_hex(h)
    }
}

fn value_bytes(v: Value) -> Vec<u8> {
    match v {
        Value::Int(x) => format!("i{x},").into_bytes(),
        Value::Null => b"n,".to_vec(),
        Value::Ptr(l) => format!("p{}:{},", l.obj, l.off).into_bytes(),
    }
}

fn short_hex(h: Sha256) -> String {
    hex::encode(&h.finalize()[..8])
}

pub fn binop(op: BinOp, a: Value, b: Value) -> Result<Value, RuntimeError> {
    match (op, a, b) {
        (BinOp::Eq, _, _) if !matches!((a, b), (Value::Int(_), Value::Int(_))) => {
            Ok(Value::Int((a == b) as i64))
        }
        (BinOp::Ne, _, _) if !matches!((a, b), (Value::Int(_), Value::Int(_))) => {
            Ok(Value::Int((a != b) as i64))
        }
        _ => fold_binop(op, a.int()?, b.int()?)
            .map(Value::Int)
            .ok_or(RuntimeError::DivisionByZero),
    }
}

pub fn type_of(sc: &Scope<'_>, lv: &Lvalue) -> Result<Ty, RuntimeError> {
    sc.lvalue_type(lv)
        .map_err(|e| RuntimeError::Other(e.message))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(object: usize, offset: i64, length: i64) -> Region {
        Region {
            object,
            offset,
            length,
        }
    }

    #[test]
    fn overlap_basics() {
        assert!(r(0, 0, 2).overlaps(&r(0, 1, 1)));
        assert!(!r(0, 0, 2).overlaps(&r(0, 2, 1)));
        assert!(!r(0, 0, 2).overlaps(&r(1, 0, 2)));
        assert!(!r(0, 0, 0).overlaps(&r(0, 0, 5)));
    }

    #[test]
    fn separated_with_empty_side() {
        assert!(separated(&[], &[r(0, 0, 1)]));
        assert!(!separated(&[r(0, 0, 3)], &[r(0, 0, 3)]));
    }

    #[test]
    fn pointer_equality_and_integer_ops() {
        let p = Value::Ptr(Loc { obj: 1, off: 2 });
        assert_eq!(binop(BinOp::Eq, p, p).unwrap(), Value::Int(1));
        assert_eq!(binop(BinOp::Ne, p, Value::Null).unwrap(), Value::Int(1));
        assert_eq!(
            binop(BinOp::Div, Value::Int(1), Value::Int(0)),
            Err(RuntimeError::DivisionByZero)
        );
        assert_eq!(coerce(&Ty::Char, Value::Int(200)), Value::Int(-56));
    }
}
