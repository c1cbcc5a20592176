use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::minic::types::ANY_INT;
use crate::minic::{Expr, FunctionDef, Lvalue, Scope, Stmt, StmtKind, Ty, TypedProgram};

use super::machine::{coerce, type_of, Frame, Loc, Machine, Place, Region, RuntimeError, Value};

const STEP_LIMIT: u64 = 2_000_000;
const DEPTH_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

/// Observation hooks. Every hook sees the machine read-only.
pub trait Monitor {
    /// After parameters are bound.
    fn entry(&mut self, _m: &Machine<'_>, _f: &FunctionDef) {}
    /// Before the frame is popped; `at` is the `return`, if any.
    fn exit(&mut self, _m: &Machine<'_>, _f: &FunctionDef, _at: Option<&Stmt>) {}
    fn before(&mut self, _m: &Machine<'_>, _func: &str, _s: &Stmt) {}
    /// After a statement completes normally.
    fn after(&mut self, _m: &Machine<'_>, _func: &str, _s: &Stmt) {}
    /// A callee returned to `s`; its result is not yet stored.
    fn returned(&mut self, _m: &Machine<'_>, _func: &str, _s: &Stmt) {}
    /// A memory cell is about to be read or written by `s`.
    fn access(&mut self, _m: &Machine<'_>, _func: &str, _s: &Stmt, _kind: Access, _r: Region) {}
}

pub struct NoMonitor;

impl Monitor for NoMonitor {}

enum Flow {
    Normal,
    Return,
}

/// Concrete interpreter over a typed program.
pub struct Interp<'p> {
    tp: &'p TypedProgram,
    pub machine: Machine<'p>,
    rng: ChaCha8Rng,
    steps: u64,
    /// Calls and returns, in order.
    pub trace: Vec<String>,
    ret: Value,
}

impl<'p> Interp<'p> {
    /// Allocates and initializes the globals.
    pub fn new(tp: &'p TypedProgram, seed: u64) -> Self {
        let env = &tp.env;
        let mut machine = Machine::new(env);
        for name in &env.global_order {
            let obj = machine.alloc(name.clone(), &env.globals[name]);
            machine.globals.insert(name.clone(), obj);
        }
        for g in &tp.program.globals {
            if let Some(init) = &g.init {
                let v = match init {
                    Expr::Null => Value::Null,
                    e => Value::Int(env.eval_const(e).expect("typechecked initializer")),
                };
                let obj = machine.globals[&g.name];
                machine.objects[obj].cells[0] = coerce(&env.globals[&g.name], v);
            }
        }
        Interp {
            tp,
            machine,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            trace: Vec::new(),
            ret: Value::Int(0),
        }
    }

    /// Runs a function with the given arguments and returns its result.
    pub fn call(
        &mut self,
        name: &str,
        args: Vec<Value>,
        mon: &mut dyn Monitor,
    ) -> Result<Value, RuntimeError> {
        let tp = self.tp;
        let f = tp
            .program
            .function(name)
            .ok_or_else(|| RuntimeError::Other(format!("unknown function `{name}`")))?;
        if !f.has_body() {
            return Err(RuntimeError::MissingStub(name.to_string()));
        }
        if self.machine.frames.len() >= DEPTH_LIMIT {
            return Err(RuntimeError::CallDepth);
        }
        let shown: Vec<String> = args.iter().map(|v| v.to_string()).collect();
        self.trace
            .push(format!("call {name}({})", shown.join(", ")));
        let scope = &tp.env.scopes[name];
        let mut frame = Frame {
            func: name.to_string(),
            regs: BTreeMap::new(),
            mem: BTreeMap::new(),
        };
        let mut vars: Vec<(&String, &Ty)> = scope.params.iter().map(|(n, t)| (n, t)).collect();
        vars.extend(scope.locals.iter());
        vars.sort();
        for (n, t) in vars {
            if scope.memory_vars.contains(n) {
                let obj = self.machine.alloc(format!("{name}.{n}"), t);
                frame.mem.insert(n.clone(), obj);
            } else {
                let mut cells = Vec::new();
                super::machine::zero_cells(&tp.env, t, &mut cells);
                frame.regs.insert(n.clone(), cells[0]);
            }
        }
        for ((n, t), v) in scope.params.iter().zip(args) {
            let v = coerce(t, v);
            match frame.mem.get(n) {
                Some(&obj) => self.machine.objects[obj].cells[0] = v,
                None => {
                    frame.regs.insert(n.clone(), v);
                }
            }
        }
        self.machine.frames.push(frame);
        mon.entry(&self.machine, f);
        let ret_ty = &tp.env.functions[name].ret;
        let ret = match self.block(f, &f.body, mon)? {
            Flow::Return => self.ret,
            Flow::Normal => {
                mon.exit(&self.machine, f, None);
                if ret_ty.is_pointer() {
                    Value::Null
                } else {
                    Value::Int(0)
                }
            }
        };
        self.machine.frames.pop();
        let ret = coerce(ret_ty, ret);
        self.trace.push(format!("return {name} {ret}"));
        Ok(ret)
    }

    fn block(
        &mut self,
        f: &'p FunctionDef,
        stmts: &'p [Stmt],
        mon: &mut dyn Monitor,
    ) -> Result<Flow, RuntimeError> {
        for s in stmts {
            if let Flow::Return = self.stmt(f, s, mon)? {
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Normal)
    }

    fn scope(&self, f: &'p FunctionDef) -> Scope<'p> {
        Scope::function(&self.tp.env, &f.name)
    }

    fn eval(
        &self,
        f: &'p FunctionDef,
        s: &Stmt,
        e: &Expr,
        mon: &mut dyn Monitor,
    ) -> Result<Value, RuntimeError> {
        let m = &self.machine;
        m.eval(&self.scope(f), &[], e, &mut |r| {
            mon.access(m, &f.name, s, Access::Read, r)
        })
    }

    fn place(
        &self,
        f: &'p FunctionDef,
        s: &Stmt,
        lv: &Lvalue,
        mon: &mut dyn Monitor,
    ) -> Result<Place, RuntimeError> {
        let m = &self.machine;
        m.place(&self.scope(f), &[], lv, &mut |r| {
            mon.access(m, &f.name, s, Access::Read, r)
        })
    }

    fn store(
        &mut self,
        f: &'p FunctionDef,
        s: &Stmt,
        lv: &Lvalue,
        p: Place,
        v: Value,
        mon: &mut dyn Monitor,
    ) -> Result<(), RuntimeError> {
        let ty = type_of(&self.scope(f), lv)?;
        if let Place::Mem(l) = p {
            self.machine.read_cell(l)?;
            mon.access(&self.machine, &f.name, s, Access::Write, Region::cell(l));
        }
        self.machine.store(&p, coerce(&ty, v))
    }

    fn stmt(
        &mut self,
        f: &'p FunctionDef,
        s: &'p Stmt,
        mon: &mut dyn Monitor,
    ) -> Result<Flow, RuntimeError> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            return Err(RuntimeError::StepLimit);
        }
        mon.before(&self.machine, &f.name, s);
        match &s.kind {
            StmtKind::Decl { .. } | StmtKind::Annotation(_) => {}
            StmtKind::Assign { lhs, rhs } => {
                let p = self.place(f, s, lhs, mon)?;
                let v = self.eval(f, s, rhs, mon)?;
                self.store(f, s, lhs, p, v, mon)?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let branch = if self.eval(f, s, cond, mon)?.truthy() {
                    then_branch
                } else {
                    else_branch
                };
                if let Flow::Return = self.block(f, branch, mon)? {
                    return Ok(Flow::Return);
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(f, s, cond, mon)?.truthy() {
                    if let Flow::Return = self.block(f, body, mon)? {
                        return Ok(Flow::Return);
                    }
                    self.steps += 1;
                    if self.steps > STEP_LIMIT {
                        return Err(RuntimeError::StepLimit);
                    }
                }
            }
            StmtKind::Call { dest, callee, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(f, s, a, mon)?);
                }
                let v = if callee == ANY_INT {
                    let (lo, hi) = match (vals[0], vals[1]) {
                        (Value::Int(lo), Value::Int(hi)) => (lo, hi),
                        _ => return Err(RuntimeError::Other("any_int over pointers".into())),
                    };
                    if lo > hi {
                        return Err(RuntimeError::EmptyChoice(lo, hi));
                    }
                    Value::Int(self.rng.gen_range(lo..=hi))
                } else {
                    let r = self.call(callee, vals, mon)?;
                    mon.returned(&self.machine, &f.name, s);
                    r
                };
                if let Some(d) = dest {
                    let p = self.place(f, s, d, mon)?;
                    self.store(f, s, d, p, v, mon)?;
                }
            }
            StmtKind::Return(e) => {
                self.ret = match e {
                    Some(e) => self.eval(f, s, e, mon)?,
                    None => Value::Int(0),
                };
                mon.exit(&self.machine, f, Some(s));
                return Ok(Flow::Return);
            }
            StmtKind::Block(b) => {
                if let Flow::Return = self.block(f, b, mon)? {
                    return Ok(Flow::Return);
                }
            }
        }
        mon.after(&self.machine, &f.name, s);
        Ok(Flow::Normal)
    }

    /// Value stored at a global scalar, for tests and tools.
    pub fn global_cell(&self, name: &str, offset: i64) -> Option<Value> {
        let obj = *self.machine.globals.get(name)?;
        self.machine.read_cell(Loc { obj, off: offset }).ok()
    }
}
