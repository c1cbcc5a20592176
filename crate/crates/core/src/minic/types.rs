//! Name resolution, layout and type checking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;
use super::TypeError;

/// Resolved type. Array sizes are folded to cell counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Int,
    Char,
    Void,
    /// Type of the `NULL` literal.
    Null,
    Enum(String),
    Record(String),
    Ptr(Box<Ty>),
    Array(Box<Ty>, usize),
}

impl Ty {
    pub fn is_integer(&self) -> bool {
        matches!(self, Ty::Int | Ty::Char)
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, Ty::Ptr(_) | Ty::Null)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Ty::Int | Ty::Char | Ty::Enum(_) | Ty::Ptr(_))
    }

    /// Usable as a branch condition.
    pub fn is_truthy(&self) -> bool {
        matches!(self, Ty::Int | Ty::Char | Ty::Ptr(_) | Ty::Null)
    }

    pub fn pointee(&self) -> Option<&Ty> {
        match self {
            Ty::Ptr(t) => Some(t),
            _ => None,
        }
    }

    /// Whether a value of type `src` may be stored in a location of this type.
    pub fn accepts(&self, src: &Ty) -> bool {
        match (self, src) {
            (a, b) if a.is_integer() && b.is_integer() => true,
            (Ty::Enum(a), Ty::Enum(b)) => a == b,
            (Ty::Ptr(a), Ty::Ptr(b)) => a == b,
            (Ty::Ptr(_), Ty::Null) => true,
            _ => false,
        }
    }

    /// Whether `==`/`!=` may compare the two types.
    pub fn comparable(&self, other: &Ty) -> bool {
        self.accepts(other) || other.accepts(self) || (*self == Ty::Null && *other == Ty::Null)
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => write!(f, "int"),
            Ty::Char => write!(f, "char"),
            Ty::Void => write!(f, "void"),
            Ty::Null => write!(f, "null"),
            Ty::Enum(n) => write!(f, "enum {n}"),
            Ty::Record(n) => write!(f, "struct {n}"),
            Ty::Ptr(t) => write!(f, "{t}*"),
            Ty::Array(t, n) => write!(f, "{t}[{n}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldInfo {
    pub name: String,
    pub ty: Ty,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordLayout {
    pub name: String,
    pub fields: Vec<FieldInfo>,
    pub size: usize,
}

impl RecordLayout {
    pub fn field(&self, name: &str) -> Option<&FieldInfo> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncSig {
    pub name: String,
    pub params: Vec<(String, Ty)>,
    pub ret: Ty,
    pub has_body: bool,
}

/// Variables visible inside one function.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FuncScope {
    pub params: Vec<(String, Ty)>,
    pub locals: BTreeMap<String, Ty>,
    /// Locals and parameters that live in memory: aggregates and anything
    /// whose address is taken. Everything else is a register.
    pub memory_vars: BTreeSet<String>,
}

impl FuncScope {
    pub fn var_type(&self, name: &str) -> Option<&Ty> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .or_else(|| self.locals.get(name))
    }

    pub fn is_register(&self, name: &str) -> bool {
        self.var_type(name).is_some() && !self.memory_vars.contains(name)
    }
}

/// The name of the builtin nondeterministic choice function.
pub const ANY_INT: &str = "any_int";

/// Prefix of compiler-introduced temporaries.
pub const TEMP_PREFIX: &str = "__t";

pub fn is_temp(name: &str) -> bool {
    name.strip_prefix(TEMP_PREFIX)
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnv {
    pub consts: BTreeMap<String, i64>,
    /// enumerator → (enum name, value)
    pub enum_consts: BTreeMap<String, (String, i64)>,
    pub enums: BTreeSet<String>,
    pub records: BTreeMap<String, RecordLayout>,
    pub globals: BTreeMap<String, Ty>,
    pub global_order: Vec<String>,
    pub functions: BTreeMap<String, FuncSig>,
    pub scopes: BTreeMap<String, FuncScope>,
}

/// How a name resolves at a program point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NameKind {
    Bound,
    Register(Ty),
    LocalMemory(Ty),
    Global(Ty),
    Const(i64),
    EnumConst(String, i64),
}

impl NameKind {
    pub fn ty(&self) -> Ty {
        match self {
            NameKind::Bound | NameKind::Const(_) => Ty::Int,
            NameKind::Register(t) | NameKind::LocalMemory(t) | NameKind::Global(t) => t.clone(),
            NameKind::EnumConst(e, _) => Ty::Enum(e.clone()),
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(
            self,
            NameKind::Bound | NameKind::Const(_) | NameKind::EnumConst(..)
        )
    }
}

/// Name-resolution context: a function (or none, for global predicates)
/// plus the quantifier variables currently in scope.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub env: &'a TypeEnv,
    pub func: Option<&'a str>,
    pub bound: &'a [String],
}

impl<'a> Scope<'a> {
    pub fn global(env: &'a TypeEnv) -> Self {
        Scope {
            env,
            func: None,
            bound: &[],
        }
    }

    pub fn function(env: &'a TypeEnv, func: &'a str) -> Self {
        Scope {
            env,
            func: Some(func),
            bound: &[],
        }
    }

    pub fn with_bound(self, bound: &'a [String]) -> Self {
        Scope { bound, ..self }
    }

    pub fn resolve(&self, name: &str) -> Option<NameKind> {
        if self.bound.iter().any(|b| b == name) {
            return Some(NameKind::Bound);
        }
        if let Some(scope) = self.func.and_then(|f| self.env.scopes.get(f)) {
            if let Some(t) = scope.var_type(name) {
                return Some(if scope.memory_vars.contains(name) {
                    NameKind::LocalMemory(t.clone())
                } else {
                    NameKind::Register(t.clone())
                });
            }
        }
        if let Some(t) = self.env.globals.get(name) {
            return Some(NameKind::Global(t.clone()));
        }
        if let Some(v) = self.env.consts.get(name) {
            return Some(NameKind::Const(*v));
        }
        self.env
            .enum_consts
            .get(name)
            .map(|(e, v)| NameKind::EnumConst(e.clone(), *v))
    }

    pub fn lvalue_type(&self, lv: &Lvalue) -> Result<Ty, TypeError> {
        match lv {
            Lvalue::Var(n) => self
                .resolve(n)
                .map(|k| k.ty())
                .ok_or_else(|| TypeError::new(format!("unknown name `{n}`"))),
            Lvalue::Field(base, f) => match self.lvalue_type(base)? {
                Ty::Record(r) => {
                    let layout = self
                        .env
                        .records
                        .get(&r)
                        .ok_or_else(|| TypeError::new(format!("unknown struct `{r}`")))?;
                    layout
                        .field(f)
                        .map(|fi| fi.ty.clone())
                        .ok_or_else(|| TypeError::new(format!("struct `{r}` has no field `{f}`")))
                }
                t => Err(TypeError::new(format!(
                    "field access `.{f}` on non-struct type `{t}`"
                ))),
            },
            Lvalue::Index(base, idx) => {
                let it = self.expr_type(idx)?;
                if !it.is_integer() {
                    return Err(TypeError::new(format!("array index has type `{it}`")));
                }
                match self.lvalue_type(base)? {
                    Ty::Array(t, _) => Ok(*t),
                    Ty::Ptr(t) => Ok(*t),
                    t => Err(TypeError::new(format!("indexing non-array type `{t}`"))),
                }
            }
            Lvalue::Deref(e) => match self.expr_type(e)? {
                Ty::Ptr(t) => Ok(*t),
                t => Err(TypeError::new(format!(
                    "dereferencing non-pointer type `{t}`"
                ))),
            },
        }
    }

    pub fn expr_type(&self, e: &Expr) -> Result<Ty, TypeError> {
        match e {
            Expr::Int(_) => Ok(Ty::Int),
            Expr::Null => Ok(Ty::Null),
            Expr::Lval(lv) => {
                let t = self.lvalue_type(lv)?;
                if !t.is_scalar() {
                    return Err(TypeError::new(format!(
                        "`{}` of type `{t}` used as a value",
                        super::pretty::lvalue_to_string(lv)
                    )));
                }
                Ok(t)
            }
            Expr::AddrOf(lv) => {
                if let Lvalue::Var(n) = lv {
                    match self.resolve(n) {
                        Some(k) if k.is_value() => {
                            return Err(TypeError::new(format!("cannot take the address of `{n}`")))
                        }
                        _ => {}
                    }
                }
                Ok(Ty::Ptr(Box::new(self.lvalue_type(lv)?)))
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let t = self.expr_type(inner)?;
                if !t.is_integer() {
                    return Err(TypeError::new(format!("negating `{t}`")));
                }
                Ok(Ty::Int)
            }
            Expr::Unary(UnOp::Not, inner) => {
                let t = self.expr_type(inner)?;
                if !t.is_truthy() {
                    return Err(TypeError::new(format!("logical not on `{t}`")));
                }
                Ok(Ty::Int)
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr_type(l)?;
                let rt = self.expr_type(r)?;
                binary_result(*op, &lt, &rt)
            }
        }
    }
}

pub(crate) fn binary_result(op: BinOp, lt: &Ty, rt: &Ty) -> Result<Ty, TypeError> {
    let ok = match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
            lt.is_integer() && rt.is_integer()
        }
        BinOp::Eq | BinOp::Ne => lt.comparable(rt),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            (lt.is_integer() && rt.is_integer())
                || matches!((lt, rt), (Ty::Enum(a), Ty::Enum(b)) if a == b)
        }
        BinOp::And | BinOp::Or => lt.is_truthy() && rt.is_truthy(),
    };
    if ok {
        Ok(Ty::Int)
    } else {
        Err(TypeError::new(format!(
            "operator `{}` applied to `{lt}` and `{rt}`",
            op.symbol()
        )))
    }
}

impl TypeEnv {
    pub fn size_of(&self, ty: &Ty) -> usize {
        match ty {
            Ty::Array(t, n) => self.size_of(t) * n,
            Ty::Record(r) => self.records.get(r).map_or(0, |l| l.size),
            Ty::Void => 0,
            _ => 1,
        }
    }

    pub fn record(&self, name: &str) -> Option<&RecordLayout> {
        self.records.get(name)
    }

    pub fn scope(&self, func: &str) -> Option<&FuncScope> {
        self.scopes.get(func)
    }

    /// Whether a value of `container` holds at least one cell of scalar type `cell`.
    pub fn contains_cell_type(&self, container: &Ty, cell: &Ty) -> bool {
        match container {
            Ty::Array(t, _) => self.contains_cell_type(t, cell),
            Ty::Record(r) => self.records.get(r).is_some_and(|l| {
                l.fields
                    .iter()
                    .any(|f| self.contains_cell_type(&f.ty, cell))
            }),
            t => t == cell,
        }
    }

    pub fn resolve_type(&self, t: &TypeRef) -> Result<Ty, TypeError> {
        Ok(match t {
            TypeRef::Int => Ty::Int,
            TypeRef::Char => Ty::Char,
            TypeRef::Void => Ty::Void,
            TypeRef::Enum(n) => {
                if !self.enums.contains(n) {
                    return Err(TypeError::new(format!("unknown enum `{n}`")));
                }
                Ty::Enum(n.clone())
            }
            TypeRef::Record(n) => {
                if !self.records.contains_key(n) {
                    return Err(TypeError::new(format!("unknown struct `{n}`")));
                }
                Ty::Record(n.clone())
            }
            TypeRef::Pointer(inner) => {
                let it = self.resolve_type(inner)?;
                if matches!(it, Ty::Void | Ty::Array(..)) {
                    return Err(TypeError::new(format!(
                        "pointer to `{it}` is not supported"
                    )));
                }
                Ty::Ptr(Box::new(it))
            }
            TypeRef::Array(inner, size) => {
                let it = self.resolve_type(inner)?;
                if it == Ty::Void {
                    return Err(TypeError::new("array of void"));
                }
                let n = self.eval_const(size)?;
                if n <= 0 {
                    return Err(TypeError::new(format!("array size {n} is not positive")));
                }
                Ty::Array(Box::new(it), n as usize)
            }
        })
    }

    /// Folds a compile-time integer expression.
    pub fn eval_const(&self, e: &Expr) -> Result<i64, TypeError> {
        match e {
            Expr::Int(v) => Ok(*v),
            Expr::Lval(Lvalue::Var(n)) => {
                if let Some(v) = self.consts.get(n) {
                    Ok(*v)
                } else if let Some((_, v)) = self.enum_consts.get(n) {
                    Ok(*v)
                } else {
                    Err(TypeError::new(format!("`{n}` is not a constant")))
                }
            }
            Expr::Unary(UnOp::Neg, x) => Ok(self.eval_const(x)?.wrapping_neg()),
            Expr::Unary(UnOp::Not, x) => Ok((self.eval_const(x)? == 0) as i64),
            Expr::Binary(op, l, r) => {
                let a = self.eval_const(l)?;
                let b = self.eval_const(r)?;
                fold_binop(*op, a, b)
                    .ok_or_else(|| TypeError::new("division by zero in constant expression"))
            }
            _ => Err(TypeError::new("not a constant expression")),
        }
    }
}

/// Integer semantics shared by constant folding and the interpreter.
pub fn fold_binop(op: BinOp, a: i64, b: i64) -> Option<i64> {
    Some(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return None;
            }
            a.wrapping_div(b)
        }
        BinOp::Rem => {
            if b == 0 {
                return None;
            }
            a.wrapping_rem(b)
        }
        BinOp::Eq => (a == b) as i64,
        BinOp::Ne => (a != b) as i64,
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
        BinOp::Gt => (a > b) as i64,
        BinOp::Ge => (a >= b) as i64,
        BinOp::And => (a != 0 && b != 0) as i64,
        BinOp::Or => (a != 0 || b != 0) as i64,
    })
}

/// A program that passed [`typecheck`], with its resolved environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub program: Program,
    pub env: TypeEnv,
}

struct Checker {
    env: TypeEnv,
    errors: Vec<TypeError>,
}

impl Checker {
    fn err(&mut self, line: u32, msg: impl Into<String>) {
        self.errors.push(TypeError::at(line, msg));
    }

    fn declare_value(&mut self, seen: &mut BTreeSet<String>, name: &str, line: u32) {
        if !seen.insert(name.to_string()) {
            self.err(line, format!("duplicate top-level name `{name}`"));
        }
    }
}

pub fn typecheck(p: &Program) -> Result<TypedProgram, Vec<TypeError>> {
    let mut ck = Checker {
        env: TypeEnv::default(),
        errors: Vec::new(),
    };
    let mut values = BTreeSet::new();
    let mut types = BTreeSet::new();

    for c in &p.constants {
        ck.declare_value(&mut values, &c.name, 0);
        match ck.env.eval_const(&c.value) {
            Ok(v) => {
                ck.env.consts.insert(c.name.clone(), v);
            }
            Err(e) => ck.err(0, format!("constant `{}`: {}", c.name, e.message)),
        }
    }
    for e in &p.enums {
        if !types.insert(e.name.clone()) {
            ck.err(0, format!("duplicate type name `{}`", e.name));
        }
        ck.env.enums.insert(e.name.clone());
        for (v, val) in &e.variants {
            ck.declare_value(&mut values, v, 0);
            ck.env.enum_consts.insert(v.clone(), (e.name.clone(), *val));
        }
    }
    for r in &p.records {
        if !types.insert(r.name.clone()) {
            ck.err(0, format!("duplicate type name `{}`", r.name));
        }
    }
    layout_records(&mut ck, &p.records);

    for g in &p.globals {
        ck.declare_value(&mut values, &g.name, g.line);
        let ty = match ck.env.resolve_type(&g.ty) {
            Ok(Ty::Void) => {
                ck.err(g.line, format!("global `{}` has type void", g.name));
                continue;
            }
            Ok(t) => t,
            Err(e) => {
                ck.err(g.line, format!("global `{}`: {}", g.name, e.message));
                continue;
            }
        };
        if let Some(init) = &g.init {
            check_global_init(&mut ck, &g.name, &ty, init, g.line);
        }
        ck.env.globals.insert(g.name.clone(), ty);
        ck.env.global_order.push(g.name.clone());
    }

    for f in &p.functions {
        ck.declare_value(&mut values, &f.name, f.line);
        if f.name == ANY_INT {
            ck.err(
                f.line,
                format!("`{ANY_INT}` is a builtin and cannot be redefined"),
            );
        }
        let ret = match ck.env.resolve_type(&f.return_type) {
            Ok(t) if t == Ty::Void || t.is_scalar() => t,
            Ok(t) => {
                ck.err(
                    f.line,
                    format!("function `{}` returns non-scalar `{t}`", f.name),
                );
                Ty::Void
            }
            Err(e) => {
                ck.err(f.line, e.message);
                Ty::Void
            }
        };
        let mut params = Vec::new();
        for (pn, pt) in &f.params {
            match ck.env.resolve_type(pt) {
                Ok(t) if t.is_scalar() => params.push((pn.clone(), t)),
                Ok(t) => ck.err(
                    f.line,
                    format!("parameter `{pn}` of `{}` has non-scalar type `{t}`", f.name),
                ),
                Err(e) => ck.err(f.line, e.message),
            }
            if f.has_body() && pn.is_empty() {
                ck.err(
                    f.line,
                    format!("unnamed parameter in definition of `{}`", f.name),
                );
            }
        }
        ck.env.functions.insert(
            f.name.clone(),
            FuncSig {
                name: f.name.clone(),
                params,
                ret,
                has_body: f.has_body(),
            },
        );
    }

    for f in p.functions.iter().filter(|f| f.has_body()) {
        check_function(&mut ck, f, &values);
    }

    if ck.errors.is_empty() {
        Ok(TypedProgram {
            program: p.clone(),
            env: ck.env,
        })
    } else {
        Err(ck.errors)
    }
}

fn layout_records(ck: &mut Checker, records: &[RecordType]) {
    let by_name: BTreeMap<&str, &RecordType> =
        records.iter().map(|r| (r.name.as_str(), r)).collect();
    // Register names first so pointer fields can refer to any record.
    for r in records {
        ck.env.records.insert(
            r.name.clone(),
            RecordLayout {
                name: r.name.clone(),
                fields: Vec::new(),
                size: 0,
            },
        );
    }
    let mut done = BTreeSet::new();
    for r in records {
        let mut stack = Vec::new();
        layout_one(ck, &by_name, r.name.as_str(), &mut done, &mut stack);
    }
}

fn layout_one<'a>(
    ck: &mut Checker,
    by_name: &BTreeMap<&'a str, &'a RecordType>,
    name: &'a str,
    done: &mut BTreeSet<String>,
    stack: &mut Vec<String>,
) {
    if done.contains(name) {
        return;
    }
    if stack.iter().any(|s| s == name) {
        ck.err(0, format!("struct `{name}` contains itself"));
        return;
    }
    let Some(rec) = by_name.get(name) else { return };
    stack.push(name.to_string());
    let mut seen = BTreeSet::new();
    let mut fields = Vec::new();
    let mut offset = 0;
    for (fname, fty) in &rec.fields {
        if !seen.insert(fname.clone()) {
            ck.err(0, format!("duplicate field `{fname}` in struct `{name}`"));
        }
        // Embedded records must be laid out first.
        let mut inner = fty;
        while let TypeRef::Array(t, _) = inner {
            inner = t;
        }
        if let TypeRef::Record(r) = inner {
            if let Some((k, _)) = by_name.get_key_value(r.as_str()) {
                layout_one(ck, by_name, k, done, stack);
            }
        }
        match ck.env.resolve_type(fty) {
            Ok(Ty::Void) => ck.err(0, format!("field `{fname}` has type void")),
            Ok(t) => {
                let size = ck.env.size_of(&t);
                fields.push(FieldInfo {
                    name: fname.clone(),
                    ty: t,
                    offset,
                });
                offset += size;
            }
            Err(e) => ck.err(0, format!("field `{name}.{fname}`: {}", e.message)),
        }
    }
    stack.pop();
    done.insert(name.to_string());
    ck.env.records.insert(
        name.to_string(),
        RecordLayout {
            name: name.to_string(),
            fields,
            size: offset,
        },
    );
}

fn check_global_init(ck: &mut Checker, name: &str, ty: &Ty, init: &Expr, line: u32) {
    let ok = match (ty, init) {
        (Ty::Ptr(_), Expr::Null) => true,
        (t, e) if t.is_integer() => {
            ck.env.eval_const(e).is_ok()
                && !matches!(e, Expr::Lval(Lvalue::Var(n)) if ck.env.enum_consts.contains_key(n))
        }
        (Ty::Enum(en), Expr::Lval(Lvalue::Var(n))) => {
            ck.env.enum_consts.get(n).is_some_and(|(e, _)| e == en)
        }
        _ => false,
    };
    if !ok {
        ck.err(
            line,
            format!("unsupported initializer for global `{name}` of type `{ty}`"),
        );
    }
}

fn check_function(ck: &mut Checker, f: &FunctionDef, values: &BTreeSet<String>) {
    let sig = ck.env.functions[&f.name].clone();
    let mut scope = FuncScope {
        params: sig.params.clone(),
        ..FuncScope::default()
    };
    for (pn, _) in &sig.params {
        if values.contains(pn) {
            ck.err(
                f.line,
                format!("parameter `{pn}` of `{}` shadows a global name", f.name),
            );
        }
    }
    let mut decls = Vec::new();
    walk_stmts(&f.body, &mut |s| {
        if let StmtKind::Decl { name, ty } = &s.kind {
            decls.push((name.clone(), ty.clone(), s.loc.line));
        }
    });
    for (name, ty, line) in decls {
        if values.contains(&name) || sig.params.iter().any(|(p, _)| *p == name) {
            ck.err(
                line,
                format!("local `{name}` in `{}` shadows another name", f.name),
            );
            continue;
        }
        if scope.locals.contains_key(&name) {
            ck.err(line, format!("duplicate local `{name}` in `{}`", f.name));
            continue;
        }
        match ck.env.resolve_type(&ty) {
            Ok(Ty::Void) => ck.err(line, format!("local `{name}` has type void")),
            Ok(t) => {
                if !t.is_scalar() {
                    scope.memory_vars.insert(name.clone());
                }
                scope.locals.insert(name, t);
            }
            Err(e) => ck.err(line, e.message),
        }
    }
    // Address-taken analysis needs types, so install the scope first.
    ck.env.scopes.insert(f.name.clone(), scope.clone());
    let mut taken = BTreeSet::new();
    {
        let sc = Scope::function(&ck.env, &f.name);
        walk_stmts(&f.body, &mut |s| {
            collect_address_taken_stmt(&sc, s, &mut taken)
        });
    }
    for t in &taken {
        if is_temp(t) {
            ck.err(f.line, format!("address of temporary `{t}` taken"));
        }
    }
    scope.memory_vars.extend(taken);
    ck.env.scopes.insert(f.name.clone(), scope);

    let mut errs = Vec::new();
    {
        let sc = Scope::function(&ck.env, &f.name);
        check_stmts(&sc, &sig, &f.body, &mut errs);
    }
    ck.errors.extend(errs);
}

/// The local variable whose storage `lv` designates, if any.
pub(crate) fn lvalue_root_var<'a>(sc: &Scope<'_>, lv: &'a Lvalue) -> Option<&'a str> {
    match lv {
        Lvalue::Var(n) => Some(n),
        Lvalue::Field(b, _) => lvalue_root_var(sc, b),
        Lvalue::Index(b, _) => match sc.lvalue_type(b) {
            Ok(Ty::Array(..)) => lvalue_root_var(sc, b),
            _ => None,
        },
        Lvalue::Deref(_) => None,
    }
}

fn collect_address_taken_stmt(sc: &Scope<'_>, s: &Stmt, out: &mut BTreeSet<String>) {
    let mut visit = |e: &Expr| collect_address_taken_expr(sc, e, out);
    match &s.kind {
        StmtKind::Assign { lhs, rhs } => {
            lvalue_exprs(lhs, &mut visit);
            visit(rhs);
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => visit(cond),
        StmtKind::Call { dest, args, .. } => {
            if let Some(d) = dest {
                lvalue_exprs(d, &mut visit);
            }
            args.iter().for_each(visit);
        }
        StmtKind::Return(Some(e)) => visit(e),
        _ => {}
    }
}

fn lvalue_exprs(lv: &Lvalue, f: &mut dyn FnMut(&Expr)) {
    match lv {
        Lvalue::Var(_) => {}
        Lvalue::Field(b, _) => lvalue_exprs(b, f),
        Lvalue::Index(b, i) => {
            lvalue_exprs(b, f);
            f(i);
        }
        Lvalue::Deref(e) => f(e),
    }
}

fn collect_address_taken_expr(sc: &Scope<'_>, e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::AddrOf(lv) => {
            if let Some(root) = lvalue_root_var(sc, lv) {
                if sc
                    .env
                    .scopes
                    .get(sc.func.unwrap_or_default())
                    .is_some_and(|s| s.var_type(root).is_some())
                {
                    out.insert(root.to_string());
                }
            }
            lvalue_exprs(lv, &mut |x| collect_address_taken_expr(sc, x, out));
        }
        Expr::Lval(lv) => lvalue_exprs(lv, &mut |x| collect_address_taken_expr(sc, x, out)),
        Expr::Unary(_, x) => collect_address_taken_expr(sc, x, out),
        Expr::Binary(_, l, r) => {
            collect_address_taken_expr(sc, l, out);
            collect_address_taken_expr(sc, r, out);
        }
        Expr::Int(_) | Expr::Null => {}
    }
}

fn check_assignable(sc: &Scope<'_>, lv: &Lvalue) -> Result<Ty, TypeError> {
    if let Lvalue::Var(n) = lv {
        match sc.resolve(n) {
            Some(k) if k.is_value() => {
                return Err(TypeError::new(format!("cannot assign to constant `{n}`")))
            }
            None => return Err(TypeError::new(format!("unknown name `{n}`"))),
            _ => {}
        }
    }
    let t = sc.lvalue_type(lv)?;
    if !t.is_scalar() {
        return Err(TypeError::new(format!(
            "assignment to `{}` of non-scalar type `{t}`",
            super::pretty::lvalue_to_string(lv)
        )));
    }
    Ok(t)
}

fn check_stmts(sc: &Scope<'_>, sig: &FuncSig, stmts: &[Stmt], errs: &mut Vec<TypeError>) {
    for s in stmts {
        let line = s.loc.line;
        let mut push = |r: Result<(), TypeError>| {
            if let Err(e) = r {
                errs.push(TypeError::at(
                    line,
                    format!("in `{}`: {}", sig.name, e.message),
                ));
            }
        };
        match &s.kind {
            StmtKind::Decl { .. } | StmtKind::Annotation(_) => {}
            StmtKind::Assign { lhs, rhs } => push((|| {
                let lt = check_assignable(sc, lhs)?;
                let rt = sc.expr_type(rhs)?;
                if !lt.accepts(&rt) {
                    return Err(TypeError::new(format!("cannot assign `{rt}` to `{lt}`")));
                }
                Ok(())
            })()),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                push(check_cond(sc, cond));
                check_stmts(sc, sig, then_branch, errs);
                check_stmts(sc, sig, else_branch, errs);
            }
            StmtKind::While { cond, body } => {
                push(check_cond(sc, cond));
                check_stmts(sc, sig, body, errs);
            }
            StmtKind::Block(b) => check_stmts(sc, sig, b, errs),
            StmtKind::Call { dest, callee, args } => push((|| {
                let (params, ret): (Vec<Ty>, Ty) = if callee == ANY_INT {
                    (vec![Ty::Int, Ty::Int], Ty::Int)
                } else {
                    let f = sc.env.functions.get(callee).ok_or_else(|| {
                        TypeError::new(format!("call to unknown function `{callee}`"))
                    })?;
                    (
                        f.params.iter().map(|(_, t)| t.clone()).collect(),
                        f.ret.clone(),
                    )
                };
                if params.len() != args.len() {
                    return Err(TypeError::new(format!(
                        "`{callee}` expects {} argument(s), got {}",
                        params.len(),
                        args.len()
                    )));
                }
                for (i, (pt, a)) in params.iter().zip(args).enumerate() {
                    let at = sc.expr_type(a)?;
                    if !pt.accepts(&at) {
                        return Err(TypeError::new(format!(
                            "argument {} of `{callee}`: expected `{pt}`, got `{at}`",
                            i + 1
                        )));
                    }
                }
                if let Some(d) = dest {
                    let dt = check_assignable(sc, d)?;
                    if ret == Ty::Void || !dt.accepts(&ret) {
                        return Err(TypeError::new(format!(
                            "cannot assign result `{ret}` of `{callee}` to `{dt}`"
                        )));
                    }
                }
                Ok(())
            })()),
            StmtKind::Return(e) => push((|| match (e, &sig.ret) {
                (None, Ty::Void) => Ok(()),
                (None, t) => Err(TypeError::new(format!(
                    "missing return value of type `{t}`"
                ))),
                (Some(_), Ty::Void) => {
                    Err(TypeError::new("returning a value from a void function"))
                }
                (Some(e), t) => {
                    let et = sc.expr_type(e)?;
                    if t.accepts(&et) {
                        Ok(())
                    } else {
                        Err(TypeError::new(format!(
                            "returning `{et}` from function returning `{t}`"
                        )))
                    }
                }
            })()),
        }
    }
}

fn check_cond(sc: &Scope<'_>, cond: &Expr) -> Result<(), TypeError> {
    let t = sc.expr_type(cond)?;
    if t.is_truthy() {
        Ok(())
    } else {
        Err(TypeError::new(format!("condition has type `{t}`")))
    }
}
