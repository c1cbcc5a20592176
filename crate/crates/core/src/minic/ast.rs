//! Syntax tree of the mini-C language.
//!
//! The tree is purely syntactic: names are unresolved and array sizes are
//! kept as expressions. Resolution and layout live in [`super::types`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Where a statement came from. `stmt_index` is the path of child indices
/// from the function body root; see [`StmtPath`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceLoc {
    pub file: String,
    pub line: u32,
    pub stmt_index: StmtPath,
}

/// Path from a function body to a statement.
///
/// A top-level statement `body[i]` has path `[i]`. The children of a compound
/// statement at path `p` have path `p ++ [list, j]`, where `list` is 0 for the
/// then-branch / loop body / block contents and 1 for an else-branch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StmtPath(pub Vec<usize>);

impl StmtPath {
    pub fn root() -> Self {
        StmtPath(Vec::new())
    }

    pub fn child(&self, list: usize, index: usize) -> Self {
        let mut v = self.0.clone();
        if !v.is_empty() {
            v.push(list);
        }
        v.push(index);
        StmtPath(v)
    }
}

impl fmt::Display for StmtPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join("."))
    }
}

/// A type as written in source.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeRef {
    Int,
    Char,
    Void,
    Enum(String),
    Record(String),
    Pointer(Box<TypeRef>),
    Array(Box<TypeRef>, Box<Expr>),
}

impl TypeRef {
    pub fn ptr(inner: TypeRef) -> TypeRef {
        TypeRef::Pointer(Box::new(inner))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// C binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Null,
    Lval(Lvalue),
    AddrOf(Lvalue),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Lval(Lvalue::Var(name.to_string()))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Lvalue {
    Var(String),
    Field(Box<Lvalue>, String),
    Index(Box<Lvalue>, Box<Expr>),
    Deref(Box<Expr>),
}

impl Lvalue {
    pub fn var(name: &str) -> Lvalue {
        Lvalue::Var(name.to_string())
    }

    /// `base->field`
    pub fn arrow(base: Expr, field: &str) -> Lvalue {
        Lvalue::Field(Box::new(Lvalue::Deref(Box::new(base))), field.to_string())
    }

    pub fn field(base: Lvalue, field: &str) -> Lvalue {
        Lvalue::Field(Box::new(base), field.to_string())
    }

    pub fn index(base: Lvalue, idx: Expr) -> Lvalue {
        Lvalue::Index(Box::new(base), Box::new(idx))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// Local declaration. Locals are function-scoped and zero-initialized on
    /// entry; an initializer in source becomes a following `Assign`/`Call`.
    Decl {
        name: String,
        ty: TypeRef,
    },
    Assign {
        lhs: Lvalue,
        rhs: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Call {
        dest: Option<Lvalue>,
        callee: String,
        args: Vec<Expr>,
    },
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    /// Raw contents of a `/*@ ... */` comment found in statement position.
    Annotation(String),
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            loc: SourceLoc::default(),
        }
    }

    pub fn at_line(kind: StmtKind, line: u32) -> Stmt {
        Stmt {
            kind,
            loc: SourceLoc {
                line,
                ..SourceLoc::default()
            },
        }
    }

    /// Child statement lists, in path order.
    pub fn children(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            StmtKind::While { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            StmtKind::While { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumType {
    pub name: String,
    pub variants: Vec<(String, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordType {
    pub name: String,
    pub fields: Vec<(String, TypeRef)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: TypeRef,
    pub init: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// Unnamed prototype parameters carry an empty name.
    pub params: Vec<(String, TypeRef)>,
    pub return_type: TypeRef,
    pub body: Vec<Stmt>,
    pub is_declared_only: bool,
    /// Raw contents of a contract annotation directly preceding the definition.
    pub contract: Option<String>,
    pub line: u32,
}

impl FunctionDef {
    pub fn has_body(&self) -> bool {
        !self.is_declared_only
    }
}

/// A mini-C translation unit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub file: String,
    pub constants: Vec<ConstDecl>,
    pub enums: Vec<EnumType>,
    pub records: Vec<RecordType>,
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDef>,
    /// Global-scope `/*@ ... */` blocks (meta-property declarations).
    pub annotations: Vec<String>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut FunctionDef> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    /// Names of the functions that have bodies.
    pub fn defined_functions(&self) -> Vec<String> {
        self.functions
            .iter()
            .filter(|f| f.has_body())
            .map(|f| f.name.clone())
            .collect()
    }

    /// Recomputes every statement location from the tree shape.
    pub fn renumber(&mut self) {
        let file = self.file.clone();
        for f in &mut self.functions {
            renumber_stmts(&mut f.body, &StmtPath::root(), 0, &file);
        }
    }

    /// Copy with locations and line numbers erased, for structural comparison.
    pub fn without_locs(&self) -> Program {
        let mut p = self.clone();
        p.file.clear();
        for g in &mut p.globals {
            g.line = 0;
        }
        for f in &mut p.functions {
            f.line = 0;
            clear_locs(&mut f.body);
        }
        p
    }

    /// Finds a statement by its path within a function body.
    pub fn stmt_at(&self, function: &str, path: &StmtPath) -> Option<&Stmt> {
        let f = self.function(function)?;
        stmt_at(&f.body, &path.0)
    }
}

fn renumber_stmts(stmts: &mut [Stmt], parent: &StmtPath, list: usize, file: &str) {
    for (i, s) in stmts.iter_mut().enumerate() {
        let path = if parent.0.is_empty() && list == 0 {
            StmtPath(vec![i])
        } else {
            let mut v = parent.0.clone();
            v.push(list);
            v.push(i);
            StmtPath(v)
        };
        s.loc.file = file.to_string();
        s.loc.stmt_index = path.clone();
        for (li, children) in s.children_mut().into_iter().enumerate() {
            renumber_nested(children, &path, li, file);
        }
    }
}

fn renumber_nested(stmts: &mut [Stmt], parent: &StmtPath, list: usize, file: &str) {
    for (i, s) in stmts.iter_mut().enumerate() {
        let path = parent.child(list, i);
        s.loc.file = file.to_string();
        s.loc.stmt_index = path.clone();
        for (li, children) in s.children_mut().into_iter().enumerate() {
            renumber_nested(children, &path, li, file);
        }
    }
}

fn clear_locs(stmts: &mut [Stmt]) {
    for s in stmts {
        s.loc = SourceLoc::default();
        for c in s.children_mut() {
            clear_locs(c);
        }
    }
}

pub(crate) fn stmt_at<'a>(stmts: &'a [Stmt], path: &[usize]) -> Option<&'a Stmt> {
    let (&first, rest) = path.split_first()?;
    let s = stmts.get(first)?;
    if rest.is_empty() {
        return Some(s);
    }
    let (&list, rest) = rest.split_first()?;
    let children = s.children();
    stmt_at(children.get(list)?, rest)
}

/// Visits every statement in pre-order.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        for c in s.children() {
            walk_stmts(c, f);
        }
    }
}
