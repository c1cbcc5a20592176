//! Recursive-descent parser for mini-C.
//!
//! `for` loops, `++`/`--`, `+=`/`-=` and declaration initializers are
//! desugared here, so the tree only ever holds the core statement forms.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const TYPE_WORDS: &[&str] = &["int", "char", "unsigned", "void", "enum", "struct"];
const KEYWORDS: &[&str] = &[
    "int", "char", "unsigned", "void", "enum", "struct", "const", "if", "else", "while", "for",
    "return", "NULL",
];

impl Parser {
    pub(crate) fn new(toks: Vec<Token>) -> Parser {
        Parser { toks, pos: 0 }
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn reset(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub(crate) fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::new(t.line, t.col, msg)
    }

    pub(crate) fn expected(&self, what: &str) -> ParseError {
        self.error(format!("expected {what}, found {}", self.peek()))
    }

    pub(crate) fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub(crate) fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    pub(crate) fn at_builtin(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Builtin(s) if s == word)
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_ident(&mut self, word: &str) -> bool {
        if self.at_ident(word) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{p}`")))
        }
    }

    pub(crate) fn expect_name(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn at_type_start(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if TYPE_WORDS.contains(&s.as_str()))
    }

    // ---------------------------------------------------------------- types

    pub(crate) fn parse_type(&mut self) -> Result<TypeRef, ParseError> {
        let mut ty = match self.peek().clone() {
            Tok::Ident(w) => match w.as_str() {
                "int" => {
                    self.bump();
                    TypeRef::Int
                }
                "char" => {
                    self.bump();
                    TypeRef::Char
                }
                "void" => {
                    self.bump();
                    TypeRef::Void
                }
                "unsigned" => {
                    self.bump();
                    if !self.eat_ident("int") && self.eat_ident("char") {
                        TypeRef::Char
                    } else {
                        TypeRef::Int
                    }
                }
                "enum" => {
                    self.bump();
                    TypeRef::Enum(self.expect_name()?)
                }
                "struct" => {
                    self.bump();
                    TypeRef::Record(self.expect_name()?)
                }
                _ => return Err(self.expected("type")),
            },
            _ => return Err(self.expected("type")),
        };
        while self.eat_punct("*") {
            ty = TypeRef::ptr(ty);
        }
        Ok(ty)
    }

    fn parse_array_dims(&mut self, base: TypeRef) -> Result<TypeRef, ParseError> {
        let mut dims = Vec::new();
        while self.eat_punct("[") {
            dims.push(self.parse_expr()?);
            self.expect_punct("]")?;
        }
        let mut ty = base;
        for d in dims.into_iter().rev() {
            ty = TypeRef::Array(Box::new(ty), Box::new(d));
        }
        Ok(ty)
    }

    // ---------------------------------------------------------- expressions

    pub(crate) fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_binary(1)
    }

    /// Arithmetic-only expression (no relational or logical operators).
    pub(crate) fn parse_arith(&mut self) -> Result<Expr, ParseError> {
        self.parse_binary(5)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let p = match self.peek() {
            Tok::Punct(p) => *p,
            _ => return None,
        };
        Some(match p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    pub(crate) fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek_binop() {
                Some(op) if op.precedence() >= min_prec => op,
                _ => break,
            };
            // `p + (lo .. hi)` belongs to the location-term grammar.
            if op == BinOp::Add && self.is_range_suffix() {
                break;
            }
            self.bump();
            let rhs = self.parse_binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn is_range_suffix(&self) -> bool {
        if !matches!(self.peek_at(1), Tok::Punct("(")) {
            return false;
        }
        let mut depth = 0usize;
        let mut i = self.pos + 1;
        while i < self.toks.len() {
            match &self.toks[i].tok {
                Tok::Punct("(") | Tok::Punct("[") => depth += 1,
                Tok::Punct(")") | Tok::Punct("]") => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Punct("..") if depth == 1 => return true,
                Tok::Eof => return false,
                _ => {}
            }
            i += 1;
        }
        false
    }

    pub(crate) fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.parse_unary()?)));
        }
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.parse_unary()?)));
        }
        if self.eat_punct("*") {
            let inner = self.parse_unary()?;
            return Ok(Expr::Lval(Lvalue::Deref(Box::new(inner))));
        }
        if self.at_punct("&") {
            self.bump();
            let inner = self.parse_unary()?;
            return match inner {
                Expr::Lval(lv) => Ok(Expr::AddrOf(lv)),
                _ => Err(self.error("operand of `&` must be an lvalue")),
            };
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.parse_primary()?;
        loop {
            if self.eat_punct("[") {
                let idx = self.parse_expr()?;
                self.expect_punct("]")?;
                let base = self.as_lvalue(e)?;
                e = Expr::Lval(Lvalue::index(base, idx));
            } else if self.eat_punct(".") {
                let f = self.expect_name()?;
                let base = self.as_lvalue(e)?;
                e = Expr::Lval(Lvalue::field(base, &f));
            } else if self.eat_punct("->") {
                let f = self.expect_name()?;
                e = Expr::Lval(Lvalue::arrow(e, &f));
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(s) if s == "NULL" => {
                self.bump();
                Ok(Expr::Null)
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                if matches!(self.peek_at(1), Tok::Punct("(")) {
                    return Err(self.error(format!(
                        "call to `{s}` inside an expression; calls are statements in mini-C"
                    )));
                }
                self.bump();
                Ok(Expr::Lval(Lvalue::Var(s)))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.expected("expression")),
        }
    }

    pub(crate) fn as_lvalue(&self, e: Expr) -> Result<Lvalue, ParseError> {
        match e {
            Expr::Lval(lv) => Ok(lv),
            _ => Err(self.error("expected an lvalue")),
        }
    }

    // ----------------------------------------------------------- statements

    fn parse_block_body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.at_punct("}") {
            if self.at_eof() {
                return Err(self.expected("`}`"));
            }
            out.extend(self.parse_stmt()?);
        }
        self.bump();
        Ok(out)
    }

    /// Body of `if`/`while`: braces are optional, a block is flattened.
    fn parse_branch(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.at_punct("{") {
            self.parse_block_body()
        } else {
            self.parse_stmt()
        }
    }

    fn parse_stmt(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let line = self.line();
        let one = |k: StmtKind| Ok(vec![Stmt::at_line(k, line)]);
        if let Tok::Annot(text) = self.peek().clone() {
            self.bump();
            return one(StmtKind::Annotation(text));
        }
        if self.at_punct("{") {
            let body = self.parse_block_body()?;
            return one(StmtKind::Block(body));
        }
        if self.eat_ident("if") {
            self.expect_punct("(")?;
            let cond = self.parse_expr()?;
            self.expect_punct(")")?;
            let then_branch = self.parse_branch()?;
            let else_branch = if self.eat_ident("else") {
                self.parse_branch()?
            } else {
                Vec::new()
            };
            return one(StmtKind::If {
                cond,
                then_branch,
                else_branch,
            });
        }
        if self.eat_ident("while") {
            self.expect_punct("(")?;
            let cond = self.parse_expr()?;
            self.expect_punct(")")?;
            let body = self.parse_branch()?;
            return one(StmtKind::While { cond, body });
        }
        if self.eat_ident("for") {
            return self.parse_for(line);
        }
        if self.eat_ident("return") {
            if self.eat_punct(";") {
                return one(StmtKind::Return(None));
            }
            let e = self.parse_expr()?;
            self.expect_punct(";")?;
            return one(StmtKind::Return(Some(e)));
        }
        if self.at_type_start() {
            let s = self.parse_local_decl()?;
            self.expect_punct(";")?;
            return Ok(s);
        }
        let s = self.parse_simple()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn parse_for(&mut self, line: u32) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("(")?;
        let mut init = Vec::new();
        if !self.at_punct(";") {
            init = if self.at_type_start() {
                self.parse_local_decl()?
            } else {
                self.parse_simple()?
            };
        }
        self.expect_punct(";")?;
        let cond = if self.at_punct(";") {
            Expr::Int(1)
        } else {
            self.parse_expr()?
        };
        self.expect_punct(";")?;
        let step = if self.at_punct(")") {
            Vec::new()
        } else {
            self.parse_simple()?
        };
        self.expect_punct(")")?;
        let mut body = self.parse_branch()?;
        body.extend(step);
        let mut stmts = init;
        stmts.push(Stmt::at_line(StmtKind::While { cond, body }, line));
        Ok(vec![Stmt::at_line(StmtKind::Block(stmts), line)])
    }

    fn parse_local_decl(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let line = self.line();
        let base = self.parse_type()?;
        let name = self.expect_name()?;
        let ty = self.parse_array_dims(base)?;
        let mut out = vec![Stmt::at_line(
            StmtKind::Decl {
                name: name.clone(),
                ty,
            },
            line,
        )];
        if self.eat_punct("=") {
            out.push(self.parse_assign_rhs(Lvalue::Var(name), line)?);
        }
        Ok(out)
    }

    fn parse_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.at_punct(")") {
            loop {
                args.push(self.parse_expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn at_call(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
            && matches!(self.peek_at(1), Tok::Punct("("))
    }

    fn parse_assign_rhs(&mut self, lhs: Lvalue, line: u32) -> Result<Stmt, ParseError> {
        if self.at_call() {
            let callee = self.expect_name()?;
            let args = self.parse_args()?;
            return Ok(Stmt::at_line(
                StmtKind::Call {
                    dest: Some(lhs),
                    callee,
                    args,
                },
                line,
            ));
        }
        let rhs = self.parse_expr()?;
        Ok(Stmt::at_line(StmtKind::Assign { lhs, rhs }, line))
    }

    /// Assignment, call, or increment, without the trailing `;`.
    fn parse_simple(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let line = self.line();
        if self.at_call() {
            let callee = self.expect_name()?;
            let args = self.parse_args()?;
            return Ok(vec![Stmt::at_line(
                StmtKind::Call {
                    dest: None,
                    callee,
                    args,
                },
                line,
            )]);
        }
        for (p, op) in [("++", BinOp::Add), ("--", BinOp::Sub)] {
            if self.eat_punct(p) {
                let e = self.parse_unary()?;
                let lv = self.as_lvalue(e)?;
                return Ok(vec![step(lv, op, line)]);
            }
        }
        let e = self.parse_unary()?;
        let lhs = self.as_lvalue(e)?;
        for (p, op) in [("++", BinOp::Add), ("--", BinOp::Sub)] {
            if self.eat_punct(p) {
                return Ok(vec![step(lhs, op, line)]);
            }
        }
        for (p, op) in [("+=", BinOp::Add), ("-=", BinOp::Sub)] {
            if self.eat_punct(p) {
                let rhs = self.parse_expr()?;
                let rhs = Expr::binary(op, Expr::Lval(lhs.clone()), rhs);
                return Ok(vec![Stmt::at_line(StmtKind::Assign { lhs, rhs }, line)]);
            }
        }
        self.expect_punct("=")?;
        Ok(vec![self.parse_assign_rhs(lhs, line)?])
    }

    // ------------------------------------------------------------ top level

    fn parse_program(&mut self, file: &str) -> Result<Program, ParseError> {
        let mut p = Program {
            file: file.to_string(),
            ..Program::default()
        };
        let mut pending_contract: Option<String> = None;
        while !self.at_eof() {
            if let Tok::Annot(text) = self.peek().clone() {
                self.bump();
                if let Some(prev) = pending_contract.take() {
                    p.annotations.push(prev);
                }
                let t = text.trim_start();
                if t.starts_with("requires") || t.starts_with("ensures") {
                    pending_contract = Some(text);
                } else {
                    p.annotations.push(text);
                }
                continue;
            }
            let line = self.line();
            if self.eat_ident("const") {
                self.parse_type()?;
                let name = self.expect_name()?;
                self.expect_punct("=")?;
                let value = self.parse_expr()?;
                self.expect_punct(";")?;
                p.constants.push(ConstDecl { name, value });
            } else if self.at_ident("enum") && matches!(self.peek_at(2), Tok::Punct("{")) {
                self.bump();
                let name = self.expect_name()?;
                p.enums.push(self.parse_enum_body(name)?);
            } else if self.at_ident("struct") && matches!(self.peek_at(2), Tok::Punct("{")) {
                self.bump();
                let name = self.expect_name()?;
                p.records.push(self.parse_record_body(name)?);
            } else {
                let ty = self.parse_type()?;
                let name = self.expect_name()?;
                if self.at_punct("(") {
                    let mut f = self.parse_function(name, ty, line)?;
                    f.contract = pending_contract.take();
                    add_function(&mut p, f);
                    continue;
                }
                let ty = self.parse_array_dims(ty)?;
                let init = if self.eat_punct("=") {
                    Some(self.parse_expr()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                p.globals.push(GlobalDecl {
                    name,
                    ty,
                    init,
                    line,
                });
            }
            if let Some(prev) = pending_contract.take() {
                p.annotations.push(prev);
            }
        }
        if let Some(prev) = pending_contract.take() {
            p.annotations.push(prev);
        }
        p.renumber();
        Ok(p)
    }

    fn parse_enum_body(&mut self, name: String) -> Result<EnumType, ParseError> {
        self.expect_punct("{")?;
        let mut variants = Vec::new();
        let mut next = 0i64;
        while !self.at_punct("}") {
            let v = self.expect_name()?;
            if self.eat_punct("=") {
                let neg = self.eat_punct("-");
                match self.peek().clone() {
                    Tok::Int(i) => {
                        self.bump();
                        next = if neg { -i } else { i };
                    }
                    _ => return Err(self.expected("integer enumerator value")),
                }
            }
            variants.push((v, next));
            next += 1;
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        Ok(EnumType { name, variants })
    }

    fn parse_record_body(&mut self, name: String) -> Result<RecordType, ParseError> {
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while !self.at_punct("}") {
            let base = self.parse_type()?;
            let f = self.expect_name()?;
            let ty = self.parse_array_dims(base)?;
            self.expect_punct(";")?;
            fields.push((f, ty));
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        Ok(RecordType { name, fields })
    }

    fn parse_function(
        &mut self,
        name: String,
        ret: TypeRef,
        line: u32,
    ) -> Result<FunctionDef, ParseError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.at_ident("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        if !self.at_punct(")") {
            loop {
                let ty = self.parse_type()?;
                let pname = if matches!(self.peek(), Tok::Ident(_)) {
                    self.expect_name()?
                } else {
                    String::new()
                };
                params.push((pname, ty));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        if self.eat_punct(";") {
            return Ok(FunctionDef {
                name,
                params,
                return_type: ret,
                body: Vec::new(),
                is_declared_only: true,
                contract: None,
                line,
            });
        }
        let body = self.parse_block_body()?;
        Ok(FunctionDef {
            name,
            params,
            return_type: ret,
            body,
            is_declared_only: false,
            contract: None,
            line,
        })
    }
}

fn step(lv: Lvalue, op: BinOp, line: u32) -> Stmt {
    let rhs = Expr::binary(op, Expr::Lval(lv.clone()), Expr::Int(1));
    Stmt::at_line(StmtKind::Assign { lhs: lv, rhs }, line)
}

/// A prototype followed by a definition (or the reverse) collapses into the
/// definition, at the position of the first occurrence.
fn add_function(p: &mut Program, f: FunctionDef) {
    if let Some(existing) = p.functions.iter_mut().find(|g| g.name == f.name) {
        if existing.is_declared_only && !f.is_declared_only {
            *existing = f;
            return;
        }
        if f.is_declared_only && !existing.is_declared_only {
            return;
        }
    }
    p.functions.push(f);
}

/// Parses a mini-C translation unit. `file` is recorded in statement locations.
pub fn parse_program_named(source: &str, file: &str) -> Result<Program, ParseError> {
    let toks = tokenize(source)?;
    Parser::new(toks).parse_program(file)
}

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    parse_program_named(source, "")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file() {
        let p = parse_program("").unwrap();
        assert_eq!(p, Program::default());
    }

    #[test]
    fn missing_initializer_reports_semicolon() {
        let err = parse_program("int x = ;").unwrap_err();
        assert_eq!((err.line, err.col), (1, 9));
        assert!(err.message.contains("`;`"), "{}", err.message);
    }

    #[test]
    fn arrow_and_index() {
        let p = parse_program("void f(struct P* p) { p->d[2] = 1; }").unwrap();
        let StmtKind::Assign { lhs, .. } = &p.functions[0].body[0].kind else {
            panic!()
        };
        assert_eq!(
            *lhs,
            Lvalue::index(Lvalue::arrow(Expr::var("p"), "d"), Expr::Int(2))
        );
    }

    #[test]
    fn for_loop_desugars_to_while_block() {
        let p = parse_program("void f() { for (int i = 0; i < 3; ++i) g(i); }").unwrap();
        let StmtKind::Block(b) = &p.functions[0].body[0].kind else {
            panic!()
        };
        assert!(matches!(b[0].kind, StmtKind::Decl { .. }));
        assert!(matches!(b[1].kind, StmtKind::Assign { .. }));
        let StmtKind::While { body, .. } = &b[2].kind else {
            panic!()
        };
        assert_eq!(body.len(), 2);
        assert_eq!(b[2].loc.stmt_index, StmtPath(vec![0, 0, 2]));
        assert_eq!(body[1].loc.stmt_index, StmtPath(vec![0, 0, 2, 0, 1]));
    }

    #[test]
    fn call_in_expression_rejected() {
        assert!(parse_program("void f() { x = g() + 1; }").is_err());
    }

    #[test]
    fn prototype_merges_with_definition() {
        let p = parse_program("int g(int); int g(int a) { return a; }").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert!(p.functions[0].has_body());
        assert_eq!(p.functions[0].params[0].0, "a");
    }

    #[test]
    fn contract_attaches_to_next_function() {
        let p = parse_program("/*@ requires A: 1 == 1; */ void f() { }\n/*@ meta */").unwrap();
        assert!(p.functions[0].contract.is_some());
        assert_eq!(p.annotations, vec![" meta ".to_string()]);
    }

    #[test]
    fn multi_dimensional_arrays_nest_outermost_first() {
        let p = parse_program("char s[2][3];").unwrap();
        let TypeRef::Array(inner, n) = &p.globals[0].ty else {
            panic!()
        };
        assert_eq!(**n, Expr::Int(2));
        assert!(matches!(**inner, TypeRef::Array(_, _)));
    }
}
