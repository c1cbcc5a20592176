use std::collections::BTreeSet;

use crate::minic::lexer::{tokenize, tokenize_at, Tok};
use crate::minic::parser::Parser;
use crate::minic::{BinOp, Expr, Lvalue, ParseError};

use super::{ContextKind, LocTerm, MetaProperty, Predicate, SpecError, TargetSpec};

/// Parser for the annotation language, layered over the mini-C expression
/// parser.
pub struct PredicateParser {
    p: Parser,
}

impl PredicateParser {
    pub fn new(text: &str, line: u32, col: u32) -> Result<Self, ParseError> {
        Ok(PredicateParser {
            p: Parser::new(tokenize_at(text, line, col)?),
        })
    }

    pub fn at_end(&self) -> bool {
        self.p.at_eof()
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.p.at_eof() {
            Ok(())
        } else {
            Err(self.p.expected("end of annotation"))
        }
    }

    pub fn eat_keyword(&mut self, word: &str) -> bool {
        self.p.eat_ident(word)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        self.p.eat_punct(p)
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        self.p.expect_punct(p)
    }

    pub fn expect_name(&mut self) -> Result<String, ParseError> {
        self.p.expect_name()
    }

    /// `NAME :` if present.
    pub fn label(&mut self) -> Option<String> {
        match (self.p.peek().clone(), self.p.peek_at(1)) {
            (Tok::Ident(n), Tok::Punct(":")) => {
                self.p.bump();
                self.p.bump();
                Some(n)
            }
            _ => None,
        }
    }

    pub fn error(&self, msg: &str) -> ParseError {
        self.p.error(msg)
    }

    pub fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let lhs = self.pred_or()?;
        if self.p.eat_punct("==>") {
            let rhs = self.predicate()?;
            return Ok(Predicate::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn pred_or(&mut self) -> Result<Predicate, ParseError> {
        let mut l = self.pred_and()?;
        while self.p.eat_punct("||") {
            let r = self.pred_and()?;
            l = Predicate::or(l, r);
        }
        Ok(l)
    }

    fn pred_and(&mut self) -> Result<Predicate, ParseError> {
        let mut l = self.pred_unary()?;
        while self.p.eat_punct("&&") {
            let r = self.pred_unary()?;
            l = Predicate::and(l, r);
        }
        Ok(l)
    }

    fn pred_unary(&mut self) -> Result<Predicate, ParseError> {
        if self.p.eat_punct("!") {
            return Ok(Predicate::negate(self.pred_unary()?));
        }
        if self.p.at_builtin("forall") {
            self.p.bump();
            return self.forall();
        }
        if self.p.at_builtin("separated") {
            self.p.bump();
            self.p.expect_punct("(")?;
            let a = self.loc_term()?;
            self.p.expect_punct(",")?;
            let b = self.loc_term()?;
            self.p.expect_punct(")")?;
            return Ok(Predicate::Separated(a, b));
        }
        if self.p.at_builtin("true") || self.p.at_builtin("false") {
            let v = self.p.at_builtin("true") as i64;
            self.p.bump();
            return Ok(Predicate::BoolAtom(Expr::Int(v)));
        }
        if self.p.at_punct("(") {
            let save = self.p.pos();
            self.p.bump();
            if let Ok(inner) = self.predicate() {
                if self.p.eat_punct(")") && !self.at_term_continuation() {
                    return Ok(inner);
                }
            }
            self.p.reset(save);
        }
        self.comparison_chain()
    }

    /// After `( ... )`: does an arithmetic or relational operator follow,
    /// meaning the parenthesis belonged to a term?
    fn at_term_continuation(&self) -> bool {
        matches!(
            self.p.peek(),
            Tok::Punct(
                "+" | "-"
                    | "*"
                    | "/"
                    | "%"
                    | "=="
                    | "!="
                    | "<"
                    | "<="
                    | ">"
                    | ">="
                    | "["
                    | "."
                    | "->"
            )
        )
    }

    fn relop(&self) -> Option<BinOp> {
        Some(match self.p.peek() {
            Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            _ => return None,
        })
    }

    /// `a op b op c ...` means `a op b && b op c && ...`.
    fn comparison_chain(&mut self) -> Result<Predicate, ParseError> {
        let first = self.p.parse_arith()?;
        let mut terms = vec![first];
        let mut ops = Vec::new();
        while let Some(op) = self.relop() {
            self.p.bump();
            ops.push(op);
            terms.push(self.p.parse_arith()?);
        }
        if ops.is_empty() {
            return Ok(Predicate::BoolAtom(terms.pop().unwrap()));
        }
        let mut out: Option<Predicate> = None;
        for (i, op) in ops.into_iter().enumerate() {
            let c = Predicate::Compare(op, terms[i].clone(), terms[i + 1].clone());
            out = Some(match out {
                None => c,
                Some(prev) => Predicate::and(prev, c),
            });
        }
        Ok(out.unwrap())
    }

    fn forall(&mut self) -> Result<Predicate, ParseError> {
        if !self.p.eat_ident("int") {
            return Err(self
                .p
                .expected("`int` (only integer quantifiers are supported)"));
        }
        let var = self.p.expect_name()?;
        self.p.expect_punct(";")?;
        let body = self.predicate()?;
        Ok(bound_quantifier(var, body))
    }

    fn loc_term(&mut self) -> Result<LocTerm, ParseError> {
        if self.p.at_builtin("written") {
            self.p.bump();
            return Ok(LocTerm::MetaWritten);
        }
        if self.p.at_builtin("read") {
            self.p.bump();
            return Ok(LocTerm::MetaRead);
        }
        let e = self.p.parse_unary()?;
        if let Expr::AddrOf(lv) = e {
            return Ok(LocTerm::AddrOf(lv));
        }
        if self.p.eat_punct("+") {
            self.p.expect_punct("(")?;
            let lo = self.p.parse_expr()?;
            self.p.expect_punct("..")?;
            let hi = self.p.parse_expr()?;
            self.p.expect_punct(")")?;
            return Ok(LocTerm::PtrRange { ptr: e, lo, hi });
        }
        // A bare lvalue designates its own location.
        match e {
            Expr::Lval(lv) => Ok(LocTerm::AddrOf(lv)),
            _ => Err(self
                .p
                .expected("location (`&lvalue`, `p + (lo .. hi)`, `\\written` or `\\read`)")),
        }
    }

    /// The meta header and predicate after `meta`.
    fn meta(&mut self) -> Result<MetaProperty, ParseError> {
        let name = self.p.expect_name()?;
        self.p.expect_punct(":")?;
        if !self.p.at_builtin("forall") {
            return Err(self.p.expected("`\\forall function f;`"));
        }
        self.p.bump();
        if !self.p.eat_ident("function") {
            return Err(self.p.expected("`function`"));
        }
        let fvar = self.p.expect_name()?;
        self.p.expect_punct(";")?;

        let mut targets = TargetSpec::default();
        let mut literals = 0;
        while self.p.at_punct("!") || self.p.at_builtin("subset") {
            let negated = self.p.eat_punct("!");
            if !self.p.at_builtin("subset") {
                return Err(self.p.expected("`\\subset`"));
            }
            self.p.bump();
            self.p.expect_punct("(")?;
            self.expect_fvar(&fvar)?;
            self.p.expect_punct(",")?;
            self.p.expect_punct("{")?;
            let mut names = Vec::new();
            if !self.p.at_punct("}") {
                loop {
                    names.push(self.p.expect_name()?);
                    if !self.p.eat_punct(",") {
                        break;
                    }
                }
            }
            self.p.expect_punct("}")?;
            self.p.expect_punct(")")?;
            let slot = if negated {
                &mut targets.excludes
            } else {
                &mut targets.includes
            };
            if slot.is_some() {
                return Err(self
                    .p
                    .error("at most one positive and one negated `\\subset` per meta-property"));
            }
            *slot = Some(names);
            literals += 1;
            if self.p.eat_punct("&&") {
                continue;
            }
            self.p.expect_punct("==>")?;
            break;
        }
        if literals > 2 {
            return Err(self.p.error("too many target constraints"));
        }

        let context =
            match self.p.peek().clone() {
                Tok::Builtin(k) => {
                    ContextKind::from_keyword(&k).ok_or_else(|| self.p.expected("context"))?
                }
                _ => return Err(self.p.expected(
                    "context (`\\weak_invariant`, `\\strong_invariant`, `\\writing`, `\\reading`)",
                )),
            };
        self.p.bump();
        self.p.expect_punct("(")?;
        self.expect_fvar(&fvar)?;
        self.p.expect_punct(")")?;
        self.p.expect_punct(",")?;
        let predicate = self.predicate()?;
        self.p.expect_punct(";")?;
        Ok(MetaProperty {
            name,
            context,
            targets,
            predicate,
        })
    }

    fn expect_fvar(&mut self, fvar: &str) -> Result<(), ParseError> {
        let n = self.p.expect_name()?;
        if n != fvar {
            return Err(self
                .p
                .error(format!("expected function variable `{fvar}`, found `{n}`")));
        }
        Ok(())
    }
}

fn conjuncts(p: Predicate, out: &mut Vec<Predicate>) {
    match p {
        Predicate::And(a, b) => {
            conjuncts(*a, out);
            conjuncts(*b, out);
        }
        p => out.push(p),
    }
}

fn is_var(e: &Expr, var: &str) -> bool {
    matches!(e, Expr::Lval(Lvalue::Var(n)) if n == var)
}

/// Recognizes `lo <= var && var < hi && rest ==> body` (chains included)
/// and builds the bounded quantifier.
fn bound_quantifier(var: String, body: Predicate) -> Predicate {
    let Predicate::Implies(guard, consequent) = body else {
        return Predicate::UnboundedForall {
            var,
            body: Box::new(body),
        };
    };
    let mut cs = Vec::new();
    conjuncts(*guard.clone(), &mut cs);
    let range = match (cs.first(), cs.get(1)) {
        (
            Some(Predicate::Compare(BinOp::Le, lo, v1)),
            Some(Predicate::Compare(BinOp::Lt, v2, hi)),
        ) if is_var(v1, &var) && is_var(v2, &var) => Some((lo.clone(), hi.clone())),
        _ => None,
    };
    let Some((lo, hi)) = range else {
        return Predicate::UnboundedForall {
            var,
            body: Box::new(Predicate::Implies(guard, consequent)),
        };
    };
    let rest = cs.into_iter().skip(2).reduce(Predicate::and);
    let body = match rest {
        Some(g) => Predicate::implies(g, *consequent),
        None => *consequent,
    };
    Predicate::BoundedForallInt {
        var,
        lo,
        hi,
        body: Box::new(body),
    }
}

/// Parses a standalone predicate.
pub fn parse_predicate(text: &str) -> Result<Predicate, ParseError> {
    let mut pp = PredicateParser::new(text, 1, 1)?;
    let p = pp.predicate()?;
    pp.expect_end()?;
    Ok(p)
}

/// Parses the inside of a `/*@ ... */` block holding `meta` clauses.
pub fn parse_meta_block(span: &str) -> Result<Vec<MetaProperty>, SpecError> {
    parse_meta_block_at(span, 1, 1)
}

pub fn parse_meta_block_at(
    span: &str,
    line: u32,
    col: u32,
) -> Result<Vec<MetaProperty>, SpecError> {
    let mut pp = PredicateParser::new(span, line, col)?;
    let mut out: Vec<MetaProperty> = Vec::new();
    let mut names = BTreeSet::new();
    while !pp.at_end() {
        if !pp.eat_keyword("meta") {
            return Err(pp.p.expected("`meta`").into());
        }
        let m = pp.meta()?;
        if !names.insert(m.name.clone()) {
            return Err(SpecError::DuplicateName(m.name));
        }
        out.push(m);
    }
    Ok(out)
}

/// Parses a sidecar spec file: a sequence of `/*@ meta ... */` blocks.
pub fn parse_meta_file(text: &str) -> Result<Vec<MetaProperty>, SpecError> {
    let toks = tokenize(text)?;
    let mut out: Vec<MetaProperty> = Vec::new();
    for t in toks {
        match t.tok {
            Tok::Annot(body) => {
                for m in parse_meta_block_at(&body, t.line, t.col)? {
                    if out.iter().any(|o| o.name == m.name) {
                        return Err(SpecError::DuplicateName(m.name));
                    }
                    out.push(m);
                }
            }
            Tok::Eof => break,
            other => {
                return Err(ParseError::new(
                    t.line,
                    t.col,
                    format!("expected a `/*@ meta ... */` block, found {other}"),
                )
                .into())
            }
        }
    }
    Ok(out)
}
