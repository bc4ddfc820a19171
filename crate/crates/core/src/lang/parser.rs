use super::ast::{Path, PathStep, Program, Span};
use super::decls::{Declarations, Measurement, NamedPredicate};
use super::error::{LangError, LangErrorKind};
use super::expr::{Evaluator, Expr, ExprKind, KetFactor};
use super::lexer::{tokenize, Tok, Token};
use crate::operator::{ComplexMatrix, DensityOperator, QuantumPredicate, Space, Tolerances, C64};

/// Where an annotation sits relative to the program.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Anchor {
    /// Immediately before the statement at this path.
    Before(Path),
    /// After the last statement of the block rooted at this path.
    After(Path),
}

impl Anchor {
    pub fn path(&self) -> &Path {
        match self {
            Anchor::Before(p) | Anchor::After(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub anchor: Anchor,
    pub matrix: ComplexMatrix,
    pub span: Span,
}

/// Result of parsing a program file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFile {
    pub decls: Declarations,
    pub program: Program,
    /// Annotations in source order.
    pub annotations: Vec<Annotation>,
    /// Source position of every non-sequence statement, keyed by path.
    pub spans: Vec<(Path, Span)>,
    /// Source position of the `prog` keyword.
    pub prog_span: Span,
}

impl ParsedFile {
    pub fn span_of(&self, path: &[PathStep]) -> Option<Span> {
        self.spans.iter().find(|(p, _)| p == path).map(|(_, s)| *s)
    }

    /// Annotations at `anchor`, in source order.
    pub fn chain(&self, anchor: &Anchor) -> Vec<&Annotation> {
        self.annotations.iter().filter(|a| &a.anchor == anchor).collect()
    }
}

pub fn parse(src: &str) -> Result<ParsedFile, LangError> {
    parse_with(src, &Tolerances::default())
}

pub fn parse_with(src: &str, tol: &Tolerances) -> Result<ParsedFile, LangError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0, decls: Declarations::new(), tol: *tol };
    p.file()
}

/// Parses a standalone predicate expression on `space`.
pub fn parse_predicate(src: &str, decls: &Declarations, space: &Space, tol: &Tolerances) -> Result<QuantumPredicate, LangError> {
    let (m, span) = parse_operator(src, decls, space, tol)?;
    QuantumPredicate::new(m, space.clone(), tol)
        .map_err(|e| LangError::new(LangErrorKind::InvalidPredicate, span, e.to_string()))
}

/// Parses a standalone state expression on `space`; a ket denotes its normalised projector.
pub fn parse_state(src: &str, decls: &Declarations, space: &Space, tol: &Tolerances) -> Result<DensityOperator, LangError> {
    let (m, span) = parse_operator(src, decls, space, tol)?;
    DensityOperator::new(m, space.clone(), tol)
        .map_err(|e| LangError::new(LangErrorKind::InvalidPredicate, span, e.to_string()))
}

/// Parses an operator expression on `space` without validating its spectrum.
pub fn parse_operator(
    src: &str,
    decls: &Declarations,
    space: &Space,
    tol: &Tolerances,
) -> Result<(ComplexMatrix, Span), LangError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0, decls: decls.clone(), tol: *tol };
    let expr = p.expr()?;
    if p.peek_sym(";") {
        p.pos += 1;
    }
    p.expect_eof()?;
    let m = Evaluator::new(decls).operator(&expr, space)?;
    Ok((m, expr.span))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    decls: Declarations,
    tol: Tolerances,
}

struct Parsed {
    program: Program,
    annots: Vec<Annotation>,
    spans: Vec<(Path, Span)>,
}

fn prefixed(prefix: &[PathStep], p: &[PathStep]) -> Path {
    let mut out = prefix.to_vec();
    out.extend_from_slice(p);
    out
}

fn reanchor(a: Annotation, prefix: &[PathStep]) -> Annotation {
    let anchor = match a.anchor {
        Anchor::Before(p) => Anchor::Before(prefixed(prefix, &p)),
        Anchor::After(p) => Anchor::After(prefixed(prefix, &p)),
    };
    Annotation { anchor, ..a }
}

const KEYWORDS: [&str; 10] = ["var", "gate", "meas", "pred", "on", "prog", "skip", "apply", "case", "while"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, LangError> {
        Err(LangError::new(LangErrorKind::Syntax, self.span(), msg))
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<Span, LangError> {
        if self.peek_sym(s) {
            Ok(self.advance().span)
        } else {
            self.syntax(format!("expected `{s}`, found {}", self.peek().describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Span, LangError> {
        if self.peek_kw(kw) {
            Ok(self.advance().span)
        } else {
            self.syntax(format!("expected `{kw}`, found {}", self.peek().describe()))
        }
    }

    fn expect_eof(&self) -> Result<(), LangError> {
        if *self.peek() != Tok::Eof {
            return self.syntax(format!("unexpected {} after the end", self.peek().describe()));
        }
        Ok(())
    }

    fn ident(&mut self) -> Result<(String, Span), LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let sp = self.advance().span;
                Ok((s, sp))
            }
            t => self.syntax(format!("expected an identifier, found {}", t.describe())),
        }
    }

    fn int(&mut self) -> Result<usize, LangError> {
        match *self.peek() {
            Tok::Num { int: Some(n), .. } => {
                self.advance();
                Ok(n as usize)
            }
            ref t => self.syntax(format!("expected an integer, found {}", t.describe())),
        }
    }

    fn label(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            Tok::Num { int: Some(n), .. } => {
                self.advance();
                Ok(n.to_string())
            }
            t => self.syntax(format!("expected a label, found {}", t.describe())),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>, LangError> {
        let mut out = vec![self.ident()?.0];
        while self.peek_sym(",") {
            self.advance();
            out.push(self.ident()?.0);
        }
        Ok(out)
    }

    fn file(&mut self) -> Result<ParsedFile, LangError> {
        while !self.peek_kw("prog") {
            if *self.peek() == Tok::Eof {
                return self.syntax("expected `prog`");
            }
            self.decl()?;
        }
        let prog_span = self.advance().span;
        let parsed = self.block()?;
        if self.peek_sym(";") {
            self.advance();
        }
        self.expect_eof()?;
        let decls = std::mem::take(&mut self.decls);
        if let Err(msg) = decls.check_program(&parsed.program) {
            return Err(LangError::new(LangErrorKind::Invalid, prog_span, msg));
        }
        Ok(ParsedFile {
            decls,
            program: parsed.program,
            annotations: parsed.annots,
            spans: parsed.spans,
            prog_span,
        })
    }

    fn decl(&mut self) -> Result<(), LangError> {
        let span = self.span();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            t => return self.syntax(format!("expected a declaration, found {}", t.describe())),
        };
        self.advance();
        match kw.as_str() {
            "var" => {
                let (name, sp) = self.ident()?;
                self.expect_sym(":")?;
                let d = self.int()?;
                self.expect_sym(";")?;
                self.decls.add_var(&name, d, sp)
            }
            "gate" => {
                let (name, sp) = self.ident()?;
                self.expect_sym("=")?;
                let m = self.operator_expr()?;
                self.expect_sym(";")?;
                self.decls.add_gate(&name, m, &self.tol, sp)
            }
            "meas" => {
                let (name, sp) = self.ident()?;
                self.expect_sym("=")?;
                self.expect_sym("{")?;
                let mut outcomes = Vec::new();
                while !self.peek_sym("}") {
                    let l = self.label()?;
                    self.expect_sym(":")?;
                    let m = self.operator_expr()?;
                    self.expect_sym(";")?;
                    outcomes.push((l, m));
                }
                self.expect_sym("}")?;
                self.expect_sym(";")?;
                self.decls.add_measurement(&name, Measurement::new(outcomes), &self.tol, sp)
            }
            "pred" => {
                let (name, sp) = self.ident()?;
                self.expect_kw("on")?;
                let vars = self.ident_list()?;
                self.expect_sym("=")?;
                let expr = self.expr()?;
                self.expect_sym(";")?;
                let space = self.decls.space.select(&vars).map_err(|e| LangError::from_operator(sp, e))?;
                let matrix = Evaluator::new(&self.decls).operator(&expr, &space)?;
                self.decls.add_pred(&name, NamedPredicate { vars, matrix }, &self.tol, sp)
            }
            other => Err(LangError::new(LangErrorKind::Syntax, span, format!("unknown declaration `{other}`"))),
        }
    }

    /// Gate and measurement operators: any expression evaluating to a square matrix.
    fn operator_expr(&mut self) -> Result<ComplexMatrix, LangError> {
        let expr = self.expr()?;
        match Evaluator::new(&self.decls).eval(&expr, None)? {
            super::expr::Value::Op(m, _) => Ok(m),
            _ => Err(LangError::new(LangErrorKind::Invalid, expr.span, "expected a matrix")),
        }
    }

    fn annotation(&mut self) -> Result<(ComplexMatrix, Span), LangError> {
        let span = self.expect_sym("@")?;
        self.expect_sym("{")?;
        let expr = self.expr()?;
        self.expect_sym("}")?;
        let m = Evaluator::new(&self.decls).operator(&expr, &self.decls.space)?;
        QuantumPredicate::new(m.clone(), self.decls.space.clone(), &self.tol)
            .map_err(|e| LangError::new(LangErrorKind::InvalidPredicate, span, format!("annotation: {e}")))?;
        Ok((m, span))
    }

    fn block(&mut self) -> Result<Parsed, LangError> {
        self.expect_sym("{")?;
        let mut stmts: Vec<(Vec<(ComplexMatrix, Span)>, Parsed)> = Vec::new();
        let trailing = loop {
            let mut annots = Vec::new();
            while self.peek_sym("@") {
                annots.push(self.annotation()?);
            }
            if self.peek_sym("}") {
                self.advance();
                break annots;
            }
            let stmt = self.statement()?;
            stmts.push((annots, stmt));
        };
        let n = stmts.len();
        let mut programs = Vec::with_capacity(n);
        let mut all_annots = Vec::new();
        let mut spans = Vec::new();
        for (j, (annots, stmt)) in stmts.into_iter().enumerate() {
            let mut path: Path = vec![PathStep::First; if j == 0 { n.saturating_sub(1) } else { n - 1 - j }];
            if j > 0 {
                path.push(PathStep::Second);
            }
            for (m, span) in annots {
                all_annots.push(Annotation { anchor: Anchor::Before(path.clone()), matrix: m, span });
            }
            all_annots.extend(stmt.annots.into_iter().map(|a| reanchor(a, &path)));
            spans.extend(stmt.spans.into_iter().map(|(p, s)| (prefixed(&path, &p), s)));
            programs.push(stmt.program);
        }
        for (m, span) in trailing {
            all_annots.push(Annotation { anchor: Anchor::After(Vec::new()), matrix: m, span });
        }
        if n == 0 {
            // An empty block is `skip`; give it the block's position.
            spans.push((Vec::new(), self.toks[self.pos.saturating_sub(1)].span));
        }
        Ok(Parsed { program: Program::seq_all(programs), annots: all_annots, spans })
    }

    fn check(&self, p: &Program, span: Span) -> Result<(), LangError> {
        self.decls.check_program(p).map_err(|msg| {
            let kind = if msg.contains("unknown") {
                LangErrorKind::UnknownIdentifier
            } else if msg.contains("dimension") || msg.contains("repeated") {
                LangErrorKind::DimensionMismatch
            } else {
                LangErrorKind::Invalid
            };
            LangError::new(kind, span, msg)
        })
    }

    fn statement(&mut self) -> Result<Parsed, LangError> {
        let span = self.span();
        let leaf = |program: Program| Parsed { program, annots: Vec::new(), spans: vec![(Vec::new(), span)] };
        if self.peek_kw("skip") {
            self.advance();
            self.expect_sym(";")?;
            return Ok(leaf(Program::Skip));
        }
        if self.peek_kw("apply") {
            self.advance();
            let (gate, _) = self.ident()?;
            self.expect_sym("(")?;
            let vars = self.ident_list()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            let p = Program::Unitary { gate, vars };
            self.check(&p, span)?;
            return Ok(leaf(p));
        }
        if self.peek_kw("case") {
            self.advance();
            let (meas, _) = self.ident()?;
            self.expect_sym("(")?;
            let vars = self.ident_list()?;
            self.expect_sym(")")?;
            self.expect_sym("{")?;
            let mut branches = Vec::new();
            let mut annots = Vec::new();
            let mut spans = vec![(Vec::new(), span)];
            while !self.peek_sym("}") {
                let label = self.label()?;
                self.expect_sym(":")?;
                let b = self.block()?;
                let prefix = [PathStep::Branch(branches.len())];
                annots.extend(b.annots.into_iter().map(|a| reanchor(a, &prefix)));
                spans.extend(b.spans.into_iter().map(|(p, s)| (prefixed(&prefix, &p), s)));
                branches.push((label, b.program));
            }
            self.expect_sym("}")?;
            if self.peek_sym(";") {
                self.advance();
            }
            let p = Program::Case { meas, vars, branches };
            self.check(&p, span)?;
            return Ok(Parsed { program: p, annots, spans });
        }
        if self.peek_kw("while") {
            self.advance();
            let (meas, _) = self.ident()?;
            self.expect_sym("(")?;
            let vars = self.ident_list()?;
            self.expect_sym(")")?;
            self.expect_sym("==")?;
            let cont = self.label()?;
            let b = self.block()?;
            if self.peek_sym(";") {
                self.advance();
            }
            let prefix = [PathStep::Body];
            let mut spans = vec![(Vec::new(), span)];
            spans.extend(b.spans.into_iter().map(|(p, s)| (prefixed(&prefix, &p), s)));
            let annots = b.annots.into_iter().map(|a| reanchor(a, &prefix)).collect();
            let p = Program::While { meas, vars, cont, body: Box::new(b.program) };
            self.check(&p, span)?;
            return Ok(Parsed { program: p, annots, spans });
        }
        let (var, _) = self.ident()?;
        self.expect_sym(":=")?;
        match self.peek().clone() {
            Tok::Ket { content, dim: None } if content == "0" => {
                self.advance();
            }
            t => return self.syntax(format!("initialisation must be `|0>`, found {}", t.describe())),
        }
        self.expect_sym(";")?;
        let p = Program::Init { var };
        self.check(&p, span)?;
        Ok(leaf(p))
    }

    // expr := prod (('+'|'-') prod)*
    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.prod()?;
        loop {
            let span = self.span();
            if self.peek_sym("+") {
                self.advance();
                let rhs = self.prod()?;
                lhs = Expr { kind: ExprKind::Add(Box::new(lhs), Box::new(rhs)), span };
            } else if self.peek_sym("-") {
                self.advance();
                let rhs = self.prod()?;
                lhs = Expr { kind: ExprKind::Sub(Box::new(lhs), Box::new(rhs)), span };
            } else {
                return Ok(lhs);
            }
        }
    }

    // prod := tensor (('*'|'/') tensor | ket-juxtaposition)*
    fn prod(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.tensor()?;
        loop {
            let span = self.span();
            if self.peek_sym("*") {
                self.advance();
                let rhs = self.tensor()?;
                lhs = Expr { kind: ExprKind::Mul(Box::new(lhs), Box::new(rhs)), span };
            } else if self.peek_sym("/") {
                self.advance();
                let rhs = self.tensor()?;
                lhs = Expr { kind: ExprKind::Div(Box::new(lhs), Box::new(rhs)), span };
            } else if matches!(self.peek(), Tok::Ket { .. }) {
                let rhs = self.tensor()?;
                lhs = Expr { kind: ExprKind::Mul(Box::new(lhs), Box::new(rhs)), span };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn at_tensor_op(&self) -> bool {
        self.peek_sym("(") && matches!(self.peek_at(1), Tok::Ident(x) if x == "x") && matches!(self.peek_at(2), Tok::Sym(")"))
    }

    // tensor := unary ("(x)" unary)*
    fn tensor(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        while self.at_tensor_op() {
            let span = self.span();
            self.pos += 3;
            let rhs = self.unary()?;
            lhs = Expr { kind: ExprKind::Tensor(Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.peek_sym("-") {
            let span = self.advance().span;
            let inner = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), span });
        }
        if self.peek_sym("+") {
            self.advance();
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, LangError> {
        let span = self.span();
        let mk = |kind| Expr { kind, span };
        match self.peek().clone() {
            Tok::Num { value, .. } => {
                self.advance();
                Ok(mk(ExprKind::Scalar(C64::new(value, 0.0))))
            }
            Tok::Imag(v) => {
                self.advance();
                Ok(mk(ExprKind::Scalar(C64::new(0.0, v))))
            }
            Tok::Ket { .. } => {
                let mut factors = Vec::new();
                while let Tok::Ket { content, dim } = self.peek().clone() {
                    self.advance();
                    factors.push(KetFactor { content, dim });
                }
                Ok(mk(ExprKind::Ket(factors)))
            }
            Tok::Sym("[") => {
                self.advance();
                let mut rows = Vec::new();
                loop {
                    self.expect_sym("[")?;
                    let mut row = vec![self.expr()?];
                    while self.peek_sym(",") {
                        self.advance();
                        row.push(self.expr()?);
                    }
                    self.expect_sym("]")?;
                    rows.push(row);
                    if self.peek_sym(",") {
                        self.advance();
                    } else {
                        break;
                    }
                }
                self.expect_sym("]")?;
                Ok(mk(ExprKind::Matrix(rows)))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance();
                if !self.peek_sym("(") || self.at_tensor_op() {
                    return Ok(mk(ExprKind::Ident(name)));
                }
                self.advance();
                if name == "I" {
                    let d = self.int()?;
                    self.expect_sym(")")?;
                    return Ok(mk(ExprKind::Identity(d)));
                }
                let mut args = Vec::new();
                if !self.peek_sym(")") {
                    loop {
                        let is_sign = (self.peek_sym("+") || self.peek_sym("-"))
                            && matches!(self.peek_at(1), Tok::Sym(")") | Tok::Sym(","));
                        if is_sign {
                            let sp = self.span();
                            let plus = self.peek_sym("+");
                            self.advance();
                            args.push(Expr { kind: ExprKind::Sign(plus), span: sp });
                        } else {
                            args.push(self.expr()?);
                        }
                        if self.peek_sym(",") {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                Ok(mk(ExprKind::Call(name, args)))
            }
            t => self.syntax(format!("expected an expression, found {}", t.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::vector_from;

    const QFLIP: &str = "var d1: 2; var d2: 2; var d3: 2;\nprog { apply H(d1); apply H(d2); apply H(d3); }";

    #[test]
    fn parses_qflip() {
        let f = parse(QFLIP).unwrap();
        let want = Program::seq(
            Program::seq(Program::unitary("H", &["d1"]), Program::unitary("H", &["d2"])),
            Program::unitary("H", &["d3"]),
        );
        assert_eq!(f.program, want);
        assert_eq!(f.span_of(&[PathStep::Second]).unwrap().line, 2);
        assert_eq!(f.spans.len(), 3);
    }

    #[test]
    fn parses_skip() {
        assert_eq!(parse("prog { skip; }").unwrap().program, Program::Skip);
        assert_eq!(parse("prog { }").unwrap().program, Program::Skip);
    }

    #[test]
    fn parses_loop_and_case() {
        let src = "var c: 2; var p: 4;
            meas M = { yes: proj(|1>_4); no: I(4) - proj(|1>_4); };
            meas B = { 0: proj(|0>); 1: proj(|1>); };
            prog { c := |0>; p := |0>; while M(p) == no { apply H(c); case B(c) { 0: { skip; } 1: { apply X(c); } } } }";
        let f = parse(src).unwrap();
        match f.program {
            Program::Seq(_, b) => match *b {
                Program::While { ref meas, ref cont, ref body, .. } => {
                    assert_eq!(meas, "M");
                    assert_eq!(cont, "no");
                    assert!(matches!(**body, Program::Seq(..)));
                }
                ref other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annotations_anchor() {
        let src = "var q: 2; prog { @{ I(2) } @{ proj(|->) } apply H(q); @{ proj(|1>) } }";
        let f = parse(src).unwrap();
        assert_eq!(f.annotations.len(), 3);
        assert_eq!(f.annotations[0].anchor, Anchor::Before(vec![]));
        assert_eq!(f.annotations[2].anchor, Anchor::After(vec![]));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let minus = ComplexMatrix::projector(&vector_from(&[C64::new(s, 0.0), C64::new(-s, 0.0)]));
        assert!(f.annotations[1].matrix.approx_eq(&minus, 1e-15));
    }

    #[test]
    fn named_predicates_embed() {
        let src = "var p: 2; var q: 2; pred A on q = proj(|1>); prog { @{ A } skip; @{ A } }";
        let f = parse(src).unwrap();
        let want = ComplexMatrix::identity(2).kron(&ComplexMatrix::unit(2, 1, 1));
        assert_eq!(f.annotations[0].matrix, want);
    }

    #[test]
    fn errors_carry_kind_and_position() {
        let e = parse("var q: 2;\nprog { apply G(q); }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::UnknownIdentifier);
        assert_eq!(e.span.line, 2);
        let e = parse("var q: 2; gate G = [[1, 1], [0, 1]]; prog { skip; }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::NonUnitary);
        let e = parse("var q: 2; meas M = { 0: [[1, 0], [0, 0]]; }; prog { skip; }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::IncompleteMeasurement);
        let e = parse("var q: 2; prog { apply CNOT(q); }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::DimensionMismatch);
        let e = parse("var q: 2; prog { skip }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::Syntax);
        let e = parse("var q: 2; prog { q := |1>; }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::Syntax);
        let e = parse("var q: 2; prog { @{ 2 * I(2) } skip; }").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::InvalidPredicate);
    }

    #[test]
    fn scalar_expressions() {
        let d = Declarations::with_vars(&[("q", 2)]).unwrap();
        let sp = d.space.clone();
        let tol = Tolerances::default();
        let (m, _) = parse_operator("[[1/sqrt(2), exp(i*pi/2)], [2i, 1-0.5i]]", &d, &sp, &tol).unwrap();
        assert!((m.get(0, 0).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((m.get(0, 1) - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(m.get(1, 0), C64::new(0.0, 2.0));
        assert_eq!(m.get(1, 1), C64::new(1.0, -0.5));
    }

    #[test]
    fn ket_dimensions_follow_context() {
        let d = Declarations::with_vars(&[("c", 2), ("p", 4)]).unwrap();
        let tol = Tolerances::default();
        let rho = parse_state("|0>|3>", &d, &d.space, &tol).unwrap();
        assert_eq!(rho.matrix().get(3, 3), C64::new(1.0, 0.0));
        let rho = parse_state("0.6|0> (x) |1>_4 + 0.8|1> (x) |1>_4", &d, &d.space, &tol).unwrap();
        assert!((rho.matrix().get(1, 5).re - 0.48).abs() < 1e-12);
    }

    #[test]
    fn relation_builtins_in_predicates() {
        let d = Declarations::with_vars(&[("p", 2), ("q", 2)]).unwrap();
        let tol = Tolerances::default();
        let s = parse_predicate("sym(2, +)", &d, &d.space, &tol).unwrap();
        assert!((s.matrix().trace().re - 3.0).abs() < 1e-12);
        let e = parse_predicate("eq(2)", &d, &d.space, &tol).unwrap();
        assert!((e.matrix().get(0, 3).re - 0.5).abs() < 1e-12);
        assert!(parse_predicate("swap(2)", &d, &d.space, &tol).is_err());
    }
}
