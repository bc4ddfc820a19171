//! Predicate, state and scalar expressions.

use nalgebra::DVector;

use super::ast::Span;
use super::decls::Declarations;
use super::error::{LangError, LangErrorKind};
use crate::operator::{embed, ComplexMatrix, Space, C64};
use crate::relations;

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KetFactor {
    pub content: String,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Scalar(C64),
    Ident(String),
    /// `I(d)`
    Identity(usize),
    /// Function call: `sqrt`, `exp`, `proj`, `swap`, `sym`, `eq`.
    Call(String, Vec<Expr>),
    /// Sign argument of `sym(d, ±)`.
    Sign(bool),
    Ket(Vec<KetFactor>),
    Matrix(Vec<Vec<Expr>>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Tensor(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

/// Result of evaluating an expression.
#[derive(Debug, Clone)]
pub enum Value {
    Scalar(C64),
    Ket(DVector<C64>),
    /// Operator, with the variables it acts on when known.
    Op(ComplexMatrix, Option<Space>),
}

fn e(kind: LangErrorKind, span: Span, msg: impl Into<String>) -> LangError {
    LangError::new(kind, span, msg)
}

fn dim_err(span: Span, msg: impl Into<String>) -> LangError {
    e(LangErrorKind::DimensionMismatch, span, msg)
}

pub struct Evaluator<'a> {
    pub decls: &'a Declarations,
}

impl<'a> Evaluator<'a> {
    pub fn new(decls: &'a Declarations) -> Self {
        Evaluator { decls }
    }

    /// Evaluates `expr` to an operator on `target`.
    pub fn operator(&self, expr: &Expr, target: &Space) -> Result<ComplexMatrix, LangError> {
        let v = self.eval(expr, Some(target))?;
        self.finalize(v, target, expr.span)
    }

    /// Evaluates `expr` to a scalar.
    pub fn scalar(&self, expr: &Expr) -> Result<C64, LangError> {
        match self.eval(expr, None)? {
            Value::Scalar(z) => Ok(z),
            _ => Err(e(LangErrorKind::Invalid, expr.span, "expected a scalar")),
        }
    }

    /// Evaluates a ket expression to a vector on `target`, without normalising.
    pub fn ket(&self, expr: &Expr, target: &Space) -> Result<DVector<C64>, LangError> {
        match self.eval(expr, Some(target))? {
            Value::Ket(v) if v.len() == target.dim() => Ok(v),
            Value::Ket(v) => Err(dim_err(expr.span, format!("ket has dimension {} but the space has {}", v.len(), target.dim()))),
            _ => Err(e(LangErrorKind::Invalid, expr.span, "expected a ket")),
        }
    }

    fn finalize(&self, v: Value, target: &Space, span: Span) -> Result<ComplexMatrix, LangError> {
        let m = match v {
            Value::Scalar(_) => return Err(e(LangErrorKind::Invalid, span, "expected an operator, found a scalar")),
            Value::Ket(k) => projector(&k, span)?,
            Value::Op(m, Some(sp)) if &sp != target => {
                if sp.vars().iter().any(|v| !target.contains(&v.name)) {
                    return Err(dim_err(span, format!("operator on {:?} does not fit the space {:?}", sp.names(), target.names())));
                }
                embed(&m, &sp.names(), target).map_err(|err| LangError::from_operator(span, err))?
            }
            Value::Op(m, _) => m,
        };
        if m.rows() != target.dim() || m.cols() != target.dim() {
            return Err(dim_err(
                span,
                format!("operator is {}x{} but the space has dimension {}", m.rows(), m.cols(), target.dim()),
            ));
        }
        Ok(m)
    }

    pub fn eval(&self, expr: &Expr, ctx: Option<&Space>) -> Result<Value, LangError> {
        let span = expr.span;
        match &expr.kind {
            ExprKind::Scalar(z) => Ok(Value::Scalar(*z)),
            ExprKind::Sign(_) => Err(e(LangErrorKind::Syntax, span, "sign is only allowed as the argument of sym")),
            ExprKind::Ident(name) => {
                if name == "i" {
                    return Ok(Value::Scalar(C64::new(0.0, 1.0)));
                }
                if name == "pi" {
                    return Ok(Value::Scalar(C64::new(std::f64::consts::PI, 0.0)));
                }
                if let Some(p) = self.decls.pred(name) {
                    let sp = self.decls.space.select(&p.vars).map_err(|err| LangError::from_operator(span, err))?;
                    return Ok(Value::Op(p.matrix.clone(), Some(sp)));
                }
                if let Some(g) = self.decls.gate(name) {
                    return Ok(Value::Op(g, None));
                }
                Err(e(LangErrorKind::UnknownIdentifier, span, format!("unknown identifier `{name}`")))
            }
            ExprKind::Identity(d) => {
                if *d == 0 {
                    return Err(dim_err(span, "identity of dimension 0"));
                }
                Ok(Value::Op(ComplexMatrix::identity(*d), None))
            }
            ExprKind::Ket(factors) => Ok(Value::Ket(ket_vector(factors, ctx, span)?)),
            ExprKind::Matrix(rows) => {
                let mut out = Vec::with_capacity(rows.len());
                for row in rows {
                    out.push(row.iter().map(|x| self.scalar(x)).collect::<Result<Vec<_>, _>>()?);
                }
                let m = ComplexMatrix::from_rows(&out).map_err(|err| LangError::from_operator(span, err))?;
                Ok(Value::Op(m, None))
            }
            ExprKind::Call(name, args) => self.call(name, args, ctx, span),
            ExprKind::Neg(a) => Ok(match self.eval(a, ctx)? {
                Value::Scalar(z) => Value::Scalar(-z),
                Value::Ket(k) => Value::Ket(-k),
                Value::Op(m, sp) => Value::Op(-&m, sp),
            }),
            ExprKind::Add(a, b) | ExprKind::Sub(a, b) => {
                let sub = matches!(expr.kind, ExprKind::Sub(..));
                let (x, y) = (self.eval(a, ctx)?, self.eval(b, ctx)?);
                match (x, y) {
                    (Value::Scalar(p), Value::Scalar(q)) => Ok(Value::Scalar(if sub { p - q } else { p + q })),
                    (Value::Ket(p), Value::Ket(q)) => {
                        if p.len() != q.len() {
                            return Err(dim_err(span, "kets of different dimensions"));
                        }
                        Ok(Value::Ket(if sub { p - q } else { p + q }))
                    }
                    (x, y) => {
                        let (p, q, sp) = self.align(x, y, ctx, span)?;
                        Ok(Value::Op(if sub { &p - &q } else { &p + &q }, sp))
                    }
                }
            }
            ExprKind::Mul(a, b) => {
                let (x, y) = (self.eval(a, ctx)?, self.eval(b, ctx)?);
                match (x, y) {
                    (Value::Scalar(p), Value::Scalar(q)) => Ok(Value::Scalar(p * q)),
                    (Value::Scalar(p), Value::Ket(k)) | (Value::Ket(k), Value::Scalar(p)) => Ok(Value::Ket(k * p)),
                    (Value::Scalar(p), Value::Op(m, sp)) | (Value::Op(m, sp), Value::Scalar(p)) => {
                        Ok(Value::Op(m.scale(p), sp))
                    }
                    (Value::Op(m, sp), Value::Ket(k)) => {
                        if m.cols() != k.len() {
                            return Err(dim_err(span, "operator and ket dimensions differ"));
                        }
                        let _ = sp;
                        Ok(Value::Ket(m.apply_vector(&k)))
                    }
                    (x, y) => {
                        let (p, q, sp) = self.align(x, y, ctx, span)?;
                        Ok(Value::Op(&p * &q, sp))
                    }
                }
            }
            ExprKind::Div(a, b) => {
                let d = match self.eval(b, ctx)? {
                    Value::Scalar(d) => d,
                    _ => return Err(e(LangErrorKind::Invalid, b.span, "division by a non-scalar")),
                };
                if d.norm() == 0.0 {
                    return Err(e(LangErrorKind::Invalid, b.span, "division by zero"));
                }
                Ok(match self.eval(a, ctx)? {
                    Value::Scalar(z) => Value::Scalar(z / d),
                    Value::Ket(k) => Value::Ket(k / d),
                    Value::Op(m, sp) => Value::Op(m.scale(C64::new(1.0, 0.0) / d), sp),
                })
            }
            ExprKind::Tensor(a, b) => {
                let (x, y) = (self.eval(a, None)?, self.eval(b, None)?);
                match (x, y) {
                    (Value::Ket(p), Value::Ket(q)) => Ok(Value::Ket(p.kronecker(&q))),
                    (Value::Scalar(_), _) | (_, Value::Scalar(_)) => {
                        Err(e(LangErrorKind::Invalid, span, "tensor product of a scalar"))
                    }
                    (x, y) => {
                        let (p, ps) = self.as_operator(x, span)?;
                        let (q, qs) = self.as_operator(y, span)?;
                        let sp = match (ps, qs) {
                            (Some(a), Some(b)) if a.vars().iter().all(|v| !b.contains(&v.name)) => {
                                let mut vars = a.vars().to_vec();
                                vars.extend(b.vars().iter().cloned());
                                Space::new(vars).ok()
                            }
                            _ => None,
                        };
                        Ok(Value::Op(p.kron(&q), sp))
                    }
                }
            }
        }
    }

    fn as_operator(&self, v: Value, span: Span) -> Result<(ComplexMatrix, Option<Space>), LangError> {
        match v {
            Value::Op(m, sp) => Ok((m, sp)),
            Value::Ket(k) => Ok((projector(&k, span)?, None)),
            Value::Scalar(_) => Err(e(LangErrorKind::Invalid, span, "expected an operator, found a scalar")),
        }
    }

    fn align(
        &self,
        x: Value,
        y: Value,
        ctx: Option<&Space>,
        span: Span,
    ) -> Result<(ComplexMatrix, ComplexMatrix, Option<Space>), LangError> {
        if matches!(x, Value::Scalar(_)) || matches!(y, Value::Scalar(_)) {
            return Err(e(LangErrorKind::Invalid, span, "cannot combine a scalar and an operator with + or -"));
        }
        let (p, ps) = self.as_operator(x, span)?;
        let (q, qs) = self.as_operator(y, span)?;
        if ps == qs {
            if p.rows() != q.rows() {
                return Err(dim_err(span, format!("operands have dimensions {} and {}", p.rows(), q.rows())));
            }
            return Ok((p, q, ps));
        }
        if let Some(target) = ctx {
            let p = self.finalize(Value::Op(p, ps), target, span)?;
            let q = self.finalize(Value::Op(q, qs), target, span)?;
            return Ok((p, q, Some(target.clone())));
        }
        if p.rows() != q.rows() {
            return Err(dim_err(span, format!("operands have dimensions {} and {}", p.rows(), q.rows())));
        }
        Ok((p, q, None))
    }

    fn call(&self, name: &str, args: &[Expr], ctx: Option<&Space>, span: Span) -> Result<Value, LangError> {
        let arity = |n: usize| -> Result<(), LangError> {
            if args.len() != n {
                return Err(e(LangErrorKind::Syntax, span, format!("`{name}` takes {n} argument(s)")));
            }
            Ok(())
        };
        let dim_arg = |x: &Expr| -> Result<usize, LangError> {
            let z = self.scalar(x)?;
            if z.im != 0.0 || z.re < 1.0 || z.re.fract() != 0.0 {
                return Err(dim_err(x.span, "expected a positive integer dimension"));
            }
            Ok(z.re as usize)
        };
        match name {
            "sqrt" | "exp" | "cos" | "sin" => {
                arity(1)?;
                let z = self.scalar(&args[0])?;
                Ok(Value::Scalar(match name {
                    "sqrt" => z.sqrt(),
                    "exp" => z.exp(),
                    "cos" => z.cos(),
                    _ => z.sin(),
                }))
            }
            "proj" => {
                arity(1)?;
                match self.eval(&args[0], ctx)? {
                    Value::Ket(k) => Ok(Value::Op(projector(&k, span)?, ctx.filter(|c| c.dim() == k.len()).cloned())),
                    _ => Err(e(LangErrorKind::Invalid, span, "`proj` expects a ket")),
                }
            }
            "swap" => {
                arity(1)?;
                Ok(Value::Op(relations::swap_operator(dim_arg(&args[0])?), None))
            }
            "eq" => {
                arity(1)?;
                Ok(Value::Op(relations::equality_pred_computational(dim_arg(&args[0])?), None))
            }
            "sym" => {
                arity(2)?;
                let d = dim_arg(&args[0])?;
                let plus = match args[1].kind {
                    ExprKind::Sign(p) => p,
                    _ => return Err(e(LangErrorKind::Syntax, args[1].span, "`sym` expects `+` or `-` as second argument")),
                };
                Ok(Value::Op(relations::symmetrizer(d, plus), None))
            }
            _ => Err(e(LangErrorKind::UnknownIdentifier, span, format!("unknown function `{name}`"))),
        }
    }
}

/// Normalised projector onto `k`.
pub fn projector(k: &DVector<C64>, span: Span) -> Result<ComplexMatrix, LangError> {
    let n = k.norm();
    if n == 0.0 {
        return Err(e(LangErrorKind::Invalid, span, "projector onto the zero vector"));
    }
    Ok(ComplexMatrix::projector(&(k / C64::new(n, 0.0))))
}

enum Digit {
    Value(usize, Option<usize>),
    Plus,
    Minus,
}

fn ket_vector(factors: &[KetFactor], ctx: Option<&Space>, span: Span) -> Result<DVector<C64>, LangError> {
    let mut digits = Vec::new();
    for f in factors {
        if let Some(d) = f.dim {
            let v: usize = f
                .content
                .parse()
                .map_err(|_| e(LangErrorKind::Syntax, span, format!("ket |{}>_{d} must hold a number", f.content)))?;
            digits.push(Digit::Value(v, Some(d)));
            continue;
        }
        if f.content.is_empty() {
            return Err(e(LangErrorKind::Syntax, span, "empty ket"));
        }
        for c in f.content.chars() {
            digits.push(match c {
                '+' => Digit::Plus,
                '-' => Digit::Minus,
                c if c.is_ascii_digit() => Digit::Value(c as usize - '0' as usize, None),
                _ => return Err(e(LangErrorKind::Syntax, span, format!("unexpected `{c}` inside a ket"))),
            });
        }
    }
    let ctx_dims: Option<Vec<usize>> = ctx
        .filter(|c| c.len() == digits.len() && digits.iter().all(|d| !matches!(d, Digit::Value(_, Some(_)))))
        .map(|c| c.dims());
    let mut out = DVector::from_element(1, C64::new(1.0, 0.0));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (k, d) in digits.iter().enumerate() {
        let dim = match d {
            Digit::Value(_, Some(explicit)) => *explicit,
            _ => ctx_dims.as_ref().map_or(2, |ds| ds[k]),
        };
        let v = match d {
            Digit::Value(v, _) => {
                if *v >= dim {
                    return Err(dim_err(span, format!("basis index {v} out of range for dimension {dim}")));
                }
                crate::operator::basis_vector(dim, *v)
            }
            Digit::Plus | Digit::Minus => {
                if dim != 2 {
                    return Err(dim_err(span, "|+> and |-> are qubit states"));
                }
                let s = if matches!(d, Digit::Plus) { h } else { -h };
                DVector::from_vec(vec![C64::new(h, 0.0), C64::new(s, 0.0)])
            }
        };
        out = out.kronecker(&v);
    }
    Ok(out)
}
