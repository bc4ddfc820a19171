use std::f64::consts::FRAC_1_SQRT_2;

use super::ast::{Program, Span};
use super::error::{LangError, LangErrorKind};
use crate::operator::{ComplexMatrix, OperatorError, Space, Tolerances, Var, C64};

/// A measurement as an ordered list of labelled operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub outcomes: Vec<(String, ComplexMatrix)>,
}

impl Measurement {
    pub fn new(outcomes: Vec<(String, ComplexMatrix)>) -> Self {
        Measurement { outcomes }
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].1.cols()
    }

    pub fn operator(&self, label: &str) -> Option<&ComplexMatrix> {
        self.outcomes.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|(l, _)| l == label)
    }

    /// The label of a two-outcome measurement that is not `label`.
    pub fn other_label(&self, label: &str) -> Option<&str> {
        if self.outcomes.len() != 2 {
            return None;
        }
        self.outcomes.iter().map(|(l, _)| l.as_str()).find(|l| *l != label)
    }

    /// Two-outcome projective measurement in the computational basis of a qubit.
    pub fn computational_qubit() -> Self {
        Measurement::new(vec![
            ("0".into(), ComplexMatrix::unit(2, 0, 0)),
            ("1".into(), ComplexMatrix::unit(2, 1, 1)),
        ])
    }
}

/// A predicate declared on a list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPredicate {
    pub vars: Vec<String>,
    pub matrix: ComplexMatrix,
}

/// Variables, gates, measurements and named predicates in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Declarations {
    pub space: Space,
    gates: Vec<(String, ComplexMatrix)>,
    measurements: Vec<(String, Measurement)>,
    preds: Vec<(String, NamedPredicate)>,
}

pub const BUILTIN_GATES: [&str; 10] = ["I", "X", "Y", "Z", "H", "S", "T", "CNOT", "SWAP", "CZ"];

/// Matrix of a builtin gate.
pub fn builtin_gate(name: &str) -> Option<ComplexMatrix> {
    let r = |x: f64| C64::new(x, 0.0);
    let z = r(0.0);
    let o = r(1.0);
    let m = match name {
        "I" => ComplexMatrix::identity(2),
        "X" => ComplexMatrix::real(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        "Y" => ComplexMatrix::from_rows(&[vec![z, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), z]]).ok()?,
        "Z" => ComplexMatrix::real(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        "H" => ComplexMatrix::real(2, 2, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2]),
        "S" => ComplexMatrix::from_rows(&[vec![o, z], vec![z, C64::new(0.0, 1.0)]]).ok()?,
        "T" => ComplexMatrix::from_rows(&[vec![o, z], vec![z, C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)]]).ok()?,
        "CNOT" => ComplexMatrix::real(
            4,
            4,
            &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
        ),
        "SWAP" => ComplexMatrix::real(
            4,
            4,
            &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.],
        ),
        "CZ" => ComplexMatrix::diag(&[1.0, 1.0, 1.0, -1.0]),
        _ => return None,
    };
    Some(m)
}

fn err(kind: LangErrorKind, span: Span, msg: String) -> LangError {
    LangError::new(kind, span, msg)
}

impl Declarations {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declarations with the given variables and nothing else.
    pub fn with_vars(pairs: &[(&str, usize)]) -> Result<Self, OperatorError> {
        Ok(Declarations { space: Space::of(pairs)?, ..Default::default() })
    }

    pub fn add_var(&mut self, name: &str, dim: usize, span: Span) -> Result<(), LangError> {
        let mut vars = self.space.vars().to_vec();
        vars.push(Var { name: name.into(), dim });
        self.space = Space::new(vars).map_err(|e| LangError::from_operator(span, e))?;
        Ok(())
    }

    pub fn add_gate(&mut self, name: &str, m: ComplexMatrix, tol: &Tolerances, span: Span) -> Result<(), LangError> {
        if self.gates.iter().any(|(n, _)| n == name) {
            return Err(err(LangErrorKind::Invalid, span, format!("gate `{name}` declared twice")));
        }
        if !m.is_square() {
            return Err(err(LangErrorKind::DimensionMismatch, span, format!("gate `{name}` is not square")));
        }
        let dev = (&m.dagger() * &m).max_abs_diff(&ComplexMatrix::identity(m.rows()));
        if dev > tol.eq {
            return Err(err(
                LangErrorKind::NonUnitary,
                span,
                format!("gate `{name}` is not unitary (max |U†U − I| = {dev:.3e})"),
            ));
        }
        self.gates.push((name.into(), m));
        Ok(())
    }

    pub fn add_measurement(
        &mut self,
        name: &str,
        meas: Measurement,
        tol: &Tolerances,
        span: Span,
    ) -> Result<(), LangError> {
        if self.measurements.iter().any(|(n, _)| n == name) {
            return Err(err(LangErrorKind::Invalid, span, format!("measurement `{name}` declared twice")));
        }
        if meas.outcomes.is_empty() {
            return Err(err(LangErrorKind::IncompleteMeasurement, span, format!("measurement `{name}` has no outcomes")));
        }
        let d = meas.outcomes[0].1.cols();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (k, (label, m)) in meas.outcomes.iter().enumerate() {
            if meas.outcomes[..k].iter().any(|(l, _)| l == label) {
                return Err(err(LangErrorKind::Invalid, span, format!("label `{label}` repeated in `{name}`")));
            }
            if m.rows() != d || m.cols() != d {
                return Err(err(
                    LangErrorKind::DimensionMismatch,
                    span,
                    format!("operators of measurement `{name}` have different shapes"),
                ));
            }
            sum = &sum + &(&m.dagger() * m);
        }
        let dev = sum.max_abs_diff(&ComplexMatrix::identity(d));
        if dev > tol.eq {
            return Err(err(
                LangErrorKind::IncompleteMeasurement,
                span,
                format!("measurement `{name}` is incomplete (max |Σ M†M − I| = {dev:.3e})"),
            ));
        }
        self.measurements.push((name.into(), meas));
        Ok(())
    }

    pub fn add_pred(&mut self, name: &str, pred: NamedPredicate, tol: &Tolerances, span: Span) -> Result<(), LangError> {
        if self.preds.iter().any(|(n, _)| n == name) {
            return Err(err(LangErrorKind::Invalid, span, format!("predicate `{name}` declared twice")));
        }
        let sp = self.space.select(&pred.vars).map_err(|e| LangError::from_operator(span, e))?;
        crate::operator::QuantumPredicate::new(pred.matrix.clone(), sp, tol)
            .map_err(|e| err(LangErrorKind::InvalidPredicate, span, format!("predicate `{name}`: {e}")))?;
        self.preds.push((name.into(), pred));
        Ok(())
    }

    /// User gate, falling back to the builtins.
    pub fn gate(&self, name: &str) -> Option<ComplexMatrix> {
        self.gates.iter().find(|(n, _)| n == name).map(|(_, m)| m.clone()).or_else(|| builtin_gate(name))
    }

    pub fn user_gates(&self) -> &[(String, ComplexMatrix)] {
        &self.gates
    }

    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn measurements(&self) -> &[(String, Measurement)] {
        &self.measurements
    }

    pub fn pred(&self, name: &str) -> Option<&NamedPredicate> {
        self.preds.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn preds(&self) -> &[(String, NamedPredicate)] {
        &self.preds
    }

    /// Variables of `p` in declaration order.
    pub fn vars_of(&self, p: &Program) -> Vec<String> {
        let used = p.mentioned_vars();
        self.space.names().into_iter().filter(|n| used.contains(n)).collect()
    }

    /// Verifies that every identifier in `p` is declared and that operator
    /// dimensions agree with the variable dimensions.
    pub fn check_program(&self, p: &Program) -> Result<(), String> {
        match p {
            Program::Skip => Ok(()),
            Program::Init { var } => self.space.var_dim(var).map(|_| ()).map_err(|e| e.to_string()),
            Program::Unitary { gate, vars } => {
                let g = self.gate(gate).ok_or_else(|| format!("unknown gate `{gate}`"))?;
                let d = self.register_dim(vars)?;
                if g.rows() != d {
                    return Err(format!("gate `{gate}` has dimension {} but its register has dimension {d}", g.rows()));
                }
                Ok(())
            }
            Program::Seq(a, b) => {
                self.check_program(a)?;
                self.check_program(b)
            }
            Program::Case { meas, vars, branches } => {
                let m = self.check_meas(meas, vars)?;
                if branches.len() != m.outcomes.len()
                    || m.outcomes.iter().any(|(l, _)| branches.iter().filter(|(b, _)| b == l).count() != 1)
                {
                    return Err(format!("case on `{meas}` must have exactly one branch per outcome"));
                }
                branches.iter().try_for_each(|(_, b)| self.check_program(b))
            }
            Program::While { meas, vars, cont, body } => {
                let m = self.check_meas(meas, vars)?;
                if m.outcomes.len() != 2 {
                    return Err(format!("loop measurement `{meas}` must have exactly two outcomes"));
                }
                if m.index_of(cont).is_none() {
                    return Err(format!("measurement `{meas}` has no outcome `{cont}`"));
                }
                self.check_program(body)
            }
        }
    }

    fn check_meas(&self, meas: &str, vars: &[String]) -> Result<&Measurement, String> {
        let m = self.measurement(meas).ok_or_else(|| format!("unknown measurement `{meas}`"))?;
        let d = self.register_dim(vars)?;
        if m.dim() != d {
            return Err(format!("measurement `{meas}` has dimension {} but its register has dimension {d}", m.dim()));
        }
        Ok(m)
    }

    fn register_dim(&self, vars: &[String]) -> Result<usize, String> {
        for (k, v) in vars.iter().enumerate() {
            if vars[..k].contains(v) {
                return Err(format!("variable `{v}` repeated in register"));
            }
        }
        Ok(self.space.select(vars).map_err(|e| e.to_string())?.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_unitary() {
        let tol = Tolerances::default();
        let mut d = Declarations::new();
        for g in BUILTIN_GATES {
            let m = builtin_gate(g).unwrap();
            d.add_gate(&format!("u{g}"), m, &tol, Span::default()).unwrap();
        }
    }

    #[test]
    fn rejects_non_unitary_and_incomplete() {
        let tol = Tolerances::default();
        let mut d = Declarations::new();
        let e = d.add_gate("G", ComplexMatrix::diag(&[1.0, 0.5]), &tol, Span::default()).unwrap_err();
        assert_eq!(e.kind, LangErrorKind::NonUnitary);
        let m = Measurement::new(vec![("0".into(), ComplexMatrix::unit(2, 0, 0))]);
        let e = d.add_measurement("M", m, &tol, Span::default()).unwrap_err();
        assert_eq!(e.kind, LangErrorKind::IncompleteMeasurement);
    }

    #[test]
    fn check_program_arity() {
        let d = Declarations::with_vars(&[("p", 2), ("q", 2)]).unwrap();
        assert!(d.check_program(&Program::unitary("CNOT", &["p", "q"])).is_ok());
        assert!(d.check_program(&Program::unitary("CNOT", &["p"])).is_err());
        assert!(d.check_program(&Program::unitary("H", &["z"])).is_err());
        assert!(d.check_program(&Program::unitary("CNOT", &["p", "p"])).is_err());
    }
}
