//! Dense complex-matrix algebra over tensor products of finite-dimensional
//! Hilbert spaces.
//!
//! Every operator in the verifier (predicates, density operators, Kraus
//! operators, measurement operators, unitaries) is a [`ComplexMatrix`]. Basis
//! states of a composite space are ordered lexicographically over the declared
//! variable order, first variable most significant.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest total Hilbert-space dimension accepted by [`Space::new`].
pub const DEFAULT_MAX_DIM: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` listed more than once")]
    RepeatedVariable(String),
    #[error("total dimension {dim} exceeds the cap of {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },
    #[error("not a quantum predicate: eigenvalues must lie in [0, 1] (found range [{min:.3e}, {max:.3e}])")]
    NotPredicate { min: f64, max: f64 },
    #[error("not a partial density operator: {0}")]
    NotDensity(String),
    #[error("Kraus family is not trace-non-increasing (max eigenvalue of sum E^dag E is {max_eig:.6})")]
    NotTraceNonIncreasing { max_eig: f64 },
    #[error("expectation has non-negligible imaginary part {0:.3e}")]
    ComplexExpectation(f64),
    #[error("empty Kraus family")]
    EmptyKraus,
    #[error("basis is not orthonormal (max Gram deviation {0:.3e})")]
    NotOrthonormal(f64),
}

pub type Result<T> = std::result::Result<T, OperatorError>;

/// Numeric tolerances and iteration budgets shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Entrywise Hermiticity tolerance.
    pub herm: f64,
    /// Entrywise equality tolerance (unitarity, completeness, matching predicates).
    pub eq: f64,
    /// Eigenvalue tolerance for positivity and Löwner-order decisions.
    pub psd: f64,
    /// Trace slack.
    pub trace: f64,
    /// Entrywise convergence threshold of the loop weakest-precondition iteration.
    pub fix: f64,
    /// Iteration budget of the loop weakest-precondition iteration.
    pub max_iters: usize,
    /// Loop unrolling stops once the surviving continue-branch trace drops below this.
    pub loop_eps: f64,
    /// Maximal number of loop unrollings.
    pub loop_budget: usize,
    /// Kraus operators with Frobenius norm below this are dropped.
    pub kraus_drop: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-9,
            eq: 1e-9,
            psd: 1e-8,
            trace: 1e-9,
            fix: 1e-10,
            max_iters: 10_000,
            loop_eps: 1e-10,
            loop_budget: 10_000,
            kraus_drop: 1e-12,
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix {}x{} ", self.rows(), self.cols())?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(OperatorError::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        for (k, z) in entries.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(OperatorError::NonFinite { row: k / cols, col: k % cols });
            }
        }
        Ok(ComplexMatrix(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(OperatorError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    /// Real-valued convenience constructor, row-major.
    pub fn real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        ComplexMatrix(DMatrix::from_row_iterator(
            rows,
            cols,
            entries.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(d: usize) -> Self {
        ComplexMatrix(DMatrix::identity(d, d))
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        ComplexMatrix(m)
    }

    /// `|i⟩⟨j|` in dimension `d`.
    pub fn unit(d: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        m[(i, j)] = C64::new(1.0, 0.0);
        ComplexMatrix(m)
    }

    /// `|v⟩⟨w|`.
    pub fn outer(v: &DVector<C64>, w: &DVector<C64>) -> Self {
        ComplexMatrix(v * w.adjoint())
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &DVector<C64>) -> Self {
        Self::outer(v, v)
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        ComplexMatrix::from_fn(d, d, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.0[(i, j)] = z;
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows()).map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect()).collect()
    }

    pub fn dagger(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, c: C64) -> Self {
        ComplexMatrix(&self.0 * c)
    }

    pub fn scale_re(&self, r: f64) -> Self {
        self.scale(C64::new(r, 0.0))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(self.0.kronecker(&other.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self − other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.0.shape() != other.0.shape() {
            return f64::INFINITY;
        }
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &ComplexMatrix, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Eigendecomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> Eigh {
        let sym = SymmetricEigen::new(self.hermitian_part().0);
        let mut order: Vec<usize> = (0..sym.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| sym.eigenvalues[a].total_cmp(&sym.eigenvalues[b]));
        let values = order.iter().map(|&k| sym.eigenvalues[k]).collect();
        let vectors = order.iter().map(|&k| sym.eigenvectors.column(k).into_owned()).collect();
        Eigh { values, vectors }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().values[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigh().values.last().expect("nonempty")
    }

    /// Replaces eigenvalues outside `[lo, hi]` by the nearest bound.
    pub fn clamp_spectrum(&self, lo: f64, hi: f64) -> Self {
        let e = self.eigh();
        let d = self.rows();
        let mut out = DMatrix::<C64>::zeros(d, d);
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            let l = lam.clamp(lo, hi);
            out += v * v.adjoint() * C64::new(l, 0.0);
        }
        ComplexMatrix(out)
    }

    /// `⟨v|M|v⟩`.
    pub fn quadratic_form(&self, v: &DVector<C64>) -> C64 {
        (v.adjoint() * &self.0 * v)[(0, 0)]
    }

    pub fn apply_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.0 * v
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(OperatorError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<C64>>,
}

/// Ket `|index⟩` in dimension `d`.
pub fn basis_vector(d: usize, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d);
    v[index] = C64::new(1.0, 0.0);
    v
}

pub fn vector_from(entries: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(entries)
}

/// A quantum variable with its Hilbert-space dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Var {
    pub name: String,
    pub dim: usize,
}

/// An ordered list of distinct variables; the tensor factor order of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Space {
    vars: Vec<Var>,
}

impl Space {
    pub fn new(vars: Vec<Var>) -> Result<Self> {
        Self::with_cap(vars, DEFAULT_MAX_DIM)
    }

    pub fn with_cap(vars: Vec<Var>, cap: usize) -> Result<Self> {
        let mut dim: usize = 1;
        for (k, v) in vars.iter().enumerate() {
            if vars[..k].iter().any(|w| w.name == v.name) {
                return Err(OperatorError::RepeatedVariable(v.name.clone()));
            }
            if v.dim == 0 {
                return Err(OperatorError::DimensionMismatch(format!("variable `{}` has dimension 0", v.name)));
            }
            dim = dim.saturating_mul(v.dim);
            if dim > cap {
                return Err(OperatorError::DimensionTooLarge { dim, cap });
            }
        }
        Ok(Space { vars })
    }

    /// Convenience constructor from `(name, dim)` pairs.
    pub fn of(pairs: &[(&str, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(n, d)| Var { name: n.to_string(), dim: d }).collect())
    }

    pub fn empty() -> Self {
        Space { vars: Vec::new() }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.vars.iter().map(|v| v.dim).product()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn var_dim(&self, name: &str) -> Result<usize> {
        self.position(name)
            .map(|k| self.vars[k].dim)
            .ok_or_else(|| OperatorError::UnknownVariable(name.to_string()))
    }

    /// The sub-space spanned by `names`, in the order given.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Space> {
        let mut vars = Vec::with_capacity(names.len());
        for n in names {
            let k = self.position(n.as_ref()).ok_or_else(|| OperatorError::UnknownVariable(n.as_ref().to_string()))?;
            vars.push(self.vars[k].clone());
        }
        Space::new(vars)
    }

    /// The variables of `self` not in `names`, in `self`'s order.
    pub fn without<S: AsRef<str>>(&self, names: &[S]) -> Space {
        Space {
            vars: self.vars.iter().filter(|v| !names.iter().any(|n| n.as_ref() == v.name)).cloned().collect(),
        }
    }

    /// Decomposes a basis index into per-variable digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars.len()];
        for k in (0..self.vars.len()).rev() {
            out[k] = index % self.vars[k].dim;
            index /= self.vars[k].dim;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.vars).fold(0, |acc, (&d, v)| acc * v.dim + d)
    }
}

/// Index table splitting a composite basis index into a selected part and a rest part.
struct Split {
    sel_dim: usize,
    rest_dim: usize,
    sel_of: Vec<usize>,
    rest_of: Vec<usize>,
    /// `join[rest * sel_dim + sel]` = full index.
    join: Vec<usize>,
}

impl Split {
    fn new<S: AsRef<str>>(env: &Space, selected: &[S]) -> Result<Split> {
        let mut pos = Vec::with_capacity(selected.len());
        for (k, s) in selected.iter().enumerate() {
            let s = s.as_ref();
            if selected[..k].iter().any(|t| t.as_ref() == s) {
                return Err(OperatorError::RepeatedVariable(s.to_string()));
            }
            pos.push(env.position(s).ok_or_else(|| OperatorError::UnknownVariable(s.to_string()))?);
        }
        let dims = env.dims();
        let rest_pos: Vec<usize> = (0..dims.len()).filter(|k| !pos.contains(k)).collect();
        let sel_dim: usize = pos.iter().map(|&k| dims[k]).product();
        let rest_dim: usize = rest_pos.iter().map(|&k| dims[k]).product();
        let total = env.dim();
        let mut sel_of = vec![0; total];
        let mut rest_of = vec![0; total];
        let mut join = vec![0; total];
        for x in 0..total {
            let dg = env.digits(x);
            let s = pos.iter().fold(0, |acc, &k| acc * dims[k] + dg[k]);
            let r = rest_pos.iter().fold(0, |acc, &k| acc * dims[k] + dg[k]);
            sel_of[x] = s;
            rest_of[x] = r;
            join[r * sel_dim + s] = x;
        }
        Ok(Split { sel_dim, rest_dim, sel_of, rest_of, join })
    }
}

/// Cylindric extension: the operator acting as `op` on `targets` (in the order
/// given) and as the identity on the remaining variables of `env`.
pub fn embed<S: AsRef<str>>(op: &ComplexMatrix, targets: &[S], env: &Space) -> Result<ComplexMatrix> {
    let split = Split::new(env, targets)?;
    if op.rows() != split.sel_dim || op.cols() != split.sel_dim {
        return Err(OperatorError::DimensionMismatch(format!(
            "operator is {}x{} but targets span dimension {}",
            op.rows(),
            op.cols(),
            split.sel_dim
        )));
    }
    let total = env.dim();
    let mut out = DMatrix::<C64>::zeros(total, total);
    for r in 0..total {
        let (rs, rr) = (split.sel_of[r], split.rest_of[r]);
        for cs in 0..split.sel_dim {
            let z = op.0[(rs, cs)];
            if z != C64::new(0.0, 0.0) {
                out[(r, split.join[rr * split.sel_dim + cs])] = z;
            }
        }
    }
    Ok(ComplexMatrix(out))
}

/// Partial trace over `traced`; the result lives on `env` without those variables.
pub fn partial_trace<S: AsRef<str>>(a: &ComplexMatrix, traced: &[S], env: &Space) -> Result<ComplexMatrix> {
    if a.rows() != env.dim() || a.cols() != env.dim() {
        return Err(OperatorError::DimensionMismatch(format!(
            "operator is {}x{} but the space has dimension {}",
            a.rows(),
            a.cols(),
            env.dim()
        )));
    }
    let split = Split::new(env, traced)?;
    let kd = split.rest_dim;
    let mut out = DMatrix::<C64>::zeros(kd, kd);
    for k1 in 0..kd {
        for k2 in 0..kd {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..split.sel_dim {
                acc += a.0[(split.join[k1 * split.sel_dim + t], split.join[k2 * split.sel_dim + t])];
            }
            out[(k1, k2)] = acc;
        }
    }
    Ok(ComplexMatrix(out))
}

/// Outcome of a Löwner-order decision `A ⊑ B`.
#[derive(Debug, Clone)]
pub struct LoewnerVerdict {
    pub holds: bool,
    /// Smallest eigenvalue of `B − A`.
    pub min_eig: f64,
    /// Unit eigenvector of the smallest eigenvalue, present when the order fails.
    pub witness: Option<DVector<C64>>,
}

/// Decides `A ⊑ B` up to `tol`, checking Hermiticity with the default tolerance.
pub fn loewner_leq(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<LoewnerVerdict> {
    loewner_leq_with(a, b, tol, Tolerances::default().herm)
}

pub fn loewner_leq_with(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64, herm_tol: f64) -> Result<LoewnerVerdict> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(OperatorError::DimensionMismatch(format!(
            "cannot compare {}x{} with {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    for m in [a, b] {
        let dev = m.hermitian_deviation();
        if dev > herm_tol * m.max_abs().max(1.0) {
            return Err(OperatorError::NotHermitian { deviation: dev });
        }
    }
    let diff = b - a;
    let e = diff.eigh();
    let min_eig = e.values[0];
    let holds = min_eig >= -tol;
    Ok(LoewnerVerdict { holds, min_eig, witness: (!holds).then(|| e.vectors[0].clone()) })
}

/// Real part of `tr(Aρ)`; errors when the imaginary part exceeds `tol`.
pub fn expectation(a: &ComplexMatrix, rho: &ComplexMatrix, tol: f64) -> Result<f64> {
    if a.rows() != rho.rows() || a.cols() != rho.cols() || !a.is_square() {
        return Err(OperatorError::DimensionMismatch(format!(
            "observable {}x{} vs state {}x{}",
            a.rows(),
            a.cols(),
            rho.rows(),
            rho.cols()
        )));
    }
    let t = (a * rho).trace();
    if t.im.abs() > tol {
        return Err(OperatorError::ComplexExpectation(t.im));
    }
    Ok(t.re)
}

/// Hermitian operator `A` on a space with `0 ⊑ A ⊑ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPredicate {
    matrix: ComplexMatrix,
    space: Space,
}

impl QuantumPredicate {
    pub fn new(matrix: ComplexMatrix, space: Space, tol: &Tolerances) -> Result<Self> {
        check_on_space(&matrix, &space)?;
        matrix.check_finite()?;
        let dev = matrix.hermitian_deviation();
        if dev > tol.herm {
            return Err(OperatorError::NotHermitian { deviation: dev });
        }
        let e = matrix.eigh();
        let (min, max) = (e.values[0], *e.values.last().unwrap());
        if min < -tol.psd || max > 1.0 + tol.psd {
            return Err(OperatorError::NotPredicate { min, max });
        }
        Ok(QuantumPredicate { matrix, space })
    }

    pub fn identity(space: Space) -> Self {
        QuantumPredicate { matrix: ComplexMatrix::identity(space.dim()), space }
    }

    pub fn zero(space: Space) -> Self {
        let d = space.dim();
        QuantumPredicate { matrix: ComplexMatrix::zeros(d, d), space }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// Positive operator with trace at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    space: Space,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix, space: Space, tol: &Tolerances) -> Result<Self> {
        check_on_space(&matrix, &space)?;
        matrix.check_finite()?;
        let dev = matrix.hermitian_deviation();
        if dev > tol.herm {
            return Err(OperatorError::NotHermitian { deviation: dev });
        }
        let min = matrix.min_eigenvalue();
        if min < -tol.psd {
            return Err(OperatorError::NotDensity(format!("negative eigenvalue {min:.3e}")));
        }
        let tr = matrix.trace();
        if tr.im.abs() > tol.eq || tr.re > 1.0 + tol.trace {
            return Err(OperatorError::NotDensity(format!("trace {tr} exceeds one")));
        }
        Ok(DensityOperator { matrix, space })
    }

    /// `|ψ⟩⟨ψ|` for a vector normalised to unit length.
    pub fn pure(psi: &DVector<C64>, space: Space) -> Result<Self> {
        let n = psi.norm();
        if psi.len() != space.dim() || n == 0.0 {
            return Err(OperatorError::DimensionMismatch("state vector does not match the space".into()));
        }
        let psi = psi / C64::new(n, 0.0);
        Ok(DensityOperator { matrix: ComplexMatrix::projector(&psi), space })
    }

    /// Wraps a matrix without validation; for states produced by trusted channels.
    pub fn unchecked(matrix: ComplexMatrix, space: Space) -> Self {
        DensityOperator { matrix, space }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

fn check_on_space(m: &ComplexMatrix, space: &Space) -> Result<()> {
    if !m.is_square() || m.rows() != space.dim() {
        return Err(OperatorError::DimensionMismatch(format!(
            "operator is {}x{} but the space has dimension {}",
            m.rows(),
            m.cols(),
            space.dim()
        )));
    }
    Ok(())
}

/// Completely positive, trace-non-increasing map in Kraus form `ρ ↦ Σ E ρ E†`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    kraus: Vec<ComplexMatrix>,
    d_in: usize,
    d_out: usize,
    trace_preserving: bool,
}

impl Superoperator {
    pub fn new(kraus: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let first = kraus.first().ok_or(OperatorError::EmptyKraus)?;
        let (d_out, d_in) = (first.rows(), first.cols());
        if kraus.iter().any(|k| k.rows() != d_out || k.cols() != d_in) {
            return Err(OperatorError::DimensionMismatch("Kraus operators of different shapes".into()));
        }
        for k in &kraus {
            k.check_finite()?;
        }
        let sum = kraus_sum(&kraus, d_in);
        let max_eig = sum.max_eigenvalue();
        if max_eig > 1.0 + tol.psd {
            return Err(OperatorError::NotTraceNonIncreasing { max_eig });
        }
        let trace_preserving = sum.approx_eq(&ComplexMatrix::identity(d_in), tol.eq);
        Ok(Superoperator { kraus, d_in, d_out, trace_preserving })
    }

    pub fn identity(d: usize) -> Self {
        Superoperator { kraus: vec![ComplexMatrix::identity(d)], d_in: d, d_out: d, trace_preserving: true }
    }

    /// The zero map on dimension `d`.
    pub fn zero(d: usize) -> Self {
        Superoperator { kraus: vec![ComplexMatrix::zeros(d, d)], d_in: d, d_out: d, trace_preserving: false }
    }

    pub fn unitary(u: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        Self::new(vec![u], tol)
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `Σ E†E`.
    pub fn kraus_sum(&self) -> ComplexMatrix {
        kraus_sum(&self.kraus, self.d_in)
    }

    /// `max |Σ E†E − I|` entrywise.
    pub fn trace_preservation_residual(&self) -> f64 {
        self.kraus_sum().max_abs_diff(&ComplexMatrix::identity(self.d_in))
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.d_in || rho.cols() != self.d_in {
            return Err(OperatorError::DimensionMismatch(format!(
                "channel input dimension {} vs state {}x{}",
                self.d_in,
                rho.rows(),
                rho.cols()
            )));
        }
        let mut out = DMatrix::<C64>::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            out += &k.0 * &rho.0 * k.0.adjoint();
        }
        Ok(ComplexMatrix(out))
    }

    /// Heisenberg-picture dual `A ↦ Σ E† A E`.
    pub fn dual_apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        if a.rows() != self.d_out || a.cols() != self.d_out {
            return Err(OperatorError::DimensionMismatch(format!(
                "channel output dimension {} vs observable {}x{}",
                self.d_out,
                a.rows(),
                a.cols()
            )));
        }
        let mut out = DMatrix::<C64>::zeros(self.d_in, self.d_in);
        for k in &self.kraus {
            out += k.0.adjoint() * &a.0 * &k.0;
        }
        Ok(ComplexMatrix(out))
    }

    /// `then ∘ self`: apply `self` first, then `then`.
    pub fn compose(&self, then: &Superoperator) -> Result<Superoperator> {
        if self.d_out != then.d_in {
            return Err(OperatorError::DimensionMismatch(format!(
                "cannot feed output dimension {} into input dimension {}",
                self.d_out, then.d_in
            )));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * then.kraus.len());
        for e in &self.kraus {
            for f in &then.kraus {
                kraus.push(f * e);
            }
        }
        let trace_preserving = self.trace_preserving && then.trace_preserving;
        Ok(Superoperator { kraus, d_in: self.d_in, d_out: then.d_out, trace_preserving })
    }

    /// Pointwise sum of two maps; the caller guarantees the result is trace-non-increasing.
    pub fn sum(&self, other: &Superoperator, tol: &Tolerances) -> Result<Superoperator> {
        let mut kraus = self.kraus.clone();
        kraus.extend(other.kraus.iter().cloned());
        Superoperator::new(kraus, tol)
    }

    /// Drops negligible Kraus operators and re-derives a minimal family from
    /// the Choi matrix when the list is longer than `d_in·d_out`.
    pub fn compressed(&self, tol: &Tolerances) -> Superoperator {
        let mut kraus: Vec<ComplexMatrix> =
            self.kraus.iter().filter(|k| k.frobenius_norm() >= tol.kraus_drop).cloned().collect();
        if kraus.len() > self.d_in * self.d_out {
            kraus = kraus_from_natural(&self.natural(), self.d_in, self.d_out);
        }
        if kraus.is_empty() {
            kraus.push(ComplexMatrix::zeros(self.d_out, self.d_in));
        }
        Superoperator { kraus, d_in: self.d_in, d_out: self.d_out, trace_preserving: self.trace_preserving }
    }

    /// Matrix of the map acting on row-major vectorised operators:
    /// `vec(E ρ E†) = (E ⊗ conj(E)) vec(ρ)`.
    pub fn natural(&self) -> NaturalRep {
        let mut m = DMatrix::<C64>::zeros(self.d_out * self.d_out, self.d_in * self.d_in);
        for k in &self.kraus {
            m += k.0.kronecker(&k.0.map(|z| z.conj()));
        }
        NaturalRep { m, d_in: self.d_in, d_out: self.d_out }
    }

    pub fn from_natural(rep: &NaturalRep, tol: &Tolerances) -> Superoperator {
        let mut kraus = kraus_from_natural(rep, rep.d_in, rep.d_out);
        if kraus.is_empty() {
            kraus.push(ComplexMatrix::zeros(rep.d_out, rep.d_in));
        }
        let sum = kraus_sum(&kraus, rep.d_in);
        let trace_preserving = sum.approx_eq(&ComplexMatrix::identity(rep.d_in), tol.eq);
        Superoperator { kraus, d_in: rep.d_in, d_out: rep.d_out, trace_preserving }
    }
}

fn kraus_sum(kraus: &[ComplexMatrix], d_in: usize) -> ComplexMatrix {
    let mut sum = DMatrix::<C64>::zeros(d_in, d_in);
    for k in kraus {
        sum += k.0.adjoint() * &k.0;
    }
    ComplexMatrix(sum)
}

fn kraus_from_natural(rep: &NaturalRep, d_in: usize, d_out: usize) -> Vec<ComplexMatrix> {
    // Choi matrix J[(i,a),(j,b)] = E(|i⟩⟨j|)[a][b].
    let n = d_in * d_out;
    let mut choi = DMatrix::<C64>::zeros(n, n);
    for i in 0..d_in {
        for j in 0..d_in {
            for a in 0..d_out {
                for b in 0..d_out {
                    choi[(i * d_out + a, j * d_out + b)] = rep.m[(a * d_out + b, i * d_in + j)];
                }
            }
        }
    }
    let e = ComplexMatrix(choi).eigh();
    let top = e.values.last().copied().unwrap_or(0.0).max(0.0);
    let mut out = Vec::new();
    for (lam, v) in e.values.iter().zip(&e.vectors) {
        if *lam <= 1e-14 * top.max(1e-300) || *lam <= 0.0 {
            continue;
        }
        let s = lam.sqrt();
        out.push(ComplexMatrix::from_fn(d_out, d_in, |a, i| v[i * d_out + a] * s));
    }
    out
}

/// Superoperator as a `d_out² × d_in²` matrix on row-major vectorised operators.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalRep {
    pub m: DMatrix<C64>,
    pub d_in: usize,
    pub d_out: usize,
}

impl NaturalRep {
    pub fn identity(d: usize) -> Self {
        NaturalRep { m: DMatrix::identity(d * d, d * d), d_in: d, d_out: d }
    }

    pub fn zero(d: usize) -> Self {
        NaturalRep { m: DMatrix::zeros(d * d, d * d), d_in: d, d_out: d }
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &NaturalRep) -> NaturalRep {
        NaturalRep { m: &then.m * &self.m, d_in: self.d_in, d_out: then.d_out }
    }

    pub fn add(&self, other: &NaturalRep) -> NaturalRep {
        NaturalRep { m: &self.m + &other.m, d_in: self.d_in, d_out: self.d_out }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let v = DVector::from_iterator(self.d_in * self.d_in, rho.transpose().0.iter().copied());
        let w = &self.m * v;
        ComplexMatrix::from_fn(self.d_out, self.d_out, |a, b| w[a * self.d_out + b])
    }

    /// `Y` with `tr(E(ρ)) = tr(Yρ)` for every `ρ`, i.e. the dual applied to `I`.
    pub fn dual_identity(&self) -> ComplexMatrix {
        let d = self.d_in;
        // tr(E(ρ)) = Σ_a row_{(a,a)} · vec(ρ) ; Y[j][i] = Σ_a m[(a,a),(i,j)].
        ComplexMatrix::from_fn(d, d, |j, i| (0..self.d_out).map(|a| self.m[(a * self.d_out + a, i * d + j)]).sum())
    }

    /// `Σ_a A`-weighted dual: `Y` with `tr(A E(ρ)) = tr(Yρ)`.
    pub fn dual_apply(&self, a: &ComplexMatrix) -> ComplexMatrix {
        let d = self.d_in;
        let dout = self.d_out;
        ComplexMatrix::from_fn(d, d, |j, i| {
            let mut acc = C64::new(0.0, 0.0);
            for x in 0..dout {
                for y in 0..dout {
                    // tr(A X) = Σ_{x,y} A[y][x] X[x][y]
                    acc += a.get(y, x) * self.m[(x * dout + y, i * d + j)];
                }
            }
            acc
        })
    }
}

/// Amplitude-damping channel with decay probability `gamma`, Kraus pair
/// `E0 = diag(1, √(1−γ))`, `E1 = √γ |0⟩⟨1|`.
pub fn amplitude_damping(gamma: f64) -> Superoperator {
    let e0 = ComplexMatrix::real(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]);
    let e1 = ComplexMatrix::real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
    Superoperator::new(vec![e0, e1], &Tolerances::default()).expect("valid damping parameter")
}
