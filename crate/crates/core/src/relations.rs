//! Quantum relations on bipartite spaces and their compositions.

use nalgebra::DVector;

use crate::operator::{basis_vector, ComplexMatrix, OperatorError, Result, C64};

/// SWAP on `C^d ⊗ C^d`.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            m.set(j * d + i, i * d + j, C64::new(1.0, 0.0));
        }
    }
    m
}

/// `(I ± SWAP) / 2`.
pub fn symmetrizer(d: usize, plus: bool) -> ComplexMatrix {
    let s = swap_operator(d);
    let id = ComplexMatrix::identity(d * d);
    let sum = if plus { &id + &s } else { &id - &s };
    sum.scale_re(0.5)
}

fn check_orthonormal(basis: &[DVector<C64>], tol: f64) -> Result<usize> {
    let d = basis.len();
    if d == 0 {
        return Err(OperatorError::DimensionMismatch("empty basis".into()));
    }
    if basis.iter().any(|b| b.len() != d) {
        return Err(OperatorError::DimensionMismatch(format!("basis of {d} vectors must live in C^{d}")));
    }
    let mut dev = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let g = basis[i].dotc(&basis[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g - C64::new(want, 0.0)).norm());
        }
    }
    if dev > tol {
        return Err(OperatorError::NotOrthonormal(dev));
    }
    Ok(d)
}

/// `(1/√d) Σ_i b_i ⊗ b_i`.
pub fn max_entangled(basis: &[DVector<C64>]) -> DVector<C64> {
    let d = basis.len();
    let mut psi = DVector::zeros(d * d);
    for b in basis {
        psi += b.kronecker(b);
    }
    psi / C64::new((d as f64).sqrt(), 0.0)
}

pub fn computational_basis(d: usize) -> Vec<DVector<C64>> {
    (0..d).map(|i| basis_vector(d, i)).collect()
}

/// Equality relation `|Ψ⟩⟨Ψ|` for an orthonormal basis.
pub fn equality_pred(basis: &[DVector<C64>], tol: f64) -> Result<ComplexMatrix> {
    check_orthonormal(basis, tol)?;
    Ok(ComplexMatrix::projector(&max_entangled(basis)))
}

pub fn equality_pred_computational(d: usize) -> ComplexMatrix {
    ComplexMatrix::projector(&max_entangled(&computational_basis(d)))
}

struct Dims {
    d1: usize,
    d2: usize,
    d3: usize,
}

fn split_dims(a: &ComplexMatrix, b: &ComplexMatrix, d2: usize) -> Result<Dims> {
    let bad = |what: &str| Err(OperatorError::DimensionMismatch(what.into()));
    if !a.is_square() || !b.is_square() {
        return bad("relations must be square");
    }
    if d2 == 0 || a.rows() % d2 != 0 || b.rows() % d2 != 0 {
        return bad(&format!("middle dimension {d2} does not divide {} and {}", a.rows(), b.rows()));
    }
    Ok(Dims { d1: a.rows() / d2, d2, d3: b.rows() / d2 })
}

/// `(⟨w| ⊗ ...) (A ⊗ B) (|w⟩ ⊗ ...)` contracted on the two middle factors.
fn contract(a: &ComplexMatrix, b: &ComplexMatrix, w: &DVector<C64>, dims: &Dims) -> ComplexMatrix {
    let Dims { d1, d2, d3 } = *dims;
    let nz: Vec<(usize, usize, C64)> = (0..d2)
        .flat_map(|x| (0..d2).map(move |y| (x, y)))
        .filter_map(|(x, y)| {
            let v = w[x * d2 + y];
            (v.norm() > 0.0).then_some((x, y, v))
        })
        .collect();
    let am = a.inner();
    let bm = b.inner();
    ComplexMatrix::from_fn(d1 * d3, d1 * d3, |r, c| {
        let (x1, x3) = (r / d3, r % d3);
        let (y1, y3) = (c / d3, c % d3);
        let mut acc = C64::new(0.0, 0.0);
        for &(p, q, wl) in &nz {
            for &(s, t, wr) in &nz {
                acc += wl.conj() * am[(x1 * d2 + p, y1 * d2 + s)] * bm[(q * d3 + x3, t * d3 + y3)] * wr;
            }
        }
        acc
    })
}

/// `(1/d₂) Σ_i ⟨b_i b_i| A ⊗ B |b_i b_i⟩` on the middle factors.
pub fn circle_comp(a: &ComplexMatrix, b: &ComplexMatrix, basis: &[DVector<C64>], tol: f64) -> Result<ComplexMatrix> {
    let d2 = check_orthonormal(basis, tol)?;
    let dims = split_dims(a, b, d2)?;
    let mut out = ComplexMatrix::zeros(dims.d1 * dims.d3, dims.d1 * dims.d3);
    for v in basis {
        out = &out + &contract(a, b, &v.kronecker(v), &dims);
    }
    Ok(out.scale_re(1.0 / d2 as f64))
}

/// `⟨Ψ| A ⊗ B |Ψ⟩` on the middle factors.
pub fn bullet_comp(a: &ComplexMatrix, b: &ComplexMatrix, basis: &[DVector<C64>], tol: f64) -> Result<ComplexMatrix> {
    let d2 = check_orthonormal(basis, tol)?;
    let dims = split_dims(a, b, d2)?;
    Ok(contract(a, b, &max_entangled(basis), &dims))
}

/// `tr_mid[S (A ⊗ B) S]` with `S` the (anti)symmetrizer on the two middle factors.
/// The result is not clamped and may exceed the identity.
pub fn diamond_comp(a: &ComplexMatrix, b: &ComplexMatrix, d2: usize, plus: bool) -> Result<ComplexMatrix> {
    let Dims { d1, d2, d3 } = split_dims(a, b, d2)?;
    let s = ComplexMatrix::identity(d1).kron(&symmetrizer(d2, plus)).kron(&ComplexMatrix::identity(d3));
    let full = &(&s * &a.kron(b)) * &s;
    let m = full.inner();
    Ok(ComplexMatrix::from_fn(d1 * d3, d1 * d3, |r, c| {
        let (x1, x3) = (r / d3, r % d3);
        let (y1, y3) = (c / d3, c % d3);
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..d2 {
            for q in 0..d2 {
                let mid = p * d2 + q;
                acc += m[((x1 * d2 * d2 + mid) * d3 + x3, (y1 * d2 * d2 + mid) * d3 + y3)];
            }
        }
        acc
    }))
}
