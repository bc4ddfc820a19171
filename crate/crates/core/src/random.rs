//! Seeded samplers for states, unitaries, predicates and channels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{ComplexMatrix, Superoperator, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// `GG†/tr(GG†)` for a square Ginibre `G`.
pub fn density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    let m = &g * &g.dagger();
    let t = m.trace().re;
    m.scale_re(1.0 / t)
}

pub fn unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Haar-distributed unitary via QR with the phases of `R` divided out.
pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, d, rng).into_inner();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(d, d, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let x = r[(i, i)];
        if x.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x / x.norm()
        }
    });
    ComplexMatrix::from_inner(q * phases)
}

/// `U diag(λ) U†` with `λ_i` uniform in `[0, 1]`.
pub fn predicate<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let u = unitary(d, rng);
    let lambda: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    &(&u * &ComplexMatrix::diag(&lambda)) * &u.dagger()
}

/// Trace-preserving channel with `k` Kraus operators, cut from a Haar isometry.
pub fn channel<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Superoperator {
    let u = unitary(d * k, rng);
    let kraus = (0..k)
        .map(|b| ComplexMatrix::from_fn(d, d, |i, j| u.get(b * d + i, j)))
        .collect::<Vec<_>>();
    Superoperator::new(kraus, &Default::default()).expect("isometry blocks form a channel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samplers_have_their_defining_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [2, 3, 5] {
            let u = unitary(d, &mut rng);
            assert!((&u * &u.dagger()).approx_eq(&ComplexMatrix::identity(d), 1e-12));
            let rho = density(d, &mut rng);
            assert!((rho.trace().re - 1.0).abs() < 1e-12 && rho.min_eigenvalue() > -1e-12);
            let p = predicate(d, &mut rng);
            assert!(p.min_eigenvalue() > -1e-12 && p.max_eigenvalue() < 1.0 + 1e-12);
            assert!(channel(d, 3, &mut rng).trace_preservation_residual() < 1e-12);
        }
    }
}
