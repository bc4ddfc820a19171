mod common;

use common::rng;
use proptest::prelude::*;
use qwhile::operator::{embed, loewner_leq, partial_trace, ComplexMatrix, Space, Superoperator, Tolerances};
use qwhile::random;
use rand::Rng;

fn hermitian<R: Rng>(d: usize, r: &mut R) -> ComplexMatrix {
    let g = random::ginibre(d, d, r);
    (&g + &g.dagger()).scale_re(0.5)
}

fn positive<R: Rng>(d: usize, r: &mut R) -> ComplexMatrix {
    let g = random::ginibre(d, d, r);
    &g * &g.dagger()
}

/// A trace-non-increasing channel: a random channel with its Kraus operators scaled by `√s`.
fn subchannel<R: Rng>(d: usize, r: &mut R) -> (Superoperator, bool) {
    let k = r.random_range(1..=4);
    let e = random::channel(d, k, r);
    if r.random_bool(0.5) {
        return (e, true);
    }
    let s: f64 = r.random_range(0.1..0.9);
    let kraus = e.kraus().iter().map(|m| m.scale_re(s.sqrt())).collect();
    (Superoperator::new(kraus, &Tolerances::default()).unwrap(), false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dual_superoperator_duality(seed in any::<u64>(), d in 2..=8usize) {
        let mut r = rng(seed);
        let (e, _) = subchannel(d, &mut r);
        let a = hermitian(d, &mut r);
        let rho = random::density(d, &mut r);
        let lhs = (a.inner() * e.apply(&rho).unwrap().inner()).trace().re;
        let rhs = (e.dual_apply(&a).unwrap().inner() * rho.inner()).trace().re;
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }

    #[test]
    fn apply_does_not_increase_trace(seed in any::<u64>(), d in 2..=8usize) {
        let mut r = rng(seed);
        let (e, tp) = subchannel(d, &mut r);
        let rho = random::density(d, &mut r);
        let t = e.apply(&rho).unwrap().trace().re;
        prop_assert!(t <= 1.0 + 1e-12);
        prop_assert_eq!(e.is_trace_preserving(), tp);
        if tp {
            prop_assert!((t - 1.0).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_of_positives_is_positive(seed in any::<u64>(), d1 in 1..=4usize, d2 in 1..=4usize) {
        let mut r = rng(seed);
        let (a1, a2) = (positive(d1, &mut r), positive(d2, &mut r));
        prop_assert!(a1.kron(&a2).min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn tensor_is_monotone(seed in any::<u64>(), d1 in 1..=4usize, d2 in 1..=4usize) {
        let mut r = rng(seed);
        let (a1, a2) = (positive(d1, &mut r), positive(d2, &mut r));
        let b1 = &a1 + &positive(d1, &mut r);
        let b2 = &a2 + &positive(d2, &mut r);
        prop_assert!(loewner_leq(&a1.kron(&a2), &b1.kron(&b2), 1e-8).unwrap().holds);
    }

    #[test]
    fn loewner_order_is_transitive(seed in any::<u64>(), d in 2..=6usize) {
        let mut r = rng(seed);
        let tol = 1e-8;
        let a = hermitian(d, &mut r);
        // Small perturbations put some triples right at the decision boundary.
        let b = &a + &(&positive(d, &mut r) - &ComplexMatrix::identity(d).scale_re(r.random_range(0.0..1e-8)));
        let c = &b + &(&positive(d, &mut r) - &ComplexMatrix::identity(d).scale_re(r.random_range(0.0..1e-8)));
        let ab = loewner_leq(&a, &b, tol).unwrap().holds;
        let bc = loewner_leq(&b, &c, tol).unwrap().holds;
        if ab && bc {
            prop_assert!(loewner_leq(&a, &c, 2.0 * tol).unwrap().holds);
        }
    }

    #[test]
    fn embed_then_trace_out_scales_by_traced_dimension(seed in any::<u64>(), pick in 0..3usize) {
        let mut r = rng(seed);
        let env = Space::of(&[("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let targets: Vec<&str> = match pick { 0 => vec!["b"], 1 => vec!["c", "a"], _ => vec!["a", "c"] };
        let dt: usize = targets.iter().map(|t| env.var_dim(t).unwrap()).product();
        let op = random::ginibre(dt, dt, &mut r);
        let full = embed(&op, &targets, &env).unwrap();
        let traced: Vec<String> = env.names().into_iter().filter(|n| !targets.contains(&n.as_str())).collect();
        let reduced = partial_trace(&full, &traced, &env).unwrap();
        let expect = embed(&op, &targets, &env.without(&traced)).unwrap().scale_re((env.dim() / dt) as f64);
        prop_assert!(reduced.approx_eq(&expect, 1e-10));
    }
}
