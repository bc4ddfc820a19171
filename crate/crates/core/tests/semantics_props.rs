mod common;

use common::{corpus_programs, rng, Env};
use proptest::prelude::*;
use qwhile::lang::parse;
use qwhile::operator::Tolerances;
use qwhile::random;
use qwhile::semantics::{ensemble_trace, Configuration, Model};
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn denotation_is_linear(seed in any::<u64>()) {
        let mut r = rng(seed);
        let env = Env::random(&mut r);
        let p = env.program(&env.names(), 2, &mut r);
        let (r1, r2) = (env.state(&mut r), env.state(&mut r));
        let lambda: f64 = r.random_range(0.0..=1.0);
        let mu: f64 = r.random_range(0.0..=1.0 - lambda);
        let mixed = &r1.scale_re(lambda) + &r2.scale_re(mu);
        let lhs = env.model.denote_apply(&p, &mixed).unwrap();
        let rhs = &env.model.denote_apply(&p, &r1).unwrap().scale_re(lambda) + &env.model.denote_apply(&p, &r2).unwrap().scale_re(mu);
        prop_assert!(lhs.approx_eq(&rhs, 1e-9));
    }

    #[test]
    fn denotation_does_not_increase_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let env = Env::random(&mut r);
        let p = env.program(&env.names(), 2, &mut r);
        let rho = env.state(&mut r).scale_re(r.random_range(0.0..=1.0));
        prop_assert!(env.model.denote_apply(&p, &rho).unwrap().trace().re <= rho.trace().re + 1e-9);
    }

    #[test]
    fn ensemble_steps_preserve_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let env = Env::random(&mut r);
        let p = env.program(&env.names(), 2, &mut r);
        let mut ens = vec![Configuration::new(p, env.state(&mut r))];
        for _ in 0..12 {
            ens = env.model.step_ensemble(&ens, false).unwrap();
            prop_assert!((ensemble_trace(&ens) - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn operational_and_denotational_semantics_agree_on_the_corpus() {
    let mut r = rng(11);
    for (name, src) in corpus_programs() {
        let f = parse(&src).unwrap();
        let m = Model::new(&f.decls, &Tolerances::default());
        for _ in 0..3 {
            let rho = random::density(m.dim(), &mut r);
            let run = m.run_ensemble(&f.program, &rho, 10_000).unwrap();
            let (rep, stats) = m.denote_natural(&f.program).unwrap();
            let diff = rep.apply(&rho).max_abs_diff(&run.terminated);
            if f.program.is_loop_free() {
                assert!(diff <= 1e-10, "{name}: {diff:.3e}");
            } else {
                let allowance = run.residual_trace + run.dropped_trace + stats.residual + 1e-10;
                assert!(diff <= allowance, "{name}: {diff:.3e} > {allowance:.3e}");
            }
        }
    }
}
