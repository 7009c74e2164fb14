mod common;

use common::{random_dual, random_primal};
use proptest::prelude::*;
use proxnewton_core::hilbert::{DualVector, PrimalVector};
use proxnewton_core::objective::{NonsmoothPart, SecondOrderForm};
use proxnewton_core::problems::{make_quadratic_l1, QuadraticL1};
use proxnewton_core::subsolver::{scaled_prox, scaled_prox_reference, ProxSubproblem, SubsolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn operator(inst: &QuadraticL1) -> SecondOrderForm {
    SecondOrderForm::new(inst.smooth.matrix().clone())
}

#[test]
fn agrees_with_coordinate_descent_on_random_instances() {
    let cfg = SubsolverConfig::default();
    for seed in 0..50 {
        let inst = make_quadratic_l1(50, seed, 0.5, 0.2, &[0.4]).unwrap();
        let ip = inst.problem.inner_product();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let phi = random_dual(&mut rng, 50, 2.0);
        let sp = ProxSubproblem::new(operator(&inst), phi, inst.problem.nonsmooth(), ip).unwrap();
        let fast = scaled_prox(&sp, None, &cfg).unwrap();
        let slow = scaled_prox_reference(&sp, 1e-14).unwrap();
        let diff = ip.norm_primal(&fast.y.sub(&slow)).unwrap();
        assert!(diff <= 1e-6, "seed {seed}: {diff:e}");
        assert!(sp.first_order_residual(&fast.y) <= 1e-8, "seed {seed}");
        assert!(fast.objectives.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: not monotone {:?}", fast.objectives);
        // the instance must exercise both active and inactive coordinates
        if seed == 0 {
            assert!(fast.y.iter().any(|&v| v == 0.0) && fast.y.iter().any(|&v| v != 0.0));
        }
    }
}

#[test]
fn without_nonsmooth_term_reduces_to_linear_solve() {
    let inst = make_quadratic_l1(40, 3, 1.0, 0.0, &[0.0]).unwrap();
    let ip = inst.problem.inner_product();
    let g = NonsmoothPart::zero(40);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi = random_dual(&mut rng, 40, 1.0);
    let sp = ProxSubproblem::new(operator(&inst), phi.clone(), &g, ip).unwrap();
    let y = scaled_prox(&sp, None, &SubsolverConfig::default()).unwrap().y;
    let residual = DualVector::new(inst.smooth.matrix().mul_vec(&y).unwrap()).sub(&phi);
    let rel = ip.norm_dual(&residual).unwrap() / ip.norm_dual(&phi).unwrap();
    assert!(rel <= 1e-8, "{rel:e}");
    let r = scaled_prox_reference(&sp, 1e-14).unwrap();
    assert!(ip.norm_primal(&r.sub(&y)).unwrap() <= 1e-8 * ip.norm_primal(&y).unwrap());
}

#[test]
fn prox_is_lipschitz_with_inverse_convexity() {
    let cfg = SubsolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let inst = make_quadratic_l1(50, 9, 0.3, 0.0, &[0.5]).unwrap();
    let ip = inst.problem.inner_product();
    let sp_for = |phi: DualVector| ProxSubproblem::new(operator(&inst), phi, inst.problem.nonsmooth(), ip).unwrap();
    for _ in 0..100 {
        let phi1 = random_dual(&mut rng, 50, 2.0);
        let phi2 = random_dual(&mut rng, 50, 2.0);
        let y1 = scaled_prox(&sp_for(phi1.clone()), None, &cfg).unwrap().y;
        let y2 = scaled_prox(&sp_for(phi2.clone()), None, &cfg).unwrap().y;
        let lhs = ip.norm_primal(&y1.sub(&y2)).unwrap();
        let rhs = (1.0 + 1e-4) / inst.kappa() * ip.norm_dual(&phi1.sub(&phi2)).unwrap();
        assert!(lhs <= rhs, "{lhs} > {rhs}");
    }
}

#[test]
fn second_prox_inequality() {
    let cfg = SubsolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for seed in 0..10 {
        let inst = make_quadratic_l1(30, 100 + seed, 0.2, 0.4, &[0.3]).unwrap();
        let p = &inst.problem;
        let ip = p.inner_product();
        let h = operator(&inst);
        for _ in 0..10 {
            let phi = random_dual(&mut rng, 30, 2.0);
            let sp = ProxSubproblem::new(h.clone(), phi.clone(), p.nonsmooth(), ip).unwrap();
            let u = scaled_prox(&sp, None, &cfg).unwrap().y;
            let xi = random_primal(&mut rng, 30, 1.0);
            let lhs = phi.sub(&h.apply(&u).unwrap()).apply(&xi.sub(&u));
            let d = ip.norm_primal(&xi.sub(&u)).unwrap();
            let rhs = p.eval_g(&xi).unwrap() - p.eval_g(&u).unwrap() - 0.5 * inst.kappa2 * d * d;
            assert!(lhs <= rhs + 1e-8, "{lhs} > {rhs}");
        }
    }
}

#[test]
fn warm_start_at_solution_converges_in_one_cycle() {
    let inst = make_quadratic_l1(20, 4, 0.5, 0.0, &[0.3]).unwrap();
    let ip = inst.problem.inner_product();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sp = ProxSubproblem::new(operator(&inst), random_dual(&mut rng, 20, 1.0), inst.problem.nonsmooth(), ip)
        .unwrap();
    let cfg = SubsolverConfig::default();
    let y = scaled_prox(&sp, None, &cfg).unwrap().y;
    let again = scaled_prox(&sp, Some(&y), &cfg).unwrap();
    assert_eq!(again.cycles, 1);
    assert!(ip.norm_primal(&again.y.sub(&y)).unwrap() <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_is_monotone_and_solution_is_stationary(
        seed in 0u64..10_000,
        c in 0.0f64..2.0,
        scale in 0.1f64..5.0,
    ) {
        let inst = make_quadratic_l1(25, seed, 0.4, 0.1, &[c]).unwrap();
        let ip = inst.problem.inner_product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let phi = random_dual(&mut rng, 25, scale);
        let start = random_primal(&mut rng, 25, 1.0);
        let sp = ProxSubproblem::new(operator(&inst), phi, inst.problem.nonsmooth(), ip).unwrap();
        let sol = scaled_prox(&sp, Some(&start), &SubsolverConfig::default()).unwrap();
        prop_assert!(sol.objectives.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(sp.first_order_residual(&sol.y) <= 1e-8);
        let zero = PrimalVector::zeros(25);
        prop_assert!(sp.objective(&sol.y) <= sp.objective(&zero) + 1e-12);
    }
}
