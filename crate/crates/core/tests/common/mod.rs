#![allow(dead_code)]

use proxnewton_core::hilbert::{assemble_inner_product, DualVector, Mesh, PrimalVector};
use proxnewton_core::objective::CompositeProblem;
use proxnewton_core::problems::{make_toy_problem, ToyProblemParams};
use rand::Rng;
use std::sync::Arc;

pub fn toy(params: ToyProblemParams) -> CompositeProblem {
    let mesh = Arc::new(Mesh::unit_square(params.refinement_level).unwrap());
    let ip = Arc::new(assemble_inner_product(&mesh).unwrap());
    make_toy_problem(&params, mesh, ip).unwrap()
}

pub fn random_primal(rng: &mut impl Rng, n: usize, scale: f64) -> PrimalVector {
    PrimalVector::new((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

pub fn random_dual(rng: &mut impl Rng, n: usize, scale: f64) -> DualVector {
    DualVector::new((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

pub fn x_norm(p: &CompositeProblem, v: &PrimalVector) -> f64 {
    p.inner_product().norm_primal(v).unwrap()
}
