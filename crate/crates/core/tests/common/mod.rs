#![allow(dead_code)]

use std::sync::Arc;

use multibump::mesh::{build_mesh, DomainSpec, FieldDescriptor, WeightSpec};
use multibump::model::{Discretization, Nonlinearity, NonlinearitySpec, ProblemSpec};
use rand::Rng;

/// `Ω = (0,5)`, `a = sin πx`, `f = u³`, `g = u`, `λ = 0`.
pub fn f1(nodes: usize, mu: f64) -> ProblemSpec {
    let mesh = build_mesh(&DomainSpec::interval(0.0, 5.0, nodes)).unwrap();
    let weight = WeightSpec::new(FieldDescriptor::Sine {
        amplitude: 1.0,
        frequency: 1.0,
        phase: 0.0,
        axis: 0,
    });
    let nl = Nonlinearity::new(&NonlinearitySpec::single_power(1.0, 4.0, 1.0, 2.0), &mesh).unwrap();
    ProblemSpec::new(
        Arc::new(Discretization::new(mesh, &weight).unwrap()),
        Arc::new(nl),
        0.0,
        mu,
    )
    .unwrap()
}

/// Random combination of the first eight sine modes of `(0,5)`, sampled
/// at the interior nodes.
pub fn smooth_field<R: Rng>(spec: &ProblemSpec, rng: &mut R, scale: f64) -> Vec<f64> {
    sine_modes(spec, rng, scale, 8)
}

pub fn sine_modes<R: Rng>(spec: &ProblemSpec, rng: &mut R, scale: f64, modes: usize) -> Vec<f64> {
    let mesh = spec.disc().mesh();
    let amps: Vec<f64> = (0..modes)
        .map(|_| rng.random_range(-1.0..1.0) * scale)
        .collect();
    let len = mesh.extents()[0][1] - mesh.extents()[0][0];
    mesh.interior_nodes()
        .iter()
        .map(|&g| {
            let x = mesh.coordinates(g)[0] - mesh.extents()[0][0];
            amps.iter()
                .enumerate()
                .map(|(k, a)| a * (std::f64::consts::PI * (k + 1) as f64 * x / len).sin())
                .sum()
        })
        .collect()
}
