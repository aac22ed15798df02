mod common;

use common::{f1, smooth_field};
use multibump::nehari::build_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Direct nodal quadrature of `I_μ` for the 1D fixture, written from the
/// formula rather than through the operators.
fn oracle_energy(nodes: usize, mu: f64, u: &[f64]) -> f64 {
    let h = 5.0 / (nodes - 1) as f64;
    let mut full = vec![0.0];
    full.extend_from_slice(u);
    full.push(0.0);
    let dirichlet: f64 = full.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
    let potential: f64 = u
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let a = (std::f64::consts::PI * (k + 1) as f64 * h).sin();
            if a > 1e-12 {
                h * a * v.powi(4) / 4.0
            } else if a < -1e-12 {
                -h * mu * (-a) * v * v / 2.0
            } else {
                0.0
            }
        })
        .sum();
    0.5 * dirichlet - potential
}

#[test]
fn energy_at_seed_matches_direct_quadrature() {
    let spec = f1(501, 10.0);
    let seed = build_seed(&spec, 1e-10).unwrap();
    let e = spec.energy(&seed.u);
    let oracle = oracle_energy(501, 10.0, &seed.u);
    assert!(
        (e - oracle).abs() <= 1e-12 * oracle.abs(),
        "{e} vs {oracle}"
    );
    assert!(e > 0.0);
}

#[test]
fn energy_of_random_fields_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (nodes, mu) in [(101, 0.0), (101, 1000.0), (501, 10.0)] {
        let spec = f1(nodes, mu);
        for _ in 0..5 {
            let u = smooth_field(&spec, &mut rng, 3.0);
            let e = spec.energy(&u);
            let oracle = oracle_energy(nodes, mu, &u);
            assert!(
                (e - oracle).abs() <= 1e-11 * oracle.abs().max(1.0),
                "{e} vs {oracle}"
            );
        }
    }
}

#[test]
fn derivative_matches_central_differences() {
    let spec = f1(501, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let u = smooth_field(&spec, &mut rng, 2.0);
        let z = smooth_field(&spec, &mut rng, 1.0);
        let eps = 1e-5;
        let plus: Vec<f64> = u.iter().zip(&z).map(|(u, z)| u + eps * z).collect();
        let minus: Vec<f64> = u.iter().zip(&z).map(|(u, z)| u - eps * z).collect();
        let fd = (spec.energy(&plus) - spec.energy(&minus)) / (2.0 * eps);
        let exact = spec.energy_derivative(&u, &z);
        assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{fd} vs {exact}");
    }
}

#[test]
fn riesz_gradient_represents_the_derivative() {
    let spec = f1(301, 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = spec.disc().stiffness();
    let u = smooth_field(&spec, &mut rng, 2.0);
    let g = spec.riesz_gradient(&u);
    for _ in 0..10 {
        let z = smooth_field(&spec, &mut rng, 1.0);
        let lhs = a.inner(&g, &z);
        let rhs = spec.energy_derivative(&u, &z);
        assert!((lhs - rhs).abs() <= 1e-9 * (rhs.abs() + a.norm(&g) * a.norm(&z)));
    }
}
