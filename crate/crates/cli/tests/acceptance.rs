//! Acceptance suite: ten criteria, one pass/fail line each.
//!
//! Criteria listed in `EXPECTED_FAILURES` are evaluated at full strength and
//! reported as failing; the target itself fails if any other criterion fails
//! or if a listed one starts passing.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use multibump::decomposition::decompose;
use multibump::mesh::{build_mesh, DomainSpec, FieldDescriptor, Label, WeightSpec};
use multibump::model::{Discretization, Nonlinearity, NonlinearitySpec, ProblemSpec};
use multibump::nehari::{
    build_seed, directions, fiber_energy_and_curvature, fiber_value, Fiber, FiberPoint,
};
use multibump::solver::{
    concentration_gap, minimize_with, mu_sweep_partial, prepare, solve_limit_problems,
    SolveOptions, SolveReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail on the F1 fixture, with the reason.
const EXPECTED_FAILURES: &[(usize, &str)] = &[
    (6, "u̲ is a boundary layer where a⁻ vanishes linearly; its share is mesh-converged and decays like μ^(-0.15)"),
    (7, "the ũ⁻ fiber loses its root below μ ≈ 40, so μ = 10 has no solution on the chart"),
    (8, "(𝒩vi) and (𝒩vii) fail from the same boundary layer as criterion 6"),
    (9, "the sweep stops at μ = 10, leaving no penalty sequence to compare"),
];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn f1(nodes: usize, mu: f64) -> ProblemSpec {
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

fn sine_modes(spec: &ProblemSpec, rng: &mut ChaCha8Rng, scale: f64, modes: usize) -> Vec<f64> {
    let mesh = spec.disc().mesh();
    let amps: Vec<f64> = (0..modes)
        .map(|_| rng.random_range(-1.0..1.0) * scale)
        .collect();
    mesh.interior_nodes()
        .iter()
        .map(|&g| {
            let x = mesh.coordinates(g)[0];
            amps.iter()
                .enumerate()
                .map(|(k, a)| a * (std::f64::consts::PI * (k + 1) as f64 * x / 5.0).sin())
                .sum()
        })
        .collect()
}

fn timed(budget: Option<Duration>, run: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = run();
    let elapsed = start.elapsed();
    o.detail
        .push_str(&format!("; {:.2} s", elapsed.as_secs_f64()));
    if let Some(b) = budget {
        if elapsed > b {
            o.passed = false;
            o.detail
                .push_str(&format!(" (budget {} s)", b.as_secs_f64()));
        }
    }
    o
}

/// Plateau weight: `±c` on the three positive intervals and on the two
/// negative ones, switching between adjacent nodes.
fn plateau_eigenvalue(c: f64, h: f64) -> f64 {
    let mut bp = Vec::new();
    for (lo, hi, s) in [
        (0.0, 1.0, 1.0),
        (1.0, 2.0, -1.0),
        (2.0, 3.0, 1.0),
        (3.0, 4.0, -1.0),
        (4.0, 5.0, 1.0),
    ] {
        if s > 0.0 {
            bp.push([lo + h, c]);
            bp.push([hi - h, c]);
        } else {
            bp.push([lo, -c]);
            bp.push([hi, -c]);
        }
    }
    let nodes = (5.0 / h).round() as usize + 1;
    let mesh = build_mesh(&DomainSpec::interval(0.0, 5.0, nodes)).unwrap();
    let weight = WeightSpec::new(FieldDescriptor::PiecewiseLinear {
        breakpoints: bp,
        axis: 0,
    });
    let disc = Discretization::new(mesh, &weight).unwrap();
    disc.spectral(1e-12).unwrap().eigenvalues()[0]
}

fn eigenvalues() -> Outcome {
    let h = 1.0 / 200.0;
    let pi2 = std::f64::consts::PI.powi(2);
    let l1 = plateau_eigenvalue(1.0, h);
    let rel = (l1 - pi2).abs() / pi2;
    let worst = [0.25, 3.0, 40.0]
        .iter()
        .map(|&c| (plateau_eigenvalue(c, h) * c - l1).abs() / l1)
        .fold(0.0, f64::max);
    outcome(
        rel <= 5e-3 && worst <= 1e-9,
        format!("l = {l1:.8} vs π² ({rel:.2e} rel); scaling law error {worst:.1e}"),
    )
}

fn gradient() -> Outcome {
    let spec = f1(501, 1000.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let u = sine_modes(&spec, &mut rng, 2.0, 8);
        let z = sine_modes(&spec, &mut rng, 1.0, 8);
        let eps = 1e-5;
        let shift =
            |s: f64| -> Vec<f64> { u.iter().zip(&z).map(|(u, z)| u + s * eps * z).collect() };
        let fd = (spec.energy(&shift(1.0)) - spec.energy(&shift(-1.0))) / (2.0 * eps);
        let exact = spec.energy_derivative(&u, &z);
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    outcome(
        worst <= 1e-5,
        format!("worst relative error {worst:.2e} over 20 fields"),
    )
}

fn decomposition() -> Outcome {
    let spec = f1(501, 1000.0);
    let disc = spec.disc();
    let a = disc.stiffness();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rec, mut orth, mut harm) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..10 {
        let u = sine_modes(&spec, &mut rng, 2.0, 12);
        let d = decompose(disc, &u);
        let sum: Vec<f64> = (0..u.len())
            .map(|i| d.tilde[i] + d.hat[i] + d.bar[i] + d.low[i] - u[i])
            .collect();
        rec = rec.max(a.norm(&sum) / a.norm(&u));
        let parts = [&d.tilde, &d.hat, &d.bar, &d.low];
        for i in 0..4 {
            for j in i + 1..4 {
                let scale = a.norm(parts[i]) * a.norm(parts[j]);
                if scale > 0.0 {
                    orth = orth.max(a.inner(parts[i], parts[j]).abs() / scale);
                }
            }
        }
        let al = a.apply(&d.low);
        let reference = al.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let on_plus = disc
            .labels()
            .iter()
            .zip(&al)
            .filter(|(l, _)| l.is_positive())
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
        harm = harm.max(on_plus / reference);
    }
    outcome(
        rec <= 1e-10 && orth <= 1e-10 && harm <= 1e-8,
        format!("reconstruction {rec:.1e}, orthogonality {orth:.1e}, harmonicity {harm:.1e}"),
    )
}

fn fibers() -> Outcome {
    let spec = f1(501, 1000.0);
    let disc = spec.disc();
    let a = disc.stiffness();
    let seed = build_seed(&spec, 1e-10).unwrap();
    let zero = vec![0.0; disc.n()];
    let mut closed = 0.0_f64;
    for w in directions(&seed) {
        let quartic: f64 = (0..w.len())
            .map(|i| disc.quad() * disc.a_plus()[i] * w[i].powi(4))
            .sum();
        let exact = (a.inner(&w, &w) / quartic).sqrt();
        let t = Fiber::new(&spec, &w, &zero).solve(0.3, 1e-13).unwrap();
        closed = closed.max((t - exact).abs() / exact);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid: Vec<f64> = (0..=600)
        .map(|k| 10f64.powf(-3.0 + k as f64 / 100.0))
        .collect();
    let (mut agree, mut single) = (0.0_f64, 0);
    let mut sampled = 0;
    while sampled < 20 {
        let field = decompose(disc, &sine_modes(&spec, &mut rng, 2.0, 4));
        let dirs = directions(&field);
        let k = rng.random_range(0..3);
        let norm = a.norm(&dirs[k]);
        if norm < 1e-3 {
            continue;
        }
        let rest: Vec<f64> = field.u.iter().zip(&dirs[k]).map(|(u, w)| u - w).collect();
        let rest_norm = a.norm(&rest).max(1e-300);
        let w: Vec<f64> = dirs[k].iter().map(|v| v / norm).collect();
        let ubar: Vec<f64> = rest.iter().map(|r| 0.05 * r / rest_norm).collect();
        let fiber = Fiber::new(&spec, &w, &ubar);
        let newton = fiber.solve(rng.random_range(0.1..10.0), 1e-12).unwrap();
        let bisection = fiber.solve_bisection().unwrap();
        agree = agree.max((newton - bisection).abs() / bisection);
        let values: Vec<f64> = grid
            .iter()
            .map(|&t| fiber_value(&spec, &w, &ubar, t))
            .collect();
        if values
            .windows(2)
            .filter(|p| (p[0] > 0.0) != (p[1] > 0.0))
            .count()
            == 1
        {
            single += 1;
        }
        sampled += 1;
    }
    outcome(
        closed <= 1e-10 && agree <= 1e-10 && single == 20,
        format!("closed form {closed:.1e}, bisection/Newton {agree:.1e}, single sign change {single}/20"),
    )
}

fn fiber_maximum(spec: &ProblemSpec, reports: &[&SolveReport]) -> Outcome {
    let mut worst_curv = f64::NEG_INFINITY;
    let mut dominated = 0;
    let mut total = 0;
    for r in reports.iter().filter(|r| r.converged) {
        let s = spec.with_mu(r.mu).unwrap();
        let field = decompose(s.disc(), &r.solution);
        let (h0, curv) = fiber_energy_and_curvature(&s, &field, FiberPoint::ONE);
        worst_curv = curv.iter().fold(worst_curv, |m, &c| m.max(c));
        for dr in [-1.0, 0.0, 1.0] {
            for ds in [-1.0, 0.0, 1.0] {
                for dt in [-1.0, 0.0, 1.0] {
                    if dr == 0.0 && ds == 0.0 && dt == 0.0 {
                        continue;
                    }
                    let p = FiberPoint {
                        r: 1.0 + 0.05 * dr,
                        s: 1.0 + 0.05 * ds,
                        t: 1.0 + 0.05 * dt,
                    };
                    total += 1;
                    if fiber_energy_and_curvature(&s, &field, p).0 < h0 {
                        dominated += 1;
                    }
                }
            }
        }
    }
    outcome(
        total > 0 && worst_curv < 0.0 && dominated == total,
        format!(
            "{} solutions, largest ∂²h/∂ν² {worst_curv:.3e}, h(1,1,1) above {dominated}/{total} neighbours",
            total / 26
        ),
    )
}

fn structure(spec: &ProblemSpec, r: &SolveReport) -> Outcome {
    let labels = spec.disc().labels();
    let on = |l: Label| {
        r.solution
            .iter()
            .zip(labels)
            .filter(move |(_, &x)| x == l)
            .map(|(&u, _)| u)
    };
    let min_t = on(Label::Tilde).fold(f64::INFINITY, f64::min);
    let max_t = on(Label::Tilde).fold(f64::NEG_INFINITY, f64::max);
    let min_h = on(Label::Hat).fold(f64::INFINITY, f64::min);
    let off = r.norms.off_support() / r.norms.total;
    outcome(
        r.converged && r.grad_norm <= 1e-6 && min_t < 0.0 && max_t > 0.0 && min_h > 0.0 && off <= 1e-2,
        format!(
            "converged {} (gradient {:.2e}), Ω̃ range [{min_t:.3}, {max_t:.3}], min on Ω̂ {min_h:.3}, \
             off-support {off:.3e} of total",
            r.converged, r.grad_norm
        ),
    )
}

fn membership(r: &SolveReport) -> Outcome {
    let failed: Vec<&str> = r
        .membership
        .conditions
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let residual = r
        .membership
        .nehari_residuals
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    outcome(
        failed.is_empty() && residual <= 1e-8,
        format!("failed {failed:?}, largest Nehari residual {residual:.1e}"),
    )
}

fn concentration(spec: &ProblemSpec, opts: &SolveOptions) -> (Outcome, Outcome) {
    let mus = [10.0, 100.0, 1000.0];
    let (reports, err) = mu_sweep_partial(spec, &mus, opts);
    let limit = solve_limit_problems(spec, opts).unwrap();
    let rows = concentration_gap(spec, &reports, &limit).unwrap();
    let complete = err.is_none() && rows.len() == mus.len();
    let gaps: Vec<f64> = rows.iter().map(|r| r.energy_gap).collect();
    let off: Vec<f64> = rows.iter().map(|r| r.off_support).collect();
    let pen: Vec<f64> = rows.iter().map(|r| r.penalty_low).collect();
    let trend = complete
        && gaps.windows(2).all(|w| w[1] < w[0])
        && off.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let note = err.map(|e| format!("; {e}")).unwrap_or_default();
    (
        outcome(
            trend,
            format!(
                "{} of 3 solves, gaps {gaps:.4?}, off-support {off:.4?}{note}",
                rows.len()
            ),
        ),
        outcome(
            complete && pen.windows(2).all(|w| w[1] < w[0]),
            format!("{} of 3 solves, μ∫a⁻G(u̲) {pen:.4?}", rows.len()),
        ),
    )
}

fn determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/f1.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_multibump"))
            .args([
                "solve",
                config.to_str().unwrap(),
                "--mu",
                "1000",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap()
            .status;
        let csv = std::fs::read(out.join("solution.csv")).unwrap_or_default();
        let json = std::fs::read(out.join("report.json")).unwrap_or_default();
        (status.success(), csv, json)
    };
    let (ok1, csv1, json1) = run("first");
    let (ok2, csv2, json2) = run("second");
    let same = csv1 == csv2 && json1 == json2 && !csv1.is_empty() && !json1.is_empty();
    outcome(
        ok1 && ok2 && same,
        format!(
            "exit ok {ok1}/{ok2}, identical bytes {same} ({} + {} bytes)",
            csv1.len(),
            json1.len()
        ),
    )
}

fn main() {
    let opts = SolveOptions::default();
    let spec = f1(501, 1000.0);
    let setup = prepare(&spec, &opts).unwrap();

    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (
            1,
            "eigenvalues",
            timed(Some(Duration::from_secs(1)), eigenvalues),
        ),
        (
            2,
            "gradient consistency",
            timed(Some(Duration::from_secs(5)), gradient),
        ),
        (
            3,
            "decomposition invariants",
            timed(Some(Duration::from_secs(5)), decomposition),
        ),
        (4, "fiber correctness", timed(None, fibers)),
    ];

    let start = Instant::now();
    let solved = minimize_with(&spec, &setup.seed, &setup.constants, &opts);
    let solve_time = start.elapsed();
    let other = minimize_with(
        &spec.with_mu(100.0).unwrap(),
        &setup.seed,
        &setup.constants,
        &opts,
    );
    match &solved {
        Ok(r) => {
            let converged: Vec<&SolveReport> = [Some(r), other.as_ref().ok()]
                .into_iter()
                .flatten()
                .collect();
            results.push((
                5,
                "fiber maximum",
                timed(None, || fiber_maximum(&spec, &converged)),
            ));
            let mut s = structure(&spec, r);
            s.detail
                .push_str(&format!("; {:.2} s", solve_time.as_secs_f64()));
            if solve_time > Duration::from_secs(30) {
                s.passed = false;
            }
            results.push((6, "solution structure", s));
        }
        Err(e) => {
            results.push((
                5,
                "fiber maximum",
                outcome(false, format!("μ = 1000 solve failed: {e}")),
            ));
            results.push((
                6,
                "solution structure",
                outcome(false, format!("μ = 1000 solve failed: {e}")),
            ));
        }
    }
    let start = Instant::now();
    let (trend, penalty) = concentration(&spec, &opts);
    let mut trend = trend;
    trend
        .detail
        .push_str(&format!("; {:.2} s", start.elapsed().as_secs_f64()));
    if start.elapsed() > Duration::from_secs(120) {
        trend.passed = false;
    }
    results.push((7, "concentration trend", trend));
    results.push((
        8,
        "membership",
        match &solved {
            Ok(r) => membership(r),
            Err(e) => outcome(false, format!("μ = 1000 solve failed: {e}")),
        },
    ));
    results.push((9, "penalty decay", penalty));
    results.push((10, "determinism", timed(None, determinism)));

    let mut surprises = Vec::new();
    for (n, name, o) in &results {
        let expected = EXPECTED_FAILURES.iter().find(|(k, _)| k == n);
        let mark = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {mark}  {name}: {}", o.detail);
        match (o.passed, expected) {
            (false, Some((_, why))) => println!("             expected failure: {why}"),
            (false, None) => surprises.push(format!("criterion {n} failed")),
            (true, Some(_)) => {
                surprises.push(format!("criterion {n} passed but is listed as failing"))
            }
            (true, None) => {}
        }
    }
    let passed = results.iter().filter(|(_, _, o)| o.passed).count();
    println!("{passed}/{} criteria pass", results.len());
    if !surprises.is_empty() {
        eprintln!("unexpected: {}", surprises.join("; "));
        std::process::exit(1);
    }
}
