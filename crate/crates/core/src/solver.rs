//! Projected gradient descent on the constraint set, μ-sweeps, the two limit
//! problems and the concentration diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose, ComponentNorms, DecomposedField, WeightedNorms};
use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::mesh::Label;
use crate::model::ProblemSpec;
use crate::nehari::{
    build_seed, check_membership, fiber_energy_and_curvature, project_on_chart, project_to_nehari,
    randomized_seed, Chart, FiberPoint, MembershipReport, NehariConstants, PART_NAMES,
};
use crate::operators::SpectralData;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iterations: usize,
    pub tol_grad: f64,
    pub tol_fiber: f64,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
    /// Smallest admissible A-norm of `ũ⁺`, `ũ⁻`, `û⁺`.
    pub signed_part_floor: f64,
    pub rng_seed: u64,
    pub metric: Metric,
}

/// Inner product in which the descent direction is the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `∫∇u·∇v`.
    Dirichlet,
    /// `∫∇u·∇v + μ∫a⁻(b₁ + b₂)uv`.
    Penalized,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tol_grad: 1e-6,
            tol_fiber: 1e-8,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 40,
            initial_step: 1.0,
            signed_part_floor: 1e-6,
            rng_seed: 0,
            metric: Metric::Penalized,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_grad", self.tol_grad),
            ("tol_fiber", self.tol_fiber),
            ("armijo_slope", self.armijo_slope),
            ("initial_step", self.initial_step),
            ("signed_part_floor", self.signed_part_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "solver.{name} = {v} must be positive"
                )));
            }
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "solver.backtrack_factor = {} must lie in (0, 1)",
                self.backtrack_factor
            )));
        }
        if self.max_iterations == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidParameter(
                "solver iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one minimization over the constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mu: f64,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub norms: ComponentNorms,
    pub weighted_norms: WeightedNorms,
    /// `μ∫a⁻G(x, u̲)`.
    pub penalty_low: f64,
    /// `μ∫a⁻G(x, u)`.
    pub penalty: f64,
    pub curvature: [f64; 3],
    /// Interval around 1 in each scaling where the second derivative of
    /// the fiber energy stays negative (others held at 1).
    pub concavity_window: [[f64; 2]; 3],
    /// Observed minimum of `(∫a⁺w²)^{1/2}` over the signed parts, across all
    /// accepted iterates.
    pub kappa_2_empirical: f64,
    /// `(1 - 2/θ)(1 - Λ̃)‖ũ + û + ū_b‖²`, to compare with `energy`.
    pub coercivity_lhs: f64,
    pub constants: NehariConstants,
    pub membership: MembershipReport,
    pub energy_trace: Vec<f64>,
    pub grad_trace: Vec<f64>,
    /// Interior nodal values.
    pub solution: Vec<f64>,
}

/// Outcome of a descent on one chart.
#[derive(Debug, Clone)]
pub struct Descent {
    pub field: DecomposedField,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
    pub grad_trace: Vec<f64>,
    pub kappa_2: f64,
}

struct Engine<'a> {
    spec: &'a ProblemSpec,
    chart: Chart,
    opts: &'a SolveOptions,
    metric: Option<BandedCholesky>,
}

impl<'a> Engine<'a> {
    fn new(spec: &'a ProblemSpec, chart: Chart, opts: &'a SolveOptions) -> Result<Self> {
        let metric = match (chart, opts.metric) {
            (Chart::Multibump, Metric::Penalized) if spec.mu() > 0.0 => {
                Some(spec.penalized_factor()?)
            }
            _ => None,
        };
        Ok(Self {
            spec,
            chart,
            opts,
            metric,
        })
    }

    fn component(&self) -> Option<Label> {
        match self.chart {
            Chart::Multibump => None,
            Chart::NodalTilde => Some(Label::Tilde),
            Chart::PositiveHat => Some(Label::Hat),
        }
    }

    /// Nodal residual `Au - load(u)`, restricted to the chart's space.
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let r = self.spec.residual(u);
        match self.component() {
            None => r,
            Some(l) => self.spec.disc().space(l).restrict(&r),
        }
    }

    /// Riesz gradient of the residual in the Dirichlet inner product.
    fn riesz(&self, r: &[f64]) -> Vec<f64> {
        match self.component() {
            None => self.spec.disc().solve_full(r),
            Some(l) => self.spec.disc().space(l).solve_restricted(r),
        }
    }

    /// Descent direction: the gradient in the metric of the chart.
    fn direction(&self, r: &[f64], riesz: &[f64]) -> Vec<f64> {
        match &self.metric {
            Some(b) => b.solve(r),
            None => riesz.to_vec(),
        }
    }

    fn lift(&self, y: &[f64]) -> DecomposedField {
        let disc = self.spec.disc();
        match self.chart {
            Chart::Multibump => decompose(disc, y),
            Chart::NodalTilde => DecomposedField::on_component(disc, Label::Tilde, y),
            Chart::PositiveHat => {
                DecomposedField::on_component(disc, Label::Hat, y).without_hat_neg()
            }
        }
    }

    fn project(&self, field: &DecomposedField) -> Result<DecomposedField> {
        let (moved, _) = project_on_chart(self.spec, self.chart, field, self.opts.tol_fiber)?;
        let a = self.spec.disc().stiffness();
        let parts = [&moved.tilde_pos, &moved.tilde_neg, &moved.hat_pos];
        for &k in self.chart.active() {
            let norm = a.norm(parts[k]);
            if norm < self.opts.signed_part_floor {
                return Err(Error::DegenerateComponent {
                    part: PART_NAMES[k],
                    norm,
                });
            }
        }
        Ok(moved)
    }

    fn weighted_floor(&self, field: &DecomposedField) -> f64 {
        let d = self.spec.disc();
        let parts = [&field.tilde_pos, &field.tilde_neg, &field.hat_pos];
        self.chart
            .active()
            .iter()
            .map(|&k| d.a_plus_inner(parts[k], parts[k]).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    fn run(&self, start: &DecomposedField) -> Result<Descent> {
        let opts = self.opts;
        let a = self.spec.disc().stiffness();
        let mut field = self.project(start)?;
        let mut energy = self.spec.energy(&field.u);
        let mut res = self.residual(&field.u);
        let mut riesz = self.riesz(&res);
        let mut dir = self.direction(&res, &riesz);
        let mut gnorm = a.norm(&riesz);
        let mut energy_trace = vec![energy];
        let mut grad_trace = vec![gnorm];
        let mut kappa_2 = self.weighted_floor(&field);
        let mut alpha = opts.initial_step;
        let mut iterations = 0;
        while gnorm > opts.tol_grad {
            if iterations == opts.max_iterations {
                return Ok(Descent {
                    field,
                    energy,
                    grad_norm: gnorm,
                    iterations,
                    converged: false,
                    energy_trace,
                    grad_trace,
                    kappa_2,
                });
            }
            let slope = par::dot(&res, &dir);
            let mut step = alpha;
            let mut accepted = None;
            let mut last_degenerate = None;
            for _ in 0..=opts.max_backtracks {
                let y: Vec<f64> = field
                    .u
                    .iter()
                    .zip(&dir)
                    .map(|(u, d)| u - step * d)
                    .collect();
                match self.project(&self.lift(&y)) {
                    Ok(trial) => {
                        last_degenerate = None;
                        let e = self.spec.energy(&trial.u);
                        if e <= energy - opts.armijo_slope * step * slope {
                            accepted = Some((trial, e, None));
                            break;
                        }
                        // Near the tolerance the predicted decrease falls below
                        // the rounding level of the energy; accept a step that
                        // does not raise the energy and shrinks the gradient.
                        if e <= energy && energy - e <= 1e-13 * energy.abs().max(1.0) {
                            let r = self.residual(&trial.u);
                            let g = self.riesz(&r);
                            if a.norm(&g) < gnorm {
                                accepted = Some((trial, e, Some((r, g))));
                                break;
                            }
                        }
                    }
                    Err(err @ (Error::DegenerateComponent { .. } | Error::NoFiberRoot { .. })) => {
                        last_degenerate = Some(err);
                    }
                    Err(err) => {
                        return Err(Error::Descent {
                            iteration: iterations,
                            energy_trace,
                            source: Box::new(err),
                        })
                    }
                }
                step *= opts.backtrack_factor;
            }
            let Some((trial, e, cached)) = accepted else {
                if let Some(err) = last_degenerate {
                    return Err(Error::Descent {
                        iteration: iterations,
                        energy_trace,
                        source: Box::new(err),
                    });
                }
                return Err(Error::Stagnation {
                    iteration: iterations,
                    grad_norm: gnorm,
                    energy_trace,
                });
            };
            let (new_res, new_riesz) = cached.unwrap_or_else(|| {
                let r = self.residual(&trial.u);
                let g = self.riesz(&r);
                (r, g)
            });
            let new_dir = self.direction(&new_res, &new_riesz);
            // Barzilai–Borwein step in the metric: ⟨s, s⟩_B / ⟨s, Δr⟩.
            let s: Vec<f64> = trial.u.iter().zip(&field.u).map(|(x, y)| x - y).collect();
            let dr: Vec<f64> = new_res.iter().zip(&res).map(|(x, y)| x - y).collect();
            let sy = par::dot(&s, &dr);
            let ss = self.metric_norm2(&s);
            alpha = if sy > 0.0 && ss > 0.0 {
                (ss / sy).clamp(1e-8, 1e4)
            } else {
                (2.0 * step).min(1e4)
            };
            field = trial;
            energy = e;
            res = new_res;
            riesz = new_riesz;
            dir = new_dir;
            gnorm = a.norm(&riesz);
            kappa_2 = kappa_2.min(self.weighted_floor(&field));
            energy_trace.push(energy);
            grad_trace.push(gnorm);
            iterations += 1;
        }
        Ok(Descent {
            field,
            energy,
            grad_norm: gnorm,
            iterations,
            converged: true,
            energy_trace,
            grad_trace,
            kappa_2,
        })
    }

    /// `⟨s, s⟩` in the descent metric.
    fn metric_norm2(&self, s: &[f64]) -> f64 {
        let a = self.spec.disc().stiffness();
        let base = a.quadratic(s);
        if self.metric.is_none() {
            return base;
        }
        let d = self.spec.disc();
        let nl = self.spec.nonlinearity();
        base + par::sum_by(s.len(), |i| {
            self.spec.mu() * d.quad() * d.a_minus()[i] * nl.g_coefficient(i) * s[i] * s[i]
        })
    }
}

/// Descends on `chart` from `start`.
pub fn descend(
    spec: &ProblemSpec,
    chart: Chart,
    start: &DecomposedField,
    opts: &SolveOptions,
) -> Result<Descent> {
    opts.validate()?;
    Engine::new(spec, chart, opts)?.run(start)
}

/// Spectral data, canonical seed and constants shared by every solve on one
/// template.
#[derive(Debug, Clone)]
pub struct Setup {
    pub spectral: SpectralData,
    pub seed: DecomposedField,
    pub constants: NehariConstants,
}

pub fn prepare(spec: &ProblemSpec, opts: &SolveOptions) -> Result<Setup> {
    opts.validate()?;
    let spectral = spec.disc().spectral(1e-12)?;
    let seed = build_seed(spec, opts.tol_fiber)?;
    let constants = NehariConstants::compute(spec, &spectral, spec.energy(&seed.u))?;
    Ok(Setup {
        spectral,
        seed,
        constants,
    })
}

/// Minimizes `I_μ` over the constraint set starting from `seed`.
pub fn minimize(
    spec: &ProblemSpec,
    seed: &DecomposedField,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let setup = prepare(spec, opts)?;
    minimize_with(spec, seed, &setup.constants, opts)
}

/// [`minimize`] with precomputed constants.
pub fn minimize_with(
    spec: &ProblemSpec,
    seed: &DecomposedField,
    constants: &NehariConstants,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let (descent, restarts) = match descend(spec, Chart::Multibump, seed, opts) {
        Err(e) if e.is_degenerate() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
            let fresh = randomized_seed(spec, &mut rng, opts.tol_fiber)?;
            (descend(spec, Chart::Multibump, &fresh, opts)?, 1)
        }
        other => (other?, 0),
    };
    Ok(report(spec, constants, opts, descent, restarts))
}

fn report(
    spec: &ProblemSpec,
    constants: &NehariConstants,
    opts: &SolveOptions,
    d: Descent,
    restarts: usize,
) -> SolveReport {
    let disc = spec.disc();
    let field = &d.field;
    let (_, curvature) = fiber_energy_and_curvature(spec, field, FiberPoint::ONE);
    let big: Vec<f64> = (0..field.u.len())
        .map(|i| field.tilde[i] + field.hat[i] + field.bar[i])
        .collect();
    let coercivity_lhs = (1.0 - 2.0 / constants.theta)
        * (1.0 - constants.lambda_tilde)
        * disc.stiffness().inner(&big, &big);
    SolveReport {
        mu: spec.mu(),
        lambda: spec.lambda(),
        converged: d.converged,
        iterations: d.iterations,
        restarts,
        energy: d.energy,
        grad_norm: d.grad_norm,
        norms: field.norms(disc),
        weighted_norms: field.weighted_norms(disc),
        penalty_low: spec.penalty(&field.low),
        penalty: spec.penalty(&field.u),
        curvature,
        concavity_window: concavity_window(spec, field),
        kappa_2_empirical: d.kappa_2,
        coercivity_lhs,
        constants: *constants,
        membership: check_membership(spec, constants, field, opts.tol_fiber),
        energy_trace: d.energy_trace,
        grad_trace: d.grad_trace,
        solution: field.u.clone(),
    }
}

/// For each scaling, the largest interval `[lo, hi] ∋ 1` on a log grid over
/// `[10⁻², 10²]` where its second derivative is negative.
pub fn concavity_window(spec: &ProblemSpec, field: &DecomposedField) -> [[f64; 2]; 3] {
    let grid: Vec<f64> = (0..=80)
        .map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 80.0))
        .collect();
    let one = 40;
    std::array::from_fn(|k| {
        let curv = |nu: f64| {
            let mut p = [1.0; 3];
            p[k] = nu;
            fiber_energy_and_curvature(
                spec,
                field,
                FiberPoint {
                    r: p[0],
                    s: p[1],
                    t: p[2],
                },
            )
            .1[k]
        };
        if !(curv(1.0) < 0.0) {
            return [f64::NAN, f64::NAN];
        }
        let mut lo = one;
        while lo > 0 && curv(grid[lo - 1]) < 0.0 {
            lo -= 1;
        }
        let mut hi = one;
        while hi < grid.len() - 1 && curv(grid[hi + 1]) < 0.0 {
            hi += 1;
        }
        [grid[lo], grid[hi]]
    })
}

/// Solves for each `μ` in ascending order, warm-starting from the previous
/// solution. Returns the reports gathered before the first failure, if any.
pub fn mu_sweep_partial(
    template: &ProblemSpec,
    mus: &[f64],
    opts: &SolveOptions,
) -> (Vec<SolveReport>, Option<Error>) {
    if mus.is_empty() {
        return (
            Vec::new(),
            Some(Error::InvalidParameter("μ list is empty".into())),
        );
    }
    if mus.windows(2).any(|w| !(w[0] < w[1])) {
        return (
            Vec::new(),
            Some(Error::InvalidParameter("μ list not ascending".into())),
        );
    }
    let setup = match prepare(template, opts) {
        Ok(s) => s,
        Err(e) => return (Vec::new(), Some(e)),
    };
    let mut reports: Vec<SolveReport> = Vec::with_capacity(mus.len());
    for (index, &mu) in mus.iter().enumerate() {
        let run = || -> Result<SolveReport> {
            let spec = template.with_mu(mu)?;
            let start = match reports.last() {
                Some(prev) => {
                    let warm = decompose(spec.disc(), &prev.solution);
                    match project_to_nehari(&spec, &warm, opts.tol_fiber) {
                        Ok((moved, _)) => moved,
                        Err(e) if e.is_degenerate() => setup.seed.clone(),
                        Err(e) => return Err(e),
                    }
                }
                None => setup.seed.clone(),
            };
            minimize_with(&spec, &start, &setup.constants, opts)
        };
        match run() {
            Ok(r) => reports.push(r),
            Err(e) => {
                return (
                    reports,
                    Some(Error::Sweep {
                        index,
                        mu,
                        source: Box::new(e),
                    }),
                )
            }
        }
    }
    (reports, None)
}

pub fn mu_sweep(
    template: &ProblemSpec,
    mus: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SolveReport>> {
    match mu_sweep_partial(template, mus, opts) {
        (reports, None) => Ok(reports),
        (_, Some(e)) => Err(e),
    }
}

/// One limit solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSolution {
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub norms: ComponentNorms,
    pub energy_trace: Vec<f64>,
    pub solution: Vec<f64>,
}

impl LimitSolution {
    fn from_descent(spec: &ProblemSpec, d: Descent) -> Self {
        Self {
            energy: d.energy,
            grad_norm: d.grad_norm,
            iterations: d.iterations,
            converged: d.converged,
            norms: d.field.norms(spec.disc()),
            energy_trace: d.energy_trace,
            solution: d.field.u,
        }
    }
}

/// Least-energy nodal solution on `Ω̃` and positive solution on `Ω̂` of the
/// `μ`-free problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    pub lambda: f64,
    pub nodal: LimitSolution,
    pub positive: LimitSolution,
}

impl LimitResult {
    /// `I₀(nodal on Ω̃) + I₀(positive on Ω̂)`.
    pub fn combined_energy(&self) -> f64 {
        self.nodal.energy + self.positive.energy
    }
}

pub fn solve_limit_problems(spec: &ProblemSpec, opts: &SolveOptions) -> Result<LimitResult> {
    opts.validate()?;
    let spec0 = spec.with_mu(0.0)?;
    let seed = build_seed(&spec0, opts.tol_fiber)?;
    let disc = spec0.disc();
    let nodal_start = DecomposedField::on_component(disc, Label::Tilde, &seed.u);
    let positive_start = DecomposedField::on_component(disc, Label::Hat, &seed.u).without_hat_neg();
    let (nodal, positive) = par::join(
        || descend(&spec0, Chart::NodalTilde, &nodal_start, opts),
        || descend(&spec0, Chart::PositiveHat, &positive_start, opts),
    );
    Ok(LimitResult {
        lambda: spec.lambda(),
        nodal: LimitSolution::from_descent(&spec0, nodal?),
        positive: LimitSolution::from_descent(&spec0, positive?),
    })
}

/// Concentration diagnostics for one `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub mu: f64,
    /// `|I_μ(u_μ) - (I₀(nodal) + I₀(positive))|`.
    pub energy_gap: f64,
    /// A-norm of `u_μ` restricted to the nodes of `Ω̄ ∪ Ω⁻`.
    pub outside_mass: f64,
    /// `sqrt(‖û⁻‖² + ‖ū_b‖² + ‖u̲‖²)`.
    pub off_support: f64,
    /// `min_± ‖u_μ - (±nodal + positive)‖`.
    pub distance: f64,
    pub penalty_low: f64,
}

pub fn concentration_gap(
    spec: &ProblemSpec,
    reports: &[SolveReport],
    limit: &LimitResult,
) -> Result<Vec<GapRow>> {
    let disc = spec.disc();
    let a = disc.stiffness();
    let n = disc.n();
    let consistent = limit.nodal.solution.len() == n
        && limit.positive.solution.len() == n
        && limit.lambda == spec.lambda()
        && reports
            .iter()
            .all(|r| r.solution.len() == n && r.lambda == spec.lambda());
    if !consistent {
        return Err(Error::InvalidParameter("mismatched spec templates".into()));
    }
    let outside: Vec<bool> = disc
        .labels()
        .iter()
        .map(|l| matches!(l, Label::Bar | Label::Neg))
        .collect();
    let combined = limit.combined_energy();
    Ok(reports
        .iter()
        .map(|r| {
            let u = &r.solution;
            let masked: Vec<f64> = (0..n)
                .map(|i| if outside[i] { u[i] } else { 0.0 })
                .collect();
            let dist = |sign: f64| {
                let d: Vec<f64> = (0..n)
                    .map(|i| u[i] - sign * limit.nodal.solution[i] - limit.positive.solution[i])
                    .collect();
                a.norm(&d)
            };
            GapRow {
                mu: r.mu,
                energy_gap: (r.energy - combined).abs(),
                outside_mass: a.norm(&masked),
                off_support: r.norms.off_support(),
                distance: dist(1.0).min(dist(-1.0)),
                penalty_low: r.penalty_low,
            }
        })
        .collect())
}
