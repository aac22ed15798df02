//! Nonlinearities, problem parameters, hypothesis checks and the energy
//! functional with its derivative and Riesz gradient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::mesh::{build_weight_field, FieldDescriptor, Label, Mesh, WeightField, WeightSpec};
use crate::operators::{
    assemble_stiffness, spectral_data, ComponentSpace, SpectralData, StiffnessOperator,
};
use crate::par;

/// Grid, weight, stiffness and the factorizations shared by every solve on
/// the same domain.
#[derive(Debug)]
pub struct Discretization {
    mesh: Mesh,
    weights: WeightField,
    stiffness: StiffnessOperator,
    full: BandedCholesky,
    spaces: [ComponentSpace; 3],
    a_plus: Vec<f64>,
    a_minus: Vec<f64>,
    labels: Vec<Label>,
}

impl Discretization {
    pub fn new(mesh: Mesh, weight: &WeightSpec) -> Result<Self> {
        let weights = build_weight_field(&mesh, weight)?;
        let stiffness = assemble_stiffness(&mesh);
        let full = stiffness.factor()?;
        let (s0, s1, s2) = par::join3(
            || {
                ComponentSpace::new(
                    &stiffness,
                    Label::Tilde,
                    weights.interior_with(&mesh, Label::Tilde),
                )
            },
            || {
                ComponentSpace::new(
                    &stiffness,
                    Label::Hat,
                    weights.interior_with(&mesh, Label::Hat),
                )
            },
            || {
                ComponentSpace::new(
                    &stiffness,
                    Label::Bar,
                    weights.interior_with(&mesh, Label::Bar),
                )
            },
        );
        let labels = mesh
            .interior_nodes()
            .iter()
            .map(|&g| weights.label(g))
            .collect();
        Ok(Self {
            a_plus: weights.a_plus(&mesh),
            a_minus: weights.a_minus(&mesh),
            spaces: [s0?, s1?, s2?],
            mesh,
            weights,
            stiffness,
            full,
            labels,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn weights(&self) -> &WeightField {
        &self.weights
    }

    pub fn stiffness(&self) -> &StiffnessOperator {
        &self.stiffness
    }

    pub fn n(&self) -> usize {
        self.mesh.interior_count()
    }

    pub fn quad(&self) -> f64 {
        self.mesh.quad_weight()
    }

    /// `a⁺` on interior nodes.
    pub fn a_plus(&self) -> &[f64] {
        &self.a_plus
    }

    /// `a⁻` on interior nodes.
    pub fn a_minus(&self) -> &[f64] {
        &self.a_minus
    }

    /// Label of each interior node.
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn space(&self, label: Label) -> &ComponentSpace {
        match label {
            Label::Tilde => &self.spaces[0],
            Label::Hat => &self.spaces[1],
            Label::Bar => &self.spaces[2],
            other => panic!("{} is not a positive component", other.name()),
        }
    }

    pub fn spaces(&self) -> &[ComponentSpace; 3] {
        &self.spaces
    }

    /// `A⁻¹ b` on all interior nodes.
    pub fn solve_full(&self, b: &[f64]) -> Vec<f64> {
        self.full.solve(b)
    }

    /// Lumped `a⁺` mass diagonal.
    pub fn a_plus_mass(&self) -> Vec<f64> {
        self.a_plus.iter().map(|a| a * self.quad()).collect()
    }

    pub fn spectral(&self, tol: f64) -> Result<SpectralData> {
        spectral_data(&self.spaces, &self.a_plus_mass(), tol)
    }

    /// `∫a⁺ u v`.
    pub fn a_plus_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let q = self.quad();
        par::sum_by(self.n(), |i| q * self.a_plus[i] * u[i] * v[i])
    }
}

/// Two-power nonlinearities `f = a₁|u|^{p₁-2}u + a₂|u|^{p₂-2}u` on `Ω⁺` and
/// `g = b₁|u|^{q₁-2}u + b₂|u|^{q₂-2}u` on `Ω⁻`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub p1: f64,
    #[serde(default)]
    pub p2: Option<f64>,
    pub q1: f64,
    #[serde(default)]
    pub q2: Option<f64>,
    pub a1: FieldDescriptor,
    #[serde(default = "zero_field")]
    pub a2: FieldDescriptor,
    pub b1: FieldDescriptor,
    #[serde(default = "zero_field")]
    pub b2: FieldDescriptor,
}

fn zero_field() -> FieldDescriptor {
    FieldDescriptor::Constant { value: 0.0 }
}

impl NonlinearitySpec {
    /// `f = a₁|u|^{p-2}u`, `g = b₁|u|^{q-2}u` with constant coefficients.
    pub fn single_power(a1: f64, p: f64, b1: f64, q: f64) -> Self {
        Self {
            p1: p,
            p2: None,
            q1: q,
            q2: None,
            a1: FieldDescriptor::Constant { value: a1 },
            a2: zero_field(),
            b1: FieldDescriptor::Constant { value: b1 },
            b2: zero_field(),
        }
    }
}

#[derive(Debug, Clone)]
struct PowerTerm {
    exponent: f64,
    coeff: Vec<f64>,
    sup: f64,
}

impl PowerTerm {
    #[inline]
    fn odd(&self, i: usize, u: f64) -> f64 {
        self.coeff[i] * u.abs().powf(self.exponent - 1.0).copysign(u)
    }

    #[inline]
    fn primitive(&self, i: usize, u: f64) -> f64 {
        self.coeff[i] * u.abs().powf(self.exponent) / self.exponent
    }

    #[inline]
    fn slope(&self, i: usize, u: f64) -> f64 {
        self.coeff[i] * (self.exponent - 1.0) * u.abs().powf(self.exponent - 2.0)
    }
}

/// Nodal nonlinearity on the interior nodes of a mesh.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    f_terms: Vec<PowerTerm>,
    g_terms: Vec<PowerTerm>,
}

impl Nonlinearity {
    pub fn new(spec: &NonlinearitySpec, mesh: &Mesh) -> Result<Self> {
        let p2 = spec.p2.unwrap_or(spec.p1);
        let q2 = spec.q2.unwrap_or(spec.q1);
        for (name, p) in [("p1", spec.p1), ("p2", p2)] {
            if !(p > 2.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {p} must lie in (2, 2*)"
                )));
            }
        }
        for (name, q) in [("q1", spec.q1), ("q2", q2)] {
            if !(q > 1.0) || !q.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {q} must lie in (1, 2*)"
                )));
            }
        }
        let term = |name: &str, exponent: f64, d: &FieldDescriptor| -> Result<Option<PowerTerm>> {
            d.validate(mesh.dimension())?;
            let coeff = d.sample_interior(mesh);
            if coeff.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "coefficient {name} must be finite and ≥ 0"
                )));
            }
            let sup = coeff.iter().fold(0.0_f64, |m, &c| m.max(c));
            Ok((sup > 0.0).then_some(PowerTerm {
                exponent,
                coeff,
                sup,
            }))
        };
        let f_terms: Vec<PowerTerm> = [term("a1", spec.p1, &spec.a1)?, term("a2", p2, &spec.a2)?]
            .into_iter()
            .flatten()
            .collect();
        let g_terms: Vec<PowerTerm> = [term("b1", spec.q1, &spec.b1)?, term("b2", q2, &spec.b2)?]
            .into_iter()
            .flatten()
            .collect();
        if f_terms.is_empty() {
            return Err(Error::InvalidParameter(
                "f vanishes identically (a1 = a2 = 0)".into(),
            ));
        }
        Ok(Self { f_terms, g_terms })
    }

    pub fn f(&self, i: usize, u: f64) -> f64 {
        self.f_terms.iter().map(|t| t.odd(i, u)).sum()
    }

    pub fn f_prime(&self, i: usize, u: f64) -> f64 {
        self.f_terms.iter().map(|t| t.slope(i, u)).sum()
    }

    pub fn big_f(&self, i: usize, u: f64) -> f64 {
        self.f_terms.iter().map(|t| t.primitive(i, u)).sum()
    }

    pub fn g(&self, i: usize, u: f64) -> f64 {
        self.g_terms.iter().map(|t| t.odd(i, u)).sum()
    }

    pub fn g_prime(&self, i: usize, u: f64) -> f64 {
        self.g_terms.iter().map(|t| t.slope(i, u)).sum()
    }

    /// `b₁(x) + b₂(x)` at interior index `i`.
    pub fn g_coefficient(&self, i: usize) -> f64 {
        self.g_terms.iter().map(|t| t.coeff[i]).sum()
    }

    pub fn big_g(&self, i: usize, u: f64) -> f64 {
        self.g_terms.iter().map(|t| t.primitive(i, u)).sum()
    }

    /// `θ`: the smallest active exponent of `f`.
    pub fn theta(&self) -> f64 {
        self.f_terms
            .iter()
            .map(|t| t.exponent)
            .fold(f64::INFINITY, f64::min)
    }

    /// `ϑ`: the smallest active exponent of `g` (infinite when `g ≡ 0`).
    pub fn vartheta(&self) -> f64 {
        self.g_terms
            .iter()
            .map(|t| t.exponent)
            .fold(f64::INFINITY, f64::min)
    }

    /// The exponent `p` in the growth bounds: the largest active exponent.
    pub fn growth_exponent(&self) -> f64 {
        self.f_terms
            .iter()
            .chain(&self.g_terms)
            .map(|t| t.exponent)
            .fold(2.0, f64::max)
    }

    /// Growth constants for the given `λ` and `Λ₁`.
    pub fn growth_constants(&self, lambda: f64, lambda_1: f64) -> GrowthConstants {
        let p = self.growth_exponent();
        let c0 = self
            .f_terms
            .iter()
            .map(|t| t.sup * (t.exponent - 1.0))
            .sum();
        let c0_prime = self.g_terms.iter().map(|t| t.sup).sum();
        // Sharp constant for Σ sup aᵢ s^{pᵢ} - ½(Λ₁-λ)s² ≤ C s^p, splitting the
        // quadratic budget evenly between the terms.
        let budget = 0.5 * (lambda_1 - lambda) / self.f_terms.len() as f64;
        let power_bound: f64 = if budget > 0.0 {
            self.f_terms
                .iter()
                .map(|t| {
                    let r = t.exponent;
                    if r >= p {
                        t.sup
                    } else {
                        let s = (budget * (p - 2.0) / (t.sup * (p - r))).powf(1.0 / (r - 2.0));
                        (t.sup * s.powf(r - p) - budget * s.powf(2.0 - p)).max(0.0)
                    }
                })
                .sum()
        } else {
            f64::INFINITY
        };
        GrowthConstants {
            p,
            theta: self.theta(),
            vartheta: self.vartheta(),
            c0,
            c0_prime,
            c1: f64::max(c0, power_bound),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub p: f64,
    pub theta: f64,
    pub vartheta: f64,
    pub c0: f64,
    pub c0_prime: f64,
    pub c1: f64,
}

/// A fully specified problem: discretization, nonlinearity, `λ` and `μ`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    disc: Arc<Discretization>,
    nl: Arc<Nonlinearity>,
    lambda: f64,
    mu: f64,
}

impl ProblemSpec {
    pub fn new(
        disc: Arc<Discretization>,
        nl: Arc<Nonlinearity>,
        lambda: f64,
        mu: f64,
    ) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} must be finite"
            )));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mu = {mu} must be finite and ≥ 0"
            )));
        }
        Ok(Self {
            disc,
            nl,
            lambda,
            mu,
        })
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.disc.clone(), self.nl.clone(), self.lambda, mu)
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn disc_arc(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn same_template(&self, other: &ProblemSpec) -> bool {
        Arc::ptr_eq(&self.disc, &other.disc)
            && Arc::ptr_eq(&self.nl, &other.nl)
            && self.lambda == other.lambda
    }

    /// Nodal load `quad·[a⁺(λu + f(u)) - μ a⁻ g(u)]` at interior index `i`.
    #[inline]
    pub fn load(&self, i: usize, u: f64) -> f64 {
        let d = &self.disc;
        let mut s = 0.0;
        let ap = d.a_plus[i];
        if ap != 0.0 {
            s += ap * (self.lambda * u + self.nl.f(i, u));
        }
        let am = d.a_minus[i];
        if am != 0.0 {
            s -= self.mu * am * self.nl.g(i, u);
        }
        d.quad() * s
    }

    /// `∂/∂u` of [`ProblemSpec::load`].
    #[inline]
    pub fn load_slope(&self, i: usize, u: f64) -> f64 {
        let d = &self.disc;
        let mut s = 0.0;
        let ap = d.a_plus[i];
        if ap != 0.0 {
            s += ap * (self.lambda + self.nl.f_prime(i, u));
        }
        let am = d.a_minus[i];
        if am != 0.0 {
            s -= self.mu * am * self.nl.g_prime(i, u);
        }
        d.quad() * s
    }

    /// Nodal potential `quad·[λ/2 a⁺u² + a⁺F(u) - μ a⁻ G(u)]` (the primitive
    /// of the load).
    #[inline]
    pub fn potential(&self, i: usize, u: f64) -> f64 {
        let d = &self.disc;
        let mut s = 0.0;
        let ap = d.a_plus[i];
        if ap != 0.0 {
            s += ap * (0.5 * self.lambda * u * u + self.nl.big_f(i, u));
        }
        let am = d.a_minus[i];
        if am != 0.0 {
            s -= self.mu * am * self.nl.big_g(i, u);
        }
        d.quad() * s
    }

    /// `I_μ(u) = ½uᵀAu - λ/2 ∫a⁺u² - ∫[a⁺F(u) - μa⁻G(u)]`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.disc.stiffness.quadratic(u) - par::sum_by(u.len(), |i| self.potential(i, u[i]))
    }

    /// `I'_μ(u)(z)`.
    pub fn energy_derivative(&self, u: &[f64], z: &[f64]) -> f64 {
        let a = self.disc.stiffness.matrix();
        par::sum_by(u.len(), |i| z[i] * (a.row_dot(i, u) - self.load(i, u[i])))
    }

    /// Nodal residual `Au - load(u)`; its pairing with `z` is `I'_μ(u)(z)`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let a = self.disc.stiffness.matrix();
        let mut r = vec![0.0; u.len()];
        par::fill(&mut r, |i| a.row_dot(i, u) - self.load(i, u[i]));
        r
    }

    /// Riesz representative `G` of `I'_μ(u)` in the Dirichlet inner product:
    /// `⟨G, z⟩_A = I'_μ(u)(z)`.
    pub fn riesz_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut load = vec![0.0; u.len()];
        par::fill(&mut load, |i| self.load(i, u[i]));
        let w = self.disc.solve_full(&load);
        u.iter().zip(w).map(|(u, w)| u - w).collect()
    }

    /// The gradient restricted to the discrete `H¹₀` of one component.
    pub fn riesz_gradient_on(&self, label: Label, u: &[f64]) -> Vec<f64> {
        let space = self.disc.space(label);
        let mut load = vec![0.0; u.len()];
        for &i in space.nodes() {
            load[i] = self.load(i, u[i]);
        }
        let w = space.solve_restricted(&load);
        let mut g = space.restrict(u);
        for &i in space.nodes() {
            g[i] -= w[i];
        }
        g
    }

    /// Factor of `A + μ·diag(quad·a⁻(b₁ + b₂))`, the Dirichlet form plus the
    /// linearized penalty.
    pub fn penalized_factor(&self) -> Result<BandedCholesky> {
        let d = &self.disc;
        let shift: Vec<f64> = (0..d.n())
            .map(|i| self.mu * d.quad() * d.a_minus[i] * self.nl.g_coefficient(i))
            .collect();
        BandedCholesky::factor(&d.stiffness.matrix().with_added_diagonal(&shift))
    }

    /// `μ∫a⁻G(x, u)`.
    pub fn penalty(&self, u: &[f64]) -> f64 {
        let d = &self.disc;
        par::sum_by(u.len(), |i| {
            let am = d.a_minus[i];
            if am == 0.0 {
                0.0
            } else {
                d.quad() * self.mu * am * self.nl.big_g(i, u[i])
            }
        })
    }
}

/// Outcome of one hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub witness: Option<Witness>,
}

/// A sampled point violating an inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Global node index (absent for the spectral condition).
    pub node: Option<usize>,
    pub u: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub outcomes: Vec<HypothesisOutcome>,
    pub constants: GrowthConstants,
    pub eigenvalues: [f64; 3],
    pub lambda_1: f64,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// Sample magnitudes for the pointwise checks: 61 log-spaced values in
/// `[10⁻³, 10³]`, taken with both signs.
pub fn hypothesis_samples() -> Vec<f64> {
    let mags = (0..61).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 60.0));
    mags.flat_map(|m| [m, -m]).collect()
}

/// Checks hypotheses (a)–(d) by dense sampling; failures become report
/// entries with a witness.
pub fn check_hypotheses(spec: &ProblemSpec, spectral: &SpectralData) -> HypothesisReport {
    let disc = spec.disc();
    let nl = spec.nonlinearity();
    let lambda_1 = spectral.lambda_1();
    let k = nl.growth_constants(spec.lambda(), lambda_1);
    let samples = hypothesis_samples();
    let globals = disc.mesh().interior_nodes();
    let pos: Vec<usize> = (0..disc.n())
        .filter(|&i| disc.labels()[i].is_positive())
        .collect();
    let neg: Vec<usize> = (0..disc.n())
        .filter(|&i| disc.labels()[i] == Label::Neg)
        .collect();
    const REL: f64 = 1e-12;

    // First violation in node order, sample order.
    let scan = |nodes: &[usize],
                test: &(dyn Fn(usize, f64) -> Option<(f64, f64)> + Sync)|
     -> Option<Witness> {
        par::map_collect(nodes.len(), |j| {
            let i = nodes[j];
            samples.iter().find_map(|&u| {
                test(i, u).map(|(lhs, rhs)| Witness {
                    node: Some(globals[i]),
                    u,
                    lhs,
                    rhs,
                })
            })
        })
        .into_iter()
        .flatten()
        .next()
    };
    let outcome = |name: &str, detail: String, witness: Option<Witness>| HypothesisOutcome {
        name: name.into(),
        passed: witness.is_none(),
        detail,
        witness,
    };

    let p = k.p;
    let a_f = scan(&pos, &|i, u| {
        let (l, r) = (nl.f_prime(i, u).abs(), k.c0 * (1.0 + u.abs().powf(p - 2.0)));
        (l > r * (1.0 + REL)).then_some((l, r))
    });
    let a_g = a_f.clone().or_else(|| {
        scan(&neg, &|i, u| {
            let (l, r) = (nl.g(i, u).abs(), k.c0_prime * (1.0 + u.abs().powf(p - 1.0)));
            (l > r * (1.0 + REL)).then_some((l, r))
        })
    });
    let b = scan(&pos, &|i, u| {
        let (tf, uf) = (k.theta * nl.big_f(i, u), u * nl.f(i, u));
        (!(tf > 0.0) || tf > uf + REL * uf.abs()).then_some((tf, uf))
    })
    .or_else(|| {
        scan(&neg, &|i, u| {
            let (tg, ug) = (k.vartheta * nl.big_g(i, u), u * nl.g(i, u));
            (!(tg > 0.0) || !tg.is_finite() || tg > ug + REL * ug.abs()).then_some((tg, ug))
        })
    });
    let c = scan(&pos, &|i, u| {
        let (q, d) = (nl.f(i, u) / u, nl.f_prime(i, u));
        (!(q < d)).then_some((q, d))
    });
    let lambda = spec.lambda();
    let d_ok = lambda >= 0.0 && lambda < lambda_1;
    let d_witness = (!d_ok).then_some(Witness {
        node: None,
        u: lambda,
        lhs: lambda,
        rhs: lambda_1,
    });
    let ev = spectral.eigenvalues();
    HypothesisReport {
        outcomes: vec![
            outcome(
                "(a)",
                format!("|f'| ≤ C0(1+|u|^(p-2)), |g| ≤ C0'(1+|u|^(p-1)) with C0 = {}, C0' = {}, p = {p}", k.c0, k.c0_prime),
                a_g,
            ),
            outcome("(b)", format!("0 < θF ≤ uf, 0 < ϑG ≤ ug with θ = {}, ϑ = {}", k.theta, k.vartheta), b),
            outcome("(c)", "f(u)/u < f'(u) on Ω⁺".into(), c),
            outcome(
                "(d)",
                if d_ok {
                    format!("0 ≤ λ = {lambda} < Λ₁ = {lambda_1}")
                } else {
                    format!(
                        "violated: need 0 ≤ λ < Λ₁ = min(λ̃₁, λ̂₁, λ̄₁) = {lambda_1} (attained on {}), got λ = {lambda}",
                        spectral.minimizing_component().name()
                    )
                },
                d_witness,
            ),
        ],
        constants: k,
        eigenvalues: ev,
        lambda_1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainSpec};

    fn f1(mu: f64) -> ProblemSpec {
        let mesh = build_mesh(&DomainSpec::interval(0.0, 5.0, 501)).unwrap();
        let w = WeightSpec::new(FieldDescriptor::Sine {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
            axis: 0,
        });
        let nl =
            Nonlinearity::new(&NonlinearitySpec::single_power(1.0, 4.0, 1.0, 2.0), &mesh).unwrap();
        let disc = Discretization::new(mesh, &w).unwrap();
        ProblemSpec::new(Arc::new(disc), Arc::new(nl), 0.0, mu).unwrap()
    }

    #[test]
    fn pure_power_values() {
        let spec = f1(0.0);
        let nl = spec.nonlinearity();
        assert_eq!(nl.f(10, 2.0), 8.0);
        assert_eq!(nl.big_f(10, 2.0), 4.0);
        assert_eq!(nl.f_prime(10, 2.0), 12.0);
        for v in [
            nl.f(3, 0.0),
            nl.big_f(3, 0.0),
            nl.f_prime(3, 0.0),
            nl.g(3, 0.0),
            nl.big_g(3, 0.0),
        ] {
            assert_eq!(v, 0.0);
        }
        for u in [-1.0, 0.5, 3.0] {
            assert!((u * nl.f(0, u) - 4.0 * nl.big_f(0, u)).abs() < 1e-12);
        }
    }

    #[test]
    fn sublinear_g_vanishes_at_zero() {
        let mesh = build_mesh(&DomainSpec::interval(0.0, 1.0, 11)).unwrap();
        let nl =
            Nonlinearity::new(&NonlinearitySpec::single_power(1.0, 3.0, 2.0, 1.5), &mesh).unwrap();
        assert_eq!(nl.g(0, 0.0), 0.0);
        assert!((nl.g(0, -4.0) + 4.0).abs() < 1e-12);
        assert!((nl.big_g(0, 4.0) - 2.0 * 8.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_quadratic_f() {
        let mesh = build_mesh(&DomainSpec::interval(0.0, 1.0, 11)).unwrap();
        assert!(
            Nonlinearity::new(&NonlinearitySpec::single_power(1.0, 2.0, 1.0, 2.0), &mesh).is_err()
        );
        assert!(
            Nonlinearity::new(&NonlinearitySpec::single_power(1.0, 4.0, 1.0, 1.0), &mesh).is_err()
        );
        assert!(
            Nonlinearity::new(&NonlinearitySpec::single_power(-1.0, 4.0, 1.0, 2.0), &mesh).is_err()
        );
    }

    #[test]
    fn growth_constant_bounds_the_power_sum() {
        let mesh = build_mesh(&DomainSpec::interval(0.0, 1.0, 11)).unwrap();
        let mut s = NonlinearitySpec::single_power(1.0, 3.0, 1.0, 2.0);
        s.p2 = Some(5.0);
        s.a2 = FieldDescriptor::Constant { value: 0.5 };
        let nl = Nonlinearity::new(&s, &mesh).unwrap();
        let (lambda, lambda_1) = (1.0, 9.0);
        let k = nl.growth_constants(lambda, lambda_1);
        assert_eq!(k.p, 5.0);
        assert_eq!(k.theta, 3.0);
        assert!((k.c0 - (2.0 + 0.5 * 4.0)).abs() < 1e-15);
        for u in hypothesis_samples() {
            let lhs = lambda * u * u + nl.f(0, u) * u;
            let rhs = 0.5 * (lambda + lambda_1) * u * u + k.c1 * u.abs().powf(k.p);
            assert!(lhs <= rhs * (1.0 + 1e-12), "u = {u}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn energy_of_zero_and_scaling() {
        let spec = f1(0.0);
        let n = spec.disc().n();
        assert_eq!(spec.energy(&vec![0.0; n]), 0.0);
        let u: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.05).sin()).collect();
        let a = spec.disc().stiffness().inner(&u, &u);
        let quartic: f64 = (0..n)
            .map(|i| spec.disc().quad() * spec.disc().a_plus()[i] * u[i].powi(4))
            .sum();
        for t in [1.0, 2.0] {
            let tu: Vec<f64> = u.iter().map(|v| t * v).collect();
            let expected = t * t * 0.5 * a - t.powi(4) * quartic / 4.0;
            assert!((spec.energy(&tu) - expected).abs() < 1e-10 * expected.abs().max(1.0));
        }
        assert!((spec.energy_derivative(&u, &u) - (a - quartic)).abs() < 1e-10 * a);
        assert_eq!(spec.energy_derivative(&vec![0.0; n], &u), 0.0);
    }

    #[test]
    fn nonlinear_term_scales_with_coefficient() {
        let mesh = build_mesh(&DomainSpec::interval(0.0, 5.0, 101)).unwrap();
        let w = WeightSpec::new(FieldDescriptor::Sine {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
            axis: 0,
        });
        let disc = Arc::new(Discretization::new(mesh.clone(), &w).unwrap());
        let make = |c: f64| {
            let nl = Nonlinearity::new(&NonlinearitySpec::single_power(c, 4.0, 1.0, 2.0), &mesh)
                .unwrap();
            ProblemSpec::new(disc.clone(), Arc::new(nl), 0.0, 0.0).unwrap()
        };
        let u: Vec<f64> = (0..disc.n()).map(|i| (i as f64 * 0.2).cos()).collect();
        let quadratic = 0.5 * disc.stiffness().inner(&u, &u);
        let n1 = quadratic - make(1.0).energy(&u);
        let n2 = quadratic - make(2.0).energy(&u);
        assert!((n2 - 2.0 * n1).abs() < 1e-12 * n1.abs());
    }

    #[test]
    fn riesz_gradient_represents_derivative() {
        let spec = f1(10.0);
        let n = spec.disc().n();
        let u: Vec<f64> = (0..n).map(|i| 2.0 * ((i as f64) * 0.013).sin()).collect();
        let z: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.031).cos()).collect();
        let g = spec.riesz_gradient(&u);
        let lhs = spec.disc().stiffness().inner(&g, &z);
        let rhs = spec.energy_derivative(&u, &z);
        assert!(
            (lhs - rhs).abs() <= 1e-8 * spec.disc().stiffness().norm(&z),
            "{lhs} vs {rhs}"
        );
        assert!(spec.riesz_gradient(&vec![0.0; n]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn f1_hypotheses_hold() {
        let spec = f1(10.0);
        let spectral = spec.disc().spectral(1e-12).unwrap();
        let report = check_hypotheses(&spec, &spectral);
        assert!(report.all_passed(), "{report:#?}");
        assert_eq!(
            report.lambda_1,
            spectral
                .eigenvalues()
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        );
    }

    #[test]
    fn lambda_at_first_eigenvalue_fails_d() {
        let spec = f1(10.0);
        let spectral = spec.disc().spectral(1e-12).unwrap();
        let at = ProblemSpec::new(
            spec.disc_arc().clone(),
            Arc::new(spec.nonlinearity().clone()),
            spectral.lambda_1(),
            10.0,
        )
        .unwrap();
        let report = check_hypotheses(&at, &spectral);
        let d = &report.outcomes[3];
        assert!(!d.passed);
        assert_eq!(d.witness.as_ref().unwrap().rhs, spectral.lambda_1());
        assert!(report.outcomes[..3].iter().all(|o| o.passed));
    }

    #[test]
    fn monotone_fiber_integrand() {
        // u · d/du (f(u)/u) > 0, the consequence of (c) behind fiber uniqueness.
        let spec = f1(0.0);
        let nl = spec.nonlinearity();
        for u in hypothesis_samples() {
            let h = 1e-6 * u.abs();
            let q = |v: f64| nl.f(50, v) / v;
            assert!(u * (q(u + h) - q(u - h)) / (2.0 * h) > 0.0);
        }
    }
}
