//! Fiber maps, the scalar Nehari equations, the seed function, the
//! structural constants and the membership conditions of the constraint set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::DecomposedField;
use crate::error::{Error, Result};
use crate::mesh::Label;
use crate::model::ProblemSpec;
use crate::operators::{estimate_sobolev_constant, SpectralData};
use crate::par;

/// The scalings `(r̃, s̃, t̂)` of `ũ⁺`, `ũ⁻`, `û⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl FiberPoint {
    pub const ONE: FiberPoint = FiberPoint {
        r: 1.0,
        s: 1.0,
        t: 1.0,
    };

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.s, self.t]
    }
}

/// Which scalings a chart moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// `r̃ ũ⁺ - s̃ ũ⁻ + t̂ û⁺ + rest` on the whole domain.
    Multibump,
    /// `r̃ ũ⁺ - s̃ ũ⁻` on `Ω̃` alone.
    NodalTilde,
    /// `t̂ û⁺` on `Ω̂` alone.
    PositiveHat,
}

impl Chart {
    pub fn active(self) -> &'static [usize] {
        match self {
            Chart::Multibump => &[0, 1, 2],
            Chart::NodalTilde => &[0, 1],
            Chart::PositiveHat => &[2],
        }
    }
}

pub const PART_NAMES: [&str; 3] = ["tilde_pos", "tilde_neg", "hat_pos"];

/// Signed fiber directions `ũ⁺`, `-ũ⁻`, `û⁺`.
pub fn directions(field: &DecomposedField) -> [Vec<f64>; 3] {
    [
        field.tilde_pos.clone(),
        field.tilde_neg.iter().map(|v| -v).collect(),
        field.hat_pos.clone(),
    ]
}

/// The slice `τ ↦ I'(τw + other)(w)` restricted to the support of `w`.
#[derive(Debug, Clone)]
pub struct Fiber<'a> {
    spec: &'a ProblemSpec,
    idx: Vec<usize>,
    w: Vec<f64>,
    other: Vec<f64>,
    norm2: f64,
    offset: f64,
}

impl<'a> Fiber<'a> {
    /// `offset` is `⟨other, w⟩_A`; `other` is only read on the support of `w`.
    pub fn with_offset(
        spec: &'a ProblemSpec,
        w: &[f64],
        other: &[f64],
        norm2: f64,
        offset: f64,
    ) -> Self {
        let idx: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
        Self {
            spec,
            w: idx.iter().map(|&i| w[i]).collect(),
            other: idx.iter().map(|&i| other[i]).collect(),
            idx,
            norm2,
            offset,
        }
    }

    pub fn new(spec: &'a ProblemSpec, w: &[f64], other: &[f64]) -> Self {
        let a = spec.disc().stiffness();
        Self::with_offset(spec, w, other, a.inner(w, w), a.inner(other, w))
    }

    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    pub fn is_degenerate(&self) -> bool {
        self.idx.is_empty()
    }

    /// `φ(τ) = τ‖w‖² + ⟨other, w⟩_A - Σ load(τw + other)·w`.
    pub fn value(&self, tau: f64) -> f64 {
        let load = par::sum_by(self.idx.len(), |k| {
            self.spec.load(self.idx[k], tau * self.w[k] + self.other[k]) * self.w[k]
        });
        tau * self.norm2 + self.offset - load
    }

    /// `φ'(τ) = ‖w‖² - Σ ∂load(τw + other)·w²`.
    pub fn slope(&self, tau: f64) -> f64 {
        let s = par::sum_by(self.idx.len(), |k| {
            self.spec
                .load_slope(self.idx[k], tau * self.w[k] + self.other[k])
                * self.w[k]
                * self.w[k]
        });
        self.norm2 - s
    }

    fn bracket(&self, hint: f64) -> Result<(f64, f64)> {
        let start = if hint.is_finite() && hint > 0.0 {
            hint
        } else {
            1.0
        };
        let v = self.value(start);
        if v > 0.0 {
            let mut lo = start;
            let mut hi = 2.0 * start;
            for _ in 0..MAX_DOUBLINGS {
                if self.value(hi) <= 0.0 {
                    return Ok((lo, hi));
                }
                lo = hi;
                hi *= 2.0;
            }
            Err(Error::NoFiberRoot { part: "w", lo, hi })
        } else {
            let mut hi = start;
            let mut lo = 0.5 * start;
            while lo >= MIN_SCALING {
                if self.value(lo) > 0.0 {
                    return Ok((lo, hi));
                }
                hi = lo;
                lo *= 0.5;
            }
            Err(Error::NoFiberRoot { part: "w", lo, hi })
        }
    }

    /// Positive root of `φ`: bracket from `hint`, bisect to `1e-8` relative
    /// width, then up to five Newton steps kept inside the bracket.
    pub fn solve(&self, hint: f64, tol: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::DegenerateComponent {
                part: "fiber direction",
                norm: 0.0,
            });
        }
        if hint > 0.0 && self.value(hint).abs() <= 1e-3 * tol * (1.0 + self.norm2) {
            return Ok(hint);
        }
        let (mut lo, mut hi) = self.bracket(hint)?;
        while hi - lo > 1e-8 * hi {
            let mid = 0.5 * (lo + hi);
            if self.value(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let target = tol * (1.0 + self.norm2);
        let mut t = 0.5 * (lo + hi);
        let mut v = self.value(t);
        for _ in 0..5 {
            if v.abs() <= 1e-3 * target {
                break;
            }
            let d = self.slope(t);
            if !(d < 0.0) {
                break;
            }
            let next = (t - v / d).clamp(lo, hi);
            let nv = self.value(next);
            if nv.abs() >= v.abs() {
                break;
            }
            t = next;
            v = nv;
        }
        if v.abs() <= target {
            Ok(t)
        } else {
            Err(Error::NoFiberRoot { part: "w", lo, hi })
        }
    }

    /// Root by bisection alone, run until the bracket stops shrinking.
    pub fn solve_bisection(&self) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::DegenerateComponent {
                part: "fiber direction",
                norm: 0.0,
            });
        }
        let (mut lo, mut hi) = self.bracket(1.0)?;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

const MAX_DOUBLINGS: usize = 200;
const MIN_SCALING: f64 = 1e-6;

/// Nehari residual `I'(tw + ū)(w)`.
pub fn fiber_value(spec: &ProblemSpec, w: &[f64], ubar: &[f64], t: f64) -> f64 {
    Fiber::new(spec, w, ubar).value(t)
}

/// Root `t* > 0` of [`fiber_value`].
pub fn solve_fiber_equation(
    spec: &ProblemSpec,
    w: &[f64],
    ubar: &[f64],
    hint: f64,
    tol: f64,
) -> Result<f64> {
    let fiber = Fiber::new(spec, w, ubar);
    if fiber.is_degenerate() {
        return Err(Error::DegenerateComponent {
            part: "w",
            norm: 0.0,
        });
    }
    fiber.solve(hint, tol)
}

/// Solves the Nehari equations of `chart` for `field`, returning the scaled
/// field and the scalings.
///
/// The scalings of `ũ⁺` and `ũ⁻` are coupled through `⟨ũ⁺, ũ⁻⟩_A`, which
/// is nonzero for nodewise signed parts; they are solved by alternating the
/// two scalar equations until the pair is stationary.
pub fn project_on_chart(
    spec: &ProblemSpec,
    chart: Chart,
    field: &DecomposedField,
    tol: f64,
) -> Result<(DecomposedField, FiberPoint)> {
    let a = spec.disc().stiffness();
    let dirs = directions(field);
    let active = chart.active();
    let mut rest = field.u.clone();
    for &k in active {
        for (r, w) in rest.iter_mut().zip(&dirs[k]) {
            *r -= w;
        }
    }
    let mut gram = [[0.0; 3]; 3];
    let mut rest_offset = [0.0; 3];
    for &k in active {
        for &j in active {
            if j >= k {
                gram[k][j] = a.inner(&dirs[k], &dirs[j]);
                gram[j][k] = gram[k][j];
            }
        }
        if gram[k][k] == 0.0 {
            return Err(Error::DegenerateComponent {
                part: PART_NAMES[k],
                norm: 0.0,
            });
        }
        rest_offset[k] = a.inner(&rest, &dirs[k]);
    }
    let mut scale = [1.0; 3];
    for _ in 0..100 {
        let mut change = 0.0_f64;
        for &k in active {
            let offset = rest_offset[k]
                + active
                    .iter()
                    .filter(|&&j| j != k)
                    .map(|&j| scale[j] * gram[j][k])
                    .sum::<f64>();
            let fiber = Fiber::with_offset(spec, &dirs[k], &rest, gram[k][k], offset);
            let next = fiber.solve(scale[k], tol).map_err(|e| match e {
                Error::NoFiberRoot { lo, hi, .. } => Error::NoFiberRoot {
                    part: PART_NAMES[k],
                    lo,
                    hi,
                },
                e => e,
            })?;
            change = change.max((next - scale[k]).abs() / next);
            scale[k] = next;
        }
        if active.len() == 1 || change <= 1e-14 {
            break;
        }
    }
    let point = FiberPoint {
        r: scale[0],
        s: scale[1],
        t: scale[2],
    };
    Ok((field.rescaled(point.r, point.s, point.t), point))
}

/// Projection onto the three Nehari equations of the constraint set.
pub fn project_to_nehari(
    spec: &ProblemSpec,
    field: &DecomposedField,
    tol: f64,
) -> Result<(DecomposedField, FiberPoint)> {
    project_on_chart(spec, Chart::Multibump, field, tol)
}

/// `h(r̃, s̃, t̂) = I_μ(φ(r̃, s̃, t̂))` and its diagonal second derivatives.
pub fn fiber_energy_and_curvature(
    spec: &ProblemSpec,
    field: &DecomposedField,
    point: FiberPoint,
) -> (f64, [f64; 3]) {
    let moved = field.rescaled(point.r, point.s, point.t);
    let a = spec.disc().stiffness();
    let dirs = directions(field);
    let curv = dirs.map(|w| {
        let slope = par::sum_by(w.len(), |i| {
            if w[i] == 0.0 {
                0.0
            } else {
                spec.load_slope(i, moved.u[i]) * w[i] * w[i]
            }
        });
        a.inner(&w, &w) - slope
    });
    (spec.energy(&moved.u), curv)
}

/// `I'(u)(w)` for the three signed parts.
pub fn nehari_residuals(spec: &ProblemSpec, field: &DecomposedField) -> [f64; 3] {
    directions(field).map(|w| spec.energy_derivative(&field.u, &w))
}

fn sine_bump(spec: &ProblemSpec, nodes: &[usize]) -> Vec<f64> {
    let disc = spec.disc();
    let mesh = disc.mesh();
    let globals = mesh.interior_nodes();
    let dim = mesh.dimension();
    let h = mesh.spacing();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in nodes {
        for (d, x) in mesh.coordinates(globals[i]).into_iter().enumerate() {
            lo[d] = lo[d].min(x);
            hi[d] = hi[d].max(x);
        }
    }
    let mut out = vec![0.0; disc.n()];
    for &i in nodes {
        let x = mesh.coordinates(globals[i]);
        out[i] = (0..dim)
            .map(|d| {
                let (a, b) = (lo[d] - h[d], hi[d] + h[d]);
                (std::f64::consts::PI * (x[d] - a) / (b - a)).sin()
            })
            .product();
    }
    out
}

/// Splits the nodes of `Ω̃` along the first axis into a left and a right
/// part separated by one column of nodes. `frac` places the gap.
fn split_tilde(spec: &ProblemSpec, frac: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let disc = spec.disc();
    let mesh = disc.mesh();
    let globals = mesh.interior_nodes();
    let nodes = disc.space(Label::Tilde).nodes();
    let col = |i: usize| mesh.grid_index(globals[i])[0];
    let (cmin, cmax) = nodes
        .iter()
        .fold((usize::MAX, 0), |(a, b), &i| (a.min(col(i)), b.max(col(i))));
    let gap = cmin + ((cmax - cmin) as f64 * frac).round() as usize;
    let left: Vec<usize> = nodes.iter().copied().filter(|&i| col(i) < gap).collect();
    let right: Vec<usize> = nodes.iter().copied().filter(|&i| col(i) > gap).collect();
    Ok((left, right))
}

fn seed_from_parts(
    spec: &ProblemSpec,
    frac: f64,
    amps: [f64; 3],
    tol: f64,
) -> Result<(DecomposedField, FiberPoint)> {
    let (left, right) = split_tilde(spec, frac)?;
    let hat = spec.disc().space(Label::Hat).nodes().to_vec();
    for (name, part) in [
        ("left half of the tilde component", &left),
        ("right half of the tilde component", &right),
        ("hat component", &hat),
    ] {
        if part.len() < 3 {
            return Err(Error::Seed(format!(
                "{name} has {} interior node(s), need at least 3",
                part.len()
            )));
        }
    }
    let pos = sine_bump(spec, &left);
    let neg = sine_bump(spec, &right);
    let hat_bump = sine_bump(spec, &hat);
    let tilde: Vec<f64> = pos
        .iter()
        .zip(&neg)
        .map(|(p, n)| amps[0] * p - amps[1] * n)
        .collect();
    let hat_v: Vec<f64> = hat_bump.iter().map(|v| amps[2] * v).collect();
    let zero = vec![0.0; tilde.len()];
    let field = DecomposedField::from_parts(tilde, hat_v, zero.clone(), zero);
    project_to_nehari(spec, &field, tol)
}

/// The seed `v = ṽ⁺ - ṽ⁻ + v̂⁺`: two half bumps in `Ω̃` and one bump in `Ω̂`,
/// each scaled onto its fiber.
pub fn build_seed(spec: &ProblemSpec, tol: f64) -> Result<DecomposedField> {
    Ok(seed_from_parts(spec, 0.5, [1.0, 1.0, 1.0], tol)?.0)
}

/// A seed with random amplitudes and a random split of `Ω̃`.
pub fn randomized_seed<R: Rng>(
    spec: &ProblemSpec,
    rng: &mut R,
    tol: f64,
) -> Result<DecomposedField> {
    let frac = rng.random_range(0.35..0.65);
    let amps = [
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
    ];
    Ok(seed_from_parts(spec, frac, amps, tol)?.0)
}

/// Structural constants of the constraint set, evaluated with discrete
/// quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariConstants {
    pub lambda_1: f64,
    pub lambda_tilde: f64,
    pub gamma: f64,
    pub p: f64,
    pub theta: f64,
    pub c_p: f64,
    pub c1: f64,
    pub sup_a_plus: f64,
    pub rho: f64,
    pub kappa_1: f64,
    pub radius: f64,
    pub nu_0: f64,
    pub seed_energy: f64,
}

impl NehariConstants {
    pub fn compute(spec: &ProblemSpec, spectral: &SpectralData, seed_energy: f64) -> Result<Self> {
        let disc = spec.disc();
        let lambda_1 = spectral.lambda_1();
        let lambda = spec.lambda();
        if !(lambda >= 0.0 && lambda < lambda_1) {
            return Err(Error::InvalidParameter(format!(
                "need 0 ≤ λ < Λ₁ = {lambda_1}, got {lambda}"
            )));
        }
        let nl = spec.nonlinearity();
        let k = nl.growth_constants(lambda, lambda_1);
        let p = k.p;
        let c_p = estimate_sobolev_constant(disc.mesh(), disc.stiffness(), p, 1e-10)?;
        let lambda_tilde = 0.5 * (lambda / lambda_1 + 1.0);
        let gamma = 0.25 * (1.0 - lambda_tilde);
        let sup = disc.weights().sup_a_plus();
        let base = gamma * c_p.powf(p) / (sup * k.c1);
        let rho = base.powf(1.0 / (p - 2.0));
        let kappa_1 = 0.5 * (0.5 * base).powf(1.0 / (p - 2.0));
        let theta = k.theta;
        let radius = f64::max(
            2.0 * rho,
            (seed_energy / ((1.0 - 2.0 / theta) * (1.0 - lambda_tilde))).sqrt() + 1.0,
        );
        Ok(Self {
            lambda_1,
            lambda_tilde,
            gamma,
            p,
            theta,
            c_p,
            c1: k.c1,
            sup_a_plus: sup,
            rho,
            kappa_1,
            radius,
            nu_0: rho / radius,
            seed_energy,
        })
    }
}

/// One membership condition with its margin (`bound - value`, nonnegative
/// when satisfied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub conditions: Vec<Condition>,
    /// `I'(u)(ũ⁺)`, `I'(u)(ũ⁻)`, `I'(u)(û⁺)`.
    pub nehari_residuals: [f64; 3],
}

impl MembershipReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn at_most(name: &str, value: f64, bound: f64) -> Condition {
    Condition {
        name: name.into(),
        passed: value <= bound,
        value,
        bound,
        margin: bound - value,
    }
}

/// Evaluates conditions (N_i)–(N_vii).
pub fn check_membership(
    spec: &ProblemSpec,
    constants: &NehariConstants,
    field: &DecomposedField,
    tol_fiber: f64,
) -> MembershipReport {
    let disc = spec.disc();
    let a = disc.stiffness();
    let norms = field.norms(disc);
    let residuals = nehari_residuals(spec, field);
    let part_norms = [norms.tilde_pos, norms.tilde_neg, norms.hat_pos];
    let worst = (0..3)
        .map(|k| residuals[k].abs() / (1.0 + part_norms[k].powi(2)))
        .fold(0.0_f64, f64::max);
    let min_norm = part_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let i_ii = Condition {
        name: "N_ii".into(),
        passed: min_norm > 0.0,
        value: min_norm,
        bound: 0.0,
        margin: min_norm,
    };
    let tilde_hat: Vec<f64> = field
        .tilde
        .iter()
        .zip(&field.hat_pos)
        .map(|(x, y)| x + y)
        .collect();
    let wn = field.weighted_norms(disc);
    let min_weighted = [wn.tilde_pos, wn.tilde_neg, wn.hat_pos]
        .into_iter()
        .map(f64::sqrt)
        .fold(f64::INFINITY, f64::min);
    let conditions = vec![
        at_most("N_i", worst, tol_fiber),
        i_ii,
        at_most("N_iii", spec.energy(&field.u), constants.seed_energy + 1.0),
        at_most("N_iv", a.norm(&tilde_hat), constants.radius),
        at_most("N_v", norms.hat_neg.max(norms.bar), constants.rho),
        at_most("N_vi", wn.low.sqrt(), constants.gamma * min_weighted),
        at_most("N_vii", norms.low, min_norm),
    ];
    MembershipReport {
        conditions,
        nehari_residuals: residuals,
    }
}
