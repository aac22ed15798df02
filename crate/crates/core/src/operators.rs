//! Discrete Dirichlet form, lumped mass, SPD solves and the weighted
//! eigenproblems on each positive component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, BandedCholesky, CsrMatrix};
use crate::mesh::{Label, Mesh};
use crate::par;

/// Finite-difference Laplacian on interior nodes, scaled by the lumped
/// quadrature weight so that `uᵀAv ≈ ∫∇u·∇v`.
#[derive(Debug, Clone)]
pub struct StiffnessOperator {
    matrix: CsrMatrix,
    /// Coupling to Dirichlet boundary neighbours, per row.
    boundary: Vec<f64>,
}

pub fn assemble_stiffness(mesh: &Mesh) -> StiffnessOperator {
    let quad = mesh.quad_weight();
    let coupling: Vec<f64> = mesh.spacing().iter().map(|h| quad / (h * h)).collect();
    let mut boundary = vec![0.0; mesh.interior_count()];
    let rows = mesh
        .interior_nodes()
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let idx = mesh.grid_index(g);
            let mut row = Vec::with_capacity(1 + 2 * idx.len());
            let mut diag = 0.0;
            let mut stride = 1;
            for (axis, &n) in mesh.node_counts().iter().enumerate() {
                diag += 2.0 * coupling[axis];
                for (cond, nb) in [
                    (idx[axis] > 0, g.wrapping_sub(stride)),
                    (idx[axis] + 1 < n, g + stride),
                ] {
                    match mesh.interior_index(nb).filter(|_| cond) {
                        Some(j) => row.push((j, -coupling[axis])),
                        None => boundary[k] += coupling[axis],
                    }
                }
                stride *= n;
            }
            row.push((mesh.interior_index(g).unwrap(), diag));
            row
        })
        .collect();
    StiffnessOperator {
        matrix: CsrMatrix::from_rows(rows),
        boundary,
    }
}

impl StiffnessOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.apply(u)
    }

    /// `⟨u, v⟩_A = uᵀAv`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.inner(u, v)
    }

    /// `uᵀAu` summed edge by edge as `Σ c(uᵢ - uⱼ)² + Σ bᵢuᵢ²`; every term
    /// is nonnegative, so the result carries no cancellation error.
    pub fn quadratic(&self, u: &[f64]) -> f64 {
        par::sum_by(u.len(), |i| {
            let mut s = self.boundary[i] * u[i] * u[i];
            for (j, a) in self.matrix.row(i) {
                if j > i {
                    s -= a * (u[i] - u[j]) * (u[i] - u[j]);
                }
            }
            s
        })
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.quadratic(u).sqrt()
    }

    pub fn factor(&self) -> Result<BandedCholesky> {
        BandedCholesky::factor(&self.matrix)
    }
}

/// Solves `A x = b` by conjugate gradients to relative residual `tol`.
pub fn solve_spd(a: &StiffnessOperator, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let cap = 10 * a.dim() + 100;
    conjugate_gradient(&a.matrix, b, tol, cap).map(|o| o.x)
}

/// Diagonal lumped mass `quad · w(node)` on interior nodes.
#[derive(Debug, Clone)]
pub struct WeightedMass {
    diag: Vec<f64>,
}

impl WeightedMass {
    pub fn new(mesh: &Mesh, weight: &[f64]) -> Self {
        let q = mesh.quad_weight();
        Self {
            diag: weight.iter().map(|w| q * w).collect(),
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `uᵀ M_w v = Σ quad·w·u·v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        par::sum_by(self.diag.len(), |i| self.diag[i] * u[i] * v[i])
    }
}

/// The discrete `H¹₀(ω)` of one positive component: the interior nodes it
/// owns and a factorization of the stiffness matrix restricted to them.
#[derive(Debug, Clone)]
pub struct ComponentSpace {
    label: Label,
    nodes: Vec<usize>,
    local: CsrMatrix,
    factor: BandedCholesky,
}

impl ComponentSpace {
    pub fn new(stiffness: &StiffnessOperator, label: Label, nodes: Vec<usize>) -> Result<Self> {
        let local = stiffness.matrix.restrict(&nodes);
        let factor = BandedCholesky::factor(&local)?;
        Ok(Self {
            label,
            nodes,
            local,
            factor,
        })
    }

    pub fn label(&self) -> Label {
        self.label
    }

    /// Interior indices of the component, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Solves `A_ωω x = b|_ω` and returns `x` extended by zero.
    pub fn solve_restricted(&self, b: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = self.nodes.iter().map(|&i| b[i]).collect();
        let x = self.factor.solve(&rhs);
        let mut out = vec![0.0; b.len()];
        for (&i, v) in self.nodes.iter().zip(x) {
            out[i] = v;
        }
        out
    }

    /// Zeroes `u` off the component.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for &i in &self.nodes {
            out[i] = u[i];
        }
        out
    }

    fn local_matrix(&self) -> &CsrMatrix {
        &self.local
    }
}

/// First eigenpair of `A φ = l M φ` on one component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// Interior nodal values, zero off the component, `φᵀMφ = 1`, positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Smallest `l` with `Aφ = l·diag(mass)φ` on `space`, by inverse power
/// iteration.
///
/// `mass` is the lumped diagonal on interior nodes (only the component's
/// entries are used).
pub fn smallest_weighted_eigenpair(
    space: &ComponentSpace,
    mass: &[f64],
    tol: f64,
) -> Result<EigenPair> {
    let nodes = space.nodes();
    let m: Vec<f64> = nodes.iter().map(|&i| mass[i]).collect();
    if m.iter().any(|&w| w < 0.0) || m.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "zero or negative weight on component {}",
            space.label().name()
        )));
    }
    let a = space.local_matrix();
    let norm_m = |x: &[f64]| x.iter().zip(&m).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    let mut x = vec![1.0; nodes.len()];
    let s = norm_m(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut value = f64::INFINITY;
    let mut change = f64::INFINITY;
    const MAX_ITER: usize = 20_000;
    for it in 1..=MAX_ITER {
        let rhs: Vec<f64> = x.iter().zip(&m).map(|(x, w)| w * x).collect();
        let mut y = space.factor.solve(&rhs);
        let s = norm_m(&y);
        y.iter_mut().for_each(|v| *v /= s);
        let rq = a.inner(&y, &y);
        change = (rq - value).abs();
        value = rq;
        x = y;
        if change <= tol * value.abs() {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            let mut vector = vec![0.0; mass.len()];
            for (&i, v) in nodes.iter().zip(&x) {
                vector[i] = *v;
            }
            return Ok(EigenPair {
                value,
                vector,
                iterations: it,
            });
        }
    }
    Err(Error::EigenIteration {
        iterations: MAX_ITER,
        change,
    })
}

/// First weighted eigenvalues of the three positive components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    /// Eigenpairs for `Tilde`, `Hat`, `Bar`.
    pub pairs: [EigenPair; 3],
}

impl SpectralData {
    pub fn eigenvalues(&self) -> [f64; 3] {
        [
            self.pairs[0].value,
            self.pairs[1].value,
            self.pairs[2].value,
        ]
    }

    /// `Λ₁`, the smallest of the three.
    pub fn lambda_1(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Component attaining `Λ₁`.
    pub fn minimizing_component(&self) -> Label {
        let ev = self.eigenvalues();
        let k = (0..3)
            .min_by(|&i, &j| ev[i].partial_cmp(&ev[j]).unwrap())
            .unwrap();
        crate::mesh::COMPONENTS[k]
    }
}

pub fn spectral_data(spaces: &[ComponentSpace; 3], mass: &[f64], tol: f64) -> Result<SpectralData> {
    let (a, b, c) = par::join3(
        || smallest_weighted_eigenpair(&spaces[0], mass, tol),
        || smallest_weighted_eigenpair(&spaces[1], mass, tol),
        || smallest_weighted_eigenpair(&spaces[2], mass, tol),
    );
    Ok(SpectralData {
        pairs: [a?, b?, c?],
    })
}

/// Discrete estimate of the embedding constant `c_p = inf ‖u‖ / |u|_p` on the
/// whole domain.
///
/// Runs the normalized iteration `u ← A⁻¹(|u|^{p-2}u)`, `|u|_p = 1`, from a
/// positive bump; the Rayleigh ratio `‖u‖²/|u|_p²` is non-increasing along it.
/// `p = 2` reduces to inverse iteration for the Poincaré constant.
pub fn estimate_sobolev_constant(
    mesh: &Mesh,
    stiffness: &StiffnessOperator,
    p: f64,
    tol: f64,
) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p out of range: {p} (need p ≥ 2)"
        )));
    }
    let factor = stiffness.factor()?;
    let q = mesh.quad_weight();
    let lp = |u: &[f64]| par::sum_by(u.len(), |i| q * u[i].abs().powf(p)).powf(1.0 / p);
    let mut u: Vec<f64> = mesh
        .interior_nodes()
        .iter()
        .map(|&g| {
            mesh.coordinates(g)
                .iter()
                .zip(mesh.extents())
                .map(|(x, [lo, hi])| (std::f64::consts::PI * (x - lo) / (hi - lo)).sin())
                .product()
        })
        .collect();
    let s = lp(&u);
    u.iter_mut().for_each(|v| *v /= s);
    let mut ratio = stiffness.inner(&u, &u);
    const MAX_ITER: usize = 50_000;
    for _ in 0..MAX_ITER {
        let rhs: Vec<f64> = u.iter().map(|&v| q * v.abs().powf(p - 2.0) * v).collect();
        let mut w = factor.solve(&rhs);
        let s = lp(&w);
        w.iter_mut().for_each(|v| *v /= s);
        let next = stiffness.inner(&w, &w);
        let change = (ratio - next).abs();
        ratio = next;
        u = w;
        if change <= tol * ratio {
            return Ok(ratio.sqrt());
        }
    }
    Err(Error::EigenIteration {
        iterations: MAX_ITER,
        change: f64::NAN,
    })
}
