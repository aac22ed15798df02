//! Dirichlet-orthogonal splitting `u = ũ + û + ū_b + u̲` and nodewise signed
//! parts.

use serde::{Deserialize, Serialize};

use crate::mesh::Label;
use crate::model::Discretization;
use crate::par;

/// A nodal field together with its projections onto the three positive
/// components, the residual and the signed parts of `ũ` and `û`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedField {
    pub u: Vec<f64>,
    pub tilde: Vec<f64>,
    pub hat: Vec<f64>,
    pub bar: Vec<f64>,
    /// `u̲`, harmonic at the nodes of `Ω⁺`.
    pub low: Vec<f64>,
    pub tilde_pos: Vec<f64>,
    pub tilde_neg: Vec<f64>,
    pub hat_pos: Vec<f64>,
    pub hat_neg: Vec<f64>,
}

/// A-orthogonal projection of `u` onto the discrete `H¹₀(ω)`: solves
/// `A_ωω v = (Au)|_ω` and extends by zero.
pub fn project_component(disc: &Discretization, u: &[f64], label: Label) -> Vec<f64> {
    let au = disc.stiffness().apply(u);
    disc.space(label).solve_restricted(&au)
}

/// `(max(w, 0), max(-w, 0))` nodewise.
pub fn signed_parts(w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pos = w.iter().map(|&v| v.max(0.0)).collect();
    let neg = w.iter().map(|&v| (-v).max(0.0)).collect();
    (pos, neg)
}

pub fn decompose(disc: &Discretization, u: &[f64]) -> DecomposedField {
    let au = disc.stiffness().apply(u);
    let [s0, s1, s2] = disc.spaces();
    let (tilde, hat, bar) = par::join3(
        || s0.solve_restricted(&au),
        || s1.solve_restricted(&au),
        || s2.solve_restricted(&au),
    );
    let low = (0..u.len())
        .map(|i| u[i] - tilde[i] - hat[i] - bar[i])
        .collect();
    DecomposedField::assemble(u.to_vec(), tilde, hat, bar, low)
}

impl DecomposedField {
    fn assemble(u: Vec<f64>, tilde: Vec<f64>, hat: Vec<f64>, bar: Vec<f64>, low: Vec<f64>) -> Self {
        let (tilde_pos, tilde_neg) = signed_parts(&tilde);
        let (hat_pos, hat_neg) = signed_parts(&hat);
        Self {
            u,
            tilde,
            hat,
            bar,
            low,
            tilde_pos,
            tilde_neg,
            hat_pos,
            hat_neg,
        }
    }

    /// Builds `u = ũ + û + ū_b + u̲` from pieces assumed to be the
    /// projections already.
    pub fn from_parts(tilde: Vec<f64>, hat: Vec<f64>, bar: Vec<f64>, low: Vec<f64>) -> Self {
        let u = (0..tilde.len())
            .map(|i| tilde[i] + hat[i] + bar[i] + low[i])
            .collect();
        Self::assemble(u, tilde, hat, bar, low)
    }

    /// `r ũ⁺ - s ũ⁻ + t û⁺ - û⁻ + ū_b + u̲`, decomposed without new solves.
    pub fn rescaled(&self, r: f64, s: f64, t: f64) -> Self {
        let n = self.u.len();
        let tilde: Vec<f64> = (0..n)
            .map(|i| r * self.tilde_pos[i] - s * self.tilde_neg[i])
            .collect();
        let hat: Vec<f64> = (0..n)
            .map(|i| t * self.hat_pos[i] - self.hat_neg[i])
            .collect();
        let u = (0..n)
            .map(|i| tilde[i] + hat[i] + self.bar[i] + self.low[i])
            .collect();
        Self::assemble(u, tilde, hat, self.bar.clone(), self.low.clone())
    }

    /// Replaces `û⁻` by zero.
    pub fn without_hat_neg(&self) -> Self {
        let hat = self.hat_pos.clone();
        let u = (0..self.u.len())
            .map(|i| self.tilde[i] + hat[i] + self.bar[i] + self.low[i])
            .collect();
        Self::assemble(
            u,
            self.tilde.clone(),
            hat,
            self.bar.clone(),
            self.low.clone(),
        )
    }

    /// A field living on one component only: everything else is zero.
    pub fn on_component(disc: &Discretization, label: Label, w: &[f64]) -> Self {
        let v = disc.space(label).restrict(w);
        let zero = vec![0.0; v.len()];
        let (tilde, hat, bar) = match label {
            Label::Tilde => (v.clone(), zero.clone(), zero.clone()),
            Label::Hat => (zero.clone(), v.clone(), zero.clone()),
            Label::Bar => (zero.clone(), zero.clone(), v.clone()),
            other => panic!("{} is not a positive component", other.name()),
        };
        Self::assemble(v, tilde, hat, bar, zero)
    }

    pub fn norms(&self, disc: &Discretization) -> ComponentNorms {
        let a = disc.stiffness();
        let (tilde_pos, tilde_neg, hat_pos, hat_neg, bar, low) = (
            a.norm(&self.tilde_pos),
            a.norm(&self.tilde_neg),
            a.norm(&self.hat_pos),
            a.norm(&self.hat_neg),
            a.norm(&self.bar),
            a.norm(&self.low),
        );
        ComponentNorms {
            total: a.norm(&self.u),
            tilde_pos,
            tilde_neg,
            hat_pos,
            hat_neg,
            bar,
            low,
        }
    }

    /// `∫a⁺w²` for `ũ⁺, ũ⁻, û⁺` and `u̲`.
    pub fn weighted_norms(&self, disc: &Discretization) -> WeightedNorms {
        let w = |v: &[f64]| disc.a_plus_inner(v, v);
        WeightedNorms {
            tilde_pos: w(&self.tilde_pos),
            tilde_neg: w(&self.tilde_neg),
            hat_pos: w(&self.hat_pos),
            low: w(&self.low),
        }
    }
}

/// Dirichlet norms of the pieces of a [`DecomposedField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorms {
    pub total: f64,
    pub tilde_pos: f64,
    pub tilde_neg: f64,
    pub hat_pos: f64,
    pub hat_neg: f64,
    pub bar: f64,
    pub low: f64,
}

impl ComponentNorms {
    /// `sqrt(‖û⁻‖² + ‖ū_b‖² + ‖u̲‖²)`.
    pub fn off_support(&self) -> f64 {
        (self.hat_neg.powi(2) + self.bar.powi(2) + self.low.powi(2)).sqrt()
    }
}

/// Weighted `L²` masses `∫a⁺w²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    pub tilde_pos: f64,
    pub tilde_neg: f64,
    pub hat_pos: f64,
    pub low: f64,
}
