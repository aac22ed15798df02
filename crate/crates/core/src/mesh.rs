//! Uniform Cartesian grids, the weight field `a(x)` and the component
//! structure of its positive and negative sets.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box with a uniform node count per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub extents: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64, nodes: usize) -> Self {
        Self {
            extents: vec![[lo, hi]],
            nodes: vec![nodes],
        }
    }

    pub fn rectangle(x: [f64; 2], y: [f64; 2], nodes: [usize; 2]) -> Self {
        Self {
            extents: vec![x, y],
            nodes: nodes.to_vec(),
        }
    }
}

/// A uniform grid on an interval or rectangle with homogeneous Dirichlet
/// boundary.
///
/// Global nodes are numbered with the x index running fastest. Fields are
/// stored on interior nodes only; boundary values are implicitly zero.
#[derive(Debug, Clone)]
pub struct Mesh {
    extents: Vec<[f64; 2]>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    interior: Vec<usize>,
    interior_of: Vec<Option<usize>>,
    quad: f64,
}

pub fn build_mesh(domain: &DomainSpec) -> Result<Mesh> {
    let dim = domain.extents.len();
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidMesh(format!(
            "dimension must be 1 or 2, got {dim}"
        )));
    }
    if domain.nodes.len() != dim {
        return Err(Error::InvalidMesh(format!(
            "{} node counts given for {dim} axes",
            domain.nodes.len()
        )));
    }
    for (axis, (&[lo, hi], &n)) in domain.extents.iter().zip(&domain.nodes).enumerate() {
        if !lo.is_finite() || !hi.is_finite() || hi - lo <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "axis {axis}: extent [{lo}, {hi}] must be finite with positive length"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidMesh(format!(
                "axis {axis}: node count < 3 (got {n})"
            )));
        }
    }
    let spacing: Vec<f64> = domain
        .extents
        .iter()
        .zip(&domain.nodes)
        .map(|(&[lo, hi], &n)| (hi - lo) / (n - 1) as f64)
        .collect();
    let total: usize = domain.nodes.iter().product();
    let mut interior = Vec::new();
    let mut interior_of = vec![None; total];
    for g in 0..total {
        let idx = multi_index(&domain.nodes, g);
        if idx
            .iter()
            .zip(&domain.nodes)
            .all(|(&i, &n)| i > 0 && i + 1 < n)
        {
            interior_of[g] = Some(interior.len());
            interior.push(g);
        }
    }
    Ok(Mesh {
        extents: domain.extents.clone(),
        nodes: domain.nodes.clone(),
        quad: spacing.iter().product(),
        spacing,
        interior,
        interior_of,
    })
}

fn multi_index(nodes: &[usize], g: usize) -> Vec<usize> {
    let mut rem = g;
    nodes
        .iter()
        .map(|&n| {
            let i = rem % n;
            rem /= n;
            i
        })
        .collect()
}

impl Mesh {
    pub fn dimension(&self) -> usize {
        self.nodes.len()
    }

    pub fn extents(&self) -> &[[f64; 2]] {
        &self.extents
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn total_nodes(&self) -> usize {
        self.interior_of.len()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Global index of each interior node.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, global: usize) -> Option<usize> {
        self.interior_of[global]
    }

    /// Lumped quadrature weight of an interior node (product of spacings).
    pub fn quad_weight(&self) -> f64 {
        self.quad
    }

    pub fn grid_index(&self, global: usize) -> Vec<usize> {
        multi_index(&self.nodes, global)
    }

    pub fn coordinates(&self, global: usize) -> Vec<f64> {
        self.grid_index(global)
            .iter()
            .zip(self.extents.iter().zip(&self.nodes))
            .map(|(&i, (&[lo, hi], &n))| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn measure(&self) -> f64 {
        self.extents.iter().map(|[lo, hi]| hi - lo).product()
    }

    /// Edge neighbours of a global node (2 per axis, fewer on the boundary).
    pub fn neighbors(&self, global: usize) -> Vec<usize> {
        let idx = self.grid_index(global);
        let mut out = Vec::with_capacity(2 * self.dimension());
        let mut stride = 1;
        for (axis, &n) in self.nodes.iter().enumerate() {
            if idx[axis] > 0 {
                out.push(global - stride);
            }
            if idx[axis] + 1 < n {
                out.push(global + stride);
            }
            stride *= n;
        }
        out
    }

    /// Expands an interior field to all nodes with zero boundary values.
    pub fn extend_to_all(&self, interior_values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.total_nodes()];
        for (k, &g) in self.interior.iter().enumerate() {
            full[g] = interior_values[k];
        }
        full
    }
}

/// Analytic or tabulated description of a scalar field on the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldDescriptor {
    Constant {
        value: f64,
    },
    /// `amplitude · sin(π·frequency·x_axis + phase)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `amplitude · Π_k sin(π·frequencies[k]·x_k)`.
    SineProduct {
        #[serde(default = "one")]
        amplitude: f64,
        frequencies: Vec<f64>,
    },
    /// `baseline + Σ amplitude·exp(-|x - center|² / width²)`.
    GaussianBumps {
        baseline: f64,
        bumps: Vec<GaussianBump>,
    },
    /// Linear interpolation in one coordinate, constant beyond the ends.
    PiecewiseLinear {
        breakpoints: Vec<[f64; 2]>,
        #[serde(default)]
        axis: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

impl FieldDescriptor {
    pub fn validate(&self, dimension: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWeight(msg));
        match self {
            FieldDescriptor::Sine { axis, .. } | FieldDescriptor::PiecewiseLinear { axis, .. }
                if *axis >= dimension =>
            {
                bad(format!(
                    "axis {axis} out of range for dimension {dimension}"
                ))
            }
            FieldDescriptor::SineProduct { frequencies, .. } if frequencies.len() != dimension => {
                bad(format!("sine_product needs {dimension} frequencies"))
            }
            FieldDescriptor::GaussianBumps { bumps, .. }
                if bumps
                    .iter()
                    .any(|b| b.center.len() != dimension || b.width <= 0.0) =>
            {
                bad("gaussian bump centers must match the dimension and widths be positive".into())
            }
            FieldDescriptor::PiecewiseLinear { breakpoints, .. }
                if breakpoints.is_empty() || breakpoints.windows(2).any(|w| w[1][0] <= w[0][0]) =>
            {
                bad("piecewise_linear breakpoints must be non-empty and strictly increasing".into())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            FieldDescriptor::Constant { value } => *value,
            FieldDescriptor::Sine {
                amplitude,
                frequency,
                phase,
                axis,
            } => amplitude * (PI * frequency * x[*axis] + phase).sin(),
            FieldDescriptor::SineProduct {
                amplitude,
                frequencies,
            } => {
                amplitude
                    * x.iter()
                        .zip(frequencies)
                        .map(|(xi, f)| (PI * f * xi).sin())
                        .product::<f64>()
            }
            FieldDescriptor::GaussianBumps { baseline, bumps } => {
                baseline
                    + bumps
                        .iter()
                        .map(|b| {
                            let r2: f64 = x
                                .iter()
                                .zip(&b.center)
                                .map(|(a, c)| (a - c) * (a - c))
                                .sum();
                            b.amplitude * (-r2 / (b.width * b.width)).exp()
                        })
                        .sum::<f64>()
            }
            FieldDescriptor::PiecewiseLinear { breakpoints, axis } => {
                let t = x[*axis];
                let first = breakpoints[0];
                let last = breakpoints[breakpoints.len() - 1];
                if t <= first[0] {
                    return first[1];
                }
                if t >= last[0] {
                    return last[1];
                }
                let k = breakpoints.partition_point(|b| b[0] <= t);
                let [x0, y0] = breakpoints[k - 1];
                let [x1, y1] = breakpoints[k];
                y0 + (y1 - y0) * (t - x0) / (x1 - x0)
            }
        }
    }

    /// Values at every interior node of `mesh`.
    pub fn sample_interior(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes()
            .iter()
            .map(|&g| self.eval(&mesh.coordinates(g)))
            .collect()
    }
}

/// Region a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// First positive component (carries the nodal bump).
    Tilde,
    /// Second positive component (carries the positive bump).
    Hat,
    /// Third positive component (vanishes in the limit).
    Bar,
    Neg,
    Zero,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Tilde => "tilde",
            Label::Hat => "hat",
            Label::Bar => "bar",
            Label::Neg => "neg",
            Label::Zero => "zero",
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Tilde | Label::Hat | Label::Bar)
    }
}

/// The three positive components in `Tilde, Hat, Bar` order.
pub const COMPONENTS: [Label; 3] = [Label::Tilde, Label::Hat, Label::Bar];

/// How `a` is built and its positive components are named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub descriptor: FieldDescriptor,
    #[serde(default = "default_zero_tolerance")]
    pub zero_tolerance: f64,
    /// `component_order[k]` is the position (in ascending minimal-coordinate
    /// order) of the component named `COMPONENTS[k]`.
    #[serde(default = "default_order")]
    pub component_order: [usize; 3],
}

fn default_zero_tolerance() -> f64 {
    1e-12
}

fn default_order() -> [usize; 3] {
    [0, 1, 2]
}

impl WeightSpec {
    pub fn new(descriptor: FieldDescriptor) -> Self {
        Self {
            descriptor,
            zero_tolerance: default_zero_tolerance(),
            component_order: default_order(),
        }
    }
}

/// Nodal weight `a` with its sign-based component labels.
#[derive(Debug, Clone)]
pub struct WeightField {
    values: Vec<f64>,
    labels: Vec<Label>,
    sup_a_plus: f64,
    component_sizes: [usize; 3],
}

pub fn build_weight_field(mesh: &Mesh, spec: &WeightSpec) -> Result<WeightField> {
    spec.descriptor.validate(mesh.dimension())?;
    let mut order = spec.component_order;
    order.sort_unstable();
    if order != [0, 1, 2] {
        return Err(Error::InvalidWeight(format!(
            "component_order {:?} is not a permutation of [0, 1, 2]",
            spec.component_order
        )));
    }
    let total = mesh.total_nodes();
    let values: Vec<f64> = (0..total)
        .map(|g| spec.descriptor.eval(&mesh.coordinates(g)))
        .collect();
    if let Some(g) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidWeight(format!(
            "non-finite weight at node {g}"
        )));
    }
    let tol = spec.zero_tolerance;
    let positive: Vec<bool> = values.iter().map(|&a| a > tol).collect();

    // Breadth-first labelling of the positive set with edge connectivity.
    let mut comp_of = vec![usize::MAX; total];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..total {
        if !positive[start] || comp_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        comp_of[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(g) = queue.pop_front() {
            for nb in mesh.neighbors(g) {
                if positive[nb] && comp_of[nb] == usize::MAX {
                    comp_of[nb] = id;
                    members.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        components.push(members);
    }
    if components.len() != 3 {
        let sizes: Vec<usize> = components.iter().map(Vec::len).collect();
        return Err(Error::InvalidWeight(format!(
            "positive set has {} component{}, need 3 (sizes {sizes:?})",
            components.len(),
            if components.len() == 1 { "" } else { "s" }
        )));
    }

    // Ascending order of each component's lexicographically smallest coordinate.
    let key = |members: &Vec<usize>| -> Vec<f64> {
        members
            .iter()
            .map(|&g| mesh.coordinates(g))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap()
    };
    let mut sorted: Vec<usize> = (0..3).collect();
    sorted.sort_by(|&i, &j| {
        key(&components[i])
            .partial_cmp(&key(&components[j]))
            .unwrap()
    });
    let mut name_of = [Label::Zero; 3];
    for (k, &label) in COMPONENTS.iter().enumerate() {
        name_of[sorted[spec.component_order[k]]] = label;
    }

    let mut labels = vec![Label::Zero; total];
    for g in 0..total {
        labels[g] = if positive[g] {
            name_of[comp_of[g]]
        } else if values[g] < -tol {
            Label::Neg
        } else {
            Label::Zero
        };
    }
    let mut component_sizes = [0; 3];
    for &g in mesh.interior_nodes() {
        if let Some(k) = COMPONENTS.iter().position(|&l| l == labels[g]) {
            component_sizes[k] += 1;
        }
    }
    if let Some(k) = component_sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidWeight(format!(
            "component {} has no interior nodes",
            COMPONENTS[k].name()
        )));
    }
    let sup_a_plus = values
        .iter()
        .zip(&labels)
        .filter(|(_, l)| l.is_positive())
        .fold(0.0_f64, |m, (&a, _)| m.max(a));
    Ok(WeightField {
        values,
        labels,
        sup_a_plus,
        component_sizes,
    })
}

impl WeightField {
    /// `a` at every global node.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, global: usize) -> Label {
        self.labels[global]
    }

    pub fn sup_a_plus(&self) -> f64 {
        self.sup_a_plus
    }

    /// Interior node counts of the `Tilde`, `Hat`, `Bar` components.
    pub fn component_sizes(&self) -> [usize; 3] {
        self.component_sizes
    }

    /// `a⁺` on interior nodes (zero off the positive components).
    pub fn a_plus(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes()
            .iter()
            .map(|&g| {
                if self.labels[g].is_positive() {
                    self.values[g]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `a⁻` on interior nodes (zero off the negative set).
    pub fn a_minus(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes()
            .iter()
            .map(|&g| {
                if self.labels[g] == Label::Neg {
                    -self.values[g]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Interior indices carrying `label`, ascending.
    pub fn interior_with(&self, mesh: &Mesh, label: Label) -> Vec<usize> {
        mesh.interior_nodes()
            .iter()
            .enumerate()
            .filter(|(_, &g)| self.labels[g] == label)
            .map(|(k, _)| k)
            .collect()
    }
}
