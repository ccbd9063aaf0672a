//! Extended level set storage and phase characteristic functions.
//!
//! For `M` phases, one nodal field is stored for every unordered pair
//! `i < j`. Reading `φ_ji` returns `-φ_ij`, so antisymmetry holds by
//! construction; `φ_ii` is never stored and reads as zero.

use serde::{Deserialize, Serialize};

use crate::element::ElementBasis;
use crate::mesh::Mesh;

/// Number of unordered pairs among `m` phases.
pub fn pair_count(m: usize) -> usize {
    m * (m - 1) / 2
}

/// Storage slot of the unordered pair `{i, j}`; requires `i < j`.
#[inline]
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)` with `i < j`, in storage order.
pub fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
}

/// Sharp Heaviside with `H(0) = 1`.
#[inline]
pub fn heaviside(s: f64) -> f64 {
    if s >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// C¹ quintic step used for the ersatz material blend.
#[inline]
pub fn smoothed_heaviside(s: f64) -> f64 {
    if s < -1.0 {
        0.0
    } else if s > 1.0 {
        1.0
    } else {
        let s2 = s * s;
        0.5 + s * (15.0 / 16.0 - s2 * (5.0 / 8.0 - 3.0 / 16.0 * s2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingParams {
    /// Transition width `w^p`.
    pub width: f64,
    /// Stabilizer `ε^p` added to every numerator.
    pub epsilon: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams { width: 0.2, epsilon: 1e-6 }
    }
}

impl SmoothingParams {
    pub fn is_valid(&self) -> bool {
        self.width > 0.0 && self.epsilon > 0.0 && self.width.is_finite() && self.epsilon.is_finite()
    }
}

/// One nodal scalar per unordered phase pair, antisymmetric on read.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField {
    phases: usize,
    n_nodes: usize,
    values: Vec<Vec<f64>>,
}

impl PairField {
    pub fn zeros(phases: usize, n_nodes: usize) -> Self {
        assert!(phases >= 2, "at least two phases are required");
        PairField { phases, n_nodes, values: vec![vec![0.0; n_nodes]; pair_count(phases)] }
    }

    /// Builds a field from a function of `(i, j, node)` evaluated for `i < j`.
    pub fn from_fn(phases: usize, n_nodes: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut x = Self::zeros(phases, n_nodes);
        for (i, j) in pairs(phases) {
            let k = pair_index(phases, i, j);
            for n in 0..n_nodes {
                x.values[k][n] = f(i, j, n);
            }
        }
        x
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// `φ_ij` at a node, for any ordered pair.
    #[inline]
    pub fn get(&self, i: usize, j: usize, node: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.values[pair_index(self.phases, i, j)][node],
            Greater => -self.values[pair_index(self.phases, j, i)][node],
            Equal => 0.0,
        }
    }

    /// Writes `φ_ij`; for `i > j` the stored `φ_ji` becomes `-value`.
    pub fn set(&mut self, i: usize, j: usize, node: usize, value: f64) {
        assert_ne!(i, j, "φ_ii is not stored");
        if i < j {
            self.values[pair_index(self.phases, i, j)][node] = value;
        } else {
            self.values[pair_index(self.phases, j, i)][node] = -value;
        }
    }

    /// Stored field of pair `i < j`.
    pub fn pair(&self, i: usize, j: usize) -> &[f64] {
        &self.values[pair_index(self.phases, i, j)]
    }

    pub fn pair_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        &mut self.values[pair_index(self.phases, i, j)]
    }

    /// Stored fields in pair order.
    pub fn stored(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn stored_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    /// All stored pair values at one node.
    pub fn at_node(&self, node: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[node]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn has_non_finite(&self) -> bool {
        self.values.iter().flatten().any(|v| !v.is_finite())
    }

    /// Side constraint `φ := max(-1, min(1, φ))`.
    pub fn clamp_side_constraint(&self) -> PairField {
        let mut out = self.clone();
        out.clamp_in_place();
        out
    }

    pub fn clamp_in_place(&mut self) {
        for v in self.values.iter_mut().flatten() {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    /// Pair values interpolated to quadrature points; `out[pair][e * nq + q]`.
    pub fn at_quadrature(&self, mesh: &Mesh, basis: &ElementBasis) -> Vec<Vec<f64>> {
        self.values.iter().map(|v| basis.interpolate(mesh, v)).collect()
    }
}

/// The design variable: all pairwise level-set functions on the mesh nodes.
pub type XlsField = PairField;

/// Per-point phase weights (nodes or quadrature points), point major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFractions {
    phases: usize,
    values: Vec<f64>,
}

impl PhaseFractions {
    pub fn new(phases: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len() % phases, 0);
        PhaseFractions { phases, values }
    }

    /// Every point assigned fraction `1/M` to each phase.
    pub fn uniform(phases: usize, points: usize) -> Self {
        PhaseFractions { phases, values: vec![1.0 / phases as f64; phases * points] }
    }

    /// One-hot fractions from a phase index per point.
    pub fn from_assignment(phases: usize, assignment: &[usize]) -> Self {
        let mut values = vec![0.0; phases * assignment.len()];
        for (p, &m) in assignment.iter().enumerate() {
            values[p * phases + m] = 1.0;
        }
        PhaseFractions { phases, values }
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.phases
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, point: usize, phase: usize) -> f64 {
        self.values[point * self.phases + phase]
    }

    #[inline]
    pub fn point(&self, p: usize) -> &[f64] {
        &self.values[p * self.phases..(p + 1) * self.phases]
    }

    pub fn point_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.values[p * self.phases..(p + 1) * self.phases]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of one phase at every point.
    pub fn phase(&self, m: usize) -> Vec<f64> {
        self.values.chunks(self.phases).map(|c| c[m]).collect()
    }

    /// Index of the largest entry per point (lowest index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        self.values.chunks(self.phases).map(argmax_lowest).collect()
    }

    /// Largest `|Σ_m f_m - 1|` over all points.
    pub fn max_sum_deviation(&self) -> f64 {
        self.values
            .chunks(self.phases)
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn argmax_lowest(c: &[f64]) -> usize {
    let mut best = 0;
    for (m, &v) in c.iter().enumerate().skip(1) {
        if v > c[best] {
            best = m;
        }
    }
    best
}

/// Reads `φ_ij` from the stored pair values of one point.
#[inline]
fn read(m: usize, phi: &[f64], i: usize, j: usize) -> f64 {
    use std::cmp::Ordering::*;
    match i.cmp(&j) {
        Less => phi[pair_index(m, i, j)],
        Greater => -phi[pair_index(m, j, i)],
        Equal => 0.0,
    }
}

/// `ψ_m = Π_{i≠m} H(φ_im)` at one point.
pub fn exact_at_point(m: usize, phi: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate().take(m) {
        *o = (0..m).filter(|&i| i != k).map(|i| heaviside(read(m, phi, i, k))).product();
    }
}

/// Appearance priority `ψ̃_m = Π_i (φ_im + 1) / 2` with `φ_mm = 0`.
pub fn priority_at_point(m: usize, phi: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate().take(m) {
        *o = (0..m).map(|i| 0.5 * (read(m, phi, i, k) + 1.0)).product();
    }
}

/// One-hot assignment to the phase with the highest priority.
pub fn approx_at_point(m: usize, phi: &[f64], out: &mut [f64]) {
    let mut pri = vec![0.0; m];
    priority_at_point(m, phi, &mut pri);
    let best = argmax_lowest(&pri);
    for (k, o) in out.iter_mut().enumerate().take(m) {
        *o = if k == best { 1.0 } else { 0.0 };
    }
}

/// Smoothed fractions sharing one denominator, so they sum to one.
pub fn ersatz_at_point(m: usize, phi: &[f64], params: &SmoothingParams, out: &mut [f64]) {
    let mut pri = [0.0; 16];
    let pri = if m <= 16 { &mut pri[..m] } else { return ersatz_at_point_large(m, phi, params, out) };
    priority_at_point(m, phi, pri);
    ersatz_from_priority(pri, params, out);
}

fn ersatz_at_point_large(m: usize, phi: &[f64], params: &SmoothingParams, out: &mut [f64]) {
    let mut pri = vec![0.0; m];
    priority_at_point(m, phi, &mut pri);
    ersatz_from_priority(&pri, params, out);
}

fn ersatz_from_priority(pri: &[f64], params: &SmoothingParams, out: &mut [f64]) {
    let m = pri.len();
    let inv_w = 1.0 / params.width;
    let mut total = 0.0;
    for k in 0..m {
        let mut prod = 1.0;
        for i in 0..m {
            if i != k {
                prod *= smoothed_heaviside((pri[k] - pri[i]) * inv_w);
                if prod == 0.0 {
                    break;
                }
            }
        }
        out[k] = params.epsilon + prod;
        total += out[k];
    }
    for o in out.iter_mut().take(m) {
        *o /= total;
    }
}

fn per_node(xls: &XlsField, f: impl Fn(usize, &[f64], &mut [f64])) -> PhaseFractions {
    let m = xls.phases();
    let mut values = vec![0.0; m * xls.n_nodes()];
    let mut phi = vec![0.0; pair_count(m)];
    for (n, out) in values.chunks_mut(m).enumerate() {
        for (k, p) in phi.iter_mut().enumerate() {
            *p = xls.values[k][n];
        }
        f(m, &phi, out);
    }
    PhaseFractions::new(m, values)
}

/// Sharp characteristic functions; not repaired where the fields disagree.
pub fn characteristic_exact(xls: &XlsField) -> PhaseFractions {
    per_node(xls, exact_at_point)
}

/// Appearance priorities per node (point major, not normalized).
pub fn appearance_priority(xls: &XlsField) -> Vec<f64> {
    per_node(xls, priority_at_point).values
}

/// Characteristic functions of the approximated fields: every node gets
/// exactly one phase.
pub fn approx_characteristic(xls: &XlsField) -> PhaseFractions {
    per_node(xls, approx_at_point)
}

/// Ersatz (smoothed) fractions at the nodes.
pub fn ersatz_fractions(xls: &XlsField, params: &SmoothingParams) -> PhaseFractions {
    per_node(xls, |m, phi, out| ersatz_at_point(m, phi, params, out))
}

/// Ersatz fractions at every quadrature point, evaluated from the
/// interpolated level-set values (element major, `e * nq + q`).
pub fn ersatz_at_quadrature(
    xls: &XlsField,
    mesh: &Mesh,
    basis: &ElementBasis,
    params: &SmoothingParams,
) -> PhaseFractions {
    let m = xls.phases();
    let qp = xls.at_quadrature(mesh, basis);
    let points = qp.first().map_or(0, |v| v.len());
    let mut values = vec![0.0; m * points];
    let mut phi = vec![0.0; pair_count(m)];
    for (p, out) in values.chunks_mut(m).enumerate() {
        for (k, v) in phi.iter_mut().enumerate() {
            *v = qp[k][p];
        }
        ersatz_at_point(m, &phi, params, out);
    }
    PhaseFractions::new(m, values)
}

/// Phase index per node from the approximated characteristic functions.
pub fn phase_assignment(xls: &XlsField) -> Vec<usize> {
    approx_characteristic(xls).argmax()
}
