//! Fictitious-time update of the level-set fields.
//!
//! Each stored pair obeys
//! `∂φ_ij/∂t = s_ij + τ_ij L² ∇·(T ∇φ_ij)` with `T = diag(τ̃_x, τ̃_y, τ̃_z)`.
//! Diffusion is implicit with a lumped mass matrix, so one step solves
//! `(M + Δt τ L² K) φ⁺ = M (φ + Δt s)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::element::ElementBasis;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::multiphase::{pair_count, pair_index, pairs, PairField, PhaseFractions, XlsField};
use crate::sensitivity::SensitivityField;
use crate::sparse::{reverse_cuthill_mckee, CsrMatrix, SkylineCholesky};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub kip: f64,
    pub kd: f64,
    pub kid: f64,
}

/// Fictitious time step used when none is configured.
pub const DEFAULT_DT: f64 = 0.02;

impl Default for PidGains {
    fn default() -> Self {
        PidGains { kp: 2.0, kip: 15.0, kd: 0.1, kid: 0.0 }
    }
}

/// Integral accumulators and previous values of every constraint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PidState {
    pub integral: Vec<f64>,
    pub previous: Vec<Option<f64>>,
}

impl PidState {
    pub fn new(constraints: usize) -> Self {
        PidState { integral: vec![0.0; constraints], previous: vec![None; constraints] }
    }
}

/// Control multipliers `λ_k = max(K_P g, 0) + g_I + K_D g_D`. On the first
/// call the previous value is taken equal to the current one.
pub fn pid_multipliers(g: &[f64], state: &PidState, gains: &[PidGains], dt: f64) -> Result<(Vec<f64>, PidState)> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    if g.len() != state.integral.len() || g.len() != gains.len() {
        return Err(Error::Invalid("constraint, state and gain counts differ".into()));
    }
    let mut next = state.clone();
    let mut lambda = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        let gk = g[k];
        let gd = gk - state.previous[k].unwrap_or(gk);
        let gi = (state.integral[k] + (gains[k].kip * gk + gains[k].kid * gd) * dt).max(0.0);
        lambda.push((gains[k].kp * gk).max(0.0) + gi + gains[k].kd * gd);
        next.integral[k] = gi;
        next.previous[k] = Some(gk);
    }
    Ok((lambda, next))
}

/// Whether the sum for `C^ALL` runs over ordered or unordered pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairSum {
    #[default]
    Ordered,
    Unordered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    /// `C_ij` per stored pair, already floored.
    pub c: Vec<f64>,
    pub c_all: f64,
}

/// `C_ij = ∫|𝒟_ij J| / ∫ 1` using nodal quadrature weights; pairs whose
/// coefficient vanishes are raised to a small floor.
pub fn normalization_coeffs(sens: &SensitivityField, weights: &[f64], sum: PairSum) -> Normalization {
    let total: f64 = weights.iter().sum();
    let raw: Vec<f64> = sens
        .stored()
        .iter()
        .map(|d| d.iter().zip(weights).map(|(v, w)| v.abs() * w).sum::<f64>() / total)
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    let floor = (1e-12 * max).max(f64::MIN_POSITIVE);
    let c: Vec<f64> = raw.iter().map(|&v| v.max(floor)).collect();
    let unordered: f64 = c.iter().sum();
    let c_all = match sum {
        PairSum::Ordered => 2.0 * unordered,
        PairSum::Unordered => unordered,
    };
    Normalization { c, c_all }
}

/// Reaction term `K_ij (−𝒟_ij J − C^ALL Σ_k λ_k 𝒟_ij g_k) / C_ij`.
pub fn assemble_source(
    sens_j: &SensitivityField,
    sens_g: &[SensitivityField],
    lambda: &[f64],
    norm: &Normalization,
    k_ucss: &[f64],
) -> PairField {
    let mut out = sens_j.clone();
    for (slot, dst) in out.stored_mut().iter_mut().enumerate() {
        let scale = k_ucss[slot] / norm.c[slot];
        for (n, d) in dst.iter_mut().enumerate() {
            let mut constraint = 0.0;
            for (g, l) in sens_g.iter().zip(lambda) {
                constraint += l * g.stored()[slot][n];
            }
            *d = scale * (-*d - norm.c_all * constraint);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub dt: f64,
    /// `τ_ij` per stored pair.
    pub tau: Vec<f64>,
    /// `τ̃_ij` per stored pair and axis.
    pub aniso: Vec<[f64; 3]>,
    /// `τ̃′_ij` per stored pair and axis; when present the anisotropy is
    /// `1 + τ̃′ (ψ_i + ψ_j)` and replaces `aniso`.
    #[serde(default)]
    pub piecewise: Option<Vec<[f64; 3]>>,
    pub k_ucss: Vec<f64>,
    #[serde(default)]
    pub pair_sum: PairSum,
}

impl EvolutionParams {
    pub fn isotropic(phases: usize, tau: f64) -> Self {
        let n = pair_count(phases);
        EvolutionParams {
            dt: DEFAULT_DT,
            tau: vec![tau; n],
            aniso: vec![[1.0; 3]; n],
            piecewise: None,
            k_ucss: vec![1.0; n],
            pair_sum: PairSum::Ordered,
        }
    }

    pub fn validate(&self, phases: usize) -> Result<()> {
        let n = pair_count(phases);
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.tau.len() != n || self.aniso.len() != n || self.k_ucss.len() != n {
            return Err(Error::Invalid(format!("per-pair parameters must have {n} entries")));
        }
        if self.tau.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Invalid("τ must be positive".into()));
        }
        if self.aniso.iter().flatten().any(|&t| !(t >= 1.0 && t.is_finite())) {
            return Err(Error::Invalid("anisotropy factors must be at least 1".into()));
        }
        if self.k_ucss.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Invalid("K_ucss must be positive".into()));
        }
        if let Some(p) = &self.piecewise {
            if p.len() != n || p.iter().flatten().any(|&t| !(t >= 0.0 && t.is_finite())) {
                return Err(Error::Invalid(format!("piecewise factors need {n} non-negative entries")));
            }
        }
        Ok(())
    }
}

struct Cached {
    key: (f64, [f64; 3]),
    matrix: CsrMatrix,
    factor: SkylineCholesky,
}

/// Scalar diffusion operator shared by all pairs, with cached
/// factorizations for constant coefficients.
pub struct DiffusionSolver {
    dim: usize,
    nen: usize,
    nq: usize,
    elements: Vec<Vec<usize>>,
    pattern: CsrMatrix,
    scatter: Vec<usize>,
    /// `w_q ∂_k N_a ∂_k N_b`, indexed `[(q * 3 + k) * nen² + a * nen + b]`.
    grad_q: Vec<f64>,
    mass: Vec<f64>,
    perm: Vec<usize>,
    on_phase: Vec<Vec<bool>>,
    l2: f64,
    cache: HashMap<(usize, usize), Cached>,
}

impl DiffusionSolver {
    /// Dirichlet node sets come from boundary tags that name a material.
    pub fn new(mesh: &Mesh, phases: usize) -> Result<Self> {
        mesh.check_phases(phases)?;
        let basis = ElementBasis::for_mesh(mesh);
        let dim = mesh.dim();
        let nen = basis.nodes();
        let nq = basis.quad_points();
        let mut grad_q = vec![0.0; nq * 3 * nen * nen];
        for q in 0..nq {
            for k in 0..dim {
                for a in 0..nen {
                    for b in 0..nen {
                        grad_q[(q * 3 + k) * nen * nen + a * nen + b] =
                            basis.weight(q) * basis.grad(q, a)[k] * basis.grad(q, b)[k];
                    }
                }
            }
        }
        let entries = mesh.elements().iter().flat_map(|el| el.iter().flat_map(move |&r| el.iter().map(move |&c| (r, c))));
        let pattern = CsrMatrix::from_pattern(mesh.n_nodes(), entries);
        let mut scatter = Vec::with_capacity(mesh.n_elements() * nen * nen);
        for el in mesh.elements() {
            for &r in el {
                for &c in el {
                    scatter.push(pattern.position(r, c).expect("pattern entry"));
                }
            }
        }
        let mut on_phase = vec![vec![false; mesh.n_nodes()]; phases];
        for (f, tag) in mesh.facets().iter().zip(mesh.facet_tags()) {
            if let Some(m) = tag.and_then(|t| mesh.tags()[t].material) {
                for &n in &f.nodes {
                    on_phase[m][n] = true;
                }
            }
        }
        let perm = reverse_cuthill_mckee(&pattern);
        let l = mesh.char_length();
        Ok(DiffusionSolver {
            dim,
            nen,
            nq,
            elements: mesh.elements().to_vec(),
            pattern,
            scatter,
            grad_q,
            mass: mesh.lumped_mass(),
            perm,
            on_phase,
            l2: l * l,
            cache: HashMap::new(),
        })
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.mass
    }

    /// Nodes on boundaries prescribed to phase `m`.
    pub fn phase_nodes(&self, m: usize) -> &[bool] {
        &self.on_phase[m]
    }

    /// Dirichlet values of the ordered pair `(i, j)`: −1 on `Γ_i`, +1 on
    /// `Γ_j`; nodes on both are left free.
    pub fn dirichlet(&self, i: usize, j: usize) -> Vec<Option<f64>> {
        self.on_phase[i]
            .iter()
            .zip(&self.on_phase[j])
            .map(|(&a, &b)| match (a, b) {
                (true, false) => Some(-1.0),
                (false, true) => Some(1.0),
                _ => None,
            })
            .collect()
    }

    /// `M + c Σ_k K_k(τ̃)` with per-quadrature-point axis factors.
    fn operator(&self, coeff: f64, factors: &dyn Fn(usize, usize) -> [f64; 3]) -> CsrMatrix {
        let mut a = self.pattern.clone();
        let nn = self.nen * self.nen;
        let vals = a.values_mut();
        for e in 0..self.elements.len() {
            for q in 0..self.nq {
                let f = factors(e, q);
                for k in 0..self.dim {
                    let w = coeff * f[k];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &self.grad_q[(q * 3 + k) * nn..(q * 3 + k + 1) * nn];
                    for (s, &pos) in src.iter().zip(&self.scatter[e * nn..(e + 1) * nn]) {
                        vals[pos] += w * s;
                    }
                }
            }
        }
        for (r, m) in self.mass.iter().enumerate() {
            let pos = a.position(r, r).expect("diagonal");
            a.values_mut()[pos] += m;
        }
        a
    }

    /// One implicit step for the ordered pair `(i, j)` without clamping.
    /// `piecewise` carries `(τ̃′, ψ_i + ψ_j at quadrature points)`.
    pub fn step_pair(
        &mut self,
        i: usize,
        j: usize,
        phi: &[f64],
        source: &[f64],
        dt: f64,
        tau: f64,
        aniso: [f64; 3],
        piecewise: Option<([f64; 3], &[f64])>,
    ) -> Result<Vec<f64>> {
        let coeff = dt * tau * self.l2;
        let bc = self.dirichlet(i, j);
        let mut rhs: Vec<f64> = (0..phi.len()).map(|n| self.mass[n] * (phi[n] + dt * source[n])).collect();
        if let Some((tp, sum_qp)) = piecewise {
            let nq = self.nq;
            let mut a = self.operator(coeff, &|e, q| {
                let s = sum_qp[e * nq + q];
                [1.0 + tp[0] * s, 1.0 + tp[1] * s, 1.0 + tp[2] * s]
            });
            a.apply_dirichlet(&mut rhs, &bc);
            let f = SkylineCholesky::factor(&a, &self.perm).map_err(|e| Error::solver("diffusion", e))?;
            let x = f.solve(&rhs).map_err(|e| Error::solver("diffusion", e))?;
            return Ok(pin(x, &bc));
        }
        let key = (coeff, aniso);
        let stale = self.cache.get(&(i, j)).map_or(true, |c| c.key != key);
        if stale {
            let mut a = self.operator(coeff, &|_, _| aniso);
            let raw = a.clone();
            let mut dummy = vec![0.0; phi.len()];
            a.apply_dirichlet(&mut dummy, &bc);
            let factor = SkylineCholesky::factor(&a, &self.perm).map_err(|e| Error::solver("diffusion", e))?;
            self.cache.insert((i, j), Cached { key, matrix: raw, factor });
        }
        let c = &self.cache[&(i, j)];
        // constrained rows: diagonal of the constrained matrix equals the raw one
        let mut constrained_rhs = rhs;
        for r in 0..phi.len() {
            if bc[r].is_some() {
                continue;
            }
            for (col, v) in c.matrix.row(r) {
                if let Some(g) = bc[col] {
                    constrained_rhs[r] -= v * g;
                }
            }
        }
        for r in 0..phi.len() {
            if let Some(g) = bc[r] {
                constrained_rhs[r] = c.matrix.get(r, r) * g;
            }
        }
        let x = c.factor.solve(&constrained_rhs).map_err(|e| Error::solver("diffusion", e))?;
        Ok(pin(x, &bc))
    }
}

/// Removes round-off on Dirichlet nodes.
fn pin(mut x: Vec<f64>, bc: &[Option<f64>]) -> Vec<f64> {
    for (v, b) in x.iter_mut().zip(bc) {
        if let Some(g) = b {
            *v = *g;
        }
    }
    x
}

/// Advances every stored pair by one step and applies the side constraint.
/// `fr_qp` (ersatz fractions at quadrature points) is needed only for the
/// piecewise anisotropy. Pairs flagged inactive are copied unchanged.
pub fn rde_step(
    solver: &mut DiffusionSolver,
    xls: &XlsField,
    source: &PairField,
    params: &EvolutionParams,
    fr_qp: Option<&PhaseFractions>,
    active: Option<&[bool]>,
) -> Result<XlsField> {
    let m = xls.phases();
    params.validate(m)?;
    let mut out = xls.clone();
    for (i, j) in pairs(m) {
        let slot = pair_index(m, i, j);
        if active.is_some_and(|a| !a[slot]) {
            continue;
        }
        let pw = match (&params.piecewise, fr_qp) {
            (Some(p), Some(fr)) => Some((p[slot], (0..fr.len()).map(|q| fr.get(q, i) + fr.get(q, j)).collect::<Vec<_>>())),
            (Some(_), None) => return Err(Error::Invalid("piecewise anisotropy needs quadrature fractions".into())),
            _ => None,
        };
        let new = solver.step_pair(
            i,
            j,
            xls.pair(i, j),
            source.pair(i, j),
            params.dt,
            params.tau[slot],
            params.aniso[slot],
            pw.as_ref().map(|(t, s)| (*t, s.as_slice())),
        )?;
        out.pair_mut(i, j).copy_from_slice(&new);
    }
    out.clamp_in_place();
    Ok(out)
}
