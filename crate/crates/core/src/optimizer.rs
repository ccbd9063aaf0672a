//! The optimization loop: ersatz fractions, state and adjoint solves,
//! objective and constraint evaluation, X-TD with PID multipliers, and the
//! reaction-diffusion update, repeated until the history settles.

use crate::elasticity::{
    mean_compliance, moment_of_inertia, solve_adjoint, ElasticityModel, MaterialCatalog, RotationAxis, SpringBc,
    StateSolution, TractionBc,
};
use crate::element::ElementBasis;
use crate::evolution::{
    assemble_source, normalization_coeffs, pid_multipliers, rde_step, DiffusionSolver, EvolutionParams, PidGains,
    PidState,
};
use crate::mesh::{build_structured_mesh, BoundaryKind, BoundaryTag, Mesh, MeshSpec, Region};
use crate::multiphase::{ersatz_at_quadrature, ersatz_fractions, pairs, PhaseFractions, SmoothingParams, XlsField};
use crate::sensitivity::{
    all_emts, td_compliance, td_mechanism, time_filter, xtd_inertia, xtd_objective, xtd_volume, DomainMask, Emt,
    SensitivityField,
};
use crate::{Error, Result};

/// What is minimized.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Mean compliance `∫ t·u` over the loaded boundaries.
    Compliance,
    /// `−∫ t_out·u` with a dummy traction on the output port.
    Mechanism { output: TractionBc },
    /// Mean compliance plus `w` times the moment of inertia about `axis`.
    ComplianceInertia { weight: f64, axis: RotationAxis },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Compliance => "compliance",
            Objective::Mechanism { .. } => "mechanism",
            Objective::ComplianceInertia { .. } => "compliance_plus_inertia",
        }
    }
}

/// Box of nodes assigned to one phase in an explicit initial layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRegion {
    pub phase: usize,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialConfig {
    /// Every `φ_ij = 0`.
    #[default]
    Zero,
    /// Nodes get `background` unless a later region in the list covers them.
    Regions { background: usize, regions: Vec<PhaseRegion> },
}

/// Stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub window: usize,
    pub rel_tol: f64,
    pub feasibility: f64,
    pub max_iters: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence { window: 20, rel_tol: 1e-4, feasibility: 1e-3, max_iters: 400 }
    }
}

/// Complete description of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub objective: Objective,
    pub mesh: MeshSpec,
    pub tags: Vec<BoundaryTag>,
    pub materials: MaterialCatalog,
    /// Upper volume ratio per phase; phases at 1 are unconstrained.
    pub vmax: Vec<f64>,
    pub tractions: Vec<TractionBc>,
    pub springs: Vec<SpringBc>,
    pub evolution: EvolutionParams,
    pub smoothing: SmoothingParams,
    pub gains: PidGains,
    pub initial: InitialConfig,
    pub convergence: Convergence,
    /// Time-filter coefficient `K_T′` for the mechanism sensitivity; 1 disables it.
    pub filter: f64,
    pub mask: DomainMask,
}

impl ProblemSpec {
    pub fn phases(&self) -> usize {
        self.materials.len()
    }

    /// Phases carrying a volume constraint (`V^max < 1`).
    pub fn constrained_phases(&self) -> Vec<usize> {
        (0..self.vmax.len()).filter(|&m| self.vmax[m] < 1.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.phases();
        if m < 2 {
            return Err(Error::Invalid("at least two phases are required".into()));
        }
        if self.vmax.len() != m {
            return Err(Error::Invalid(format!("vmax has {} entries for {m} phases", self.vmax.len())));
        }
        for (k, &v) in self.vmax.iter().enumerate() {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Invalid(format!("vmax[{k}] = {v} is outside (0, 1]")));
            }
        }
        self.evolution.validate(m)?;
        if !self.smoothing.is_valid() {
            return Err(Error::Invalid("smoothing width and epsilon must be positive".into()));
        }
        let dim = self.mesh.lengths.len();
        for t in &self.tractions {
            if t.traction.len() != dim {
                return Err(Error::Invalid(format!("traction `{}` needs {dim} components", t.tag)));
            }
        }
        for s in &self.springs {
            if s.stiffness.len() != dim * dim {
                return Err(Error::Invalid(format!("spring `{}` needs {} stiffness entries", s.tag, dim * dim)));
            }
        }
        match &self.objective {
            Objective::Compliance => {}
            Objective::Mechanism { output } => {
                if output.traction.len() != dim {
                    return Err(Error::Invalid(format!("output traction `{}` needs {dim} components", output.tag)));
                }
            }
            Objective::ComplianceInertia { weight, axis } => {
                if !(*weight >= 0.0) {
                    return Err(Error::Invalid(format!("inertia weight must be non-negative, got {weight}")));
                }
                axis.validate()?;
            }
        }
        if self.tractions.is_empty() {
            return Err(Error::Invalid("no traction load is applied".into()));
        }
        if !(self.filter > 0.0 && self.filter <= 1.0) {
            return Err(Error::Invalid(format!("filter coefficient {} is outside (0, 1]", self.filter)));
        }
        let c = &self.convergence;
        if c.window == 0 || c.max_iters == 0 || !(c.rel_tol > 0.0) || !(c.feasibility >= 0.0) {
            return Err(Error::Invalid("convergence window, tolerance and iteration cap must be positive".into()));
        }
        let g = &self.gains;
        if [g.kp, g.kip, g.kd, g.kid].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("PID gains must be finite and non-negative".into()));
        }
        if let InitialConfig::Regions { background, regions } = &self.initial {
            if *background >= m || regions.iter().any(|r| r.phase >= m) {
                return Err(Error::Invalid("initial region names a phase that does not exist".into()));
            }
        }
        self.build_mesh()?;
        Ok(())
    }

    /// Builds the grid and attaches every boundary tag.
    pub fn build_mesh(&self) -> Result<Mesh> {
        let mut mesh = build_structured_mesh(&self.mesh)?;
        for t in &self.tags {
            mesh.add_tag(t.clone())?;
        }
        mesh.check_phases(self.phases())?;
        for name in self
            .tractions
            .iter()
            .map(|t| &t.tag)
            .chain(self.springs.iter().map(|s| &s.tag))
            .chain(match &self.objective {
                Objective::Mechanism { output } => Some(&output.tag),
                _ => None,
            })
        {
            mesh.tagged_facets(name)?;
        }
        if !self.tags.iter().any(|t| matches!(t.kind, BoundaryKind::Fixed | BoundaryKind::Symmetry)) {
            return Err(Error::Invalid("no displacement support is tagged".into()));
        }
        Ok(mesh)
    }
}

/// `∫ ψ_m / ∫ 1` for fractions sampled at quadrature points.
pub fn volume_fraction(fr_qp: &PhaseFractions, m: usize, mesh: &Mesh) -> f64 {
    let basis = ElementBasis::for_mesh(mesh);
    volume_fractions(fr_qp, mesh, &basis)[m]
}

fn volume_fractions(fr_qp: &PhaseFractions, mesh: &Mesh, basis: &ElementBasis) -> Vec<f64> {
    let nq = basis.quad_points();
    let mut out = vec![0.0; fr_qp.phases()];
    for e in 0..mesh.n_elements() {
        for q in 0..nq {
            let w = basis.weight(q);
            for (o, f) in out.iter_mut().zip(fr_qp.point(e * nq + q)) {
                *o += w * f;
            }
        }
    }
    let total = mesh.domain_volume();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Per-element phase: largest mean fraction over the element's quadrature points.
pub fn element_phases(fr_qp: &PhaseFractions, nq: usize) -> Vec<usize> {
    let m = fr_qp.phases();
    (0..fr_qp.len() / nq)
        .map(|e| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for k in 0..m {
                let v: f64 = (0..nq).map(|q| fr_qp.get(e * nq + q, k)).sum();
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Total measure of element faces separating cells of different phases.
pub fn interface_measure(mesh: &Mesh, cell_phase: &[usize]) -> f64 {
    let dim = mesh.dim();
    let cells = mesh.cells();
    let h = mesh.spacing();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let idx = mesh.element_index(e);
        for axis in 0..dim {
            if idx[axis] + 1 >= cells[axis] {
                continue;
            }
            let mut nb = idx;
            nb[axis] += 1;
            if cell_phase[e] != cell_phase[mesh.element_at(nb)] {
                total += (0..dim).filter(|&k| k != axis).map(|k| h[k]).product::<f64>();
            }
        }
    }
    total
}

/// Spread, in cells of `across`, of the zero crossings of a nodal field
/// taken along `across` on every node line parallel to `across`. Crossing
/// `k` of each line is compared with crossing `k` of every other line.
/// `None` when lines disagree on the number of crossings.
pub fn crossing_spread(mesh: &Mesh, nodal: &[f64], across: usize) -> Option<f64> {
    let cells = mesh.cells();
    let np = [cells[0] + 1, cells[1] + 1, if mesh.dim() == 3 { cells[2] + 1 } else { 1 }];
    let node = |i: [usize; 3]| i[0] + np[0] * (i[1] + np[1] * i[2]);
    let others: Vec<usize> = (0..3).filter(|&a| a != across).collect();
    let mut lines: Vec<Vec<f64>> = Vec::new();
    for a in 0..np[others[0]] {
        for b in 0..np[others[1]] {
            let mut crossings = Vec::new();
            for t in 0..np[across] - 1 {
                let mut i0 = [0; 3];
                i0[others[0]] = a;
                i0[others[1]] = b;
                i0[across] = t;
                let mut i1 = i0;
                i1[across] = t + 1;
                let (f0, f1) = (nodal[node(i0)], nodal[node(i1)]);
                if (f0 < 0.0) != (f1 < 0.0) {
                    crossings.push(t as f64 + f0 / (f0 - f1));
                }
            }
            lines.push(crossings);
        }
    }
    let count = lines.first()?.len();
    if lines.iter().any(|l| l.len() != count) {
        return None;
    }
    let mut spread = 0.0f64;
    for k in 0..count {
        let (lo, hi) = lines.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l[k]), hi.max(l[k])));
        spread = spread.max(hi - lo);
    }
    Some(spread)
}

/// Largest extent along `across`, in cells, of any connected piece of the
/// interface between cells of phases `a` and `b`. A flat interface normal to
/// `across` scores 0 and every step adds one cell. `None` when the two
/// phases never touch.
pub fn interface_spread(mesh: &Mesh, cell_phase: &[usize], a: usize, b: usize, across: usize) -> Option<f64> {
    let dim = mesh.dim();
    let cells = mesh.cells();
    let h = mesh.spacing()[across];
    let mut faces: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    for e in 0..mesh.n_elements() {
        let idx = mesh.element_index(e);
        for axis in 0..dim {
            if idx[axis] + 1 >= cells[axis] {
                continue;
            }
            let mut nb = idx;
            nb[axis] += 1;
            let f = mesh.element_at(nb);
            let (p, q) = (cell_phase[e], cell_phase[f]);
            if !((p == a && q == b) || (p == b && q == a)) {
                continue;
            }
            let other = mesh.element(f);
            let shared: Vec<usize> = mesh.element(e).iter().copied().filter(|n| other.contains(n)).collect();
            let (lo, hi) = shared
                .iter()
                .map(|&n| mesh.node(n)[across] / h)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
            faces.push((shared, lo, hi));
        }
    }
    if faces.is_empty() {
        return None;
    }
    let mut parent: Vec<usize> = (0..faces.len()).collect();
    fn root(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    let mut owner = std::collections::HashMap::new();
    for (k, (nodes, _, _)) in faces.iter().enumerate() {
        for &n in nodes {
            match owner.get(&n) {
                Some(&o) => {
                    let (x, y) = (root(&mut parent, k), root(&mut parent, o));
                    parent[x] = y;
                }
                None => {
                    owner.insert(n, k);
                }
            }
        }
    }
    let mut range: std::collections::HashMap<usize, (f64, f64)> = std::collections::HashMap::new();
    for k in 0..faces.len() {
        let r = root(&mut parent, k);
        let (_, lo, hi) = faces[k];
        let entry = range.entry(r).or_insert((lo, hi));
        entry.0 = entry.0.min(lo);
        entry.1 = entry.1.max(hi);
    }
    range.values().map(|(lo, hi)| hi - lo).reduce(f64::max)
}

/// Loop stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Characteristic,
    StateSolve,
    Evaluate,
    Sensitivity,
    Filter,
    Update,
    ConvergenceCheck,
}

/// One history row.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `g_k` for every constrained phase.
    pub constraints: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub c_all: f64,
    pub volumes: Vec<f64>,
    /// Mean compliance of the input loads.
    pub compliance: f64,
    pub inertia: Option<f64>,
    /// `max |Σ_m ψ̂′_m − 1|` over quadrature points.
    pub partition_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunHistory {
    /// Phase index behind each constraint column.
    pub constrained: Vec<usize>,
    pub records: Vec<IterationRecord>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }
}

/// True once the objective has varied by less than `rel_tol` (relative to
/// the latest value) across the last `window` iterations and the latest
/// constraints are within `feasibility`.
pub fn converged(history: &RunHistory, window: usize, rel_tol: f64, feasibility: f64) -> bool {
    let n = history.records.len();
    if n < window + 1 {
        return false;
    }
    let last = &history.records[n - 1];
    if last.constraints.iter().any(|&g| !(g <= feasibility)) {
        return false;
    }
    let tail = &history.records[n - 1 - window..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.objective), hi.max(r.objective))
    });
    let scale = last.objective.abs().max(f64::MIN_POSITIVE);
    (hi - lo) / scale < rel_tol
}

/// Field data available to observers after each evaluation.
pub struct Snapshot<'a> {
    pub iteration: usize,
    pub xls: &'a XlsField,
    pub fractions: &'a PhaseFractions,
    pub displacement: &'a [f64],
    pub sensitivity: &'a SensitivityField,
}

/// Hooks into the loop. Every method has a no-op default.
pub trait Observer {
    fn stage(&mut self, _iteration: usize, _stage: Stage) {}
    fn record(&mut self, _record: &IterationRecord, _snapshot: &Snapshot<'_>) {}
    /// Called with the last finite field before a run aborts.
    fn abort(&mut self, _iteration: usize, _xls: &XlsField) {}
}

struct Silent;
impl Observer for Silent {}

/// Result of evaluating one design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fr_qp: PhaseFractions,
    pub fr_nodes: PhaseFractions,
    pub state: StateSolution,
    pub adjoint: Option<StateSolution>,
    pub objective: f64,
    pub compliance: f64,
    pub inertia: Option<f64>,
    pub volumes: Vec<f64>,
    pub constraints: Vec<f64>,
}

/// Mesh, models and solvers for a validated [`ProblemSpec`], reused across
/// iterations.
pub struct Problem {
    spec: ProblemSpec,
    model: ElasticityModel,
    diffusion: DiffusionSolver,
    emts: Vec<Option<Emt>>,
    load: Vec<f64>,
    constrained: Vec<usize>,
}

impl Problem {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let mesh = spec.build_mesh()?;
        let model = ElasticityModel::new(&mesh, &spec.materials, &spec.springs)?;
        let diffusion = DiffusionSolver::new(&mesh, spec.phases())?;
        let emts = all_emts(&spec.materials, mesh.dim())?;
        let load = model.load_vector(&spec.tractions)?;
        Ok(Problem { spec: spec.clone(), model, diffusion, emts, load, constrained: spec.constrained_phases() })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        self.model.mesh()
    }

    pub fn basis(&self) -> &ElementBasis {
        self.model.basis()
    }

    pub fn model(&self) -> &ElasticityModel {
        &self.model
    }

    pub fn diffusion(&mut self) -> &mut DiffusionSolver {
        &mut self.diffusion
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    /// Initial X-LS field: zero, or `±1` per region followed by one
    /// source-free diffusion step.
    pub fn initial_field(&mut self) -> Result<XlsField> {
        let m = self.spec.phases();
        let n = self.mesh().n_nodes();
        let InitialConfig::Regions { background, regions } = &self.spec.initial else {
            return Ok(XlsField::zeros(m, n));
        };
        let owner: Vec<usize> = self
            .mesh()
            .coords()
            .iter()
            .map(|x| regions.iter().rev().find(|r| r.region.contains(x, 1e-12)).map_or(*background, |r| r.phase))
            .collect();
        let mut xls = XlsField::zeros(m, n);
        for (node, &k) in owner.iter().enumerate() {
            for i in (0..m).filter(|&i| i != k) {
                xls.set(i, k, node, 1.0);
            }
        }
        let zero = vec![0.0; n];
        let ev = self.spec.evolution.clone();
        for (i, j) in pairs(m) {
            let slot = crate::multiphase::pair_index(m, i, j);
            let next =
                self.diffusion.step_pair(i, j, xls.pair(i, j), &zero, ev.dt, ev.tau[slot], ev.aniso[slot], None)?;
            xls.pair_mut(i, j).copy_from_slice(&next);
        }
        xls.clamp_in_place();
        Ok(xls)
    }

    /// Ersatz fractions at quadrature points and at nodes.
    pub fn fractions(&self, xls: &XlsField) -> (PhaseFractions, PhaseFractions) {
        let fr_qp = ersatz_at_quadrature(xls, self.mesh(), self.basis(), &self.spec.smoothing);
        let fr_nodes = ersatz_fractions(xls, &self.spec.smoothing);
        (fr_qp, fr_nodes)
    }

    /// Assembles and solves the state problem, plus the adjoint for
    /// mechanisms (same factorization).
    pub fn solve(&mut self, fr_qp: &PhaseFractions) -> Result<(StateSolution, Option<StateSolution>)> {
        self.model.assemble(fr_qp)?;
        let u = self.model.solve(&self.load)?;
        self.model.set_warm_start(Some(u.displacement.clone()));
        let v = match &self.spec.objective {
            Objective::Mechanism { output } => Some(solve_adjoint(&self.model, output)?),
            _ => None,
        };
        Ok((u, v))
    }

    /// Objective and constraint values for solved states.
    pub fn measure(
        &self,
        fr_qp: PhaseFractions,
        fr_nodes: PhaseFractions,
        state: StateSolution,
        adjoint: Option<StateSolution>,
    ) -> Result<Evaluation> {
        let compliance: f64 = self.load.iter().zip(&state.displacement).map(|(f, u)| f * u).sum();
        let (objective, inertia) = match &self.spec.objective {
            Objective::Compliance => (compliance, None),
            Objective::Mechanism { output } => {
                (-mean_compliance(&self.model, &state, std::slice::from_ref(output))?, None)
            }
            Objective::ComplianceInertia { weight, axis } => {
                let ji = moment_of_inertia(self.mesh(), self.basis(), &fr_qp, &self.spec.materials, axis);
                (compliance + weight * ji, Some(ji))
            }
        };
        let volumes = volume_fractions(&fr_qp, self.mesh(), self.basis());
        let constraints = self.constrained.iter().map(|&m| volumes[m] - self.spec.vmax[m]).collect();
        Ok(Evaluation { fr_qp, fr_nodes, state, adjoint, objective, compliance, inertia, volumes, constraints })
    }

    /// Steps 2–4 in one call.
    pub fn evaluate(&mut self, xls: &XlsField) -> Result<Evaluation> {
        let (fr_qp, fr_nodes) = self.fractions(xls);
        let (u, v) = self.solve(&fr_qp)?;
        self.measure(fr_qp, fr_nodes, u, v)
    }

    /// Solves and measures for prescribed quadrature-point fractions; nodal
    /// fractions are left uniform.
    pub fn evaluate_fractions(&mut self, fr_qp: PhaseFractions) -> Result<Evaluation> {
        let (u, v) = self.solve(&fr_qp)?;
        let nodes = PhaseFractions::uniform(fr_qp.phases(), self.mesh().n_nodes());
        self.measure(fr_qp, nodes, u, v)
    }

    /// Ordered one-directional derivatives `D_{a→b}` at nodes, indexed `a * M + b`.
    pub fn directional_derivatives(&self, eval: &Evaluation) -> Vec<Option<Vec<f64>>> {
        let su = self.model.nodal_strains(&eval.state.displacement);
        let sv = eval.adjoint.as_ref().map(|v| self.model.nodal_strains(&v.displacement));
        self.emts
            .iter()
            .map(|a| {
                a.as_ref().map(|a| match &sv {
                    Some(sv) => td_mechanism(&su, sv, a),
                    None => td_compliance(&su, a),
                })
            })
            .collect()
    }

    /// X-TD of the objective (unfiltered).
    pub fn objective_sensitivity(&self, eval: &Evaluation) -> SensitivityField {
        let td = self.directional_derivatives(eval);
        let mut sens = xtd_objective(&td, &eval.fr_nodes, self.spec.mask);
        if let Objective::ComplianceInertia { weight, axis } = &self.spec.objective {
            let ji = xtd_inertia(self.mesh(), &eval.fr_nodes, &self.spec.materials, axis);
            for (d, s) in sens.stored_mut().iter_mut().zip(ji.stored()) {
                for (a, b) in d.iter_mut().zip(s) {
                    *a += weight * b;
                }
            }
        }
        sens
    }

    /// X-TD of each volume constraint, in constraint order.
    pub fn constraint_sensitivities(&self, eval: &Evaluation) -> Vec<SensitivityField> {
        self.constrained.iter().map(|&m| xtd_volume(m, &eval.fr_nodes)).collect()
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Field of the last evaluated iteration.
    pub field: XlsField,
    pub evaluation: Evaluation,
    pub history: RunHistory,
    pub converged: bool,
}

/// Mean displacement of the output port along `t_out` when the design is
/// loaded by the input tractions with every spring removed. Positive values
/// mean the port moves the way the mechanism is asked to pull it.
pub fn free_output_motion(spec: &ProblemSpec, fr_qp: &PhaseFractions) -> Result<f64> {
    let Objective::Mechanism { output } = &spec.objective else {
        return Err(Error::Invalid("free output motion is defined for mechanism problems only".into()));
    };
    let mesh = spec.build_mesh()?;
    let dim = mesh.dim();
    let mut model = ElasticityModel::new(&mesh, &spec.materials, &[])?;
    model.assemble(fr_qp)?;
    let u = model.solve(&model.load_vector(&spec.tractions)?)?;
    let norm = output.traction.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Invalid("output traction is zero".into()));
    }
    let nodes = mesh.tagged_nodes(&output.tag)?;
    let total: f64 = nodes
        .iter()
        .map(|&n| u.at(n, dim).iter().zip(&output.traction).map(|(a, t)| a * t / norm).sum::<f64>())
        .sum();
    Ok(total / nodes.len() as f64)
}

pub fn run(spec: &ProblemSpec) -> Result<RunOutcome> {
    run_with_observer(spec, &mut Silent)
}

fn non_finite(obs: &mut dyn Observer, xls: &XlsField, what: &'static str, iteration: usize) -> Error {
    obs.abort(iteration, xls);
    Error::NonFinite { what, iteration }
}

pub fn run_with_observer(spec: &ProblemSpec, obs: &mut dyn Observer) -> Result<RunOutcome> {
    let mut problem = Problem::new(spec)?;
    let mut xls = problem.initial_field()?;
    let k = problem.constrained.len();
    let gains = vec![spec.gains; k];
    let weights = problem.diffusion.lumped_mass().to_vec();
    let mechanism = matches!(spec.objective, Objective::Mechanism { .. });
    let conv = spec.convergence;
    let mut pid = PidState::new(k);
    let mut filtered: Option<SensitivityField> = None;
    let mut history = RunHistory { constrained: problem.constrained.clone(), records: Vec::new() };
    let mut last: Option<(XlsField, Evaluation)> = None;
    let mut done = false;

    for it in 0..conv.max_iters {
        obs.stage(it, Stage::Characteristic);
        let (fr_qp, fr_nodes) = problem.fractions(&xls);

        obs.stage(it, Stage::StateSolve);
        let (u, v) = problem.solve(&fr_qp).map_err(|e| {
            obs.abort(it, &xls);
            e
        })?;

        obs.stage(it, Stage::Evaluate);
        let eval = problem.measure(fr_qp, fr_nodes, u, v)?;
        if !eval.objective.is_finite() || eval.constraints.iter().any(|g| !g.is_finite()) {
            return Err(non_finite(obs, &xls, "objective", it));
        }

        obs.stage(it, Stage::Sensitivity);
        let mut sens = problem.objective_sensitivity(&eval);
        let sens_g = problem.constraint_sensitivities(&eval);
        let (lambda, next_pid) = pid_multipliers(&eval.constraints, &pid, &gains, spec.evolution.dt)?;
        pid = next_pid;
        if sens.has_non_finite() {
            return Err(non_finite(obs, &xls, "sensitivity", it));
        }

        if mechanism {
            obs.stage(it, Stage::Filter);
            sens = match &filtered {
                Some(prev) => time_filter(prev, &sens, spec.filter)?,
                None => sens,
            };
            filtered = Some(sens.clone());
        }

        let norm = normalization_coeffs(&sens, &weights, spec.evolution.pair_sum);
        let record = IterationRecord {
            iteration: it,
            objective: eval.objective,
            constraints: eval.constraints.clone(),
            multipliers: lambda.clone(),
            c_all: norm.c_all,
            volumes: eval.volumes.clone(),
            compliance: eval.compliance,
            inertia: eval.inertia,
            partition_defect: eval.fr_qp.max_sum_deviation(),
        };
        obs.record(
            &record,
            &Snapshot {
                iteration: it,
                xls: &xls,
                fractions: &eval.fr_nodes,
                displacement: &eval.state.displacement,
                sensitivity: &sens,
            },
        );
        history.records.push(record);

        obs.stage(it, Stage::Update);
        let source = assemble_source(&sens, &sens_g, &lambda, &norm, &spec.evolution.k_ucss);
        if source.has_non_finite() {
            return Err(non_finite(obs, &xls, "reaction source", it));
        }
        let piecewise = spec.evolution.piecewise.as_ref().map(|_| &eval.fr_qp);
        let next = rde_step(&mut problem.diffusion, &xls, &source, &spec.evolution, piecewise, None)?;
        if next.has_non_finite() {
            return Err(non_finite(obs, &xls, "level-set field", it));
        }

        obs.stage(it, Stage::ConvergenceCheck);
        let stop = converged(&history, conv.window, conv.rel_tol, conv.feasibility);
        last = Some((std::mem::replace(&mut xls, next), eval));
        if stop {
            done = true;
            break;
        }
    }

    let (field, evaluation) = last.expect("at least one iteration");
    Ok(RunOutcome { field, evaluation, history, converged: done })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiphase::PhaseFractions;

    fn record(objective: f64, g: f64) -> IterationRecord {
        IterationRecord {
            iteration: 0,
            objective,
            constraints: vec![g],
            multipliers: vec![0.0],
            c_all: 1.0,
            volumes: vec![],
            compliance: objective,
            inertia: None,
            partition_defect: 0.0,
        }
    }

    fn history(values: &[(f64, f64)]) -> RunHistory {
        RunHistory { constrained: vec![1], records: values.iter().map(|&(j, g)| record(j, g)).collect() }
    }

    fn grid(n: usize) -> Mesh {
        build_structured_mesh(&MeshSpec { lengths: vec![1.0, 1.0], resolution: vec![n, n], char_length: None }).unwrap()
    }

    #[test]
    fn convergence_rule() {
        assert!(converged(&history(&[(1.0, 0.0); 21]), 20, 1e-4, 1e-3));
        assert!(!converged(&history(&[(1.0, 0.0); 20]), 20, 1e-4, 1e-3));
        let osc: Vec<_> = (0..30).map(|k| (1.0 + 0.01 * (k % 2) as f64, 0.0)).collect();
        assert!(!converged(&history(&osc), 20, 1e-4, 1e-3));
        assert!(!converged(&history(&[(1.0, 0.01); 30]), 20, 1e-4, 1e-3));
    }

    #[test]
    fn volume_fraction_examples() {
        let mesh = grid(4);
        let nq = 4;
        let pts = mesh.n_elements() * nq;
        let uni = PhaseFractions::uniform(3, pts);
        for m in 0..3 {
            assert!((volume_fraction(&uni, m, &mesh) - 1.0 / 3.0).abs() < 1e-14);
        }
        let one = PhaseFractions::from_assignment(3, &vec![2; pts]);
        assert!((volume_fraction(&one, 2, &mesh) - 1.0).abs() < 1e-14);
        assert_eq!(volume_fraction(&one, 0, &mesh), 0.0);
        let checker: Vec<usize> = (0..pts)
            .map(|p| {
                let idx = mesh.element_index(p / nq);
                (idx[0] + idx[1]) % 2
            })
            .collect();
        let fr = PhaseFractions::from_assignment(2, &checker);
        assert!((volume_fraction(&fr, 0, &mesh) - 0.5).abs() < 1e-14);
        assert!((volume_fraction(&fr, 1, &mesh) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn crossing_spread_of_lines() {
        let mesh = grid(4);
        let flat: Vec<f64> = mesh.coords().iter().map(|p| p[1] - 0.37).collect();
        assert!(crossing_spread(&mesh, &flat, 1).unwrap() < 1e-12);
        let tilted: Vec<f64> = mesh.coords().iter().map(|p| p[1] - 0.3 - 0.2 * p[0]).collect();
        let h = mesh.spacing()[1];
        let want = 0.2 * mesh.lengths()[0] / h;
        assert!((crossing_spread(&mesh, &tilted, 1).unwrap() - want).abs() < 1e-9);
        let bump: Vec<f64> = mesh.coords().iter().map(|p| p[1] - 0.5 - if p[0] > 0.6 { 0.6 } else { 0.0 }).collect();
        assert_eq!(crossing_spread(&mesh, &bump, 1), None);
    }

    #[test]
    fn interface_of_half_split() {
        let mesh = grid(4);
        let phases: Vec<usize> = (0..16).map(|e| usize::from(mesh.element_index(e)[0] >= 2)).collect();
        assert!((interface_measure(&mesh, &phases) - 1.0).abs() < 1e-14);
        let checker: Vec<usize> = (0..16).map(|e| {
            let i = mesh.element_index(e);
            (i[0] + i[1]) % 2
        }).collect();
        assert!((interface_measure(&mesh, &checker) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn interface_spread_of_steps() {
        let mesh = grid(4);
        let by_row = |f: &dyn Fn([usize; 3]) -> usize| (0..16).map(|e| f(mesh.element_index(e))).collect::<Vec<usize>>();
        let flat = by_row(&|i| if i[1] >= 2 { 2 } else { 1 });
        assert_eq!(interface_spread(&mesh, &flat, 1, 2, 1), Some(0.0));
        let step = by_row(&|i| if i[1] >= 2 + usize::from(i[0] >= 2) { 2 } else { 1 });
        assert!((interface_spread(&mesh, &step, 1, 2, 1).unwrap() - 1.0).abs() < 1e-12);
        let apart = by_row(&|i| match i[1] {
            0 => 1,
            1 => if i[0] < 2 { 2 } else { 0 },
            2 => 0,
            _ => if i[0] >= 2 { 1 } else { 2 },
        });
        assert!((interface_spread(&mesh, &apart, 1, 2, 1).unwrap() - 1.0).abs() < 1e-12);
        let bands = by_row(&|i| [1, 2, 0, 2][i[1]]);
        assert_eq!(interface_spread(&mesh, &bands, 1, 2, 1), Some(0.0));
        assert_eq!(interface_spread(&mesh, &flat, 0, 2, 1), None);
    }
}
