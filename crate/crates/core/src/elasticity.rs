//! Static linear elasticity on the ersatz material mixture.
//!
//! The stiffness tensor at each quadrature point is `Σ_m f_m C^(m)`, where
//! the fractions come from [`crate::multiphase::ersatz_at_quadrature`].
//! 2D problems are plane stress with unit thickness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::ElementBasis;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, Mesh};
use crate::multiphase::PhaseFractions;
use crate::sparse::{conjugate_gradient, norm, reverse_cuthill_mckee, CsrMatrix, SkylineCholesky};

/// Young's moduli (GPa) of the nine reference materials; material 0 is the
/// soft stand-in for void.
pub const REFERENCE_MODULI_GPA: [f64; 9] = [0.1, 200.0, 100.0, 150.0, 175.0, 125.0, 75.0, 50.0, 25.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Young's modulus in Pa.
    pub youngs: f64,
    pub poisson: f64,
    /// Mass density in kg/m³.
    #[serde(default)]
    pub density: f64,
}

impl Material {
    pub fn new(youngs: f64, poisson: f64) -> Self {
        Material { youngs, poisson, density: 0.0 }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs / (2.0 * (1.0 + self.poisson))
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.youngs / (3.0 * (1.0 - 2.0 * self.poisson))
    }

    /// Constitutive matrix in Voigt notation with engineering shear strains,
    /// ordered `xx, yy, xy` (2D) or `xx, yy, zz, yz, xz, xy` (3D).
    pub fn voigt(&self, dim: usize) -> Vec<f64> {
        let (e, nu) = (self.youngs, self.poisson);
        if dim == 2 {
            let c = e / (1.0 - nu * nu);
            vec![c, c * nu, 0.0, c * nu, c, 0.0, 0.0, 0.0, c * (1.0 - nu) / 2.0]
        } else {
            let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
            let mu = self.shear_modulus();
            let mut d = vec![0.0; 36];
            for i in 0..3 {
                for j in 0..3 {
                    d[i * 6 + j] = lambda + if i == j { 2.0 * mu } else { 0.0 };
                }
                d[(i + 3) * 6 + i + 3] = mu;
            }
            d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialCatalog {
    materials: Vec<Material>,
}

impl MaterialCatalog {
    pub fn new(materials: Vec<Material>) -> Result<Self> {
        if materials.len() < 2 {
            return Err(Error::Material("at least two materials are required".into()));
        }
        for (m, mat) in materials.iter().enumerate() {
            if !(mat.youngs > 0.0 && mat.youngs.is_finite()) {
                return Err(Error::Material(format!("material {m}: Young's modulus must be positive")));
            }
            if !(mat.poisson > -1.0 && mat.poisson < 0.5) {
                return Err(Error::Material(format!("material {m}: Poisson ratio must lie in (-1, 0.5)")));
            }
            if !(mat.density >= 0.0 && mat.density.is_finite()) {
                return Err(Error::Material(format!("material {m}: density must be non-negative")));
            }
        }
        Ok(MaterialCatalog { materials })
    }

    /// The nine reference materials, Poisson ratio 0.3, zero density.
    pub fn reference() -> Self {
        MaterialCatalog {
            materials: REFERENCE_MODULI_GPA.iter().map(|e| Material::new(e * 1e9, 0.3)).collect(),
        }
    }

    /// Picks materials of the reference set by index, in the given order.
    pub fn reference_subset(indices: &[usize]) -> Result<Self> {
        let all = Self::reference();
        let mut v = Vec::with_capacity(indices.len());
        for &i in indices {
            v.push(*all.materials.get(i).ok_or_else(|| Error::Material(format!("no reference material {i}")))?);
        }
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn get(&self, m: usize) -> &Material {
        &self.materials[m]
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn densities(&self) -> Vec<f64> {
        self.materials.iter().map(|m| m.density).collect()
    }

    pub fn set_densities(&mut self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.materials.len() {
            return Err(Error::Material(format!("{} densities for {} materials", rho.len(), self.materials.len())));
        }
        for (m, &r) in self.materials.iter_mut().zip(rho) {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Material("density must be non-negative".into()));
            }
            m.density = r;
        }
        Ok(())
    }

    /// Multiplies every Young's modulus by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        MaterialCatalog {
            materials: self.materials.iter().map(|m| Material { youngs: m.youngs * factor, ..*m }).collect(),
        }
    }
}

/// Constant traction (N/m² in 3D, N/m in 2D with unit thickness) on a tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionBc {
    pub tag: String,
    pub traction: Vec<f64>,
}

impl TractionBc {
    pub fn new(tag: impl Into<String>, traction: &[f64]) -> Self {
        TractionBc { tag: tag.into(), traction: traction.to_vec() }
    }
}

/// Distributed spring on a port: the facet resists displacement with
/// stiffness `k` per unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringBc {
    pub tag: String,
    /// Row-major `dim × dim` stiffness matrix.
    pub stiffness: Vec<f64>,
}

impl SpringBc {
    /// Spring acting only along the x axis.
    pub fn axial(tag: impl Into<String>, kxx: f64, dim: usize) -> Self {
        let mut stiffness = vec![0.0; dim * dim];
        stiffness[0] = kxx;
        SpringBc { tag: tag.into(), stiffness }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.stiffness.len() != dim * dim {
            return Err(Error::Invalid(format!("spring on `{}` needs a {dim}x{dim} matrix", self.tag)));
        }
        for i in 0..dim {
            if self.stiffness[i * dim + i] < 0.0 {
                return Err(Error::Invalid(format!("spring on `{}` has a negative diagonal", self.tag)));
            }
            for j in 0..dim {
                let (a, b) = (self.stiffness[i * dim + j], self.stiffness[j * dim + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::Invalid(format!("spring on `{}` is not symmetric", self.tag)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Nodal displacement field, node major (`u[n * dim + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub displacement: Vec<f64>,
    pub stats: SolveStats,
}

impl StateSolution {
    pub fn at(&self, node: usize, dim: usize) -> &[f64] {
        &self.displacement[node * dim..(node + 1) * dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolver {
    Direct,
    Iterative { rel_tol: f64, max_iter: usize },
}

impl LinearSolver {
    /// Direct factorization in 2D, conjugate gradients in 3D.
    pub fn default_for(dim: usize) -> Self {
        if dim == 2 {
            LinearSolver::Direct
        } else {
            LinearSolver::Iterative { rel_tol: 1e-9, max_iter: 20_000 }
        }
    }
}

enum Prepared {
    None,
    Direct(SkylineCholesky),
    Iterative(CsrMatrix),
}

/// Reusable finite element model: sparsity pattern, per-material element
/// matrices, springs and supports are set up once; [`assemble`](Self::assemble)
/// then only mixes materials and factorizes.
pub struct ElasticityModel {
    mesh: Mesh,
    basis: ElementBasis,
    catalog: MaterialCatalog,
    dim: usize,
    ndof_e: usize,
    pattern: CsrMatrix,
    scatter: Vec<usize>,
    ke_q: Vec<Vec<f64>>,
    springs: Vec<(usize, f64)>,
    constrained: Vec<Option<f64>>,
    raw: CsrMatrix,
    perm: Vec<usize>,
    solver: LinearSolver,
    prepared: Prepared,
    warm: std::sync::Mutex<Option<Vec<f64>>>,
}

/// Strain-displacement matrix of node `a` at `q`, rows in Voigt order.
fn b_block(basis: &ElementBasis, dim: usize, q: usize, a: usize) -> Vec<f64> {
    let g = basis.grad(q, a);
    if dim == 2 {
        vec![g[0], 0.0, 0.0, g[1], g[1], g[0]]
    } else {
        vec![
            g[0], 0.0, 0.0, //
            0.0, g[1], 0.0, //
            0.0, 0.0, g[2], //
            0.0, g[2], g[1], //
            g[2], 0.0, g[0], //
            g[1], g[0], 0.0,
        ]
    }
}

/// `w_q Bᵀ D B` for every quadrature point, concatenated.
fn element_matrices(basis: &ElementBasis, dim: usize, d: &[f64]) -> Vec<f64> {
    let nen = basis.nodes();
    let ndof = nen * dim;
    let nv = if dim == 2 { 3 } else { 6 };
    let mut out = vec![0.0; basis.quad_points() * ndof * ndof];
    for q in 0..basis.quad_points() {
        let mut b = vec![0.0; nv * ndof];
        for a in 0..nen {
            let blk = b_block(basis, dim, q, a);
            for r in 0..nv {
                for k in 0..dim {
                    b[r * ndof + a * dim + k] = blk[r * dim + k];
                }
            }
        }
        let mut db = vec![0.0; nv * ndof];
        for r in 0..nv {
            for c in 0..ndof {
                db[r * ndof + c] = (0..nv).map(|s| d[r * nv + s] * b[s * ndof + c]).sum();
            }
        }
        let w = basis.weight(q);
        let ke = &mut out[q * ndof * ndof..(q + 1) * ndof * ndof];
        for i in 0..ndof {
            for j in 0..ndof {
                ke[i * ndof + j] = w * (0..nv).map(|r| b[r * ndof + i] * db[r * ndof + j]).sum::<f64>();
            }
        }
    }
    out
}

impl ElasticityModel {
    /// Supports come from the mesh tags: `Fixed` clamps every component,
    /// `Symmetry` clamps the normal component.
    pub fn new(mesh: &Mesh, catalog: &MaterialCatalog, springs: &[SpringBc]) -> Result<Self> {
        Self::with_solver(mesh, catalog, springs, LinearSolver::default_for(mesh.dim()))
    }

    pub fn with_solver(
        mesh: &Mesh,
        catalog: &MaterialCatalog,
        springs: &[SpringBc],
        solver: LinearSolver,
    ) -> Result<Self> {
        let dim = mesh.dim();
        let basis = ElementBasis::for_mesh(mesh);
        let nen = basis.nodes();
        let ndof_e = nen * dim;
        let n = mesh.n_nodes() * dim;

        let dofs = |el: &[usize]| -> Vec<usize> { el.iter().flat_map(|&v| (0..dim).map(move |k| v * dim + k)).collect() };
        let mut entries = Vec::with_capacity(mesh.n_elements() * ndof_e * ndof_e);
        for el in mesh.elements() {
            let d = dofs(el);
            for &r in &d {
                for &c in &d {
                    entries.push((r, c));
                }
            }
        }
        let pattern = CsrMatrix::from_pattern(n, entries);
        let mut scatter = Vec::with_capacity(mesh.n_elements() * ndof_e * ndof_e);
        for el in mesh.elements() {
            let d = dofs(el);
            for &r in &d {
                for &c in &d {
                    scatter.push(pattern.position(r, c).expect("pattern entry"));
                }
            }
        }

        let ke_q = catalog.materials().iter().map(|m| element_matrices(&basis, dim, &m.voigt(dim))).collect();

        let mut spring_terms = Vec::new();
        for s in springs {
            s.validate(dim)?;
            for f in mesh.tagged_facets(&s.tag)? {
                let share = f.measure / f.nodes.len() as f64;
                for &v in &f.nodes {
                    for i in 0..dim {
                        for j in 0..dim {
                            let k = s.stiffness[i * dim + j];
                            if k != 0.0 {
                                let pos = pattern.position(v * dim + i, v * dim + j).expect("nodal block");
                                spring_terms.push((pos, k * share));
                            }
                        }
                    }
                }
            }
        }

        let mut constrained = vec![None; n];
        for (f, tag) in mesh.facets().iter().zip(mesh.facet_tags()) {
            let Some(t) = tag else { continue };
            match mesh.tags()[*t].kind {
                BoundaryKind::Fixed => {
                    for &v in &f.nodes {
                        for k in 0..dim {
                            constrained[v * dim + k] = Some(0.0);
                        }
                    }
                }
                BoundaryKind::Symmetry => {
                    for &v in &f.nodes {
                        constrained[v * dim + f.axis] = Some(0.0);
                    }
                }
                _ => {}
            }
        }
        if constrained.iter().all(|c| c.is_none()) && spring_terms.is_empty() {
            return Err(Error::Invalid("no supports or springs: the elastic problem is singular".into()));
        }

        let perm = match solver {
            LinearSolver::Direct => reverse_cuthill_mckee(&pattern),
            LinearSolver::Iterative { .. } => Vec::new(),
        };
        Ok(ElasticityModel {
            mesh: mesh.clone(),
            basis,
            catalog: catalog.clone(),
            dim,
            ndof_e,
            raw: pattern.clone(),
            pattern,
            scatter,
            ke_q,
            springs: spring_terms,
            constrained,
            perm,
            solver,
            prepared: Prepared::None,
            warm: std::sync::Mutex::new(None),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn basis(&self) -> &ElementBasis {
        &self.basis
    }

    pub fn catalog(&self) -> &MaterialCatalog {
        &self.catalog
    }

    pub fn n_dofs(&self) -> usize {
        self.pattern.dim()
    }

    pub fn constrained_dofs(&self) -> &[Option<f64>] {
        &self.constrained
    }

    /// Global stiffness (springs included, supports not applied) from the
    /// last [`assemble`](Self::assemble).
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.raw
    }

    /// Mixed element matrix of element `e` for quadrature-point fractions.
    pub fn element_stiffness(&self, fr_qp: &PhaseFractions, e: usize) -> Vec<f64> {
        let nq = self.basis.quad_points();
        let sz = self.ndof_e * self.ndof_e;
        let mut ke = vec![0.0; sz];
        for q in 0..nq {
            let f = fr_qp.point(e * nq + q);
            for (m, &w) in f.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = &self.ke_q[m][q * sz..(q + 1) * sz];
                for (k, s) in ke.iter_mut().zip(src) {
                    *k += w * s;
                }
            }
        }
        ke
    }

    /// Assembles the mixed stiffness and prepares the linear solver.
    pub fn assemble(&mut self, fr_qp: &PhaseFractions) -> Result<()> {
        let nq = self.basis.quad_points();
        if fr_qp.len() != self.mesh.n_elements() * nq || fr_qp.phases() != self.catalog.len() {
            return Err(Error::Invalid(format!(
                "fractions cover {} points and {} phases; expected {} and {}",
                fr_qp.len(),
                fr_qp.phases(),
                self.mesh.n_elements() * nq,
                self.catalog.len()
            )));
        }
        let sz = self.ndof_e * self.ndof_e;
        let blocks: Vec<Vec<f64>> =
            (0..self.mesh.n_elements()).into_par_iter().map(|e| self.element_stiffness(fr_qp, e)).collect();
        let mut a = self.pattern.clone();
        {
            let vals = a.values_mut();
            for (e, ke) in blocks.iter().enumerate() {
                for (k, v) in ke.iter().enumerate() {
                    vals[self.scatter[e * sz + k]] += v;
                }
            }
            for &(pos, k) in &self.springs {
                vals[pos] += k;
            }
        }
        self.raw = a.clone();
        let mut dummy = vec![0.0; a.dim()];
        a.apply_dirichlet(&mut dummy, &self.constrained);
        self.prepared = match self.solver {
            LinearSolver::Direct => {
                Prepared::Direct(SkylineCholesky::factor(&a, &self.perm).map_err(|e| Error::solver("elastic stiffness", e))?)
            }
            LinearSolver::Iterative { .. } => Prepared::Iterative(a),
        };
        Ok(())
    }

    /// Consistent nodal forces of constant tractions on tagged facets.
    pub fn load_vector(&self, tractions: &[TractionBc]) -> Result<Vec<f64>> {
        let dim = self.dim;
        let mut f = vec![0.0; self.n_dofs()];
        for t in tractions {
            if t.traction.len() != dim {
                return Err(Error::Invalid(format!("traction on `{}` must have {dim} components", t.tag)));
            }
            for facet in self.mesh.tagged_facets(&t.tag)? {
                let share = facet.measure / facet.nodes.len() as f64;
                for &v in &facet.nodes {
                    for k in 0..dim {
                        f[v * dim + k] += t.traction[k] * share;
                    }
                }
            }
        }
        Ok(f)
    }

    /// Solves `K u = f` with the last assembled matrix; supports are zero.
    pub fn solve(&self, rhs: &[f64]) -> Result<StateSolution> {
        let mut b = rhs.to_vec();
        for (bi, c) in b.iter_mut().zip(&self.constrained) {
            if c.is_some() {
                *bi = 0.0;
            }
        }
        let (u, stats) = match &self.prepared {
            Prepared::None => return Err(Error::Invalid("solve called before assemble".into())),
            Prepared::Direct(chol) => {
                let u = chol.solve(&b).map_err(|e| Error::solver("elastic solve", e))?;
                let mut r = self.raw.mul_vec(&u);
                for ((ri, bi), c) in r.iter_mut().zip(&b).zip(&self.constrained) {
                    *ri = if c.is_some() { 0.0 } else { *ri - bi };
                }
                let bn = norm(&b);
                (u, SolveStats { iterations: 1, residual: if bn > 0.0 { norm(&r) / bn } else { 0.0 } })
            }
            Prepared::Iterative(a) => {
                let LinearSolver::Iterative { rel_tol, max_iter } = self.solver else { unreachable!() };
                let warm = self.warm.lock().expect("warm start lock").clone();
                let (u, st) = conjugate_gradient(a, &b, warm.as_deref(), rel_tol, max_iter)
                    .map_err(|e| Error::solver("elastic solve", e))?;
                (u, SolveStats { iterations: st.iterations, residual: st.residual })
            }
        };
        Ok(StateSolution { displacement: u, stats })
    }

    /// Remembers a displacement as the starting guess for iterative solves.
    pub fn set_warm_start(&self, u: Option<Vec<f64>>) {
        *self.warm.lock().expect("warm start lock") = u;
    }

    /// Symmetric strain tensor components at every quadrature point,
    /// ordered `xx, yy, zz, yz, xz, xy` (tensor, not engineering, shear).
    pub fn strains_at_quadrature(&self, u: &[f64]) -> Vec<[f64; 6]> {
        let nq = self.basis.quad_points();
        let dim = self.dim;
        let mut out = Vec::with_capacity(self.mesh.n_elements() * nq);
        for el in self.mesh.elements() {
            for q in 0..nq {
                let mut g = [[0.0; 3]; 3];
                for (a, &v) in el.iter().enumerate() {
                    let dn = self.basis.grad(q, a);
                    for i in 0..dim {
                        for j in 0..dim {
                            g[i][j] += u[v * dim + i] * dn[j];
                        }
                    }
                }
                out.push(sym(&g));
            }
        }
        out
    }

    /// Strains averaged to nodes with element-volume weights.
    pub fn nodal_strains(&self, u: &[f64]) -> Vec<[f64; 6]> {
        let qp = self.strains_at_quadrature(u);
        let nq = self.basis.quad_points();
        let mut acc = vec![[0.0; 6]; self.mesh.n_nodes()];
        let mut count = vec![0.0; self.mesh.n_nodes()];
        for (e, el) in self.mesh.elements().iter().enumerate() {
            let mut mean = [0.0; 6];
            for s in &qp[e * nq..(e + 1) * nq] {
                for k in 0..6 {
                    mean[k] += s[k] / nq as f64;
                }
            }
            for &v in el {
                for k in 0..6 {
                    acc[v][k] += mean[k];
                }
                count[v] += 1.0;
            }
        }
        for (a, c) in acc.iter_mut().zip(&count) {
            for x in a.iter_mut() {
                *x /= c;
            }
        }
        acc
    }
}

fn sym(g: &[[f64; 3]; 3]) -> [f64; 6] {
    [g[0][0], g[1][1], g[2][2], 0.5 * (g[1][2] + g[2][1]), 0.5 * (g[0][2] + g[2][0]), 0.5 * (g[0][1] + g[1][0])]
}

/// One-shot forward solve: builds the model, assembles and solves.
pub fn assemble_and_solve_state(
    mesh: &Mesh,
    catalog: &MaterialCatalog,
    fr_qp: &PhaseFractions,
    springs: &[SpringBc],
    tractions: &[TractionBc],
) -> Result<StateSolution> {
    let mut model = ElasticityModel::new(mesh, catalog, springs)?;
    model.assemble(fr_qp)?;
    let f = model.load_vector(tractions)?;
    model.solve(&f)
}

/// Adjoint of the mechanism objective: same operator, load `-t_out`.
pub fn solve_adjoint(model: &ElasticityModel, t_out: &TractionBc) -> Result<StateSolution> {
    let neg = TractionBc { tag: t_out.tag.clone(), traction: t_out.traction.iter().map(|t| -t).collect() };
    let f = model.load_vector(&[neg])?;
    model.solve(&f)
}

/// `∫ t·u` over the traction boundaries.
pub fn mean_compliance(model: &ElasticityModel, u: &StateSolution, tractions: &[TractionBc]) -> Result<f64> {
    let f = model.load_vector(tractions)?;
    Ok(f.iter().zip(&u.displacement).map(|(a, b)| a * b).sum())
}

/// `-∫ t_out·u` over the output port.
pub fn mechanism_objective(model: &ElasticityModel, u: &StateSolution, t_out: &TractionBc) -> Result<f64> {
    Ok(-mean_compliance(model, u, std::slice::from_ref(t_out))?)
}

/// Rotation axis through `center` with unit direction `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationAxis {
    pub center: [f64; 3],
    pub direction: [f64; 3],
}

impl RotationAxis {
    pub fn validate(&self) -> Result<()> {
        let n: f64 = self.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("rotation axis direction must be a unit vector (|n| = {n})")));
        }
        Ok(())
    }

    /// `‖x − n^C‖² − (x·n)²`, taken literally (the projection is of `x`,
    /// not of `x − n^C`).
    pub fn radial_factor(&self, x: &[f64; 3]) -> f64 {
        let d2: f64 = (0..3).map(|k| (x[k] - self.center[k]).powi(2)).sum();
        let xn: f64 = (0..3).map(|k| x[k] * self.direction[k]).sum();
        d2 - xn * xn
    }
}

/// Moment of inertia of the mixed density field.
pub fn moment_of_inertia(
    mesh: &Mesh,
    basis: &ElementBasis,
    fr_qp: &PhaseFractions,
    catalog: &MaterialCatalog,
    axis: &RotationAxis,
) -> f64 {
    let nq = basis.quad_points();
    let rho = catalog.densities();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        for q in 0..nq {
            let x = basis.qp_position(mesh, e, q);
            let dens: f64 = fr_qp.point(e * nq + q).iter().zip(&rho).map(|(f, r)| f * r).sum();
            total += basis.weight(q) * axis.radial_factor(&x) * dens;
        }
    }
    total
}
