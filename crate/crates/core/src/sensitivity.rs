//! Extended topological derivatives and the elastic moment tensors that
//! drive them.
//!
//! `D^T_{a→b}` is the rate of change of an objective when a small inclusion
//! of material `b` is placed in material `a`. The pair derivative combines
//! the two directions, each restricted to its own material:
//! `𝒟_ij = ψ_i D^T_{i→j} − ψ_j D^T_{j→i}`.

use rayon::prelude::*;

use crate::elasticity::{Material, MaterialCatalog, RotationAxis};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::multiphase::{pairs, PairField, PhaseFractions};

/// Nodal X-TD of one objective or constraint, one field per pair `i < j`.
pub type SensitivityField = PairField;

const DENOM_EPS: f64 = 1e-14;

/// Fourth-order elastic moment tensor for an inclusion of `b` in `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Emt {
    dim: usize,
    a: [f64; 81],
    pub from: usize,
    pub to: usize,
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Isotropic basis tensors `I`, `J` for dimension `d`.
fn basis_i(d: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let _ = d;
    0.5 * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k))
}

fn basis_j(d: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
    delta(i, j) * delta(k, l) / d as f64
}

#[inline]
fn idx(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 3 + j) * 3 + k) * 3 + l
}

impl Emt {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.a[idx(i, j, k, l)]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest violation of minor and major symmetry, relative to the norm.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = self.get(i, j, k, l);
                        worst = worst
                            .max((v - self.get(j, i, k, l)).abs())
                            .max((v - self.get(i, j, l, k)).abs())
                            .max((v - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        let n = self.norm();
        if n == 0.0 {
            worst
        } else {
            worst / n
        }
    }

    /// `e1 : A : e2` for symmetric strains stored as `xx, yy, zz, yz, xz, xy`.
    pub fn contract(&self, e1: &[f64; 6], e2: &[f64; 6]) -> f64 {
        let t1 = full(e1);
        let t2 = full(e2);
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if t1[i][j] == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        inner += self.a[idx(i, j, k, l)] * t2[k][l];
                    }
                }
                s += t1[i][j] * inner;
            }
        }
        s
    }
}

fn full(e: &[f64; 6]) -> [[f64; 3]; 3] {
    [[e[0], e[5], e[4]], [e[5], e[1], e[3]], [e[4], e[3], e[2]]]
}

/// Isotropic stiffness tensor `C_ijkl` (plane stress in 2D).
pub fn stiffness_tensor(m: &Material, dim: usize) -> [f64; 81] {
    let (e, nu) = (m.youngs, m.poisson);
    let (two_mu, lam_d) = if dim == 2 {
        // plane stress: 2μ I + (2Eν/(1-ν²)) J with J = δδ/2
        (e / (1.0 + nu), 2.0 * e * nu / (1.0 - nu * nu))
    } else {
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        (e / (1.0 + nu), 3.0 * lambda)
    };
    let mut c = [0.0; 81];
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    c[idx(i, j, k, l)] = two_mu * basis_i(dim, i, j, k, l) + lam_d * basis_j(dim, i, j, k, l);
                }
            }
        }
    }
    c
}

fn check(v: f64, a: usize, b: usize, what: &'static str) -> Result<f64> {
    if v.abs() < DENOM_EPS {
        Err(Error::DegenerateContrast { a, b, what })
    } else {
        Ok(v)
    }
}

/// Closed-form moment tensor for an inclusion of material `b` (index `to`)
/// in material `a` (index `from`); circular in 2D plane stress, spherical
/// in 3D.
pub fn emt_materials(a: &Material, b: &Material, dim: usize, from: usize, to: usize) -> Result<Emt> {
    let (ea, na) = (a.youngs, a.poisson);
    let (eb, nb) = (b.youngs, b.poisson);
    let mut t = [0.0; 81];
    if dim == 2 {
        let alpha = (1.0 + na) / (1.0 - na);
        let beta = (3.0 - na) / (1.0 + na);
        let l3 = eb / ea;
        let eta1 = (1.0 + nb) / (1.0 + na);
        let eta2 = (1.0 - nb) / (1.0 - na);
        let eta3 = (nb * (3.0 * na - 4.0) + 1.0) / (na * (3.0 * na - 4.0) + 1.0);
        let d1 = check(beta * l3 + eta1, from, to, "βΛ3 + η1")?;
        let d2 = check(alpha * l3 + eta2, from, to, "αΛ3 + η2")?;
        let ci = (1.0 + beta) * (eta1 - l3);
        let cj = (alpha - beta) * (l3 * (l3 - 2.0 * eta3) + eta1 * eta2) / d2;
        let ri = ea / (1.0 + na);
        let rj = 2.0 * ea * na / (1.0 - na * na);
        let d = 2;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut s = 0.0;
                        for p in 0..d {
                            for q in 0..d {
                                let left = ci * basis_i(d, i, j, p, q) + cj * basis_j(d, i, j, p, q);
                                let right = ri * basis_i(d, p, q, k, l) + rj * basis_j(d, p, q, k, l);
                                s += left * right;
                            }
                        }
                        t[idx(i, j, k, l)] = -s / d1;
                    }
                }
            }
        }
    } else {
        let kappa = |m: &Material| m.bulk_modulus();
        let l1 = kappa(b) / kappa(a);
        let l2 = b.shear_modulus() / a.shear_modulus();
        let z1 = (1.0 + na) / (3.0 * (1.0 - na));
        let z2 = (8.0 - 10.0 * na) / (15.0 * (1.0 - na));
        let d1 = check(1.0 + z1 * (l1 - 1.0), from, to, "1 + ζ1(Λ1 − 1)")?;
        let d2 = check(1.0 + z2 * (l2 - 1.0), from, to, "1 + ζ2(Λ2 − 1)")?;
        let cj = 3.0 * kappa(a) * (l1 - 1.0) / d1;
        let ck = 2.0 * a.shear_modulus() * (l2 - 1.0) / d2;
        let pre = 4.0 * std::f64::consts::PI / 3.0;
        let d = 3;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let bi = basis_i(d, i, j, k, l);
                        let bj = basis_j(d, i, j, k, l);
                        t[idx(i, j, k, l)] = pre * (cj * bj + ck * (bi - bj));
                    }
                }
            }
        }
    }
    Ok(Emt { dim, a: t, from, to })
}

/// Moment tensor for phases `a → b` of a catalog.
pub fn emt(a: usize, b: usize, catalog: &MaterialCatalog, dim: usize) -> Result<Emt> {
    if a == b {
        return Err(Error::Invalid(format!("moment tensor needs two distinct phases, got {a} twice")));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::Invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    emt_materials(catalog.get(a), catalog.get(b), dim, a, b)
}

/// All ordered-pair tensors, indexed `a * M + b` (diagonal entries `None`).
pub fn all_emts(catalog: &MaterialCatalog, dim: usize) -> Result<Vec<Option<Emt>>> {
    let m = catalog.len();
    let mut out = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            out.push(if a == b { None } else { Some(emt(a, b, catalog, dim)?) });
        }
    }
    Ok(out)
}

/// Topological derivative of mean compliance, `−ε(u) : A : ε(u)`, per node.
pub fn td_compliance(strain_u: &[[f64; 6]], a: &Emt) -> Vec<f64> {
    strain_u.par_iter().map(|e| -a.contract(e, e)).collect()
}

/// Topological derivative of the mechanism objective, `−ε(u) : A : ε(v)`,
/// with `v` the adjoint state.
pub fn td_mechanism(strain_u: &[[f64; 6]], strain_v: &[[f64; 6]], a: &Emt) -> Vec<f64> {
    strain_u.par_iter().zip(strain_v).map(|(e, f)| -a.contract(e, f)).collect()
}

/// How the one-directional derivatives are restricted to their material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainMask {
    /// Ersatz fractions: smooth across interfaces.
    Ersatz,
    /// 0/1 membership by largest fraction.
    Sharp,
}

fn mask_values(fr: &PhaseFractions, mask: DomainMask) -> PhaseFractions {
    match mask {
        DomainMask::Ersatz => fr.clone(),
        DomainMask::Sharp => PhaseFractions::from_assignment(fr.phases(), &fr.argmax()),
    }
}

/// Combines ordered-pair derivatives (`td[a * M + b]`, nodal) into the
/// pair field `𝒟_ij = ψ_i D_{i→j} − ψ_j D_{j→i}`.
pub fn xtd_objective(td: &[Option<Vec<f64>>], fr: &PhaseFractions, mask: DomainMask) -> SensitivityField {
    let m = fr.phases();
    let n = fr.len();
    let w = mask_values(fr, mask);
    let mut out = PairField::zeros(m, n);
    for (i, j) in pairs(m) {
        let dij = td[i * m + j].as_ref().expect("derivative for ordered pair");
        let dji = td[j * m + i].as_ref().expect("derivative for ordered pair");
        let dst = out.pair_mut(i, j);
        for p in 0..n {
            dst[p] = w.get(p, i) * dij[p] - w.get(p, j) * dji[p];
        }
    }
    out
}

/// Evaluates a single ordered pair without relying on antisymmetric storage;
/// used to cross-check [`xtd_objective`].
pub fn xtd_ordered(
    td: &[Option<Vec<f64>>],
    fr: &PhaseFractions,
    mask: DomainMask,
    i: usize,
    j: usize,
    node: usize,
) -> f64 {
    let m = fr.phases();
    let w = match mask {
        DomainMask::Ersatz => fr.point(node).to_vec(),
        DomainMask::Sharp => {
            let mut v = vec![0.0; m];
            v[fr.argmax()[node]] = 1.0;
            v
        }
    };
    w[i] * td[i * m + j].as_ref().unwrap()[node] - w[j] * td[j * m + i].as_ref().unwrap()[node]
}

/// X-TD of the volume constraint of phase `m`: `−δ_im ψ_i + δ_jm ψ_j`.
pub fn xtd_volume(m: usize, fr: &PhaseFractions) -> SensitivityField {
    let phases = fr.phases();
    let mut out = PairField::zeros(phases, fr.len());
    for (i, j) in pairs(phases) {
        if i != m && j != m {
            continue;
        }
        let dst = out.pair_mut(i, j);
        for (p, d) in dst.iter_mut().enumerate() {
            *d = if i == m { -fr.get(p, i) } else { fr.get(p, j) };
        }
    }
    out
}

/// X-TD of the moment of inertia: `r(x) (ρ_j − ρ_i)(ψ_i + ψ_j)`.
pub fn xtd_inertia(mesh: &Mesh, fr: &PhaseFractions, catalog: &MaterialCatalog, axis: &RotationAxis) -> SensitivityField {
    let phases = fr.phases();
    let rho = catalog.densities();
    let radial: Vec<f64> = mesh.coords().iter().map(|x| axis.radial_factor(x)).collect();
    let mut out = PairField::zeros(phases, fr.len());
    for (i, j) in pairs(phases) {
        let drho = rho[j] - rho[i];
        let dst = out.pair_mut(i, j);
        for (p, d) in dst.iter_mut().enumerate() {
            *d = radial[p] * drho * (fr.get(p, i) + fr.get(p, j));
        }
    }
    out
}

/// First-order low-pass filter over fictitious time:
/// `(1 − K) prev + K cur`.
pub fn time_filter(prev: &SensitivityField, cur: &SensitivityField, k: f64) -> Result<SensitivityField> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::Invalid(format!("filter coefficient must lie in (0, 1], got {k}")));
    }
    let mut out = cur.clone();
    for (o, p) in out.stored_mut().iter_mut().zip(prev.stored()) {
        for (a, b) in o.iter_mut().zip(p) {
            *a = (1.0 - k) * b + k * *a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elasticity::Material;
    use crate::mesh::{build_structured_mesh, MeshSpec};

    fn cat() -> MaterialCatalog {
        MaterialCatalog::reference()
    }

    #[test]
    fn zero_contrast_vanishes_exactly() {
        let c = cat();
        for m in c.materials() {
            for dim in [2, 3] {
                let a = emt_materials(m, m, dim, 0, 0).unwrap();
                assert_eq!(a.norm(), 0.0);
            }
        }
    }

    #[test]
    fn symmetries_on_reference_pairs() {
        let c = cat();
        for dim in [2, 3] {
            for a in 0..c.len() {
                for b in 0..c.len() {
                    if a != b {
                        let t = emt(a, b, &c, dim).unwrap();
                        assert!(t.symmetry_defect() <= 1e-10, "{a}->{b} dim {dim}");
                    }
                }
            }
        }
    }

    #[test]
    fn two_dimensional_closed_form() {
        // With I:I = I, I:J = J:I = J:J = J the printed product collapses to
        // A = −(c_I r_I I + (c_I r_J + c_J r_I + c_J r_J) J) / (βΛ3 + η1).
        let a = Material::new(200e9, 0.3);
        let b = Material::new(100e9, 0.3);
        let t = emt_materials(&a, &b, 2, 1, 2).unwrap();
        let nu: f64 = 0.3;
        let alpha = 1.3 / 0.7;
        let beta = 2.7 / 1.3;
        let l3 = 0.5;
        let (eta1, eta2, eta3) = (1.0, 1.0, 1.0);
        let ci = (1.0 + beta) * (eta1 - l3);
        let cj = (alpha - beta) * (l3 * (l3 - 2.0 * eta3) + eta1 * eta2) / (alpha * l3 + eta2);
        let ri = 200e9 / 1.3;
        let rj = 2.0 * 200e9 * nu / (1.0 - nu * nu);
        let den = beta * l3 + eta1;
        let ai = -ci * ri / den;
        let aj = -(ci * rj + cj * ri + cj * rj) / den;
        // A_1111 = ai + aj/2, A_1122 = aj/2, A_1212 = ai/2
        assert!((t.get(0, 0, 0, 0) - (ai + aj / 2.0)).abs() < 1e-6 * ai.abs());
        assert!((t.get(0, 0, 1, 1) - aj / 2.0).abs() < 1e-6 * ai.abs());
        assert!((t.get(0, 1, 0, 1) - ai / 2.0).abs() < 1e-6 * ai.abs());
        // softer inclusion: negative definite on strains
        let e = [1e-3, -3e-4, 0.0, 0.0, 0.0, 2e-4];
        assert!(t.contract(&e, &e) < 0.0);
    }

    #[test]
    fn hole_limit_matches_classical_energy_release() {
        // Uniaxial stress σ with a traction-free hole: ε:A:ε → −3σ²/E.
        let e = 200e9;
        let a = Material::new(e, 0.3);
        let b = Material::new(e * 1e-9, 0.3);
        let t = emt_materials(&a, &b, 2, 0, 1).unwrap();
        let sigma = 1e6;
        let strain = [sigma / e, -0.3 * sigma / e, 0.0, 0.0, 0.0, 0.0];
        let q = t.contract(&strain, &strain);
        assert!((q / (-3.0 * sigma * sigma / e) - 1.0).abs() < 1e-6, "{q}");
    }

    #[test]
    fn three_dimensional_closed_form() {
        let a = Material::new(200e9, 0.3);
        let b = Material::new(100e9, 0.3);
        let t = emt_materials(&a, &b, 3, 0, 1).unwrap();
        let (ka, ma) = (a.bulk_modulus(), a.shear_modulus());
        let l1 = b.bulk_modulus() / ka;
        let l2 = b.shear_modulus() / ma;
        let z1 = 1.3 / (3.0 * 0.7);
        let z2 = (8.0 - 3.0) / (15.0 * 0.7);
        let cj = 3.0 * ka * (l1 - 1.0) / (1.0 + z1 * (l1 - 1.0));
        let ck = 2.0 * ma * (l2 - 1.0) / (1.0 + z2 * (l2 - 1.0));
        let pre = 4.0 * std::f64::consts::PI / 3.0;
        // volumetric strain picks the J part, pure shear the K part
        let vol = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        assert!((t.contract(&vol, &vol) - pre * cj * 3.0).abs() < 1e-9 * (pre * cj * 3.0).abs());
        let shear = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert!((t.contract(&shear, &shear) - pre * ck * 2.0).abs() < 1e-9 * (pre * ck).abs());
    }

    #[test]
    fn contrast_direction_matters() {
        let c = cat();
        for dim in [2, 3] {
            let ab = emt(1, 2, &c, dim).unwrap();
            let ba = emt(2, 1, &c, dim).unwrap();
            let sum: f64 = (0..81).map(|k| (ab.a[k] + ba.a[k]).abs()).sum();
            assert!(sum > 1e-6 * ab.norm());
        }
    }

    #[test]
    fn degenerate_denominator_reported() {
        // βΛ3 + η1 = 0 needs Λ3 = −η1/β; reachable only with a negative modulus.
        let a = Material::new(1.0, 0.3);
        let beta = 2.7 / 1.3;
        let b = Material::new(-1.0 / beta, 0.3);
        let err = emt_materials(&a, &b, 2, 3, 4).unwrap_err();
        assert!(matches!(err, Error::DegenerateContrast { a: 3, b: 4, .. }), "{err}");
    }

    #[test]
    fn td_examples() {
        let c = cat();
        let t = emt(1, 2, &c, 2).unwrap();
        let zero = vec![[0.0; 6]; 3];
        assert!(td_compliance(&zero, &t).iter().all(|&v| v == 0.0));
        let e = [1e-3, 0.0, 0.0, 0.0, 0.0, 0.0];
        let f = [-2e-4, 5e-4, 0.0, 0.0, 0.0, 1e-4];
        let u = vec![e; 2];
        let v = vec![f; 2];
        let hand = -t.get(0, 0, 0, 0) * 1e-6;
        assert!((td_compliance(&u, &t)[0] - hand).abs() < 1e-12 * hand.abs());
        let v2: Vec<[f64; 6]> = v.iter().map(|s| s.map(|x| 2.0 * x)).collect();
        let m1 = td_mechanism(&u, &v, &t)[0];
        let m2 = td_mechanism(&u, &v2, &t)[0];
        assert!((m2 - 2.0 * m1).abs() < 1e-12 * m1.abs());
        assert_eq!(td_mechanism(&u, &u, &t), td_compliance(&u, &t));
        assert!(td_mechanism(&u, &zero[..2], &t).iter().all(|&x| x == 0.0));
    }

    fn random_setup(m: usize, n: usize, seed: u64) -> (Vec<Option<Vec<f64>>>, PhaseFractions) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let td = (0..m * m)
            .map(|k| if k / m == k % m { None } else { Some((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()) })
            .collect();
        let fr = PhaseFractions::new(
            m,
            (0..n)
                .flat_map(|_| {
                    let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let s: f64 = v.iter().sum();
                    v.into_iter().map(move |x| x / s)
                })
                .collect(),
        );
        (td, fr)
    }

    #[test]
    fn xtd_antisymmetry_cross_check() {
        let (td, fr) = random_setup(4, 100, 3);
        for mask in [DomainMask::Ersatz, DomainMask::Sharp] {
            let d = xtd_objective(&td, &fr, mask);
            for (i, j) in pairs(4) {
                for p in 0..100 {
                    let ij = xtd_ordered(&td, &fr, mask, i, j, p);
                    let ji = xtd_ordered(&td, &fr, mask, j, i, p);
                    assert_eq!(ij + ji, 0.0);
                    assert!((d.get(i, j, p) - ij).abs() < 1e-15);
                    assert!((d.get(j, i, p) - ji).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn xtd_masks() {
        let (td, _) = random_setup(3, 2, 5);
        let fr = PhaseFractions::from_assignment(3, &[0, 2]);
        let d = xtd_objective(&td, &fr, DomainMask::Sharp);
        assert_eq!(d.get(0, 1, 0), td[1].as_ref().unwrap()[0]);
        assert_eq!(d.get(0, 1, 1), 0.0);
    }

    #[test]
    fn volume_xtd_values() {
        let fr = PhaseFractions::from_assignment(3, &[0, 1, 2]);
        let g = xtd_volume(0, &fr);
        assert_eq!(g.get(0, 1, 0), -1.0);
        assert_eq!(g.get(1, 0, 0), 1.0);
        assert_eq!(g.get(1, 2, 1), 0.0);
        let g1 = xtd_volume(1, &fr);
        assert_eq!(g1.get(0, 1, 1), 1.0);
        assert!(g1.pair(0, 2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn inertia_xtd_values() {
        let mesh = build_structured_mesh(&MeshSpec { lengths: vec![1.0, 1.0], resolution: vec![10, 10], char_length: None })
            .unwrap();
        let mut c = MaterialCatalog::reference_subset(&[0, 1]).unwrap();
        c.set_densities(&[1.0, 2.0]).unwrap();
        let node = mesh.coords().iter().position(|p| (p[0] - 0.8).abs() < 1e-12 && (p[1] - 0.9).abs() < 1e-12).unwrap();
        let axis = RotationAxis { center: [0.5, 0.5, 0.0], direction: [0.0, 0.0, 1.0] };
        let fr = PhaseFractions::from_assignment(2, &vec![0; mesh.n_nodes()]);
        let d = xtd_inertia(&mesh, &fr, &c, &axis);
        assert!((d.get(0, 1, node) - 0.25).abs() < 1e-12);
        let center = mesh.coords().iter().position(|p| p[0] == 0.5 && p[1] == 0.5).unwrap();
        assert_eq!(d.get(0, 1, center), 0.0);
        c.set_densities(&[1.0, 1.0]).unwrap();
        assert!(xtd_inertia(&mesh, &fr, &c, &axis).pair(0, 1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn filter_recurrence() {
        let mut cur = PairField::zeros(2, 1);
        cur.set(0, 1, 0, 2.0);
        assert_eq!(time_filter(&PairField::zeros(2, 1), &cur, 1.0).unwrap(), cur);
        assert_eq!(time_filter(&cur, &cur, 0.3).unwrap(), cur);
        let k = 0.03;
        let mut f = PairField::zeros(2, 1);
        for n in 1..=50 {
            f = time_filter(&f, &cur, k).unwrap();
            let expect = (1.0 - (1.0 - k).powi(n)) * 2.0;
            assert!((f.get(0, 1, 0) - expect).abs() < 1e-12);
        }
        assert!(time_filter(&f, &cur, 0.0).is_err());
    }
}
