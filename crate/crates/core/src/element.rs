//! Bilinear / trilinear reference element with 2x2(x2) Gauss quadrature.
//!
//! Every cell of a structured mesh is the same axis-aligned box, so shape
//! function values and physical gradients are computed once per mesh.

use crate::mesh::Mesh;

const GAUSS: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Clone)]
pub struct ElementBasis {
    dim: usize,
    nen: usize,
    nq: usize,
    shape: Vec<f64>,
    grad: Vec<[f64; 3]>,
    weight: Vec<f64>,
    qp_local: Vec<[f64; 3]>,
    spacing: [f64; 3],
}

fn corner_signs(dim: usize) -> Vec<[f64; 3]> {
    let quad = [[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]];
    if dim == 2 {
        quad.to_vec()
    } else {
        let mut v = Vec::with_capacity(8);
        for z in [-1.0, 1.0] {
            for c in quad {
                v.push([c[0], c[1], z]);
            }
        }
        v
    }
}

/// Shape function values and reference derivatives at a reference point.
fn eval_reference(dim: usize, xi: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let corners = corner_signs(dim);
    let mut n = Vec::with_capacity(corners.len());
    let mut dn = Vec::with_capacity(corners.len());
    for c in &corners {
        let f: Vec<f64> = (0..dim).map(|k| 0.5 * (1.0 + c[k] * xi[k])).collect();
        let val: f64 = f.iter().product();
        let mut d = [0.0; 3];
        for k in 0..dim {
            let others: f64 = (0..dim).filter(|&m| m != k).map(|m| f[m]).product();
            d[k] = 0.5 * c[k] * others;
        }
        n.push(val);
        dn.push(d);
    }
    (n, dn)
}

impl ElementBasis {
    pub fn for_mesh(mesh: &Mesh) -> Self {
        let dim = mesh.dim();
        let mut spacing = [1.0; 3];
        spacing[..dim].copy_from_slice(mesh.spacing());
        let nen = if dim == 2 { 4 } else { 8 };
        let qp_local: Vec<[f64; 3]> = corner_signs(dim)
            .into_iter()
            .map(|c| [c[0] * GAUSS, c[1] * GAUSS, c[2] * GAUSS])
            .collect();
        let nq = qp_local.len();
        let det_j: f64 = (0..dim).map(|k| 0.5 * spacing[k]).product();
        let mut shape = Vec::with_capacity(nq * nen);
        let mut grad = Vec::with_capacity(nq * nen);
        for xi in &qp_local {
            let (n, dn) = eval_reference(dim, xi);
            shape.extend(n);
            for d in dn {
                let mut g = [0.0; 3];
                for k in 0..dim {
                    g[k] = d[k] * 2.0 / spacing[k];
                }
                grad.push(g);
            }
        }
        ElementBasis { dim, nen, nq, shape, grad, weight: vec![det_j; nq], qp_local, spacing }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.nen
    }

    pub fn quad_points(&self) -> usize {
        self.nq
    }

    /// `N_a` at quadrature point `q`.
    #[inline]
    pub fn shape(&self, q: usize, a: usize) -> f64 {
        self.shape[q * self.nen + a]
    }

    pub fn shapes_at(&self, q: usize) -> &[f64] {
        &self.shape[q * self.nen..(q + 1) * self.nen]
    }

    /// Physical gradient of `N_a` at quadrature point `q`.
    #[inline]
    pub fn grad(&self, q: usize, a: usize) -> &[f64; 3] {
        &self.grad[q * self.nen + a]
    }

    /// Quadrature weight times Jacobian determinant.
    #[inline]
    pub fn weight(&self, q: usize) -> f64 {
        self.weight[q]
    }

    /// Physical position of quadrature point `q` in element `e`.
    pub fn qp_position(&self, mesh: &Mesh, e: usize, q: usize) -> [f64; 3] {
        let origin = mesh.node(mesh.element(e)[0]);
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = origin[k] + 0.5 * (self.qp_local[q][k] + 1.0) * self.spacing[k];
        }
        p
    }

    /// Interpolates a nodal scalar field to every quadrature point, element
    /// major (`values[e * nq + q]`).
    pub fn interpolate(&self, mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(mesh.n_elements() * self.nq);
        for el in mesh.elements() {
            for q in 0..self.nq {
                let s = self.shapes_at(q);
                out.push(el.iter().zip(s).map(|(&n, w)| nodal[n] * w).sum());
            }
        }
        out
    }

    /// Integrates a quadrature-point field over the domain.
    pub fn integrate(&self, qp_values: &[f64]) -> f64 {
        qp_values.chunks(self.nq).map(|c| c.iter().zip(&self.weight).map(|(v, w)| v * w).sum::<f64>()).sum()
    }

    /// Shape functions evaluated at an arbitrary reference point.
    pub fn shape_at_reference(&self, xi: &[f64; 3]) -> Vec<f64> {
        eval_reference(self.dim, xi).0
    }
}
