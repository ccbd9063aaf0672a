//! Classical multi-material level set encodings and their conversion to
//! X-LS fields.
//!
//! Each legacy kind classifies points by its own rule; [`to_xls`] builds the
//! constrained X-LS field whose exact characteristic functions reproduce
//! that classification.

use crate::multiphase::{exact_at_point, pair_count, pairs, XlsField};
use crate::output::{PointArray, VtkData};
use crate::{Error, Result};

/// Distance from a zero crossing below which a sample is not compared.
pub const ZERO_BAND: f64 = 1e-9;

/// Tolerance for PCLS values away from the integers.
pub const PCLS_TOL: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub enum LegacyRepresentation {
    /// `n` functions for `2^n` phases; `phase = Σ_b 2^(n-1-b) [φ_b < 0]`.
    ColorLs { functions: Vec<Vec<f64>> },
    /// One function with integer value `k` in phase `k`.
    Pcls { phases: usize, values: Vec<f64> },
    /// `M − 1` functions; the phase is the first `k` with `φ_k < 0`.
    Mmls { functions: Vec<Vec<f64>> },
    /// `M − 1` components and one normal per unordered pair `i < j`.
    Vvls { components: Vec<Vec<f64>>, normals: Vec<Vec<f64>> },
}

/// Normals `n_01, n_02, n_12` of the three-phase vector-valued encoding.
pub fn vvls_default_normals() -> Vec<Vec<f64>> {
    vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, -1.0]]
}

impl LegacyRepresentation {
    pub fn kind(&self) -> &'static str {
        match self {
            LegacyRepresentation::ColorLs { .. } => "colorls",
            LegacyRepresentation::Pcls { .. } => "pcls",
            LegacyRepresentation::Mmls { .. } => "mmls",
            LegacyRepresentation::Vvls { .. } => "vvls",
        }
    }

    pub fn phases(&self) -> usize {
        match self {
            LegacyRepresentation::ColorLs { functions } => 1 << functions.len(),
            LegacyRepresentation::Pcls { phases, .. } => *phases,
            LegacyRepresentation::Mmls { functions } => functions.len() + 1,
            LegacyRepresentation::Vvls { components, .. } => components.len() + 1,
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            LegacyRepresentation::ColorLs { functions } | LegacyRepresentation::Mmls { functions } => {
                functions.first().map_or(0, Vec::len)
            }
            LegacyRepresentation::Pcls { values, .. } => values.len(),
            LegacyRepresentation::Vvls { components, .. } => components.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        let same_len = |f: &[Vec<f64>]| f.iter().all(|v| v.len() == n);
        match self {
            LegacyRepresentation::ColorLs { functions } => {
                if functions.len() != 2 {
                    return Err(Error::Invalid(format!(
                        "ColorLS conversion supports 2 functions (4 phases), got {}",
                        functions.len()
                    )));
                }
                if !same_len(functions) {
                    return Err(Error::Invalid("ColorLS functions differ in length".into()));
                }
            }
            LegacyRepresentation::Pcls { phases, values } => {
                if *phases < 2 {
                    return Err(Error::Invalid("PCLS needs at least two phases".into()));
                }
                for (node, &v) in values.iter().enumerate() {
                    let k = v.round();
                    if !v.is_finite() || (v - k).abs() > PCLS_TOL || k < 0.0 || k > (*phases - 1) as f64 {
                        return Err(Error::Invalid(format!(
                            "PCLS value {v} at node {node} is not within {PCLS_TOL} of 0..{}",
                            phases - 1
                        )));
                    }
                }
            }
            LegacyRepresentation::Mmls { functions } => {
                if functions.is_empty() || !same_len(functions) {
                    return Err(Error::Invalid("MMLS needs one or more functions of equal length".into()));
                }
            }
            LegacyRepresentation::Vvls { components, normals } => {
                let m = components.len() + 1;
                if components.is_empty() || !same_len(components) {
                    return Err(Error::Invalid("VVLS needs one or more components of equal length".into()));
                }
                if normals.len() != pair_count(m) || normals.iter().any(|v| v.len() != m - 1) {
                    return Err(Error::Invalid(format!(
                        "VVLS with {m} phases needs {} normals of dimension {}",
                        pair_count(m),
                        m - 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Phase chosen by the legacy rule at `node`, or `None` when the rule
    /// assigns no phase.
    pub fn legacy_phase(&self, node: usize) -> Option<usize> {
        match self {
            LegacyRepresentation::ColorLs { functions } => {
                let mut p = 0;
                for f in functions {
                    p = 2 * p + usize::from(f[node] < 0.0);
                }
                Some(p)
            }
            LegacyRepresentation::Pcls { phases, values } => {
                let v = values[node];
                (0..*phases).find(|&k| {
                    let k = k as f64;
                    v + 0.5 - k > 0.0 && v - 0.5 - k <= 0.0
                })
            }
            LegacyRepresentation::Mmls { functions } => {
                Some(functions.iter().position(|f| f[node] < 0.0).unwrap_or(functions.len()))
            }
            LegacyRepresentation::Vvls { components, normals } => {
                let m = components.len() + 1;
                let v: Vec<f64> = components.iter().map(|c| c[node]).collect();
                // Region k: n_ik · v > 0 for every i ≠ k, with n_ik = −n_ki.
                (0..m).find(|&k| {
                    (0..m).filter(|&i| i != k).all(|i| {
                        let (a, b, s) = if i < k { (i, k, 1.0) } else { (k, i, -1.0) };
                        let n = &normals[crate::multiphase::pair_index(m, a, b)];
                        s * dot(n, &v) > 0.0
                    })
                })
            }
        }
    }

    /// Smallest distance of the legacy functions from a switching value.
    pub fn margin(&self, node: usize) -> f64 {
        match self {
            LegacyRepresentation::ColorLs { functions } | LegacyRepresentation::Mmls { functions } => {
                functions.iter().map(|f| f[node].abs()).fold(f64::INFINITY, f64::min)
            }
            LegacyRepresentation::Pcls { values, .. } => {
                let v = values[node] - 0.5;
                (v - v.round()).abs()
            }
            LegacyRepresentation::Vvls { components, normals } => {
                let v: Vec<f64> = components.iter().map(|c| c[node]).collect();
                normals.iter().map(|n| dot(n, &v).abs()).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Named arrays for the snapshot writer.
    pub fn arrays(&self) -> Vec<PointArray> {
        let many = |prefix: &str, f: &[Vec<f64>]| -> Vec<PointArray> {
            f.iter().enumerate().map(|(k, v)| PointArray::scalar(format!("{prefix}_{k}"), v.clone())).collect()
        };
        match self {
            LegacyRepresentation::ColorLs { functions } => many("colorls", functions),
            LegacyRepresentation::Pcls { values, .. } => vec![PointArray::scalar("pcls", values.clone())],
            LegacyRepresentation::Mmls { functions } => many("mmls", functions),
            LegacyRepresentation::Vvls { components, .. } => many("vvls", components),
        }
    }

    /// Reads a legacy field back from a snapshot. PCLS needs the phase count;
    /// VVLS uses the three-phase default normals.
    pub fn from_vtk(data: &VtkData, kind: &str, phases: Option<usize>) -> Result<Self> {
        let many = |prefix: &str| -> Vec<Vec<f64>> {
            let mut out = Vec::new();
            while let Some(v) = data.scalar(&format!("{prefix}_{}", out.len())) {
                out.push(v.to_vec());
            }
            out
        };
        let rep = match kind {
            "colorls" => LegacyRepresentation::ColorLs { functions: many("colorls") },
            "pcls" => {
                let values = data
                    .scalar("pcls")
                    .ok_or_else(|| Error::Format("snapshot has no `pcls` array".into()))?
                    .to_vec();
                let phases = match phases {
                    Some(p) => p,
                    None => values.iter().fold(0.0f64, |a, &v| a.max(v.round())) as usize + 1,
                };
                LegacyRepresentation::Pcls { phases, values }
            }
            "mmls" => LegacyRepresentation::Mmls { functions: many("mmls") },
            "vvls" => {
                let components = many("vvls");
                let normals = if components.len() == 2 { vvls_default_normals() } else { Vec::new() };
                LegacyRepresentation::Vvls { components, normals }
            }
            other => return Err(Error::Invalid(format!("unknown legacy representation `{other}`"))),
        };
        if rep.n_nodes() == 0 {
            return Err(Error::Format(format!("snapshot has no `{kind}` arrays")));
        }
        rep.validate()?;
        Ok(rep)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Constrained X-LS field reproducing the legacy phases. With `rescale`,
/// each pair is divided by its largest magnitude when that exceeds 1 so the
/// result satisfies the side constraint.
pub fn to_xls(rep: &LegacyRepresentation, rescale: bool) -> Result<XlsField> {
    rep.validate()?;
    let m = rep.phases();
    let n = rep.n_nodes();
    let mut x = match rep {
        LegacyRepresentation::ColorLs { functions } => {
            let (c0, c1) = (&functions[0], &functions[1]);
            // φ_20 = φ_31 = φ_21 = c0 and φ_10 = φ_32 = φ_30 = c1.
            XlsField::from_fn(4, n, |i, j, node| match (i, j) {
                (0, 1) | (0, 3) | (2, 3) => -c1[node],
                _ => -c0[node],
            })
        }
        LegacyRepresentation::Pcls { values, .. } => XlsField::from_fn(m, n, |i, _, node| values[node] - 0.5 - i as f64),
        LegacyRepresentation::Mmls { functions } => XlsField::from_fn(m, n, |i, _, node| functions[i][node]),
        LegacyRepresentation::Vvls { components, normals } => XlsField::from_fn(m, n, |i, j, node| {
            let nrm = &normals[crate::multiphase::pair_index(m, i, j)];
            nrm.iter().zip(components).map(|(a, c)| a * c[node]).sum()
        }),
    };
    if rescale {
        for v in x.stored_mut() {
            let s = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if s > 1.0 {
                v.iter_mut().for_each(|p| *p /= s);
            }
        }
        x.clamp_in_place();
    }
    Ok(x)
}

/// Phase whose exact characteristic function is 1 at `node`.
pub fn xls_phase(x: &XlsField, node: usize) -> Option<usize> {
    let m = x.phases();
    let mut out = vec![0.0; m];
    exact_at_point(m, &x.at_node(node), &mut out);
    let hits: Vec<usize> = (0..m).filter(|&k| out[k] == 1.0).collect();
    match hits.as_slice() {
        [k] => Some(*k),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquivalenceReport {
    pub checked: usize,
    /// Samples skipped for lying within [`ZERO_BAND`] of a zero crossing.
    pub skipped: usize,
    /// `(node, legacy phase, X-LS phase)` for each disagreement.
    pub mismatches: Vec<(usize, Option<usize>, Option<usize>)>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn verify_equivalence(rep: &LegacyRepresentation, converted: &XlsField, samples: &[usize]) -> EquivalenceReport {
    let mut r = EquivalenceReport::default();
    for &node in samples {
        if rep.margin(node) <= ZERO_BAND {
            r.skipped += 1;
            continue;
        }
        r.checked += 1;
        let a = rep.legacy_phase(node);
        let b = xls_phase(converted, node);
        if a != b {
            r.mismatches.push((node, a, b));
        }
    }
    r
}

/// Asserts the stored pairs cover every ordered pair antisymmetrically.
pub fn antisymmetry_defect(x: &XlsField) -> f64 {
    let m = x.phases();
    let mut worst = 0.0f64;
    for (i, j) in pairs(m) {
        for node in 0..x.n_nodes() {
            worst = worst.max((x.get(i, j, node) + x.get(j, i, node)).abs());
        }
    }
    worst
}
