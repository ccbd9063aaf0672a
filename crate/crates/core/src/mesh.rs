//! Structured quad (2D) and hex (3D) meshes over a box-shaped design domain,
//! with named boundary tags shared by the elasticity and level-set solvers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh configuration: {0}")]
    Config(String),
    #[error("boundary tag `{0}` selects no boundary facet")]
    EmptySelection(String),
    #[error("boundary tag `{new}` overlaps existing tag `{existing}`")]
    Conflict { new: String, existing: String },
    #[error("boundary tag `{0}` is defined twice")]
    DuplicateName(String),
    #[error("boundary tag `{tag}` names phase {phase}, but only {phases} phases exist")]
    BadPhase { tag: String, phase: usize, phases: usize },
    #[error("unknown boundary tag `{0}`")]
    UnknownTag(String),
}

/// Requested grid: box lengths in meters and cell counts per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub lengths: Vec<f64>,
    pub resolution: Vec<usize>,
    /// Characteristic length `L`; defaults to the longest box edge.
    #[serde(default)]
    pub char_length: Option<f64>,
}

/// Mechanical role of a tagged boundary region.
///
/// A region that only prescribes a material for the level-set fields is
/// `Free` with `BoundaryTag::material` set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Fixed,
    Traction,
    InputPort,
    OutputPort,
    /// Mirror plane: the displacement component normal to the facet is zero.
    Symmetry,
    Free,
}

/// Closed axis-aligned box used to select boundary facets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn new(min: &[f64], max: &[f64]) -> Self {
        let mut r = Region { min: [f64::NEG_INFINITY; 3], max: [f64::INFINITY; 3] };
        r.min[..min.len()].copy_from_slice(min);
        r.max[..max.len()].copy_from_slice(max);
        r
    }

    pub fn contains(&self, p: &[f64; 3], tol: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - tol && p[k] <= self.max[k] + tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTag {
    pub name: String,
    pub kind: BoundaryKind,
    pub region: Region,
    /// Phase prescribed on this boundary for the level-set fields.
    #[serde(default)]
    pub material: Option<usize>,
}

impl BoundaryTag {
    pub fn new(name: impl Into<String>, kind: BoundaryKind, region: Region) -> Self {
        BoundaryTag { name: name.into(), kind, region, material: None }
    }

    pub fn with_material(mut self, phase: usize) -> Self {
        self.material = Some(phase);
        self
    }
}

/// A boundary facet: an edge in 2D, a quadrilateral face in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub nodes: Vec<usize>,
    /// Axis of the outward normal.
    pub axis: usize,
    /// `true` when the facet lies on the maximum side of `axis`.
    pub upper: bool,
    pub measure: f64,
    pub centroid: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    cells: [usize; 3],
    lengths: [f64; 3],
    spacing: [f64; 3],
    coords: Vec<[f64; 3]>,
    elements: Vec<Vec<usize>>,
    facets: Vec<Facet>,
    char_length: f64,
    tags: Vec<BoundaryTag>,
    facet_tag: Vec<Option<usize>>,
}

/// Builds a uniform grid of bilinear quads (2D) or trilinear hexes (3D)
/// spanning `[0, lengths]`.
pub fn build_structured_mesh(spec: &MeshSpec) -> Result<Mesh, MeshError> {
    let dim = spec.lengths.len();
    if dim != 2 && dim != 3 {
        return Err(MeshError::Config(format!("dimension must be 2 or 3, got {dim}")));
    }
    if spec.resolution.len() != dim {
        return Err(MeshError::Config(format!(
            "resolution has {} entries for a {dim}D box",
            spec.resolution.len()
        )));
    }
    if spec.lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(MeshError::Config("box lengths must be positive".into()));
    }
    if spec.resolution.iter().any(|&r| r < 2) {
        return Err(MeshError::Config("resolution must be at least 2 cells per axis".into()));
    }
    let char_length = match spec.char_length {
        Some(l) if !(l > 0.0) => {
            return Err(MeshError::Config("characteristic length must be positive".into()))
        }
        Some(l) => l,
        None => spec.lengths.iter().cloned().fold(0.0, f64::max),
    };

    let mut cells = [0usize; 3];
    let mut lengths = [0.0; 3];
    let mut spacing = [1.0; 3];
    for k in 0..dim {
        cells[k] = spec.resolution[k];
        lengths[k] = spec.lengths[k];
        spacing[k] = lengths[k] / cells[k] as f64;
    }
    let np = [cells[0] + 1, cells[1] + 1, if dim == 3 { cells[2] + 1 } else { 1 }];
    let node = |i: usize, j: usize, k: usize| i + np[0] * (j + np[1] * k);

    let mut coords = Vec::with_capacity(np[0] * np[1] * np[2]);
    for k in 0..np[2] {
        for j in 0..np[1] {
            for i in 0..np[0] {
                coords.push([
                    i as f64 * spacing[0],
                    j as f64 * spacing[1],
                    if dim == 3 { k as f64 * spacing[2] } else { 0.0 },
                ]);
            }
        }
    }

    let mut elements = Vec::new();
    if dim == 2 {
        for j in 0..cells[1] {
            for i in 0..cells[0] {
                elements.push(vec![node(i, j, 0), node(i + 1, j, 0), node(i + 1, j + 1, 0), node(i, j + 1, 0)]);
            }
        }
    } else {
        for k in 0..cells[2] {
            for j in 0..cells[1] {
                for i in 0..cells[0] {
                    elements.push(vec![
                        node(i, j, k),
                        node(i + 1, j, k),
                        node(i + 1, j + 1, k),
                        node(i, j + 1, k),
                        node(i, j, k + 1),
                        node(i + 1, j, k + 1),
                        node(i + 1, j + 1, k + 1),
                        node(i, j + 1, k + 1),
                    ]);
                }
            }
        }
    }

    let mut facets = Vec::new();
    for axis in 0..dim {
        for &upper in &[false, true] {
            let fixed = if upper { cells[axis] } else { 0 };
            if dim == 2 {
                let other = 1 - axis;
                for a in 0..cells[other] {
                    let idx = |t: usize| {
                        let mut ij = [0usize; 2];
                        ij[axis] = fixed;
                        ij[other] = t;
                        node(ij[0], ij[1], 0)
                    };
                    let nodes = vec![idx(a), idx(a + 1)];
                    facets.push(make_facet(&coords, nodes, axis, upper, spacing[other]));
                }
            } else {
                let (u, v) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                for b in 0..cells[v] {
                    for a in 0..cells[u] {
                        let idx = |s: usize, t: usize| {
                            let mut ijk = [0usize; 3];
                            ijk[axis] = fixed;
                            ijk[u] = s;
                            ijk[v] = t;
                            node(ijk[0], ijk[1], ijk[2])
                        };
                        let nodes = vec![idx(a, b), idx(a + 1, b), idx(a + 1, b + 1), idx(a, b + 1)];
                        facets.push(make_facet(&coords, nodes, axis, upper, spacing[u] * spacing[v]));
                    }
                }
            }
        }
    }

    let n_facets = facets.len();
    Ok(Mesh {
        dim,
        cells,
        lengths,
        spacing,
        coords,
        elements,
        facets,
        char_length,
        tags: Vec::new(),
        facet_tag: vec![None; n_facets],
    })
}

fn make_facet(coords: &[[f64; 3]], nodes: Vec<usize>, axis: usize, upper: bool, measure: f64) -> Facet {
    let mut centroid = [0.0; 3];
    for &n in &nodes {
        for k in 0..3 {
            centroid[k] += coords[n][k] / nodes.len() as f64;
        }
    }
    Facet { nodes, axis, upper, measure, centroid }
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis (third entry is zero in 2D).
    pub fn cells(&self) -> [usize; 3] {
        let mut c = self.cells;
        if self.dim == 2 {
            c[2] = 0;
        }
        c
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn char_length(&self) -> f64 {
        self.char_length
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.dim == 2 {
            4
        } else {
            8
        }
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn node(&self, n: usize) -> &[f64; 3] {
        &self.coords[n]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e]
    }

    /// Grid index `(i, j, k)` of an element.
    pub fn element_index(&self, e: usize) -> [usize; 3] {
        let i = e % self.cells[0];
        let rest = e / self.cells[0];
        if self.dim == 2 {
            [i, rest, 0]
        } else {
            [i, rest % self.cells[1], rest / self.cells[1]]
        }
    }

    pub fn element_at(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.cells[0] * (idx[1] + self.cells[1] * if self.dim == 3 { idx[2] } else { 0 })
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let idx = self.element_index(e);
        let mut c = [0.0; 3];
        for k in 0..self.dim {
            c[k] = (idx[k] as f64 + 0.5) * self.spacing[k];
        }
        c
    }

    /// Volume (area in 2D) of one element; all elements are congruent.
    pub fn element_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    pub fn tag(&self, name: &str) -> Option<&BoundaryTag> {
        self.tags.iter().find(|t| t.name == name)
    }

    /// Tag index carried by each boundary facet; `None` means free.
    pub fn facet_tags(&self) -> &[Option<usize>] {
        &self.facet_tag
    }

    pub fn tagged_facets(&self, name: &str) -> Result<Vec<&Facet>, MeshError> {
        let t = self
            .tags
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| MeshError::UnknownTag(name.to_string()))?;
        Ok(self
            .facets
            .iter()
            .zip(&self.facet_tag)
            .filter(|(_, tag)| **tag == Some(t))
            .map(|(f, _)| f)
            .collect())
    }

    /// Sorted, deduplicated nodes of all facets carrying the tag.
    pub fn tagged_nodes(&self, name: &str) -> Result<Vec<usize>, MeshError> {
        let mut nodes: Vec<usize> = self
            .tagged_facets(name)?
            .into_iter()
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.char_length.max(self.lengths.iter().cloned().fold(0.0, f64::max))
    }

    /// Returns a copy of the mesh with `tag` applied. Fails if the region
    /// covers no boundary facet or a facet that is already tagged.
    pub fn tag_boundary(&self, tag: BoundaryTag) -> Result<Mesh, MeshError> {
        let mut m = self.clone();
        m.add_tag(tag)?;
        Ok(m)
    }

    /// In-place variant of [`tag_boundary`](Self::tag_boundary).
    pub fn add_tag(&mut self, tag: BoundaryTag) -> Result<(), MeshError> {
        if self.tags.iter().any(|t| t.name == tag.name) {
            return Err(MeshError::DuplicateName(tag.name));
        }
        let tol = self.tolerance();
        let selected: Vec<usize> = self
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.nodes.iter().all(|&n| tag.region.contains(&self.coords[n], tol)))
            .map(|(i, _)| i)
            .collect();
        if selected.is_empty() {
            return Err(MeshError::EmptySelection(tag.name));
        }
        if let Some(existing) = selected.iter().find_map(|&f| self.facet_tag[f]) {
            return Err(MeshError::Conflict { new: tag.name, existing: self.tags[existing].name.clone() });
        }
        let idx = self.tags.len();
        for f in selected {
            self.facet_tag[f] = Some(idx);
        }
        self.tags.push(tag);
        Ok(())
    }

    /// Checks that every material tag names an existing phase.
    pub fn check_phases(&self, phases: usize) -> Result<(), MeshError> {
        for t in &self.tags {
            if let Some(p) = t.material {
                if p >= phases {
                    return Err(MeshError::BadPhase { tag: t.name.clone(), phase: p, phases });
                }
            }
        }
        Ok(())
    }

    /// Lumped (row-sum) mass of each node: the share of domain volume it
    /// carries under linear interpolation.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        let share = self.element_volume() / self.nodes_per_element() as f64;
        for el in &self.elements {
            for &n in el {
                m[n] += share;
            }
        }
        m
    }

    /// True for nodes on the boundary of the box.
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let mut b = vec![false; self.n_nodes()];
        for f in &self.facets {
            for &n in &f.nodes {
                b[n] = true;
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Mesh {
        build_structured_mesh(&MeshSpec { lengths: vec![1.0, 1.0], resolution: vec![n, n], char_length: None })
            .unwrap()
    }

    #[test]
    fn counts_2d() {
        let m = square(2);
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 4);
        let m = build_structured_mesh(&MeshSpec {
            lengths: vec![1.0, 1.0],
            resolution: vec![100, 50],
            char_length: None,
        })
        .unwrap();
        assert_eq!(m.n_nodes(), 101 * 51);
    }

    #[test]
    fn counts_3d() {
        let m = build_structured_mesh(&MeshSpec {
            lengths: vec![0.05, 0.025, 0.025],
            resolution: vec![32, 16, 16],
            char_length: Some(0.025),
        })
        .unwrap();
        assert_eq!(m.n_nodes(), 9537);
        assert_eq!(m.n_elements(), 32 * 16 * 16);
        assert_eq!(m.char_length(), 0.025);
    }

    #[test]
    fn char_length_defaults_to_longest_edge() {
        let m = build_structured_mesh(&MeshSpec {
            lengths: vec![2.0, 1.0],
            resolution: vec![4, 2],
            char_length: None,
        })
        .unwrap();
        assert_eq!(m.char_length(), 2.0);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for (lengths, res) in [
            (vec![0.0, 1.0], vec![2, 2]),
            (vec![-1.0, 1.0], vec![2, 2]),
            (vec![1.0, 1.0], vec![1, 2]),
            (vec![1.0, 1.0], vec![0, 2]),
            (vec![1.0], vec![2]),
        ] {
            let r = build_structured_mesh(&MeshSpec { lengths, resolution: res, char_length: None });
            assert!(matches!(r, Err(MeshError::Config(_))));
        }
    }

    #[test]
    fn elements_are_positively_oriented() {
        let m = square(3);
        for el in m.elements() {
            let p: Vec<_> = el.iter().map(|&n| m.node(n)).collect();
            let cross = (p[1][0] - p[0][0]) * (p[3][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[3][0] - p[0][0]);
            assert!(cross > 0.0);
        }
    }

    #[test]
    fn measures_sum_to_box() {
        let m = build_structured_mesh(&MeshSpec {
            lengths: vec![2.0, 0.7],
            resolution: vec![9, 5],
            char_length: None,
        })
        .unwrap();
        let perimeter: f64 = m.facets().iter().map(|f| f.measure).sum();
        assert!((perimeter - 2.0 * (2.0 + 0.7)).abs() <= 1e-12 * perimeter);
        let area = m.element_volume() * m.n_elements() as f64;
        assert!((area - 1.4).abs() <= 1e-12 * 1.4);
        let lumped: f64 = m.lumped_mass().iter().sum();
        assert!((lumped - 1.4).abs() <= 1e-12);

        let m3 = build_structured_mesh(&MeshSpec {
            lengths: vec![1.0, 0.5, 0.3],
            resolution: vec![4, 3, 2],
            char_length: None,
        })
        .unwrap();
        let surface: f64 = m3.facets().iter().map(|f| f.measure).sum();
        let exact = 2.0 * (0.5 + 0.3 + 0.15);
        assert!((surface - exact).abs() <= 1e-12 * exact);
        let vol = m3.element_volume() * m3.n_elements() as f64;
        assert!((vol - 0.15).abs() <= 1e-12 * 0.15);
    }

    #[test]
    fn tagging_left_edge() {
        let m = square(4);
        let m = m
            .tag_boundary(BoundaryTag::new("left", BoundaryKind::Fixed, Region::new(&[0.0, 0.0], &[0.0, 1.0])))
            .unwrap();
        let facets = m.tagged_facets("left").unwrap();
        assert_eq!(facets.len(), 4);
        assert!(facets.iter().all(|f| f.axis == 0 && !f.upper));
        assert_eq!(m.tagged_nodes("left").unwrap().len(), 5);
    }

    #[test]
    fn interior_selection_is_an_error() {
        let m = square(4);
        let r = m.tag_boundary(BoundaryTag::new(
            "inside",
            BoundaryKind::Fixed,
            Region::new(&[0.5, 0.5], &[0.5, 0.5]),
        ));
        assert!(matches!(r, Err(MeshError::EmptySelection(_))));
    }

    #[test]
    fn overlapping_tags_conflict() {
        let m = square(4)
            .tag_boundary(BoundaryTag::new("a", BoundaryKind::Fixed, Region::new(&[0.0, 0.0], &[0.0, 1.0])))
            .unwrap();
        let r = m.tag_boundary(BoundaryTag::new("b", BoundaryKind::Traction, Region::new(&[0.0, 0.0], &[0.0, 0.5])));
        assert!(matches!(r, Err(MeshError::Conflict { .. })));
    }

    #[test]
    fn tags_partition_boundary() {
        let mut m = square(4);
        m.add_tag(BoundaryTag::new("left", BoundaryKind::Fixed, Region::new(&[0.0, 0.0], &[0.0, 1.0]))).unwrap();
        m.add_tag(
            BoundaryTag::new("right", BoundaryKind::Free, Region::new(&[1.0, 0.0], &[1.0, 1.0])).with_material(0),
        )
        .unwrap();
        let counts = m.facet_tags().iter().fold([0usize; 3], |mut c, t| {
            c[t.map_or(2, |i| i)] += 1;
            c
        });
        assert_eq!(counts, [4, 4, 8]);
        assert!(m.check_phases(1).is_ok());
        assert!(m.check_phases(0).is_err());
    }
}
