//! Field, history and image writers.
//!
//! VTK files are legacy ASCII unstructured grids with point data only. The
//! reader accepts the subset the writer produces, which is enough to reload
//! X-LS snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::mesh::Mesh;
use crate::multiphase::{pair_count, pairs, PairField, PhaseFractions, XlsField};
use crate::optimizer::{IterationRecord, Observer, RunHistory, RunOutcome, Snapshot};
use crate::{Error, Result};

/// A named point-data array.
#[derive(Debug, Clone, PartialEq)]
pub enum PointArray {
    Scalar { name: String, values: Vec<f64> },
    Integer { name: String, values: Vec<i64> },
    Vector { name: String, values: Vec<[f64; 3]> },
}

impl PointArray {
    pub fn scalar(name: impl Into<String>, values: Vec<f64>) -> Self {
        PointArray::Scalar { name: name.into(), values }
    }

    pub fn integer(name: impl Into<String>, values: Vec<i64>) -> Self {
        PointArray::Integer { name: name.into(), values }
    }

    /// Packs a node-major vector field with `dim` components.
    pub fn vector(name: impl Into<String>, flat: &[f64], dim: usize) -> Self {
        let values = flat
            .chunks(dim)
            .map(|c| {
                let mut v = [0.0; 3];
                v[..dim].copy_from_slice(c);
                v
            })
            .collect();
        PointArray::Vector { name: name.into(), values }
    }

    pub fn name(&self) -> &str {
        match self {
            PointArray::Scalar { name, .. } | PointArray::Integer { name, .. } | PointArray::Vector { name, .. } => name,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PointArray::Scalar { values, .. } => values.len(),
            PointArray::Integer { values, .. } => values.len(),
            PointArray::Vector { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn num(out: &mut String, v: f64) {
    if v == 0.0 {
        out.push('0');
    } else {
        let _ = write!(out, "{v:.8e}");
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!("VTK array name `{name}` must be non-empty without whitespace")));
    }
    Ok(())
}

/// Renders a VTK legacy ASCII unstructured grid.
pub fn vtk_string(mesh: &Mesh, arrays: &[PointArray]) -> Result<String> {
    let cell_type = if mesh.dim() == 2 { 9 } else { 12 };
    render_vtk(mesh.coords(), mesh.elements(), cell_type, arrays)
}

fn render_vtk(points: &[[f64; 3]], cells: &[Vec<usize>], cell_type: u8, arrays: &[PointArray]) -> Result<String> {
    let n = points.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nxls field\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in points {
        num(&mut s, p[0]);
        s.push(' ');
        num(&mut s, p[1]);
        s.push(' ');
        num(&mut s, p[2]);
        s.push('\n');
    }
    let ne = cells.len();
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(s, "CELLS {ne} {size}");
    for e in cells {
        let _ = write!(s, "{}", e.len());
        for v in e {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{cell_type}");
    }
    if arrays.is_empty() {
        return Ok(s);
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for a in arrays {
        check_name(a.name())?;
        if a.len() != n {
            return Err(Error::Invalid(format!("array `{}` has {} values for {n} points", a.name(), a.len())));
        }
        match a {
            PointArray::Scalar { name, values } => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for &v in values {
                    num(&mut s, v);
                    s.push('\n');
                }
            }
            PointArray::Integer { name, values } => {
                let _ = writeln!(s, "SCALARS {name} int 1\nLOOKUP_TABLE default");
                for v in values {
                    let _ = writeln!(s, "{v}");
                }
            }
            PointArray::Vector { name, values } => {
                let _ = writeln!(s, "VECTORS {name} double");
                for v in values {
                    num(&mut s, v[0]);
                    s.push(' ');
                    num(&mut s, v[1]);
                    s.push(' ');
                    num(&mut s, v[2]);
                    s.push('\n');
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, arrays: &[PointArray], path: &Path) -> Result<()> {
    write_file(path, vtk_string(mesh, arrays)?.as_bytes())
}

/// Contents of a VTK file produced by [`vtk_string`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub arrays: Vec<PointArray>,
}

impl VtkData {
    /// Renders the same grid with a new set of point arrays.
    pub fn render_with(&self, arrays: &[PointArray]) -> Result<String> {
        let cell_type = self.cell_types.first().copied().unwrap_or(9);
        render_vtk(&self.points, &self.cells, cell_type, arrays)
    }

    pub fn array(&self, name: &str) -> Option<&PointArray> {
        self.arrays.iter().find(|a| a.name() == name)
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        match self.array(name)? {
            PointArray::Scalar { values, .. } => Some(values),
            _ => None,
        }
    }
}

struct Tokens<'a> {
    it: std::iter::Peekable<std::str::SplitAsciiWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.it.next().ok_or_else(|| Error::Format("unexpected end of VTK data".into()))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next()?;
        if t != word {
            return Err(Error::Format(format!("expected `{word}` in VTK data, found `{t}`")));
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::Format(format!("bad VTK number `{t}`")))
    }
}

pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut lines = text.splitn(5, '\n');
    let header = lines.next().unwrap_or("");
    if !header.starts_with("# vtk DataFile") {
        return Err(Error::Format("missing VTK header".into()));
    }
    let _title = lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(Error::Format("only ASCII VTK files are supported".into()));
    }
    let rest = lines.next().unwrap_or("").to_string() + "\n" + lines.next().unwrap_or("");
    let mut t = Tokens { it: rest.split_ascii_whitespace().peekable() };
    t.expect("DATASET")?;
    t.expect("UNSTRUCTURED_GRID")?;
    let mut data = VtkData::default();
    t.expect("POINTS")?;
    let n: usize = t.parse()?;
    t.next()?;
    for _ in 0..n {
        data.points.push([t.parse()?, t.parse()?, t.parse()?]);
    }
    t.expect("CELLS")?;
    let ne: usize = t.parse()?;
    let _size: usize = t.parse()?;
    for _ in 0..ne {
        let k: usize = t.parse()?;
        let mut c = Vec::with_capacity(k);
        for _ in 0..k {
            c.push(t.parse()?);
        }
        data.cells.push(c);
    }
    t.expect("CELL_TYPES")?;
    let _: usize = t.parse()?;
    for _ in 0..ne {
        data.cell_types.push(t.parse()?);
    }
    if t.it.peek().is_none() {
        return Ok(data);
    }
    t.expect("POINT_DATA")?;
    let np: usize = t.parse()?;
    if np != n {
        return Err(Error::Format(format!("POINT_DATA {np} does not match {n} points")));
    }
    while let Some(kind) = t.it.next() {
        match kind {
            "SCALARS" => {
                let name = t.next()?.to_string();
                let ty = t.next()?;
                let next = t.next()?;
                if next != "LOOKUP_TABLE" {
                    if next != "1" {
                        return Err(Error::Format(format!("array `{name}` must have one component")));
                    }
                    t.expect("LOOKUP_TABLE")?;
                }
                t.next()?;
                if ty == "int" {
                    let mut values = Vec::with_capacity(n);
                    for _ in 0..n {
                        values.push(t.parse()?);
                    }
                    data.arrays.push(PointArray::Integer { name, values });
                } else {
                    let mut values = Vec::with_capacity(n);
                    for _ in 0..n {
                        values.push(t.parse()?);
                    }
                    data.arrays.push(PointArray::Scalar { name, values });
                }
            }
            "VECTORS" => {
                let name = t.next()?.to_string();
                t.next()?;
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    values.push([t.parse()?, t.parse()?, t.parse()?]);
                }
                data.arrays.push(PointArray::Vector { name, values });
            }
            other => return Err(Error::Format(format!("unsupported VTK section `{other}`"))),
        }
    }
    Ok(data)
}

pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_vtk(&text)
}

pub fn pair_array_name(prefix: &str, i: usize, j: usize) -> String {
    format!("{prefix}_{i}_{j}")
}

/// One `phi_i_j` array per stored pair.
pub fn pair_arrays(prefix: &str, field: &PairField) -> Vec<PointArray> {
    pairs(field.phases())
        .map(|(i, j)| PointArray::scalar(pair_array_name(prefix, i, j), field.pair(i, j).to_vec()))
        .collect()
}

/// Arrays for a full snapshot: X-LS pairs, phase index, nodal fractions,
/// displacement and optionally the objective sensitivity.
pub fn snapshot_arrays(mesh: &Mesh, snap: &Snapshot<'_>, with_sensitivity: bool) -> Vec<PointArray> {
    let mut out = pair_arrays("phi", snap.xls);
    let phase = snap.fractions.argmax().into_iter().map(|p| p as i64).collect();
    out.push(PointArray::integer("phase", phase));
    for m in 0..snap.fractions.phases() {
        out.push(PointArray::scalar(format!("psi_{m}"), snap.fractions.phase(m)));
    }
    if !snap.displacement.is_empty() {
        out.push(PointArray::vector("u", snap.displacement, mesh.dim()));
    }
    if with_sensitivity {
        out.extend(pair_arrays("dJ", snap.sensitivity));
    }
    out
}

/// Rebuilds an X-LS field from the `phi_i_j` arrays of a snapshot.
pub fn xls_from_vtk(data: &VtkData) -> Result<XlsField> {
    let mut m = 2;
    while data.scalar(&pair_array_name("phi", m - 1, m)).is_some() {
        m += 1;
    }
    if data.scalar(&pair_array_name("phi", 0, 1)).is_none() {
        return Err(Error::Invalid("snapshot has no `phi_0_1` array".into()));
    }
    let n = data.points.len();
    let mut x = XlsField::zeros(m, n);
    for (i, j) in pairs(m) {
        let name = pair_array_name("phi", i, j);
        let v = data.scalar(&name).ok_or_else(|| Error::Invalid(format!("snapshot is missing `{name}`")))?;
        x.pair_mut(i, j).copy_from_slice(v);
    }
    debug_assert_eq!(x.stored().len(), pair_count(m));
    Ok(x)
}

/// CSV history: iteration, objective, `g_k`, `λ_k`, C_ALL.
pub fn history_csv(history: &RunHistory) -> String {
    let mut s = String::from("iteration,objective");
    for m in &history.constrained {
        let _ = write!(s, ",g_{m}");
    }
    for m in &history.constrained {
        let _ = write!(s, ",lambda_{m}");
    }
    s.push_str(",c_all\n");
    for r in &history.records {
        let _ = write!(s, "{},{:.10e}", r.iteration, r.objective);
        for g in &r.constraints {
            let _ = write!(s, ",{g:.10e}");
        }
        for l in &r.multipliers {
            let _ = write!(s, ",{l:.10e}");
        }
        let _ = writeln!(s, ",{:.10e}", r.c_all);
    }
    s
}

pub fn write_history(history: &RunHistory, path: &Path) -> Result<()> {
    write_file(path, history_csv(history).as_bytes())
}

/// Material colors: gray, red, blue, yellow, green, light blue, orange,
/// pink, purple.
pub const PALETTE: [[u8; 3]; 9] = [
    [128, 128, 128],
    [220, 30, 30],
    [30, 60, 220],
    [240, 220, 30],
    [40, 170, 60],
    [120, 200, 240],
    [245, 150, 30],
    [245, 150, 200],
    [130, 50, 160],
];

/// Binary PPM with one pixel per cell, colored by the dominant phase. For
/// 3D meshes the given z layer is drawn.
pub fn raster_ppm(mesh: &Mesh, cell_fractions: &PhaseFractions, palette: &[[u8; 3]], layer: usize) -> Result<Vec<u8>> {
    if cell_fractions.len() != mesh.n_elements() {
        return Err(Error::Invalid(format!(
            "raster needs one fraction set per cell ({}), got {}",
            mesh.n_elements(),
            cell_fractions.len()
        )));
    }
    if cell_fractions.phases() > palette.len() {
        return Err(Error::Invalid(format!("palette has {} colors for {} phases", palette.len(), cell_fractions.phases())));
    }
    let [nx, ny, nz] = mesh.cells();
    if layer >= nz.max(1) {
        return Err(Error::Invalid(format!("layer {layer} outside 0..{}", nz.max(1))));
    }
    let phase = cell_fractions.argmax();
    let mut out = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    for row in (0..ny).rev() {
        for col in 0..nx {
            let e = mesh.element_at([col, row, layer]);
            out.extend_from_slice(&palette[phase[e]]);
        }
    }
    Ok(out)
}

pub fn write_raster(mesh: &Mesh, cell_fractions: &PhaseFractions, palette: &[[u8; 3]], path: &Path) -> Result<()> {
    write_file(path, &raster_ppm(mesh, cell_fractions, palette, 0)?)
}

/// Averages quadrature-point fractions over each element.
pub fn cell_fractions(fr_qp: &PhaseFractions, nq: usize) -> PhaseFractions {
    let m = fr_qp.phases();
    let ne = fr_qp.len() / nq;
    let mut v = vec![0.0; ne * m];
    for e in 0..ne {
        for q in 0..nq {
            for (k, f) in fr_qp.point(e * nq + q).iter().enumerate() {
                v[e * m + k] += f / nq as f64;
            }
        }
    }
    PhaseFractions::new(m, v)
}

/// Observer that writes periodic snapshots and a diagnostic field on abort.
pub struct RunWriter {
    mesh: Mesh,
    dir: PathBuf,
    every: usize,
    sensitivity: bool,
    quiet: bool,
    errors: Vec<Error>,
}

impl RunWriter {
    /// `every = 0` disables periodic snapshots.
    pub fn new(mesh: Mesh, dir: impl Into<PathBuf>, every: usize) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(RunWriter { mesh, dir, every, sensitivity: false, quiet: true, errors: Vec::new() })
    }

    pub fn with_sensitivity(mut self, on: bool) -> Self {
        self.sensitivity = on;
        self
    }

    /// Prints one progress line per iteration unless quiet.
    pub fn verbose(mut self, on: bool) -> Self {
        self.quiet = !on;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// First write failure seen during the run, if any.
    pub fn take_error(&mut self) -> Option<Error> {
        if self.errors.is_empty() {
            None
        } else {
            Some(self.errors.remove(0))
        }
    }

    /// Writes `history.csv`, `final.vtk` and `final.ppm` for a finished run.
    pub fn finish(&self, outcome: &RunOutcome, nq: usize) -> Result<()> {
        write_history(&outcome.history, &self.dir.join("history.csv"))?;
        let ev = &outcome.evaluation;
        let snap = Snapshot {
            iteration: outcome.history.records.last().map_or(0, |r| r.iteration),
            xls: &outcome.field,
            fractions: &ev.fr_nodes,
            displacement: &ev.state.displacement,
            sensitivity: &outcome.field,
        };
        write_vtk(&self.mesh, &snapshot_arrays(&self.mesh, &snap, false), &self.dir.join("final.vtk"))?;
        write_raster(&self.mesh, &cell_fractions(&ev.fr_qp, nq), &PALETTE, &self.dir.join("final.ppm"))
    }
}

impl Observer for RunWriter {
    fn record(&mut self, record: &IterationRecord, snapshot: &Snapshot<'_>) {
        if !self.quiet {
            let g: Vec<String> = record.constraints.iter().map(|g| format!("{g:+.3e}")).collect();
            println!("{:5} J={:.6e} g=[{}]", record.iteration, record.objective, g.join(", "));
        }
        if self.every > 0 && record.iteration % self.every == 0 {
            let path = self.dir.join(format!("snapshot_{:05}.vtk", record.iteration));
            if let Err(e) = write_vtk(&self.mesh, &snapshot_arrays(&self.mesh, snapshot, self.sensitivity), &path) {
                self.errors.push(e);
            }
        }
    }

    fn abort(&mut self, iteration: usize, xls: &XlsField) {
        let mut arrays = pair_arrays("phi", xls);
        let phase = crate::multiphase::phase_assignment(xls).into_iter().map(|p| p as i64).collect();
        arrays.push(PointArray::integer("phase", phase));
        let path = self.dir.join(format!("abort_{iteration:05}.vtk"));
        if let Err(e) = write_vtk(&self.mesh, &arrays, &path) {
            self.errors.push(e);
        }
    }
}
