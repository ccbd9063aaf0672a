//! Declarative problem files (TOML) and the bundled preset cases.
//!
//! ```toml
//! name = "example"
//! objective = "compliance"
//!
//! [mesh]
//! lengths = [2.0, 1.0]
//! resolution = [40, 20]
//!
//! [materials]
//! catalog = [0, 1]
//! vmax = [1.0, 0.3]
//!
//! [[boundary]]
//! name = "fixed"
//! kind = "fixed"
//! min = [0.0, 0.0]
//! max = [0.0, 1.0]
//!
//! [[boundary]]
//! name = "load"
//! kind = "traction"
//! min = [2.0, 0.45]
//! max = [2.0, 0.55]
//! material = 1
//!
//! [[traction]]
//! tag = "load"
//! value = [0.0, -1.0]
//!
//! [evolution]
//! tau = 1e-3
//! ```

use serde::Deserialize;
use toml::{Table, Value};

use crate::elasticity::{Material, MaterialCatalog, RotationAxis, SpringBc, TractionBc};
use crate::evolution::{EvolutionParams, PairSum, PidGains, DEFAULT_DT};
use crate::mesh::{BoundaryKind, BoundaryTag, MeshSpec, Region};
use crate::multiphase::{pair_count, pair_index, SmoothingParams};
use crate::optimizer::{Convergence, InitialConfig, Objective, PhaseRegion, ProblemSpec};
use crate::sensitivity::DomainMask;
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    objective: RawObjective,
    mesh: RawMesh,
    materials: RawMaterials,
    #[serde(default)]
    boundary: Vec<RawBoundary>,
    #[serde(default)]
    traction: Vec<RawTraction>,
    #[serde(default)]
    spring: Vec<RawSpring>,
    mechanism: Option<RawMechanism>,
    inertia: Option<RawInertia>,
    evolution: RawEvolution,
    #[serde(default)]
    smoothing: Option<RawSmoothing>,
    #[serde(default)]
    pid: Option<RawPid>,
    #[serde(default)]
    initial: Option<RawInitial>,
    #[serde(default)]
    convergence: Option<RawConvergence>,
    #[serde(default)]
    sensitivity: Option<RawSensitivity>,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RawObjective {
    Compliance,
    Mechanism,
    CompliancePlusInertia,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    lengths: Vec<f64>,
    resolution: Vec<usize>,
    char_length: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterials {
    /// Indices into the reference table.
    catalog: Option<Vec<usize>>,
    youngs: Option<Vec<f64>>,
    poisson: Option<Vec<f64>>,
    density: Option<Vec<f64>>,
    vmax: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    name: String,
    kind: RawKind,
    min: Vec<f64>,
    max: Vec<f64>,
    material: Option<usize>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum RawKind {
    Fixed,
    Traction,
    InputPort,
    OutputPort,
    Symmetry,
    Free,
}

impl From<RawKind> for BoundaryKind {
    fn from(k: RawKind) -> Self {
        match k {
            RawKind::Fixed => BoundaryKind::Fixed,
            RawKind::Traction => BoundaryKind::Traction,
            RawKind::InputPort => BoundaryKind::InputPort,
            RawKind::OutputPort => BoundaryKind::OutputPort,
            RawKind::Symmetry => BoundaryKind::Symmetry,
            RawKind::Free => BoundaryKind::Free,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraction {
    tag: String,
    value: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpring {
    tag: String,
    /// Row-major `dim × dim` matrix.
    stiffness: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    output_tag: String,
    output_traction: Vec<f64>,
    #[serde(default = "one")]
    filter: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInertia {
    weight: f64,
    center: Vec<f64>,
    direction: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolution {
    #[serde(default = "default_dt")]
    dt: f64,
    tau: f64,
    #[serde(default = "one")]
    k_ucss: f64,
    #[serde(default)]
    pair_sum: PairSum,
    #[serde(default)]
    piecewise: bool,
    #[serde(default)]
    pair: Vec<RawPair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    phases: [usize; 2],
    tau: Option<f64>,
    aniso: Option<Vec<f64>>,
    piecewise: Option<Vec<f64>>,
    k_ucss: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSmoothing {
    width: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPid {
    kp: Option<f64>,
    kip: Option<f64>,
    kd: Option<f64>,
    kid: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default)]
    background: Option<usize>,
    #[serde(default)]
    region: Vec<RawRegion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    phase: usize,
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvergence {
    window: Option<usize>,
    rel_tol: Option<f64>,
    feasibility: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensitivity {
    mask: RawMask,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum RawMask {
    Ersatz,
    Sharp,
}

/// Parses and validates a problem file.
pub fn parse_config(text: &str) -> Result<ProblemSpec> {
    parse_config_with_overrides(text, &[])
}

/// Like [`parse_config`], after applying `key.path=value` overrides.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ProblemSpec> {
    let raw: RawConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| de_error(text, &e))?
    } else {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| de_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let merged = toml::to_string(&table).map_err(|e| Error::Format(e.to_string()))?;
        toml::from_str(&merged).map_err(|e| {
            let key = message_key(e.message()).unwrap_or_default();
            Error::Config { line: None, key, message: e.message().to_string() }
        })?
    };
    build(text, raw)
}

/// Sets `path` (dot separated) in `table` to the TOML value `value`; bare
/// words that do not parse as TOML become strings.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (path, value) = spec.split_once('=').ok_or_else(|| Error::Config {
        line: None,
        key: spec.to_string(),
        message: "override must look like key=value".into(),
    })?;
    let path = path.trim();
    let value = value.trim();
    let parsed: Value = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config {
            line: None,
            key: path.to_string(),
            message: format!("`{k}` is not a table"),
        })?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parsed);
    Ok(())
}

fn de_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map(|s| line_at(text, s.start));
    let key = message_key(e.message())
        .or_else(|| e.span().and_then(|s| key_on_line(text, s.start)))
        .unwrap_or_default();
    Error::Config { line, key, message: e.message().trim().to_string() }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn key_on_line(text: &str, offset: usize) -> Option<String> {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |p| p + 1);
    let line = text[start..].lines().next()?;
    let (k, _) = line.split_once('=')?;
    Some(k.trim().to_string())
}

fn message_key(msg: &str) -> Option<String> {
    for prefix in ["unknown field `", "missing field `", "duplicate key `"] {
        if let Some(rest) = msg.split(prefix).nth(1) {
            return rest.split('`').next().map(str::to_string);
        }
    }
    None
}

/// Line of the first `key = ...` assignment, if any.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| l.trim_start().split('=').next().map(str::trim) == Some(key)).map(|p| p + 1)
}

fn config_err(text: &str, key: &str, message: impl Into<String>) -> Error {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    Error::Config { line: line_of(text, leaf), key: key.to_string(), message: message.into() }
}

fn region(dim: usize, min: &[f64], max: &[f64]) -> std::result::Result<Region, String> {
    if min.len() != dim || max.len() != dim {
        return Err(format!("region bounds need {dim} coordinates"));
    }
    if min.iter().zip(max).any(|(a, b)| a > b || !a.is_finite() || !b.is_finite()) {
        return Err("region min must not exceed max".into());
    }
    Ok(Region::new(min, max))
}

fn build(text: &str, raw: RawConfig) -> Result<ProblemSpec> {
    let dim = raw.mesh.lengths.len();
    if dim != 2 && dim != 3 {
        return Err(config_err(text, "mesh.lengths", "mesh must have 2 or 3 lengths"));
    }
    if raw.mesh.resolution.len() != dim {
        return Err(config_err(text, "mesh.resolution", format!("resolution needs {dim} entries")));
    }
    if raw.mesh.lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(config_err(text, "mesh.lengths", "lengths must be positive"));
    }
    if raw.mesh.resolution.iter().any(|&r| r < 2) {
        return Err(config_err(text, "mesh.resolution", "at least 2 cells per axis are required"));
    }
    let mesh = MeshSpec { lengths: raw.mesh.lengths, resolution: raw.mesh.resolution, char_length: raw.mesh.char_length };

    let mats = &raw.materials;
    let mut materials = match (&mats.catalog, &mats.youngs) {
        (Some(idx), None) => {
            if mats.poisson.is_some() {
                return Err(config_err(text, "materials.poisson", "poisson is only used with youngs"));
            }
            MaterialCatalog::reference_subset(idx).map_err(|e| config_err(text, "materials.catalog", e.to_string()))?
        }
        (None, Some(e)) => {
            let nu = mats.poisson.clone().unwrap_or_else(|| vec![0.3; e.len()]);
            if nu.len() != e.len() {
                return Err(config_err(text, "materials.poisson", "poisson and youngs lengths differ"));
            }
            MaterialCatalog::new(e.iter().zip(&nu).map(|(&e, &n)| Material::new(e, n)).collect())
                .map_err(|e| config_err(text, "materials.youngs", e.to_string()))?
        }
        _ => return Err(config_err(text, "materials.catalog", "give exactly one of `catalog` or `youngs`")),
    };
    let phases = materials.len();
    if let Some(rho) = &mats.density {
        materials.set_densities(rho).map_err(|e| config_err(text, "materials.density", e.to_string()))?;
    }
    if mats.vmax.len() != phases {
        return Err(config_err(text, "materials.vmax", format!("vmax needs {phases} entries")));
    }
    for &v in &mats.vmax {
        if !(v > 0.0 && v <= 1.0) {
            return Err(config_err(text, "materials.vmax", format!("vmax entry {v} is outside (0, 1]")));
        }
    }

    let mut tags = Vec::new();
    for b in &raw.boundary {
        let r = region(dim, &b.min, &b.max).map_err(|m| config_err(text, "boundary.min", m))?;
        let mut t = BoundaryTag::new(b.name.clone(), b.kind.into(), r);
        if let Some(p) = b.material {
            if p >= phases {
                return Err(config_err(text, "boundary.material", format!("phase {p} does not exist")));
            }
            t = t.with_material(p);
        }
        tags.push(t);
    }
    let tractions: Vec<TractionBc> = raw.traction.iter().map(|t| TractionBc::new(t.tag.clone(), &t.value)).collect();
    for t in &tractions {
        if t.traction.len() != dim {
            return Err(config_err(text, "traction.value", format!("traction needs {dim} components")));
        }
    }
    let springs: Vec<SpringBc> =
        raw.spring.iter().map(|s| SpringBc { tag: s.tag.clone(), stiffness: s.stiffness.clone() }).collect();
    for s in &springs {
        if s.stiffness.len() != dim * dim {
            return Err(config_err(text, "spring.stiffness", format!("stiffness needs {} entries", dim * dim)));
        }
    }

    let mut filter = 1.0;
    let objective = match raw.objective {
        RawObjective::Compliance => {
            if raw.mechanism.is_some() || raw.inertia.is_some() {
                return Err(config_err(text, "objective", "compliance objective takes no [mechanism] or [inertia]"));
            }
            Objective::Compliance
        }
        RawObjective::Mechanism => {
            let m = raw.mechanism.as_ref().ok_or_else(|| config_err(text, "mechanism", "missing [mechanism] table"))?;
            if m.output_traction.len() != dim {
                return Err(config_err(text, "mechanism.output_traction", format!("needs {dim} components")));
            }
            if !(m.filter > 0.0 && m.filter <= 1.0) {
                return Err(config_err(text, "mechanism.filter", "filter must lie in (0, 1]"));
            }
            filter = m.filter;
            Objective::Mechanism { output: TractionBc::new(m.output_tag.clone(), &m.output_traction) }
        }
        RawObjective::CompliancePlusInertia => {
            let i = raw.inertia.as_ref().ok_or_else(|| config_err(text, "inertia", "missing [inertia] table"))?;
            if !(i.weight >= 0.0) {
                return Err(config_err(text, "inertia.weight", "weight must be non-negative"));
            }
            if i.center.len() != 3 || i.direction.len() != 3 {
                return Err(config_err(text, "inertia.center", "axis center and direction need 3 components"));
            }
            let axis = RotationAxis {
                center: [i.center[0], i.center[1], i.center[2]],
                direction: [i.direction[0], i.direction[1], i.direction[2]],
            };
            axis.validate().map_err(|e| config_err(text, "inertia.direction", e.to_string()))?;
            Objective::ComplianceInertia { weight: i.weight, axis }
        }
    };

    let ev = &raw.evolution;
    let n = pair_count(phases);
    let mut evolution = EvolutionParams::isotropic(phases, ev.tau);
    evolution.dt = ev.dt;
    evolution.k_ucss = vec![ev.k_ucss; n];
    evolution.pair_sum = ev.pair_sum;
    if ev.piecewise {
        evolution.piecewise = Some(vec![[1.0; 3]; n]);
    }
    for p in &ev.pair {
        let [i, j] = p.phases;
        if i == j || i >= phases || j >= phases {
            return Err(config_err(text, "evolution.pair.phases", format!("invalid phase pair ({i}, {j})")));
        }
        let slot = pair_index(phases, i.min(j), i.max(j));
        if let Some(t) = p.tau {
            evolution.tau[slot] = t;
        }
        if let Some(k) = p.k_ucss {
            evolution.k_ucss[slot] = k;
        }
        if let Some(a) = &p.aniso {
            evolution.aniso[slot] = axis_triple(a, dim).map_err(|m| config_err(text, "evolution.pair.aniso", m))?;
        }
        if let Some(a) = &p.piecewise {
            let t = axis_triple(a, dim).map_err(|m| config_err(text, "evolution.pair.piecewise", m))?;
            match evolution.piecewise.as_mut() {
                Some(pw) => pw[slot] = t,
                None => {
                    return Err(config_err(
                        text,
                        "evolution.pair.piecewise",
                        "set `piecewise = true` in [evolution] to use piecewise factors",
                    ))
                }
            }
        }
    }
    evolution.validate(phases).map_err(|e| config_err(text, "evolution", e.to_string()))?;

    let mut smoothing = SmoothingParams::default();
    if let Some(s) = &raw.smoothing {
        smoothing.width = s.width.unwrap_or(smoothing.width);
        smoothing.epsilon = s.epsilon.unwrap_or(smoothing.epsilon);
        if !smoothing.is_valid() {
            return Err(config_err(text, "smoothing.width", "width and epsilon must be positive"));
        }
    }
    let mut gains = PidGains::default();
    if let Some(p) = &raw.pid {
        gains.kp = p.kp.unwrap_or(gains.kp);
        gains.kip = p.kip.unwrap_or(gains.kip);
        gains.kd = p.kd.unwrap_or(gains.kd);
        gains.kid = p.kid.unwrap_or(gains.kid);
    }
    let initial = match &raw.initial {
        None => InitialConfig::Zero,
        Some(i) if i.region.is_empty() && i.background.is_none() => InitialConfig::Zero,
        Some(i) => {
            let background = i.background.unwrap_or(0);
            let mut regions = Vec::new();
            for r in &i.region {
                if r.phase >= phases {
                    return Err(config_err(text, "initial.region.phase", format!("phase {} does not exist", r.phase)));
                }
                let reg = region(dim, &r.min, &r.max).map_err(|m| config_err(text, "initial.region.min", m))?;
                regions.push(PhaseRegion { phase: r.phase, region: reg });
            }
            if background >= phases {
                return Err(config_err(text, "initial.background", format!("phase {background} does not exist")));
            }
            InitialConfig::Regions { background, regions }
        }
    };
    let mut convergence = Convergence::default();
    if let Some(c) = &raw.convergence {
        convergence.window = c.window.unwrap_or(convergence.window);
        convergence.rel_tol = c.rel_tol.unwrap_or(convergence.rel_tol);
        convergence.feasibility = c.feasibility.unwrap_or(convergence.feasibility);
        convergence.max_iters = c.max_iters.unwrap_or(convergence.max_iters);
    }
    let mask = match raw.sensitivity.map(|s| s.mask) {
        Some(RawMask::Sharp) => DomainMask::Sharp,
        _ => DomainMask::Ersatz,
    };

    let spec = ProblemSpec {
        name: raw.name.unwrap_or_else(|| "problem".into()),
        objective,
        mesh,
        tags,
        materials,
        vmax: mats.vmax.clone(),
        tractions,
        springs,
        evolution,
        smoothing,
        gains,
        initial,
        convergence,
        filter,
        mask,
    };
    spec.validate().map_err(|e| match e {
        Error::Mesh(m) => config_err(text, "boundary", m.to_string()),
        other => Error::Config { line: None, key: String::new(), message: other.to_string() },
    })?;
    Ok(spec)
}

fn axis_triple(v: &[f64], dim: usize) -> std::result::Result<[f64; 3], String> {
    if v.len() != dim {
        return Err(format!("needs {dim} components"));
    }
    let mut out = [1.0; 3];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

macro_rules! presets {
    ($($n:literal),*) => {
        &[$((concat!("case", $n), include_str!(concat!("../presets/case", $n, ".toml")))),*]
    };
}

/// Bundled cases as `(name, toml text)`.
pub static PRESETS: &[(&str, &str)] = presets!(
    "1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16", "17", "18", "19", "20",
    "21", "22", "23", "24", "25", "26", "27", "28", "29", "30"
);

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled case with optional overrides.
pub fn preset(name: &str, overrides: &[String]) -> Result<ProblemSpec> {
    let text = preset_text(name).ok_or_else(|| Error::Config {
        line: None,
        key: String::new(),
        message: format!("unknown preset `{name}`"),
    })?;
    parse_config_with_overrides(text, overrides)
}
