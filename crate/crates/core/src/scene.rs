//! Scene configuration files and multi-body scene assembly.
//!
//! A scene file is a flat, ordered `key=value` text file. Global keys come
//! first; each `body=<node-file> <ele-file>` line opens a body section whose
//! following keys configure that body. Mesh paths are resolved relative to
//! the scene file. Example:
//!
//! ```text
//! h=0.01
//! gravity=0 -9.81 0
//! frames=100
//! dhat=1e-3
//! body=floor.node floor.ele
//! material=snh
//! E=1e6
//! nu=0.3
//! fix=all
//! body=cube.node cube.ele
//! material=snh
//! E=1e5
//! nu=0.4
//! translate=0 0.5 0
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Unit};

use crate::energy::{ElasticModel, ModelKind};
use crate::error::SimError;
use crate::mesh::{load_mesh, signed_volume, SimMesh};
use crate::vecmath::Vec3;
use crate::Result;

/// Global simulation parameters.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub h: f64,
    pub gravity: Vec3,
    pub frames: usize,
    pub d_hat: f64,
    /// Friction mollifier threshold (m/s). Defaults to the value of `d_hat`.
    pub eps_v: f64,
    /// Friction coefficient.
    pub friction: f64,
    pub density: f64,
    /// Memory budget: the line search halves steps that would activate more
    /// constraints than this.
    pub max_constraints: usize,
}

impl Default for Globals {
    fn default() -> Self {
        Globals {
            h: 0.01,
            gravity: Vec3::new(0.0, -9.81, 0.0),
            frames: 1,
            d_hat: 1e-3,
            eps_v: 1e-3,
            friction: 0.0,
            density: 1000.0,
            max_constraints: 1 << 22,
        }
    }
}

impl Globals {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.d_hat > 0.0) {
            return bad(format!("dhat must be positive, got {}", self.d_hat));
        }
        if !(self.eps_v > 0.0) {
            return bad(format!("eps_v must be positive, got {}", self.eps_v));
        }
        if !(self.friction >= 0.0) {
            return bad(format!("friction must be nonnegative, got {}", self.friction));
        }
        if !(self.density > 0.0) {
            return bad(format!("density must be positive, got {}", self.density));
        }
        Ok(())
    }
}

/// Which nodes of a body are pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixSpec {
    None,
    All,
    /// Axis-aligned box in world coordinates (after `translate`).
    Box(Vec3, Vec3),
}

/// Prescribed motion for a body's pinned nodes, as a function of absolute
/// time applied to the translated rest positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Script {
    Rotate {
        point: Vec3,
        axis: Vec3,
        degrees_per_second: f64,
    },
    Translate { velocity: Vec3 },
}

impl Script {
    pub fn position(&self, rest: Vec3, t: f64) -> Vec3 {
        match *self {
            Script::Rotate { point, axis, degrees_per_second } => {
                let angle = degrees_per_second.to_radians() * t;
                let axis = Unit::new_normalize(axis);
                point + Rotation3::from_axis_angle(&axis, angle) * (rest - point)
            }
            Script::Translate { velocity } => rest + velocity * t,
        }
    }
}

/// One body as named in a scene file.
#[derive(Debug, Clone)]
pub struct BodySpec {
    pub node_file: PathBuf,
    pub ele_file: PathBuf,
    pub material: ModelKind,
    pub youngs: f64,
    pub poisson: f64,
    pub density: Option<f64>,
    pub translate: Vec3,
    pub fix: FixSpec,
    pub script: Option<Script>,
}

impl BodySpec {
    fn new(node_file: PathBuf, ele_file: PathBuf) -> BodySpec {
        BodySpec {
            node_file,
            ele_file,
            material: ModelKind::StableNeoHookean,
            youngs: 1e5,
            poisson: 0.3,
            density: None,
            translate: Vec3::zeros(),
            fix: FixSpec::None,
            script: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub globals: Globals,
    pub bodies: Vec<BodySpec>,
}

/// One body ready for assembly, with geometry already in memory.
#[derive(Debug, Clone)]
pub struct BodyInstance {
    pub positions: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub material: ModelKind,
    pub youngs: f64,
    pub poisson: f64,
    pub density: f64,
    pub fix: FixSpec,
    pub script: Option<Script>,
}

/// A fully assembled scene: one merged mesh with per-tet materials, pinned
/// nodes, and scripted node sets.
#[derive(Debug, Clone)]
pub struct Scene {
    pub globals: Globals,
    pub mesh: SimMesh,
    /// One model per tet.
    pub models: Vec<ElasticModel>,
    /// Pinned nodes (includes scripted nodes).
    pub fixed: Vec<bool>,
    /// Scripted node sets with their motions.
    pub scripts: Vec<(Script, Vec<usize>)>,
}

impl Scene {
    /// World targets at absolute time `t` for all scripted nodes.
    pub fn scripted_targets(&self, t: f64) -> Vec<(usize, Vec3)> {
        let mut out = Vec::new();
        for (script, nodes) in &self.scripts {
            for &n in nodes {
                out.push((n, script.position(self.mesh.rest_positions[n], t)));
            }
        }
        out
    }
}

fn cfg_err(path: &Path, line: usize, msg: impl Into<String>) -> SimError {
    SimError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_floats(path: &Path, line: usize, value: &str, n: usize) -> Result<Vec<f64>> {
    let f: std::result::Result<Vec<f64>, _> =
        value.split_whitespace().map(str::parse).collect();
    match f {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(cfg_err(path, line, format!("expected {n} numbers, got \"{value}\""))),
    }
}

fn vec3_of(f: &[f64]) -> Vec3 {
    Vec3::new(f[0], f[1], f[2])
}

pub fn parse_scene(path: &Path) -> Result<SceneConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut globals = Globals::default();
    let mut eps_v_given = false;
    let mut bodies: Vec<BodySpec> = Vec::new();

    for (li, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(path, li + 1, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());

        if key == "body" {
            let files: Vec<&str> = value.split_whitespace().collect();
            if files.len() != 2 {
                return Err(cfg_err(path, li + 1, "body needs \"<node-file> <ele-file>\""));
            }
            bodies.push(BodySpec::new(base.join(files[0]), base.join(files[1])));
            continue;
        }

        if let Some(body) = bodies.last_mut() {
            match key {
                "material" => {
                    body.material = match value {
                        "snh" => ModelKind::StableNeoHookean,
                        "arap" => ModelKind::Arap,
                        other => {
                            return Err(cfg_err(path, li + 1, format!("unknown material \"{other}\"")))
                        }
                    }
                }
                "E" => body.youngs = parse_floats(path, li + 1, value, 1)?[0],
                "nu" => body.poisson = parse_floats(path, li + 1, value, 1)?[0],
                "density" => body.density = Some(parse_floats(path, li + 1, value, 1)?[0]),
                "translate" => body.translate = vec3_of(&parse_floats(path, li + 1, value, 3)?),
                "fix" => {
                    body.fix = match value {
                        "all" => FixSpec::All,
                        "none" => FixSpec::None,
                        other => {
                            let rest = other.strip_prefix("box").ok_or_else(|| {
                                cfg_err(path, li + 1, format!("bad fix spec \"{other}\""))
                            })?;
                            let f = parse_floats(path, li + 1, rest, 6)?;
                            FixSpec::Box(vec3_of(&f[0..3]), vec3_of(&f[3..6]))
                        }
                    }
                }
                "rotate_script" => {
                    let f = parse_floats(path, li + 1, value, 7)?;
                    body.script = Some(Script::Rotate {
                        point: vec3_of(&f[0..3]),
                        axis: vec3_of(&f[3..6]),
                        degrees_per_second: f[6],
                    });
                }
                "translate_script" => {
                    let f = parse_floats(path, li + 1, value, 3)?;
                    body.script = Some(Script::Translate { velocity: vec3_of(&f) });
                }
                other => return Err(cfg_err(path, li + 1, format!("unknown body key \"{other}\""))),
            }
        } else {
            match key {
                "h" => globals.h = parse_floats(path, li + 1, value, 1)?[0],
                "gravity" => globals.gravity = vec3_of(&parse_floats(path, li + 1, value, 3)?),
                "frames" => {
                    globals.frames = value
                        .parse()
                        .map_err(|_| cfg_err(path, li + 1, "bad frame count"))?
                }
                "dhat" => globals.d_hat = parse_floats(path, li + 1, value, 1)?[0],
                "eps_v" => {
                    globals.eps_v = parse_floats(path, li + 1, value, 1)?[0];
                    eps_v_given = true;
                }
                "friction" => globals.friction = parse_floats(path, li + 1, value, 1)?[0],
                "density" => globals.density = parse_floats(path, li + 1, value, 1)?[0],
                "max_constraints" => {
                    globals.max_constraints = value
                        .parse()
                        .map_err(|_| cfg_err(path, li + 1, "bad constraint budget"))?
                }
                other => return Err(cfg_err(path, li + 1, format!("unknown global key \"{other}\""))),
            }
        }
    }

    if !eps_v_given {
        globals.eps_v = globals.d_hat;
    }
    globals.validate()?;
    Ok(SceneConfig { globals, bodies })
}

fn instantiate(spec: &BodySpec, default_density: f64) -> Result<BodyInstance> {
    let mesh = load_mesh(&spec.node_file, &spec.ele_file, default_density)?;
    let positions = mesh
        .rest_positions
        .iter()
        .map(|p| p + spec.translate)
        .collect();
    Ok(BodyInstance {
        positions,
        tets: mesh.tets,
        material: spec.material,
        youngs: spec.youngs,
        poisson: spec.poisson,
        density: spec.density.unwrap_or(default_density),
        fix: spec.fix,
        script: spec.script,
    })
}

/// Merge body instances into one mesh with per-tet materials, per-body mass
/// densities, pinned node sets, and scripted motions.
pub fn assemble(globals: Globals, instances: Vec<BodyInstance>) -> Result<Scene> {
    globals.validate()?;
    if instances.is_empty() {
        return Err(SimError::InvalidConfig("scene has no bodies".into()));
    }
    let mut positions = Vec::new();
    let mut tets = Vec::new();
    let mut tet_density = Vec::new();
    let mut models = Vec::new();
    let mut fixed = Vec::new();
    let mut scripts = Vec::new();

    for inst in &instances {
        if !(inst.youngs > 0.0) || !(inst.poisson >= 0.0 && inst.poisson < 0.5) {
            return Err(SimError::InvalidConfig(format!(
                "bad material parameters E={} nu={}",
                inst.youngs, inst.poisson
            )));
        }
        if !(inst.density > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "density must be positive, got {}",
                inst.density
            )));
        }
        let offset = positions.len();
        positions.extend_from_slice(&inst.positions);
        let model = ElasticModel::new(inst.material, inst.youngs, inst.poisson)?;
        for t in &inst.tets {
            tets.push([t[0] + offset, t[1] + offset, t[2] + offset, t[3] + offset]);
            tet_density.push(inst.density);
            models.push(model);
        }
        let body_fixed: Vec<usize> = match inst.fix {
            FixSpec::None => Vec::new(),
            FixSpec::All => (0..inst.positions.len()).map(|i| i + offset).collect(),
            FixSpec::Box(lo, hi) => (0..inst.positions.len())
                .filter(|&i| {
                    let p = inst.positions[i];
                    (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
                })
                .map(|i| i + offset)
                .collect(),
        };
        for &n in &body_fixed {
            while fixed.len() <= n {
                fixed.push(false);
            }
            fixed[n] = true;
        }
        if let Some(script) = inst.script {
            if !body_fixed.is_empty() {
                scripts.push((script, body_fixed));
            }
        }
    }
    fixed.resize(positions.len(), false);

    let mut mesh = SimMesh::from_parts(positions, tets, globals.density)?;
    // Re-lump masses with per-body densities.
    let mut mass = vec![0.0; mesh.node_count()];
    for (ti, tet) in mesh.tets.iter().enumerate() {
        let share = tet_density[ti] * signed_volume(&mesh.rest_positions, tet) / 4.0;
        for &v in tet {
            mass[v] += share;
        }
    }
    mesh.lumped_mass = mass;

    Ok(Scene {
        globals,
        mesh,
        models,
        fixed,
        scripts,
    })
}

/// Parse and assemble a scene file in one call.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let cfg = parse_scene(path)?;
    let default_density = cfg.globals.density;
    let instances = cfg
        .bodies
        .iter()
        .map(|b| instantiate(b, default_density))
        .collect::<Result<Vec<_>>>()?;
    assemble(cfg.globals, instances)
}

/// Programmatic meshes shared by unit, integration, and acceptance tests.
pub mod test_fixtures {
    use super::*;

    /// Axis-aligned bar of `nx x ny x nz` cubic cells with edge length
    /// `size`, each cell split into six tets, corner at the origin.
    pub fn bar_parts(nx: usize, ny: usize, nz: usize, size: f64) -> (Vec<Vec3>, Vec<[usize; 4]>) {
        let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
        let mut positions = Vec::new();
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    positions.push(Vec3::new(i as f64, j as f64, k as f64) * size);
                }
            }
        }
        let mut tets = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    // Cube corners indexed by (dx + 2 dy + 4 dz).
                    let c = [
                        id(i, j, k),
                        id(i + 1, j, k),
                        id(i, j + 1, k),
                        id(i + 1, j + 1, k),
                        id(i, j, k + 1),
                        id(i + 1, j, k + 1),
                        id(i, j + 1, k + 1),
                        id(i + 1, j + 1, k + 1),
                    ];
                    for t in [
                        [0, 1, 3, 7],
                        [0, 3, 2, 7],
                        [0, 2, 6, 7],
                        [0, 6, 4, 7],
                        [0, 4, 5, 7],
                        [0, 5, 1, 7],
                    ] {
                        let mut tet = [c[t[0]], c[t[1]], c[t[2]], c[t[3]]];
                        if signed_volume(&positions, &tet) < 0.0 {
                            tet.swap(2, 3);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        (positions, tets)
    }

    pub fn bar_mesh(nx: usize, ny: usize, nz: usize, size: f64, density: f64) -> SimMesh {
        let (positions, tets) = bar_parts(nx, ny, nz, size);
        SimMesh::from_parts(positions, tets, density).unwrap()
    }

    /// Single positively oriented tetrahedron with the given edge scale.
    pub fn tet_parts(size: f64) -> (Vec<Vec3>, Vec<[usize; 4]>) {
        (
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(size, 0.0, 0.0),
                Vec3::new(0.0, size, 0.0),
                Vec3::new(0.0, 0.0, size),
            ],
            vec![[0, 1, 2, 3]],
        )
    }

    /// Body instance helper with sane elastic defaults.
    pub fn soft_body(
        positions: Vec<Vec3>,
        tets: Vec<[usize; 4]>,
        youngs: f64,
        fix: FixSpec,
    ) -> BodyInstance {
        BodyInstance {
            positions,
            tets,
            material: ModelKind::StableNeoHookean,
            youngs,
            poisson: 0.3,
            density: 1000.0,
            fix,
            script: None,
        }
    }

    /// Translate a body instance in place.
    pub fn translated(mut inst: BodyInstance, offset: Vec3) -> BodyInstance {
        for p in &mut inst.positions {
            *p += offset;
        }
        inst
    }
}
