//! Tetrahedral mesh loading, validation, surface extraction, and mass lumping.
//!
//! Mesh files use plain-text TetGen-style semantics: a `.node` file whose
//! first line is `N 3` followed by `idx x y z` rows, and a `.ele` file whose
//! first line is `T 4` followed by `idx i j k l` rows with 0-based node
//! indices. Elements must have positive signed rest volume; inverted elements
//! are rejected rather than repaired.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::SimError;
use crate::vecmath::Vec3;
use crate::Result;

/// Rest geometry and topology of the simulated solids.
///
/// Read-only after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct SimMesh {
    pub rest_positions: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    /// Boundary faces (referenced by exactly one tet), oriented outward.
    pub surface_tris: Vec<[usize; 3]>,
    /// Unique undirected edges of `surface_tris`, stored with `e[0] < e[1]`.
    pub surface_edges: Vec<[usize; 2]>,
    /// Per-node lumped mass (kg). Each tet distributes rho*vol/4 to its nodes.
    pub lumped_mass: Vec<f64>,
    /// Per-node sorted list of topologically connected nodes (no self entry).
    pub adjacency: Vec<Vec<usize>>,
}

impl SimMesh {
    pub fn node_count(&self) -> usize {
        self.rest_positions.len()
    }

    /// Build a mesh from raw node positions and tets, running full validation
    /// and surface/adjacency extraction. Masses are lumped with `density`.
    pub fn from_parts(positions: Vec<Vec3>, tets: Vec<[usize; 4]>, density: f64) -> Result<Self> {
        let n = positions.len();
        for (ti, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= n {
                    return Err(SimError::IndexOutOfRange { index: v, len: n });
                }
            }
            if signed_volume(&positions, tet) <= 0.0 {
                return Err(SimError::InvertedElement { index: ti });
            }
        }
        let surface_tris = extract_surface(&tets)?;
        let surface_edges = extract_surface_edges(&surface_tris);
        let adjacency = build_adjacency(n, &tets);
        let mut mesh = SimMesh {
            rest_positions: positions,
            tets,
            surface_tris,
            surface_edges,
            lumped_mass: vec![0.0; n],
            adjacency,
        };
        mesh.lumped_mass = lump_mass(&mesh, density)?;
        Ok(mesh)
    }

    /// Signed rest volume of tet `ti`.
    pub fn rest_volume(&self, ti: usize) -> f64 {
        signed_volume(&self.rest_positions, &self.tets[ti])
    }

    pub fn total_rest_volume(&self) -> f64 {
        (0..self.tets.len()).map(|ti| self.rest_volume(ti)).sum()
    }
}

/// Signed volume of the tet spanned by the four listed nodes.
pub fn signed_volume(positions: &[Vec3], tet: &[usize; 4]) -> f64 {
    let a = positions[tet[0]];
    let e1 = positions[tet[1]] - a;
    let e2 = positions[tet[2]] - a;
    let e3 = positions[tet[3]] - a;
    e1.cross(&e2).dot(&e3) / 6.0
}

/// Load a mesh from `.node` / `.ele` files (see module docs for the format).
pub fn load_mesh(node_file: &Path, element_file: &Path, density: f64) -> Result<SimMesh> {
    let positions = parse_node_file(node_file)?;
    let tets = parse_ele_file(element_file)?;
    SimMesh::from_parts(positions, tets, density)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> SimError {
    SimError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_node_file(path: &Path) -> Result<Vec<Vec3>> {
    let lines = read_lines(path)?;
    let mut it = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hl, header) = it
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty node file"))?;
    let hdr: Vec<&str> = header.split_whitespace().collect();
    if hdr.len() < 2 || hdr[1] != "3" {
        return Err(parse_err(path, hl + 1, "expected header \"N 3\""));
    }
    let n: usize = hdr[0]
        .parse()
        .map_err(|_| parse_err(path, hl + 1, "bad node count"))?;
    let mut positions = vec![None; n];
    for (li, line) in it {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(path, li + 1, "expected \"idx x y z\""));
        }
        let idx: usize = f[0]
            .parse()
            .map_err(|_| parse_err(path, li + 1, "bad node index"))?;
        if idx >= n {
            return Err(parse_err(path, li + 1, format!("node index {idx} out of range")));
        }
        if positions[idx].is_some() {
            return Err(SimError::DuplicateNode { index: idx });
        }
        let mut c = [0.0; 3];
        for (k, s) in f[1..].iter().enumerate() {
            c[k] = s
                .parse()
                .map_err(|_| parse_err(path, li + 1, "bad coordinate"))?;
        }
        positions[idx] = Some(Vec3::new(c[0], c[1], c[2]));
    }
    positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| parse_err(path, 0, format!("missing node {i}"))))
        .collect()
}

fn parse_ele_file(path: &Path) -> Result<Vec<[usize; 4]>> {
    let lines = read_lines(path)?;
    let mut it = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hl, header) = it
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty element file"))?;
    let hdr: Vec<&str> = header.split_whitespace().collect();
    if hdr.len() < 2 || hdr[1] != "4" {
        return Err(parse_err(path, hl + 1, "expected header \"T 4\""));
    }
    let t: usize = hdr[0]
        .parse()
        .map_err(|_| parse_err(path, hl + 1, "bad element count"))?;
    let mut tets = vec![None; t];
    for (li, line) in it {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(parse_err(path, li + 1, "expected \"idx i j k l\""));
        }
        let idx: usize = f[0]
            .parse()
            .map_err(|_| parse_err(path, li + 1, "bad element index"))?;
        if idx >= t {
            return Err(parse_err(path, li + 1, format!("element index {idx} out of range")));
        }
        if tets[idx].is_some() {
            return Err(parse_err(path, li + 1, format!("duplicate element {idx}")));
        }
        let mut v = [0usize; 4];
        for (k, s) in f[1..].iter().enumerate() {
            v[k] = s
                .parse()
                .map_err(|_| parse_err(path, li + 1, "bad node index"))?;
        }
        tets[idx] = Some(v);
    }
    tets.into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| parse_err(path, 0, format!("missing element {i}"))))
        .collect()
}

/// Outward-oriented faces of a positively oriented tet `(a, b, c, d)`.
fn tet_faces(t: &[usize; 4]) -> [[usize; 3]; 4] {
    let [a, b, c, d] = *t;
    [[a, c, b], [a, b, d], [a, d, c], [b, c, d]]
}

fn sorted3(f: [usize; 3]) -> [usize; 3] {
    let mut s = f;
    s.sort_unstable();
    s
}

/// Boundary faces: those referenced by exactly one tet, kept in the
/// referencing tet's outward orientation. Faces shared by more than two tets
/// make the boundary non-manifold and are rejected.
fn extract_surface(tets: &[[usize; 4]]) -> Result<Vec<[usize; 3]>> {
    // BTreeMap keeps extraction order independent of insertion order.
    let mut counts: BTreeMap<[usize; 3], (usize, [usize; 3])> = BTreeMap::new();
    for tet in tets {
        for f in tet_faces(tet) {
            let e = counts.entry(sorted3(f)).or_insert((0, f));
            e.0 += 1;
        }
    }
    let mut tris = Vec::new();
    for (key, (count, oriented)) in counts {
        match count {
            1 => tris.push(oriented),
            2 => {}
            _ => return Err(SimError::NonManifoldBoundary { face: key }),
        }
    }
    Ok(tris)
}

fn extract_surface_edges(tris: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut set: BTreeMap<[usize; 2], ()> = BTreeMap::new();
    for t in tris {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let e = if a < b { [a, b] } else { [b, a] };
            set.insert(e, ());
        }
    }
    set.into_keys().collect()
}

fn build_adjacency(n: usize, tets: &[[usize; 4]]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for tet in tets {
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    adj[tet[i]].push(tet[j]);
                }
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Distribute `rho * vol / 4` of each tet to its four nodes.
pub fn lump_mass(mesh: &SimMesh, density: f64) -> Result<Vec<f64>> {
    if density <= 0.0 {
        return Err(SimError::Invalid(format!("density must be positive, got {density}")));
    }
    let mut mass = vec![0.0; mesh.node_count()];
    for (ti, tet) in mesh.tets.iter().enumerate() {
        let share = density * mesh.rest_volume(ti) / 4.0;
        for &v in tet {
            mass[v] += share;
        }
    }
    Ok(mass)
}
