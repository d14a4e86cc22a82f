//! Static conforming meshes with full cell/vef adjacency.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::polytope::{permutation_index, Polytope, Symmetry};
use crate::{Point, SPACE_DIM};

/// Cell/vef composition derived from cell-to-vertex connectivity.
#[derive(Clone, Debug, Default)]
pub struct VefComposition {
    /// Dimension of every vef; vertices come first with their own ids.
    pub vef_dims: Vec<usize>,
    /// Sorted vertex tuple of every vef.
    pub vef_vertices: Vec<Vec<usize>>,
    /// `cell_vefs[c * n + lid]` with `n` the number of vefs per cell.
    pub cell_vefs: Vec<usize>,
    pub ptr_cells_around: Vec<usize>,
    pub lst_cells_around: Vec<usize>,
}

/// Derives global vefs from cells given as vertex lists in the polytope's
/// corner order. Vertex ids are 0-based and dense.
pub fn build_vefs(
    polytope: &Polytope,
    cells: &[Vec<usize>],
    num_vertices: usize,
) -> Result<VefComposition> {
    let d = polytope.num_dims();
    let nv = polytope.num_vertices();
    let nvefs_cell = polytope.num_n_faces() - 1;
    let mut out = VefComposition {
        vef_dims: vec![0; num_vertices],
        vef_vertices: (0..num_vertices).map(|v| vec![v]).collect(),
        cell_vefs: vec![usize::MAX; cells.len() * nvefs_cell],
        ..Default::default()
    };
    for (c, verts) in cells.iter().enumerate() {
        if verts.len() != nv {
            return Err(Error::InvalidArgument(format!(
                "cell {c} has {} vertices, expected {nv}",
                verts.len()
            )));
        }
        if let Some(&v) = verts.iter().find(|&&v| v >= num_vertices) {
            return Err(Error::InvalidArgument(format!("cell {c} uses unknown vertex {v}")));
        }
        let mut sorted = verts.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("cell {c} repeats a vertex")));
        }
        for lid in polytope.n_faces_of_dim(0) {
            out.cell_vefs[c * nvefs_cell + lid] = verts[polytope.n_face_vertices(lid)[0]];
        }
    }
    for dim in 1..d {
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        for (c, verts) in cells.iter().enumerate() {
            for lid in polytope.n_faces_of_dim(dim) {
                let mut key: Vec<usize> = polytope
                    .n_face_vertices(lid)
                    .iter()
                    .map(|&l| verts[l])
                    .collect();
                key.sort_unstable();
                let next = out.vef_dims.len();
                let id = *ids.entry(key.clone()).or_insert_with(|| {
                    out.vef_dims.push(dim);
                    out.vef_vertices.push(key);
                    next
                });
                out.cell_vefs[c * nvefs_cell + lid] = id;
            }
        }
    }

    let nvefs = out.vef_dims.len();
    let mut counts = vec![0usize; nvefs + 1];
    for &v in &out.cell_vefs {
        counts[v + 1] += 1;
    }
    for i in 0..nvefs {
        counts[i + 1] += counts[i];
    }
    let mut lst = vec![0; counts[nvefs]];
    let mut fill = counts.clone();
    for (c, chunk) in out.cell_vefs.chunks(nvefs_cell.max(1)).enumerate() {
        if nvefs_cell == 0 {
            break;
        }
        for &v in chunk {
            lst[fill[v]] = c;
            fill[v] += 1;
        }
    }
    out.ptr_cells_around = counts;
    out.lst_cells_around = lst;

    if d >= 1 {
        for v in 0..nvefs {
            let around = out.ptr_cells_around[v + 1] - out.ptr_cells_around[v];
            if out.vef_dims[v] == d - 1 && around > 2 {
                return Err(Error::Nonconforming(format!(
                    "facet with vertices {:?} is shared by {around} cells",
                    out.vef_vertices[v]
                )));
            }
        }
    }
    Ok(out)
}

/// Parameters of a structured brick mesh.
#[derive(Clone, Debug)]
pub struct StructuredMesh {
    pub cells_per_dim: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Set id of each box face, ordered `x_0 = lower, x_0 = upper, x_1 = lower, ...`.
    pub box_face_sets: Vec<usize>,
}

impl StructuredMesh {
    /// Unit box with every boundary face in set 1.
    pub fn unit(cells_per_dim: &[usize]) -> Self {
        let d = cells_per_dim.len();
        Self {
            cells_per_dim: cells_per_dim.to_vec(),
            lower: vec![0.0; d],
            upper: vec![1.0; d],
            box_face_sets: vec![1; 2 * d],
        }
    }
}

/// A conforming mesh with a single cell topology.
#[derive(Clone, Debug)]
pub struct Triangulation {
    polytope: Polytope,
    coordinates: Vec<Point>,
    cell_vertices: Vec<Vec<usize>>,
    vefs: VefComposition,
    vefs_per_cell: usize,
    cell_set_ids: Vec<usize>,
    vef_set_ids: Vec<usize>,
    vef_at_boundary: Vec<bool>,
    symmetries: Vec<Vec<Symmetry>>,
}

/// Vef set id that marks interior entities.
pub const INTERIOR_SET: usize = 0;
/// Default set id of boundary vefs and of cells.
pub const DEFAULT_SET: usize = 1;

impl Triangulation {
    /// Builds a mesh from vertex coordinates and cell-to-vertex lists.
    /// Simplices are reoriented. `facet_sets` assigns set ids to boundary
    /// facets given by (unordered) vertex tuples.
    pub fn from_cells(
        polytope: &Polytope,
        coordinates: Vec<Point>,
        cells: Vec<Vec<usize>>,
        facet_sets: &[(usize, Vec<usize>)],
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidArgument("a mesh needs at least one cell".into()));
        }
        let mut mesh = Self {
            polytope: polytope.clone(),
            vefs: VefComposition::default(),
            vefs_per_cell: polytope.num_n_faces() - 1,
            cell_set_ids: vec![DEFAULT_SET; cells.len()],
            vef_set_ids: Vec::new(),
            vef_at_boundary: Vec::new(),
            symmetries: (0..=polytope.num_dims())
                .map(|dim| {
                    let i = polytope.n_faces_of_dim(dim).start;
                    polytope.n_face_polytope(i).symmetries()
                })
                .collect(),
            coordinates,
            cell_vertices: cells,
        };
        mesh.reorient_simplices();
        mesh.vefs = build_vefs(polytope, &mesh.cell_vertices, mesh.coordinates.len())?;
        mesh.classify_boundary();

        let mut lookup = HashMap::new();
        for (v, key) in mesh.vefs.vef_vertices.iter().enumerate() {
            if mesh.vefs.vef_dims[v] + 1 == polytope.num_dims() {
                lookup.insert(key.clone(), v);
            }
        }
        let mut facet_set = vec![None; mesh.num_vefs()];
        for (set, verts) in facet_sets {
            let mut key = verts.clone();
            key.sort_unstable();
            let v = *lookup.get(&key).ok_or_else(|| {
                Error::InvalidArgument(format!("boundary facet {verts:?} is not a facet of the mesh"))
            })?;
            facet_set[v] = Some(*set);
        }
        mesh.assign_boundary_sets(|_, v| facet_set[v].unwrap_or(DEFAULT_SET));
        Ok(mesh)
    }

    /// Brick mesh of n-cubes with lexicographic numbering.
    pub fn structured(spec: &StructuredMesh) -> Result<Self> {
        let d = spec.cells_per_dim.len();
        if d == 0 || d > SPACE_DIM {
            return Err(Error::DimensionOutOfRange(d, SPACE_DIM));
        }
        if spec.lower.len() != d || spec.upper.len() != d || spec.box_face_sets.len() != 2 * d {
            return Err(Error::InvalidArgument("box description does not match the dimension".into()));
        }
        if spec.cells_per_dim.contains(&0) {
            return Err(Error::InvalidArgument("at least one cell per direction is required".into()));
        }
        if (0..d).any(|i| !(spec.upper[i] > spec.lower[i])) {
            return Err(Error::InvalidArgument("degenerate box".into()));
        }
        let polytope = Polytope::n_cube(d)?;
        let n = &spec.cells_per_dim;
        let npts: Vec<usize> = n.iter().map(|k| k + 1).collect();
        let num_vertices: usize = npts.iter().product();
        let lex = |mut i: usize, sizes: &[usize]| -> Vec<usize> {
            sizes
                .iter()
                .map(|s| {
                    let r = i % s;
                    i /= s;
                    r
                })
                .collect()
        };
        let coordinates: Vec<Point> = (0..num_vertices)
            .map(|v| {
                let idx = lex(v, &npts);
                let mut x = [0.0; SPACE_DIM];
                for i in 0..d {
                    let t = idx[i] as f64 / n[i] as f64;
                    x[i] = spec.lower[i] + t * (spec.upper[i] - spec.lower[i]);
                }
                x
            })
            .collect();
        let num_cells: usize = n.iter().product();
        let cells: Vec<Vec<usize>> = (0..num_cells)
            .map(|c| {
                let idx = lex(c, n);
                (0..polytope.num_vertices())
                    .map(|lv| {
                        let corner = polytope.n_face(lv).anchor;
                        let mut id = 0;
                        let mut stride = 1;
                        for i in 0..d {
                            id += (idx[i] + ((corner >> i) & 1) as usize) * stride;
                            stride *= npts[i];
                        }
                        id
                    })
                    .collect()
            })
            .collect();
        let mut mesh = Self::from_cells(&polytope, coordinates, cells, &[])?;
        let sets = spec.box_face_sets.clone();
        mesh.assign_boundary_sets(|m, v| {
            let x = m.coordinates[m.vefs.vef_vertices[v][0]];
            (0..d)
                .find_map(|i| {
                    let all = |val: f64| {
                        m.vefs.vef_vertices[v].iter().all(|&u| m.coordinates[u][i] == val)
                    };
                    if x[i] == spec.lower[i] && all(spec.lower[i]) {
                        Some(sets[2 * i])
                    } else if x[i] == spec.upper[i] && all(spec.upper[i]) {
                        Some(sets[2 * i + 1])
                    } else {
                        None
                    }
                })
                .unwrap_or(DEFAULT_SET)
        });
        Ok(mesh)
    }

    /// Sorts the vertex list of every simplex cell by global id.
    pub fn reorient_simplices(&mut self) {
        if self.polytope.is_simplex() {
            for c in &mut self.cell_vertices {
                c.sort_unstable();
            }
        }
    }

    fn classify_boundary(&mut self) {
        let d = self.polytope.num_dims();
        let nvefs = self.num_vefs();
        self.vef_at_boundary = vec![false; nvefs];
        for v in 0..nvefs {
            if self.vefs.vef_dims[v] + 1 == d && self.num_cells_around(v) == 1 {
                let c = self.cells_around(v)[0];
                let lid = self.vef_lid(c, v).expect("adjacency is consistent");
                for sub in self.polytope.closure(lid) {
                    let g = self.cell_vefs(c)[sub];
                    self.vef_at_boundary[g] = true;
                }
            }
        }
    }

    /// Assigns `set_of(mesh, facet)` to each boundary facet and the maximum
    /// over incident boundary facets to lower-dimensional boundary vefs.
    fn assign_boundary_sets(&mut self, set_of: impl Fn(&Self, usize) -> usize) {
        let d = self.polytope.num_dims();
        let mut ids = vec![INTERIOR_SET; self.num_vefs()];
        for v in 0..self.num_vefs() {
            if self.vefs.vef_dims[v] + 1 == d && self.vef_at_boundary[v] {
                let s = set_of(self, v);
                let c = self.cells_around(v)[0];
                let lid = self.vef_lid(c, v).expect("adjacency is consistent");
                for sub in self.polytope.closure(lid) {
                    let g = self.cell_vefs(c)[sub];
                    ids[g] = ids[g].max(s);
                }
            }
        }
        self.vef_set_ids = ids;
    }

    /// Reads the ASCII mesh format.
    pub fn import(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Parses the ASCII mesh format; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut header = |name: &str| -> Result<(usize, String)> {
            let (no, l) = lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end of file, expected `{name}`")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(name) {
                return Err(err(no, format!("expected `{name}`")));
            }
            let value = it.next().ok_or_else(|| err(no, format!("`{name}` needs a value")))?;
            Ok((no, value.to_string()))
        };
        let (no, dim) = header("dim")?;
        let d: usize = dim.parse().map_err(|_| err(no, format!("bad dimension `{dim}`")))?;
        if d == 0 || d > SPACE_DIM {
            return Err(err(no, format!("dimension {d} out of range")));
        }
        let (no, bits) = header("topology")?;
        if bits.len() != d || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(err(no, format!("topology must be a bitstring of length {d}")));
        }
        let topology = u32::from_str_radix(&bits, 2).expect("checked bitstring");
        let polytope = Polytope::new(d, topology)?;
        let (no, count) = header("vertices")?;
        let nv: usize = count.parse().map_err(|_| err(no, format!("bad vertex count `{count}`")))?;

        let mut coordinates = Vec::with_capacity(nv);
        let mut rest = lines;
        for _ in 0..nv {
            let (no, l) = rest.next().ok_or_else(|| err(0, "missing vertex lines".into()))?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(no, "bad coordinate".into()))?;
            if vals.len() != d {
                return Err(err(no, format!("expected {d} coordinates")));
            }
            let mut x = [0.0; SPACE_DIM];
            x[..d].copy_from_slice(&vals);
            coordinates.push(x);
        }
        let ids = |no: usize, l: &str, max: usize| -> Result<Vec<usize>> {
            l.split_whitespace()
                .map(|t| match t.parse::<usize>() {
                    Ok(v) if v >= 1 && v <= max => Ok(v - 1),
                    _ => Err(err(no, format!("bad vertex id `{t}`"))),
                })
                .collect()
        };
        let (no, l) = rest.next().ok_or_else(|| err(0, "missing `cells` section".into()))?;
        let mut it = l.split_whitespace();
        if it.next() != Some("cells") {
            return Err(err(no, "expected `cells`".into()));
        }
        let nc: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(no, "bad cell count".into()))?;
        if nc == 0 {
            return Err(err(no, "the mesh has no cells".into()));
        }
        let per_cell = polytope.num_vertices();
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (no, l) = rest.next().ok_or_else(|| err(0, "missing cell lines".into()))?;
            let c = ids(no, l, nv)?;
            if c.len() != per_cell {
                return Err(err(no, format!("expected {per_cell} vertex ids")));
            }
            cells.push(c);
        }
        let mut facet_sets = Vec::new();
        if let Some((no, l)) = rest.next() {
            let mut it = l.split_whitespace();
            if it.next() != Some("boundary_facets") {
                return Err(err(no, "expected `boundary_facets` or end of file".into()));
            }
            let nb: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(no, "bad boundary facet count".into()))?;
            for _ in 0..nb {
                let (no, l) = rest.next().ok_or_else(|| err(0, "missing boundary facet lines".into()))?;
                let (set, verts) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
                let set: usize = set.parse().map_err(|_| err(no, format!("bad set id `{set}`")))?;
                facet_sets.push((set, ids(no, verts, nv)?));
            }
            if let Some((no, _)) = rest.next() {
                return Err(err(no, "trailing content".into()));
            }
        }
        let mesh = Self::from_cells(&polytope, coordinates, cells, &facet_sets).map_err(|e| match e {
            Error::InvalidArgument(m) | Error::Nonconforming(m) => err(0, m),
            other => other,
        })?;
        for (set, verts) in &facet_sets {
            let mut key = verts.clone();
            key.sort_unstable();
            let v = mesh
                .vefs
                .vef_vertices
                .iter()
                .position(|k| *k == key)
                .expect("validated facet");
            if !mesh.vef_at_boundary[v] {
                return Err(err(0, format!("facet {verts:?} with set {set} is not on the boundary")));
            }
        }
        Ok(mesh)
    }

    /// Writes the ASCII mesh format, listing every boundary facet with its set id.
    pub fn to_ascii(&self) -> String {
        let d = self.num_dims();
        let mut s = String::new();
        writeln!(s, "dim {d}").unwrap();
        writeln!(s, "topology {:0w$b}", self.polytope.topology(), w = d).unwrap();
        writeln!(s, "vertices {}", self.coordinates.len()).unwrap();
        for x in &self.coordinates {
            let parts: Vec<String> = x[..d].iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{}", parts.join(" ")).unwrap();
        }
        writeln!(s, "cells {}", self.num_cells()).unwrap();
        for c in &self.cell_vertices {
            let parts: Vec<String> = c.iter().map(|v| (v + 1).to_string()).collect();
            writeln!(s, "{}", parts.join(" ")).unwrap();
        }
        let facets: Vec<usize> = (0..self.num_vefs())
            .filter(|&v| self.vefs.vef_dims[v] + 1 == d && self.vef_at_boundary[v])
            .collect();
        writeln!(s, "boundary_facets {}", facets.len()).unwrap();
        for v in facets {
            let parts: Vec<String> = self.vefs.vef_vertices[v].iter().map(|u| (u + 1).to_string()).collect();
            writeln!(s, "{} {}", self.vef_set_ids[v], parts.join(" ")).unwrap();
        }
        s
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ascii())?;
        Ok(())
    }

    /// Permutation index of the shared vef `lid_plus` of `cell_plus` seen from
    /// `cell_minus` (where it is `lid_minus`); `0` is the identity.
    pub fn get_permutation_index(
        &self,
        cell_plus: usize,
        cell_minus: usize,
        lid_plus: usize,
        lid_minus: usize,
    ) -> Result<usize> {
        let vp = self.cell_vefs(cell_plus)[lid_plus];
        let vm = self.cell_vefs(cell_minus)[lid_minus];
        if vp != vm {
            return Err(Error::InvalidArgument(format!(
                "cells {cell_plus} and {cell_minus} do not share the given vef"
            )));
        }
        let plus = self.n_face_vertex_gids(cell_plus, lid_plus);
        let minus = self.n_face_vertex_gids(cell_minus, lid_minus);
        let dim = self.vefs.vef_dims[vp];
        permutation_index(&self.symmetries[dim], &plus, &minus)
            .ok_or_else(|| Error::Nonconforming("no symmetry matches the vef vertices".into()))
    }

    /// Global vertex ids of n-face `lid` of `cell` in n-face local order.
    pub fn n_face_vertex_gids(&self, cell: usize, lid: usize) -> Vec<usize> {
        self.polytope
            .n_face_vertices(lid)
            .iter()
            .map(|&l| self.cell_vertices[cell][l])
            .collect()
    }

    /// Symmetries of the n-faces of dimension `dim`.
    pub fn symmetries(&self, dim: usize) -> &[Symmetry] {
        &self.symmetries[dim]
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn num_dims(&self) -> usize {
        self.polytope.num_dims()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_vertices.len()
    }

    pub fn num_vefs(&self) -> usize {
        self.vefs.vef_dims.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.coordinates.len()
    }

    /// Cells in increasing id order.
    pub fn cells(&self) -> std::ops::Range<usize> {
        0..self.num_cells()
    }

    /// Vefs in increasing id order.
    pub fn vefs(&self) -> std::ops::Range<usize> {
        0..self.num_vefs()
    }

    pub fn vef_dim(&self, vef: usize) -> usize {
        self.vefs.vef_dims[vef]
    }

    /// Sorted global vertex ids of a vef.
    pub fn vef_vertices(&self, vef: usize) -> &[usize] {
        &self.vefs.vef_vertices[vef]
    }

    /// Global vef ids of a cell, indexed by local n-face id.
    pub fn cell_vefs(&self, cell: usize) -> &[usize] {
        let n = self.vefs_per_cell;
        &self.vefs.cell_vefs[cell * n..(cell + 1) * n]
    }

    /// Local n-face id of `vef` within `cell`.
    pub fn vef_lid(&self, cell: usize, vef: usize) -> Option<usize> {
        self.cell_vefs(cell).iter().position(|&v| v == vef)
    }

    pub fn cells_around(&self, vef: usize) -> &[usize] {
        &self.vefs.lst_cells_around[self.vefs.ptr_cells_around[vef]..self.vefs.ptr_cells_around[vef + 1]]
    }

    pub fn num_cells_around(&self, vef: usize) -> usize {
        self.cells_around(vef).len()
    }

    pub fn is_at_boundary(&self, vef: usize) -> bool {
        self.vef_at_boundary[vef]
    }

    pub fn vef_set_id(&self, vef: usize) -> usize {
        self.vef_set_ids[vef]
    }

    pub fn cell_set_id(&self, cell: usize) -> usize {
        self.cell_set_ids[cell]
    }

    pub fn set_cell_set_id(&mut self, cell: usize, set: usize) {
        self.cell_set_ids[cell] = set;
    }

    pub fn set_vef_set_id(&mut self, vef: usize, set: usize) {
        self.vef_set_ids[vef] = set;
    }

    /// Geometry nodes of a cell (its vertices, first-order geometry).
    pub fn cell_vertices(&self, cell: usize) -> &[usize] {
        &self.cell_vertices[cell]
    }

    pub fn cell_coordinates(&self, cell: usize) -> Vec<Point> {
        self.cell_vertices[cell].iter().map(|&v| self.coordinates[v]).collect()
    }

    pub fn vertex_coordinates(&self, vertex: usize) -> &Point {
        &self.coordinates[vertex]
    }

    pub fn coordinates(&self) -> &[Point] {
        &self.coordinates
    }

    /// Facets (by global vef id) with their surrounding cells.
    pub fn facets(&self) -> impl Iterator<Item = usize> + '_ {
        let d = self.num_dims();
        self.vefs().filter(move |&v| self.vefs.vef_dims[v] + 1 == d)
    }
}
