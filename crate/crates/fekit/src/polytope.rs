//! Polytopes generated by directional extrusions.
//!
//! A polytope of dimension `d` is described by a topology bitmap `t`: bit `i`
//! tells whether the extrusion along direction `i` is of prism type (1) or
//! pyramid type (0). Each n-face is identified by an extrusion bitmap `e` and
//! an anchor bitmap `v` with `e & v == 0`; its dimension is the population
//! count of `e`. Bit `i` of every bitmap refers to coordinate direction `i`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest polytope dimension accepted by [`Polytope::new`].
pub const MAX_DIMS: usize = 4;

/// An n-face given by its extrusion and anchor bitmaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NFace {
    pub extrusion: u32,
    pub anchor: u32,
}

impl NFace {
    pub fn new(extrusion: u32, anchor: u32) -> Self {
        Self { extrusion, anchor }
    }

    pub fn dim(&self) -> usize {
        self.extrusion.count_ones() as usize
    }

    /// Combined integer code `(e << d) | v`.
    pub fn code(&self, num_dims: usize) -> u32 {
        (self.extrusion << num_dims) | self.anchor
    }
}

/// Affine symmetry of a polytope, stored through its action on vertices.
///
/// The map sends the reference point `x` to `origin + sum_l x_l (axis_l - origin)`
/// where `origin` and `axis_l` are the images of vertex 0 and of the vertex at
/// the unit vector along local direction `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symmetry {
    vertex_map: Vec<usize>,
    origin: Vec<i64>,
    axes: Vec<Vec<i64>>,
}

impl Symmetry {
    /// Image of every vertex (by local vertex index).
    pub fn vertex_map(&self) -> &[usize] {
        &self.vertex_map
    }

    pub fn is_identity(&self) -> bool {
        self.vertex_map.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Applies the symmetry to an integer lexicographic label of order `k`.
    pub fn apply_lex(&self, alpha: &[usize], k: usize) -> Vec<usize> {
        let n = self.origin.len();
        (0..n)
            .map(|i| {
                let mut x = k as i64 * self.origin[i];
                for (l, &a) in alpha.iter().enumerate() {
                    x += a as i64 * (self.axes[l][i] - self.origin[i]);
                }
                debug_assert!(x >= 0);
                x as usize
            })
            .collect()
    }

    /// Applies the symmetry to real reference coordinates.
    pub fn apply_coords(&self, x: &[f64]) -> Vec<f64> {
        let n = self.origin.len();
        (0..n)
            .map(|i| {
                let o = self.origin[i] as f64;
                o + x
                    .iter()
                    .enumerate()
                    .map(|(l, &xl)| xl * (self.axes[l][i] as f64 - o))
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Cell topology with its ordered n-faces.
#[derive(Clone, Debug)]
pub struct Polytope {
    num_dims: usize,
    topology: u32,
    n_faces: Vec<NFace>,
    ptr_n_faces_x_dim: Vec<usize>,
    code_to_index: HashMap<u32, usize>,
    n_face_vertices: Vec<Vec<usize>>,
    facets: Vec<Vec<usize>>,
}

/// Canonical form of a topology bitmap: bit 0 is meaningless and is copied
/// from bit 1 (segments use 0).
pub fn normalize_topology(num_dims: usize, topology: u32) -> u32 {
    let mask = if num_dims >= 32 {
        u32::MAX
    } else {
        (1u32 << num_dims) - 1
    };
    let t = topology & mask & !1;
    if num_dims >= 2 && t & 2 != 0 {
        t | 1
    } else {
        t
    }
}

impl Polytope {
    /// Builds the polytope of dimension `num_dims` with the given topology.
    pub fn new(num_dims: usize, topology: u32) -> Result<Self> {
        if num_dims == 0 || num_dims > MAX_DIMS {
            return Err(Error::DimensionOutOfRange(num_dims, MAX_DIMS));
        }
        Ok(Self::build(num_dims, topology))
    }

    /// The n-cube of dimension `num_dims`.
    pub fn n_cube(num_dims: usize) -> Result<Self> {
        Self::new(num_dims, u32::MAX)
    }

    /// The n-simplex of dimension `num_dims`.
    pub fn n_simplex(num_dims: usize) -> Result<Self> {
        Self::new(num_dims, 0)
    }

    pub(crate) fn build(num_dims: usize, topology: u32) -> Self {
        let topology = normalize_topology(num_dims, topology);
        let mut set: Vec<NFace> = vec![NFace::new(0, 0)];
        for j in 0..num_dims {
            let bit = 1u32 << j;
            let mut next = set.clone();
            if topology & bit != 0 {
                for f in &set {
                    next.push(NFace::new(f.extrusion, f.anchor | bit));
                    next.push(NFace::new(f.extrusion | bit, f.anchor));
                }
            } else {
                next.push(NFace::new(0, bit));
                for f in &set {
                    next.push(NFace::new(f.extrusion | bit, f.anchor));
                }
            }
            set = next;
        }
        set.sort_by_key(|f| (f.dim(), f.code(num_dims)));
        set.dedup();

        let mut ptr = vec![0usize; num_dims + 2];
        for f in &set {
            ptr[f.dim() + 1] += 1;
        }
        for k in 0..=num_dims {
            ptr[k + 1] += ptr[k];
        }
        let code_to_index = set
            .iter()
            .enumerate()
            .map(|(i, f)| (f.code(num_dims), i))
            .collect();

        let mut poly = Self {
            num_dims,
            topology,
            n_faces: set,
            ptr_n_faces_x_dim: ptr,
            code_to_index,
            n_face_vertices: Vec::new(),
            facets: Vec::new(),
        };
        poly.n_face_vertices = (0..poly.n_faces.len())
            .map(|i| poly.compute_n_face_vertices(i))
            .collect();
        poly.facets = (0..poly.n_faces.len())
            .map(|i| poly.compute_facets(i))
            .collect();
        poly
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    pub fn topology(&self) -> u32 {
        self.topology
    }

    pub fn n_faces(&self) -> &[NFace] {
        &self.n_faces
    }

    pub fn num_n_faces(&self) -> usize {
        self.n_faces.len()
    }

    pub fn n_face(&self, index: usize) -> NFace {
        self.n_faces[index]
    }

    /// Offsets (0-based) of the first n-face of each dimension; length `d + 2`.
    pub fn ptr_n_faces_x_dim(&self) -> &[usize] {
        &self.ptr_n_faces_x_dim
    }

    pub fn n_faces_of_dim(&self, dim: usize) -> std::ops::Range<usize> {
        self.ptr_n_faces_x_dim[dim]..self.ptr_n_faces_x_dim[dim + 1]
    }

    pub fn num_vertices(&self) -> usize {
        self.ptr_n_faces_x_dim[1]
    }

    /// Index of the polytope itself (the last n-face).
    pub fn cell_index(&self) -> usize {
        self.n_faces.len() - 1
    }

    pub fn index_of(&self, face: NFace) -> Option<usize> {
        if face.extrusion & face.anchor != 0 {
            return None;
        }
        self.code_to_index.get(&face.code(self.num_dims)).copied()
    }

    pub fn is_n_cube(&self) -> bool {
        let upper = if self.num_dims == 0 {
            0
        } else {
            ((1u32 << self.num_dims) - 1) & !1
        };
        self.topology & upper == upper
    }

    pub fn is_simplex(&self) -> bool {
        self.topology == 0
    }

    /// Reference coordinates of a vertex (0/1 entries).
    pub fn vertex_coords(&self, vertex: usize) -> Vec<f64> {
        let v = self.n_faces[vertex].anchor;
        (0..self.num_dims)
            .map(|i| ((v >> i) & 1) as f64)
            .collect()
    }

    /// Base vertex indices of an n-face, in the n-face's own vertex order.
    pub fn n_face_vertices(&self, index: usize) -> &[usize] {
        &self.n_face_vertices[index]
    }

    /// Indices of the facets of an n-face, ascending.
    pub fn facet_indices(&self, index: usize) -> Result<&[usize]> {
        if self.n_faces[index].dim() == 0 {
            return Err(Error::InvalidArgument("a vertex has no facets".into()));
        }
        Ok(&self.facets[index])
    }

    /// Facets of an n-face of this polytope.
    pub fn facets_of(&self, face: NFace) -> Result<Vec<NFace>> {
        let index = self
            .index_of(face)
            .ok_or_else(|| Error::InvalidArgument(format!("{face:?} is not an n-face")))?;
        Ok(self
            .facet_indices(index)?
            .iter()
            .map(|&i| self.n_faces[i])
            .collect())
    }

    /// All n-faces contained in the closure of `index` (including itself).
    pub fn closure(&self, index: usize) -> Vec<usize> {
        let verts = &self.n_face_vertices[index];
        (0..self.n_faces.len())
            .filter(|&j| self.n_face_vertices[j].iter().all(|v| verts.contains(v)))
            .collect()
    }

    /// Topology bitmap of an n-face seen as a polytope of its own.
    pub fn topology_of_n_face(&self, index: usize) -> u32 {
        let e = self.n_faces[index].extrusion;
        let mut t = 0u32;
        let mut l = 0;
        for i in 0..self.num_dims {
            if e & (1 << i) != 0 {
                if self.topology & (1 << i) != 0 {
                    t |= 1 << l;
                }
                l += 1;
            }
        }
        t
    }

    /// The reference polytope of an n-face.
    pub fn n_face_polytope(&self, index: usize) -> Polytope {
        let f = self.n_faces[index];
        Polytope::build(f.dim(), self.topology_of_n_face(index))
    }

    /// Per-direction orders of an n-face given the base orders.
    pub fn n_face_order(&self, index: usize, order: &[usize]) -> Vec<usize> {
        let e = self.n_faces[index].extrusion;
        (0..self.num_dims)
            .filter(|i| e & (1 << i) != 0)
            .map(|i| order[i])
            .collect()
    }

    /// Maps a lexicographic label of the n-face's own node set to the label of
    /// the same node in the base polytope. No membership check is performed.
    pub(crate) fn map_lex(&self, index: usize, order: &[usize], local: &[usize]) -> Vec<usize> {
        let f = self.n_faces[index];
        let d = self.num_dims;
        let mut local_of = vec![usize::MAX; d];
        let mut l = 0;
        for (i, slot) in local_of.iter_mut().enumerate() {
            if f.extrusion & (1 << i) != 0 {
                *slot = l;
                l += 1;
            }
        }
        (0..d)
            .map(|i| {
                if f.extrusion & (1 << i) != 0 {
                    local[local_of[i]]
                } else if f.anchor & (1 << i) != 0 {
                    let mut budget = order[i] as i64;
                    for j in (i + 1)..d {
                        if f.extrusion & (1 << j) != 0 && self.topology & (1 << j) == 0 {
                            budget -= local[local_of[j]] as i64;
                        }
                    }
                    budget.max(0) as usize
                } else {
                    0
                }
            })
            .collect()
    }

    /// Maps the node `node_in_nface` of n-face `index` (lexicographic label in
    /// the n-face's node set for the restricted order) to the base label.
    pub fn nface_node_map(
        &self,
        index: usize,
        order: &[usize],
        node_in_nface: &[usize],
    ) -> Result<Vec<usize>> {
        if order.len() != self.num_dims {
            return Err(Error::InvalidArgument(format!(
                "order has {} entries, expected {}",
                order.len(),
                self.num_dims
            )));
        }
        let sub = self.n_face_polytope(index);
        let sub_order = self.n_face_order(index, order);
        let valid = node_in_nface.len() == sub.num_dims
            && sub.contains_lex(&sub_order, node_in_nface);
        if !valid {
            return Err(Error::InvalidArgument(format!(
                "{node_in_nface:?} is not a node of n-face {index}"
            )));
        }
        Ok(self.map_lex(index, order, node_in_nface))
    }

    /// Whether `alpha` belongs to the node set of the given order.
    pub fn contains_lex(&self, order: &[usize], alpha: &[usize]) -> bool {
        if alpha.len() != self.num_dims {
            return false;
        }
        if self.is_n_cube() {
            return alpha.iter().zip(order).all(|(a, k)| a <= k);
        }
        let mut budget = order.first().copied().unwrap_or(0) as i64;
        for i in (0..self.num_dims).rev() {
            let a = alpha[i] as i64;
            if a > budget {
                return false;
            }
            if self.topology & (1 << i) == 0 {
                budget -= a;
            }
        }
        true
    }

    fn compute_n_face_vertices(&self, index: usize) -> Vec<usize> {
        let f = self.n_faces[index];
        let sub = Polytope::sub_vertex_anchors(f.dim(), self.topology_of_n_face(index));
        let ones = vec![1usize; self.num_dims];
        sub.iter()
            .map(|&w| {
                let local: Vec<usize> = (0..f.dim()).map(|l| ((w >> l) & 1) as usize).collect();
                let lex = self.map_lex(index, &ones, &local);
                let anchor = lex
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &a)| acc | ((a as u32) << i));
                self.index_of(NFace::new(0, anchor))
                    .expect("n-face vertex must be a polytope vertex")
            })
            .collect()
    }

    /// Vertex anchors of a polytope in vertex order, without building it fully.
    fn sub_vertex_anchors(num_dims: usize, topology: u32) -> Vec<u32> {
        let topology = normalize_topology(num_dims, topology);
        let mut anchors = vec![0u32];
        for j in 0..num_dims {
            let bit = 1u32 << j;
            if topology & bit != 0 {
                let shifted: Vec<u32> = anchors.iter().map(|a| a | bit).collect();
                anchors.extend(shifted);
            } else {
                anchors.push(bit);
            }
        }
        anchors.sort_unstable();
        anchors
    }

    fn compute_facets(&self, index: usize) -> Vec<usize> {
        let f = self.n_faces[index];
        if f.dim() == 0 {
            return Vec::new();
        }
        let v = f.anchor;
        let mut current = NFace::new(0, v);
        let mut boundary: Vec<NFace> = Vec::new();
        let mut first = true;
        for j in 0..self.num_dims {
            let bit = 1u32 << j;
            if f.extrusion & bit == 0 {
                continue;
            }
            let mut next: Vec<NFace> = vec![current];
            if self.topology & bit != 0 {
                next.push(NFace::new(current.extrusion, current.anchor | bit));
            } else if first {
                let low = (bit << 1) - 1;
                next.push(NFace::new(0, (v & !low) | bit));
            }
            for b in &boundary {
                next.push(NFace::new(b.extrusion | bit, b.anchor));
            }
            boundary = next;
            current = NFace::new(current.extrusion | bit, current.anchor);
            first = false;
        }
        let mut ids: Vec<usize> = boundary
            .iter()
            .map(|b| self.index_of(*b).expect("facet must be an n-face"))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Affine symmetries of the polytope ordered with the identity first.
    ///
    /// Symmetries are sorted by the image of vertex 0 (rotation) and then by
    /// the images of the axis vertices (orientation).
    pub fn symmetries(&self) -> Vec<Symmetry> {
        let n = self.num_dims;
        let nv = self.num_vertices();
        let coords: Vec<Vec<i64>> = (0..nv)
            .map(|v| {
                let a = self.n_faces[v].anchor;
                (0..n).map(|i| ((a >> i) & 1) as i64).collect()
            })
            .collect();
        let lookup: HashMap<Vec<i64>, usize> =
            coords.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let axis_vertex: Vec<usize> = (0..n)
            .map(|l| self.index_of(NFace::new(0, 1 << l)).expect("axis vertex"))
            .collect();

        let mut result = Vec::new();
        let mut choice = vec![0usize; n + 1];
        fn recurse(
            depth: usize,
            choice: &mut Vec<usize>,
            nv: usize,
            out: &mut dyn FnMut(&[usize]),
        ) {
            if depth == choice.len() {
                out(choice);
                return;
            }
            for c in 0..nv {
                if choice[..depth].contains(&c) {
                    continue;
                }
                choice[depth] = c;
                recurse(depth + 1, choice, nv, out);
            }
        }
        recurse(0, &mut choice, nv, &mut |ch: &[usize]| {
            let origin = coords[ch[0]].clone();
            let axes: Vec<Vec<i64>> = ch[1..].iter().map(|&c| coords[c].clone()).collect();
            let mut vertex_map = Vec::with_capacity(nv);
            for c in &coords {
                let img: Vec<i64> = (0..n)
                    .map(|i| {
                        origin[i]
                            + c.iter()
                                .enumerate()
                                .map(|(l, &x)| x * (axes[l][i] - origin[i]))
                                .sum::<i64>()
                    })
                    .collect();
                match lookup.get(&img) {
                    Some(&j) if !vertex_map.contains(&j) => vertex_map.push(j),
                    _ => return,
                }
            }
            debug_assert!(axis_vertex.iter().zip(&ch[1..]).all(|(&a, &c)| vertex_map[a] == c));
            result.push(Symmetry {
                vertex_map,
                origin,
                axes,
            });
        });
        result
    }
}

/// Index of the symmetry `g` (in `symmetries`) such that the n-face vertex
/// seen as local vertex `a` from the `plus` side is local vertex `g(a)` from
/// the `minus` side, given global vertex ids of both views.
pub fn permutation_index(
    symmetries: &[Symmetry],
    plus: &[usize],
    minus: &[usize],
) -> Option<usize> {
    symmetries.iter().position(|s| {
        s.vertex_map
            .iter()
            .enumerate()
            .all(|(a, &ga)| minus.get(ga) == plus.get(a))
    })
}

/// Equidistant Lagrangian node set of a polytope.
#[derive(Clone, Debug)]
pub struct NodeArray {
    polytope: Polytope,
    order: Vec<usize>,
    nodes: Vec<Vec<usize>>,
    coords: Vec<Vec<f64>>,
    lex_to_index: HashMap<Vec<usize>, usize>,
}

impl NodeArray {
    /// Generates the nodes of the given per-direction order.
    pub fn new(polytope: &Polytope, order: &[usize]) -> Result<Self> {
        let d = polytope.num_dims();
        if order.len() != d {
            return Err(Error::InvalidArgument(format!(
                "order has {} entries, expected {d}",
                order.len()
            )));
        }
        if !polytope.is_n_cube() && order.iter().any(|&k| k != order[0]) {
            return Err(Error::InvalidArgument(
                "mixed orders require an n-cube topology".into(),
            ));
        }
        let mut nodes: Vec<Vec<usize>> = vec![Vec::new()];
        if polytope.is_n_cube() {
            for &k in order {
                nodes = nodes
                    .into_iter()
                    .flat_map(|n| {
                        (0..=k).map(move |a| {
                            let mut m = n.clone();
                            m.push(a);
                            m
                        })
                    })
                    .collect();
            }
        } else {
            let k = order.first().copied().unwrap_or(0);
            nodes = Self::truncated(polytope.topology(), d, k);
        }
        nodes.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));

        let coords = nodes
            .iter()
            .map(|alpha| Self::reference_coords(polytope, order, alpha))
            .collect();
        let lex_to_index = nodes
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(Self {
            polytope: polytope.clone(),
            order: order.to_vec(),
            nodes,
            coords,
            lex_to_index,
        })
    }

    /// Same order in every direction.
    pub fn uniform(polytope: &Polytope, order: usize) -> Result<Self> {
        Self::new(polytope, &vec![order; polytope.num_dims()])
    }

    fn truncated(topology: u32, d: usize, k: usize) -> Vec<Vec<usize>> {
        // directions are filled from the last extrusion down to the first
        fn rec(
            topology: u32,
            i: usize,
            budget: usize,
            tail: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if i == 0 {
                let mut n = tail.clone();
                n.reverse();
                out.push(n);
                return;
            }
            let dir = i - 1;
            for a in 0..=budget {
                let inner = if topology & (1 << dir) != 0 {
                    budget
                } else {
                    budget - a
                };
                tail.push(a);
                rec(topology, dir, inner, tail, out);
                tail.pop();
            }
        }
        let mut out = Vec::new();
        rec(topology, d, k, &mut Vec::new(), &mut out);
        out
    }

    fn reference_coords(polytope: &Polytope, order: &[usize], alpha: &[usize]) -> Vec<f64> {
        let d = polytope.num_dims();
        if polytope.is_n_cube() {
            return (0..d)
                .map(|i| {
                    if order[i] == 0 {
                        0.5
                    } else {
                        alpha[i] as f64 / order[i] as f64
                    }
                })
                .collect();
        }
        let k = order.first().copied().unwrap_or(0);
        if k == 0 {
            let nv = polytope.num_vertices();
            let mut c = vec![0.0; d];
            for v in 0..nv {
                for (ci, x) in c.iter_mut().zip(polytope.vertex_coords(v)) {
                    *ci += x / nv as f64;
                }
            }
            return c;
        }
        alpha.iter().map(|&a| a as f64 / k as f64).collect()
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Lexicographic label of node `i`.
    pub fn node(&self, i: usize) -> &[usize] {
        &self.nodes[i]
    }

    /// Reference coordinates of node `i`.
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        self.lex_to_index.get(alpha).copied()
    }

    fn degenerate_off(&self, index: usize) -> bool {
        let f = self.polytope.n_face(index);
        let d = self.polytope.num_dims();
        if self.polytope.is_n_cube() {
            (0..d).any(|i| f.extrusion & (1 << i) == 0 && self.order[i] == 0)
        } else {
            self.order.first().copied().unwrap_or(0) == 0 && f.dim() < d
        }
    }

    /// Nodes lying on the closed n-face, in the n-face's own node order.
    pub fn closed_nodes(&self, index: usize) -> Vec<usize> {
        if self.degenerate_off(index) {
            return Vec::new();
        }
        let sub = self.polytope.n_face_polytope(index);
        let sub_order = self.polytope.n_face_order(index, &self.order);
        let sub_nodes = NodeArray::new(&sub, &sub_order).expect("n-face node set");
        (0..sub_nodes.num_nodes())
            .map(|s| {
                let lex = self.polytope.map_lex(index, &self.order, sub_nodes.node(s));
                self.index_of(&lex).expect("mapped node must exist")
            })
            .collect()
    }

    /// Nodes in the relative interior of the n-face, in the n-face's own order.
    pub fn own_nodes(&self, index: usize) -> Vec<usize> {
        let closed = self.closed_nodes(index);
        if self.polytope.n_face(index).dim() == 0 {
            return closed;
        }
        let mut on_boundary = std::collections::HashSet::new();
        for &f in self.polytope.facet_indices(index).expect("positive dim") {
            on_boundary.extend(self.closed_nodes(f));
        }
        closed
            .into_iter()
            .filter(|n| !on_boundary.contains(n))
            .collect()
    }

    /// Traversal of the nodes of an n-face; `own_boundary` includes the
    /// nodes on the n-face's boundary (closed set).
    pub fn iter_nface(&self, index: usize, own_boundary: bool) -> NodeIterator {
        let nodes = if own_boundary {
            self.closed_nodes(index)
        } else {
            self.own_nodes(index)
        };
        NodeIterator {
            n_face: self.polytope.n_face(index),
            own_boundary,
            nodes,
            cursor: 0,
        }
    }
}

/// Sequential traversal over the nodes of one n-face.
#[derive(Clone, Debug)]
pub struct NodeIterator {
    n_face: NFace,
    own_boundary: bool,
    nodes: Vec<usize>,
    cursor: usize,
}

impl NodeIterator {
    pub fn n_face(&self) -> NFace {
        self.n_face
    }

    pub fn own_boundary(&self) -> bool {
        self.own_boundary
    }
}

impl Iterator for NodeIterator {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let n = self.nodes.get(self.cursor).copied();
        self.cursor += 1;
        n
    }
}
