//! Geometric maps of cells and facets and the integrators that push
//! reference shape functions to physical space.

use crate::error::{Error, Result};
use crate::polytope::Polytope;
use crate::reference_fe::{FeType, FieldType, Quadrature, ReferenceFE, ShapeEvaluation};
use crate::{Point, SPACE_DIM};

/// Small dense matrix with the spatial capacity, `m[i][j]`.
pub type Tensor = [[f64; SPACE_DIM]; SPACE_DIM];

fn first_order_geometry(polytope: &Polytope) -> Result<ReferenceFE> {
    ReferenceFE::new(polytope, FeType::Lagrangian, 1, FieldType::Scalar, true)
}

fn invert(j: &Tensor, d: usize) -> (Tensor, f64) {
    let mut inv = [[0.0; SPACE_DIM]; SPACE_DIM];
    let det = match d {
        1 => {
            inv[0][0] = 1.0 / j[0][0];
            j[0][0]
        }
        2 => {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
            det
        }
        3 => {
            let c00 = j[1][1] * j[2][2] - j[1][2] * j[2][1];
            let c01 = j[1][2] * j[2][0] - j[1][0] * j[2][2];
            let c02 = j[1][0] * j[2][1] - j[1][1] * j[2][0];
            let det = j[0][0] * c00 + j[0][1] * c01 + j[0][2] * c02;
            inv[0][0] = c00 / det;
            inv[1][0] = c01 / det;
            inv[2][0] = c02 / det;
            inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
            inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
            inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
            inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
            inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
            inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
            det
        }
        _ => unreachable!("dimension checked at construction"),
    };
    (inv, det)
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Point) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Length of the diagonal of the bounding box of a point set.
pub fn diameter(coords: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; SPACE_DIM];
    let mut hi = [f64::NEG_INFINITY; SPACE_DIM];
    for x in coords {
        for i in 0..SPACE_DIM {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    (0..SPACE_DIM).map(|i| (hi[i] - lo[i]).powi(2)).sum::<f64>().sqrt()
}

/// First-order geometric map of a cell evaluated at fixed reference points.
#[derive(Clone, Debug)]
pub struct CellMap {
    num_dims: usize,
    geometry: ShapeEvaluation,
    weights: Vec<f64>,
    jacobian: Vec<Tensor>,
    inv_jacobian: Vec<Tensor>,
    det_jacobian: Vec<f64>,
    points: Vec<Point>,
    scale: f64,
}

impl CellMap {
    /// Map evaluated at `points` with integration `weights`.
    pub fn new(polytope: &Polytope, points: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let d = polytope.num_dims();
        if d == 0 || d > SPACE_DIM {
            return Err(Error::DimensionOutOfRange(d, SPACE_DIM));
        }
        let geometry = first_order_geometry(polytope)?.evaluate(points)?;
        let n = points.len();
        Ok(Self {
            num_dims: d,
            geometry,
            weights: weights.to_vec(),
            jacobian: vec![[[0.0; SPACE_DIM]; SPACE_DIM]; n],
            inv_jacobian: vec![[[0.0; SPACE_DIM]; SPACE_DIM]; n],
            det_jacobian: vec![0.0; n],
            points: vec![[0.0; SPACE_DIM]; n],
            scale: 0.0,
        })
    }

    pub fn for_quadrature(polytope: &Polytope, quadrature: &Quadrature) -> Result<Self> {
        Self::new(polytope, quadrature.points(), quadrature.weights())
    }

    /// Recomputes the map for a cell with the given vertex coordinates.
    pub fn update(&mut self, coords: &[Point]) -> Result<()> {
        let d = self.num_dims;
        let g = &self.geometry;
        if coords.len() != g.n_functions {
            return Err(Error::InvalidArgument(format!(
                "{} vertex coordinates for a cell with {} vertices",
                coords.len(),
                g.n_functions
            )));
        }
        self.scale = diameter(coords);
        let tol = 1e-14 * self.scale.powi(d as i32);
        for p in 0..g.n_points {
            let mut j = [[0.0; SPACE_DIM]; SPACE_DIM];
            let mut x = [0.0; SPACE_DIM];
            for (a, xa) in coords.iter().enumerate() {
                let v = g.value(0, a, p);
                for i in 0..SPACE_DIM {
                    x[i] += v * xa[i];
                }
                for l in 0..d {
                    let dn = g.gradient(0, l, a, p);
                    for i in 0..d {
                        j[i][l] += dn * xa[i];
                    }
                }
            }
            let (inv, det) = invert(&j, d);
            if !(det.abs() >= tol) {
                return Err(Error::DegenerateGeometry(format!(
                    "jacobian determinant {det:e} below {tol:e}"
                )));
            }
            self.jacobian[p] = j;
            self.inv_jacobian[p] = inv;
            self.det_jacobian[p] = det;
            self.points[p] = x;
        }
        Ok(())
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn jacobian(&self, p: usize) -> &Tensor {
        &self.jacobian[p]
    }

    pub fn inv_jacobian(&self, p: usize) -> &Tensor {
        &self.inv_jacobian[p]
    }

    pub fn det_jacobian(&self, p: usize) -> f64 {
        self.det_jacobian[p]
    }

    /// Physical coordinates of point `p`.
    pub fn point(&self, p: usize) -> &Point {
        &self.points[p]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Integration weight of point `p` including `|det J|`.
    pub fn measure(&self, p: usize) -> f64 {
        self.weights[p] * self.det_jacobian[p].abs()
    }

    /// Bounding-box diameter of the current cell.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Pushes reference shape functions forward with a cell map. Lagrangian
/// gradients are multiplied by `J^{-1}`; Raviart-Thomas functions use the
/// contravariant Piola map `J v / det J`.
pub fn apply_cell_map(
    fe: &ReferenceFE,
    reference: &ShapeEvaluation,
    map: &CellMap,
    out: &mut ShapeEvaluation,
) -> Result<()> {
    let d = map.num_dims();
    let (nc, nf, np) = (reference.num_components, reference.n_functions, reference.n_points);
    if np != map.num_points() || reference.num_dims != d {
        return Err(Error::InvalidArgument(
            "shape evaluation and cell map use different points".into(),
        ));
    }
    if out.values.len() != reference.values.len() || out.gradients.len() != reference.gradients.len() {
        *out = ShapeEvaluation::zeros(nc, d, nf, np);
    }
    match fe.fe_type() {
        FeType::Void => {}
        FeType::Lagrangian => {
            out.values.copy_from_slice(&reference.values);
            for p in 0..np {
                let inv = map.inv_jacobian(p);
                for c in 0..nc {
                    for f in 0..nf {
                        let mut g = [0.0; SPACE_DIM];
                        for (j, gj) in g.iter_mut().enumerate().take(d) {
                            *gj = reference.gradient(c, j, f, p);
                        }
                        for i in 0..d {
                            let v: f64 = (0..d).map(|j| g[j] * inv[j][i]).sum();
                            let k = out.gradient_index(c, i, f, p);
                            out.gradients[k] = v;
                        }
                    }
                }
            }
        }
        FeType::RaviartThomas => {
            for p in 0..np {
                let jac = map.jacobian(p);
                let inv = map.inv_jacobian(p);
                let det = map.det_jacobian(p);
                for f in 0..nf {
                    let mut v = [0.0; SPACE_DIM];
                    let mut g = [[0.0; SPACE_DIM]; SPACE_DIM];
                    for j in 0..d {
                        v[j] = reference.value(j, f, p);
                        for l in 0..d {
                            g[j][l] = reference.gradient(j, l, f, p);
                        }
                    }
                    for i in 0..d {
                        let k = out.value_index(i, f, p);
                        out.values[k] = (0..d).map(|j| jac[i][j] * v[j]).sum::<f64>() / det;
                        for m in 0..d {
                            let mut s = 0.0;
                            for j in 0..d {
                                for l in 0..d {
                                    s += jac[i][j] * g[j][l] * inv[l][m];
                                }
                            }
                            let k = out.gradient_index(i, m, f, p);
                            out.gradients[k] = s / det;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Reference and physical shape functions of one FE at one quadrature.
#[derive(Clone, Debug)]
pub struct CellIntegrator {
    fe: ReferenceFE,
    reference: ShapeEvaluation,
    physical: ShapeEvaluation,
}

impl CellIntegrator {
    pub fn new(fe: &ReferenceFE, quadrature: &Quadrature) -> Result<Self> {
        Self::at_points(fe, quadrature.points())
    }

    pub fn at_points(fe: &ReferenceFE, points: &[Vec<f64>]) -> Result<Self> {
        let reference = fe.evaluate(points)?;
        Ok(Self {
            fe: fe.clone(),
            physical: reference.clone(),
            reference,
        })
    }

    pub fn update(&mut self, map: &CellMap) -> Result<()> {
        apply_cell_map(&self.fe, &self.reference, map, &mut self.physical)
    }

    pub fn reference(&self) -> &ShapeEvaluation {
        &self.reference
    }

    /// Physical shape functions after the last update.
    pub fn physical(&self) -> &ShapeEvaluation {
        &self.physical
    }

    pub fn num_shape_functions(&self) -> usize {
        self.physical.n_functions
    }

    pub fn num_points(&self) -> usize {
        self.physical.n_points
    }

    /// Values of a scalar FE as `[f][p]`.
    pub fn get_values(&self, out: &mut Vec<f64>) -> Result<()> {
        if self.physical.num_components != 1 {
            return Err(Error::Unsupported("scalar values of a vector FE".into()));
        }
        out.clear();
        out.extend_from_slice(&self.physical.values);
        Ok(())
    }

    /// Gradients of a scalar FE as `[f][p]` vectors.
    pub fn get_gradients(&self, out: &mut Vec<Point>) -> Result<()> {
        if self.physical.num_components != 1 {
            return Err(Error::Unsupported("scalar gradients of a vector FE".into()));
        }
        let e = &self.physical;
        out.clear();
        for f in 0..e.n_functions {
            for p in 0..e.n_points {
                let mut g = [0.0; SPACE_DIM];
                for (i, gi) in g.iter_mut().enumerate().take(e.num_dims) {
                    *gi = e.gradient(0, i, f, p);
                }
                out.push(g);
            }
        }
        Ok(())
    }

    /// Divergences of a vector FE as `[f][p]`.
    pub fn get_divergences(&self, out: &mut Vec<f64>) -> Result<()> {
        if self.physical.num_components != self.physical.num_dims {
            return Err(Error::Unsupported("divergence of a non-vector FE".into()));
        }
        let e = &self.physical;
        out.clear();
        for f in 0..e.n_functions {
            for p in 0..e.n_points {
                out.push(e.divergence(f, p));
            }
        }
        Ok(())
    }
}

/// Reference coordinates in the cell of points given in the reference
/// coordinates of one of its facets.
pub fn restrict_to_facet(polytope: &Polytope, lid: usize, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = polytope.num_dims();
    let verts: Vec<Vec<f64>> = polytope
        .n_face_vertices(lid)
        .iter()
        .map(|&v| polytope.vertex_coords(v))
        .collect();
    let sub = polytope.n_face_polytope(lid);
    if sub.num_dims() == 0 {
        return Ok(points.iter().map(|_| verts[0].clone()).collect());
    }
    let geo = first_order_geometry(&sub)?.evaluate(points)?;
    Ok((0..points.len())
        .map(|p| {
            let mut x = vec![0.0; d];
            for (a, va) in verts.iter().enumerate() {
                let n = geo.value(0, a, p);
                for i in 0..d {
                    x[i] += n * va[i];
                }
            }
            x
        })
        .collect())
}

/// `Π[g][gp]`: facet quadrature point seen from the minus side for each
/// symmetry `g` of the facet. Simplex facets always use the identity.
pub fn build_qpoints_permutation(facet: &Polytope, quadrature: &Quadrature) -> Result<Vec<Vec<usize>>> {
    let n = quadrature.num_points();
    let identity: Vec<usize> = (0..n).collect();
    if facet.num_dims() == 0 || facet.is_simplex() && facet.num_dims() > 1 {
        let count = if facet.num_dims() == 0 { 1 } else { facet.symmetries().len() };
        return Ok(vec![identity; count]);
    }
    facet
        .symmetries()
        .iter()
        .map(|g| {
            (0..n)
                .map(|gp| {
                    let image = g.apply_coords(quadrature.point_coords(gp));
                    (0..n)
                        .find(|&q| {
                            quadrature
                                .point_coords(q)
                                .iter()
                                .zip(&image)
                                .all(|(a, b)| (a - b).abs() < 1e-12)
                        })
                        .ok_or_else(|| {
                            Error::DegenerateGeometry(
                                "facet quadrature is not invariant under the facet symmetries".into(),
                            )
                        })
                })
                .collect()
        })
        .collect()
}

/// Geometry of a facet seen from its one or two cells.
#[derive(Clone, Debug)]
pub struct FacetMaps {
    num_dims: usize,
    quadrature: Quadrature,
    restricted: Vec<Vec<Vec<f64>>>,
    /// Reference tangents of each local facet.
    tangents: Vec<Vec<Vec<f64>>>,
    side_maps: [Vec<CellMap>; 2],
    qpoints_perm: Vec<Vec<usize>>,
    lids: [usize; 2],
    permutation: usize,
    two_sided: bool,
    normals: Vec<Point>,
    det_facet: Vec<f64>,
    facet_scale: f64,
}

impl FacetMaps {
    /// Facet maps of a cell polytope for a facet quadrature.
    pub fn new(polytope: &Polytope, quadrature: &Quadrature) -> Result<Self> {
        let d = polytope.num_dims();
        if d == 0 || d > SPACE_DIM {
            return Err(Error::DimensionOutOfRange(d, SPACE_DIM));
        }
        if quadrature.num_dims() + 1 != d {
            return Err(Error::InvalidArgument("facet quadrature has the wrong dimension".into()));
        }
        let facets: Vec<usize> = polytope.n_faces_of_dim(d - 1).collect();
        let mut restricted = vec![Vec::new(); polytope.num_n_faces()];
        let mut maps = Vec::new();
        let mut tangents = vec![Vec::new(); polytope.num_n_faces()];
        for &lid in &facets {
            restricted[lid] = restrict_to_facet(polytope, lid, quadrature.points())?;
            let mut corners = vec![vec![0.0; d - 1]];
            for l in 0..d - 1 {
                let mut e = vec![0.0; d - 1];
                e[l] = 1.0;
                corners.push(e);
            }
            let x = restrict_to_facet(polytope, lid, &corners)?;
            tangents[lid] = x[1..]
                .iter()
                .map(|xl| xl.iter().zip(&x[0]).map(|(a, b)| a - b).collect())
                .collect();
        }
        for lid in 0..polytope.num_n_faces() {
            maps.push(if restricted[lid].is_empty() {
                None
            } else {
                Some(CellMap::new(polytope, &restricted[lid], quadrature.weights())?)
            });
        }
        let maps: Vec<CellMap> = maps
            .into_iter()
            .map(|m| m.unwrap_or_else(|| CellMap::new(polytope, &[], &[]).expect("empty map")))
            .collect();
        let facet = polytope.n_face_polytope(facets[0]);
        let n = quadrature.num_points();
        Ok(Self {
            num_dims: d,
            qpoints_perm: build_qpoints_permutation(&facet, quadrature)?,
            quadrature: quadrature.clone(),
            restricted,
            tangents,
            side_maps: [maps.clone(), maps],
            lids: [facets[0], facets[0]],
            permutation: 0,
            two_sided: false,
            normals: vec![[0.0; SPACE_DIM]; n],
            det_facet: vec![0.0; n],
            facet_scale: 0.0,
        })
    }

    /// Updates the geometry for a facet. `plus` and `minus` give each cell's
    /// vertex coordinates and the local facet id; `permutation` is the facet
    /// permutation index from the plus to the minus view.
    pub fn update(
        &mut self,
        plus: (&[Point], usize),
        minus: Option<(&[Point], usize)>,
        permutation: usize,
    ) -> Result<()> {
        let d = self.num_dims;
        let (coords, lid) = plus;
        if self.restricted.get(lid).is_none_or(|r| r.is_empty()) {
            return Err(Error::InvalidArgument(format!("{lid} is not a facet id")));
        }
        self.side_maps[0][lid].update(coords)?;
        self.lids[0] = lid;
        let nv = coords.len() as f64;
        let mut center = [0.0; SPACE_DIM];
        for x in coords {
            for i in 0..SPACE_DIM {
                center[i] += x[i] / nv;
            }
        }
        let map = &self.side_maps[0][lid];
        let tangents = &self.tangents[lid];
        let mut fmin = f64::INFINITY;
        for p in 0..self.quadrature.num_points() {
            let j = map.jacobian(p);
            let t: Vec<Point> = tangents
                .iter()
                .map(|tr| {
                    let mut v = [0.0; SPACE_DIM];
                    for i in 0..d {
                        v[i] = (0..d).map(|l| j[i][l] * tr[l]).sum();
                    }
                    v
                })
                .collect();
            let (mut n, det) = match d {
                1 => ([1.0, 0.0, 0.0], 1.0),
                2 => {
                    let len = norm(&t[0]);
                    ([t[0][1] / len, -t[0][0] / len, 0.0], len)
                }
                _ => {
                    let c = cross(&t[0], &t[1]);
                    let len = norm(&c);
                    ([c[0] / len, c[1] / len, c[2] / len], len)
                }
            };
            if !(det > 0.0) || !n.iter().all(|x| x.is_finite()) {
                return Err(Error::DegenerateGeometry("facet with zero measure".into()));
            }
            let x = map.point(p);
            let out: f64 = (0..d).map(|i| n[i] * (x[i] - center[i])).sum();
            if out < 0.0 {
                n.iter_mut().for_each(|v| *v = -*v);
            }
            self.normals[p] = n;
            self.det_facet[p] = det;
            fmin = fmin.min(det);
        }
        self.facet_scale = fmin;
        self.two_sided = minus.is_some();
        if let Some((coords, lid)) = minus {
            if self.restricted.get(lid).is_none_or(|r| r.is_empty()) {
                return Err(Error::InvalidArgument(format!("{lid} is not a facet id")));
            }
            if permutation >= self.qpoints_perm.len() {
                return Err(Error::InvalidArgument(format!(
                    "permutation index {permutation} out of range"
                )));
            }
            self.side_maps[1][lid].update(coords)?;
            self.lids[1] = lid;
            self.permutation = permutation;
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.quadrature.num_points()
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    pub fn is_interior(&self) -> bool {
        self.two_sided
    }

    /// Outward unit normal of the plus cell at point `gp`.
    pub fn normal(&self, gp: usize) -> &Point {
        &self.normals[gp]
    }

    /// `|J_F|` at point `gp`.
    pub fn det_jacobian(&self, gp: usize) -> f64 {
        self.det_facet[gp]
    }

    /// Quadrature weight times `|J_F|`.
    pub fn measure(&self, gp: usize) -> f64 {
        self.quadrature.weights()[gp] * self.det_facet[gp]
    }

    /// Facet measure.
    pub fn facet_measure(&self) -> f64 {
        (0..self.num_points()).map(|gp| self.measure(gp)).sum()
    }

    /// Cell map of a side (0 plus, 1 minus) restricted to the facet, in its
    /// own point order.
    pub fn side_map(&self, side: usize) -> &CellMap {
        &self.side_maps[side][self.lids[side]]
    }

    pub fn lid(&self, side: usize) -> usize {
        self.lids[side]
    }

    /// Point of the side map matching facet point `gp`.
    pub fn side_point_index(&self, side: usize, gp: usize) -> usize {
        if side == 0 {
            gp
        } else {
            self.qpoints_perm[self.permutation][gp]
        }
    }

    /// Physical coordinates of facet point `gp`.
    pub fn point(&self, gp: usize) -> &Point {
        self.side_maps[0][self.lids[0]].point(gp)
    }

    pub fn qpoints_permutation(&self, permutation: usize) -> &[usize] {
        &self.qpoints_perm[permutation]
    }

    pub fn num_permutations(&self) -> usize {
        self.qpoints_perm.len()
    }

    /// Restricted reference points of a local facet.
    pub fn restricted_points(&self, lid: usize) -> &[Vec<f64>] {
        &self.restricted[lid]
    }
}

/// Shape functions of one FE on both sides of a facet. The minus side is
/// returned already permuted to the plus numbering of quadrature points.
#[derive(Clone, Debug)]
pub struct FacetIntegrator {
    fe: ReferenceFE,
    reference: Vec<ShapeEvaluation>,
    sides: [ShapeEvaluation; 2],
    scratch: ShapeEvaluation,
}

impl FacetIntegrator {
    pub fn new(fe: &ReferenceFE, maps: &FacetMaps) -> Result<Self> {
        let reference = (0..maps.restricted.len())
            .map(|lid| {
                if maps.restricted[lid].is_empty() {
                    Ok(ShapeEvaluation::default())
                } else {
                    fe.evaluate(&maps.restricted[lid])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fe: fe.clone(),
            reference,
            sides: Default::default(),
            scratch: ShapeEvaluation::default(),
        })
    }

    pub fn update(&mut self, maps: &FacetMaps) -> Result<()> {
        let lid = maps.lid(0);
        apply_cell_map(&self.fe, &self.reference[lid], maps.side_map(0), &mut self.sides[0])?;
        if maps.is_interior() {
            let lid = maps.lid(1);
            apply_cell_map(&self.fe, &self.reference[lid], maps.side_map(1), &mut self.scratch)?;
            let s = &self.scratch;
            let out = &mut self.sides[1];
            if out.values.len() != s.values.len() || out.gradients.len() != s.gradients.len() {
                *out = s.clone();
            }
            let perm = maps.qpoints_permutation(maps.permutation);
            for c in 0..s.num_components {
                for f in 0..s.n_functions {
                    for (gp, &q) in perm.iter().enumerate() {
                        let k = out.value_index(c, f, gp);
                        out.values[k] = s.value(c, f, q);
                        for dir in 0..s.num_dims {
                            let k = out.gradient_index(c, dir, f, gp);
                            out.gradients[k] = s.gradient(c, dir, f, q);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Physical shape functions of side 0 (plus) or 1 (minus).
    pub fn side(&self, side: usize) -> &ShapeEvaluation {
        &self.sides[side]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad_coords(c: [[f64; 2]; 4]) -> Vec<Point> {
        c.iter().map(|p| [p[0], p[1], 0.0]).collect()
    }

    #[test]
    fn identity_and_scaling() {
        let p = Polytope::n_cube(2).unwrap();
        let q = Quadrature::n_cube(2, 2);
        let mut m = CellMap::for_quadrature(&p, &q).unwrap();
        m.update(&quad_coords([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])).unwrap();
        for gp in 0..q.num_points() {
            assert_abs_diff_eq!(m.det_jacobian(gp), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.jacobian(gp)[0][1], 0.0, epsilon = 1e-15);
        }
        let h = 0.25;
        m.update(&quad_coords([[0.0, 0.0], [h, 0.0], [0.0, h], [h, h]])).unwrap();
        for gp in 0..q.num_points() {
            assert_abs_diff_eq!(m.det_jacobian(gp), h * h, epsilon = 1e-15);
            assert_abs_diff_eq!(m.inv_jacobian(gp)[1][1], 1.0 / h, epsilon = 1e-12);
        }
        let fe = ReferenceFE::new(&p, FeType::Lagrangian, 2, FieldType::Scalar, true).unwrap();
        let mut ci = CellIntegrator::new(&fe, &q).unwrap();
        ci.update(&m).unwrap();
        for f in 0..9 {
            for gp in 0..q.num_points() {
                assert_abs_diff_eq!(
                    ci.physical().gradient(0, 1, f, gp),
                    ci.reference().gradient(0, 1, f, gp) / h,
                    epsilon = 1e-12
                );
                assert_eq!(ci.physical().value(0, f, gp), ci.reference().value(0, f, gp));
            }
        }
        assert!(m.update(&quad_coords([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])).is_err());
    }

    #[test]
    fn bilinear_jacobian() {
        let p = Polytope::n_cube(2).unwrap();
        let q = Quadrature::n_cube(2, 4);
        let mut m = CellMap::for_quadrature(&p, &q).unwrap();
        let a = 0.4;
        m.update(&quad_coords([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0 + a, 1.0 + a]])).unwrap();
        // x = s + a s t, y = t + a s t
        let mut area = 0.0;
        for gp in 0..q.num_points() {
            let (s, t) = (q.point_coords(gp)[0], q.point_coords(gp)[1]);
            let j = [[1.0 + a * t, a * s], [a * t, 1.0 + a * s]];
            for i in 0..2 {
                for l in 0..2 {
                    assert_abs_diff_eq!(m.jacobian(gp)[i][l], j[i][l], epsilon = 1e-14);
                }
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert_abs_diff_eq!(m.det_jacobian(gp), det, epsilon = 1e-14);
            let ji = m.inv_jacobian(gp);
            for i in 0..2 {
                for l in 0..2 {
                    let prod: f64 = (0..2).map(|k| m.jacobian(gp)[i][k] * ji[k][l]).sum();
                    assert_abs_diff_eq!(prod, if i == l { 1.0 } else { 0.0 }, epsilon = 1e-12);
                }
            }
            area += m.measure(gp);
        }
        // shoelace area of the quadrilateral
        assert_abs_diff_eq!(area, 1.0 + a, epsilon = 1e-13);
    }

    fn divergence_theorem(p: &Polytope, coords: &[Point]) {
        let d = p.num_dims();
        let q = Quadrature::for_polytope(p, 2).unwrap();
        let mut m = CellMap::for_quadrature(p, &q).unwrap();
        m.update(coords).unwrap();
        // v = A x + b with div v = trace A
        let a = [[1.3, -0.2, 0.5], [0.7, 2.1, -1.1], [0.3, 0.9, -0.4]];
        let b = [0.2, -0.6, 1.5];
        let trace: f64 = (0..d).map(|i| a[i][i]).sum();
        let volume: f64 = (0..q.num_points()).map(|gp| m.measure(gp)).sum();
        let fq = Quadrature::for_shape(d - 1, p.is_n_cube(), p.is_simplex() && d > 1, 2).unwrap();
        let mut fm = FacetMaps::new(p, &fq).unwrap();
        let mut flux = 0.0;
        for lid in p.n_faces_of_dim(d - 1) {
            fm.update((coords, lid), None, 0).unwrap();
            for gp in 0..fm.num_points() {
                let x = fm.point(gp);
                let n = fm.normal(gp);
                assert_abs_diff_eq!(norm(n), 1.0, epsilon = 1e-14);
                let vn: f64 = (0..d)
                    .map(|i| ((0..d).map(|j| a[i][j] * x[j]).sum::<f64>() + b[i]) * n[i])
                    .sum();
                flux += vn * fm.measure(gp);
            }
        }
        assert!((flux - trace * volume).abs() <= 1e-12, "{flux} vs {}", trace * volume);
    }

    #[test]
    fn divergence_theorem_on_single_cells() {
        let sq = Polytope::n_cube(2).unwrap();
        divergence_theorem(&sq, &quad_coords([[0.1, 0.0], [1.2, 0.2], [-0.1, 0.9], [1.0, 1.3]]));
        let tri = Polytope::n_simplex(2).unwrap();
        let c: Vec<Point> = vec![[0.0, 0.0, 0.0], [1.0, 0.3, 0.0], [0.2, 0.8, 0.0]];
        divergence_theorem(&tri, &c);
        let hex = Polytope::n_cube(3).unwrap();
        let c: Vec<Point> = (0..8)
            .map(|v| {
                let (x, y, z) = ((v & 1) as f64, ((v >> 1) & 1) as f64, ((v >> 2) & 1) as f64);
                [2.0 * x + 0.3 * y, 0.5 * y + 0.1 * z, 1.5 * z + 0.2 * x]
            })
            .collect();
        divergence_theorem(&hex, &c);
        let tet = Polytope::n_simplex(3).unwrap();
        let c: Vec<Point> = vec![[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 1.1, 0.1], [0.1, 0.3, 0.9]];
        divergence_theorem(&tet, &c);
        let seg = Polytope::n_cube(1).unwrap();
        divergence_theorem(&seg, &[[0.5, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    }

    #[test]
    fn facet_normals_and_measures() {
        let sq = Polytope::n_cube(2).unwrap();
        let fq = Quadrature::n_cube(1, 2);
        let mut fm = FacetMaps::new(&sq, &fq).unwrap();
        let c = quad_coords([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [2.0, 1.0]]);
        // facet lid 5: x = 1 in reference coordinates
        let lid = sq.index_of(crate::polytope::NFace::new(0b10, 0b01)).unwrap();
        fm.update((&c, lid), None, 0).unwrap();
        for gp in 0..fm.num_points() {
            assert_eq!(fm.normal(gp), &[1.0, 0.0, 0.0]);
        }
        assert_abs_diff_eq!(fm.facet_measure(), 1.0, epsilon = 1e-14);

        let tri = Polytope::n_simplex(2).unwrap();
        let fq = Quadrature::n_simplex(1, 2);
        let mut fm = FacetMaps::new(&tri, &fq).unwrap();
        let c: Vec<Point> = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        // the edge between vertices 0 and 2 runs from (0,0) to (1,1)
        let lid = sq_edge(&tri, &[0, 2]);
        fm.update((&c, lid), None, 0).unwrap();
        let r = 0.5f64.sqrt();
        for gp in 0..fm.num_points() {
            assert_abs_diff_eq!(fm.normal(gp)[0], -r, epsilon = 1e-14);
            assert_abs_diff_eq!(fm.normal(gp)[1], r, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(fm.facet_measure(), 2f64.sqrt(), epsilon = 1e-14);
    }

    fn sq_edge(p: &Polytope, verts: &[usize]) -> usize {
        p.n_faces_of_dim(1).find(|&i| p.n_face_vertices(i) == verts).unwrap()
    }

    #[test]
    fn reversed_edge_permutation() {
        let sq = Polytope::n_cube(2).unwrap();
        let fq = Quadrature::n_cube(1, 3);
        let fm = FacetMaps::new(&sq, &fq).unwrap();
        assert_eq!(fm.qpoints_permutation(0), &[0, 1]);
        assert_eq!(fm.qpoints_permutation(1), &[1, 0]);
        let hex = Polytope::n_cube(3).unwrap();
        let fm = FacetMaps::new(&hex, &Quadrature::n_cube(2, 4)).unwrap();
        assert_eq!(fm.num_permutations(), 8);
        for g in 0..8 {
            let mut p = fm.qpoints_permutation(g).to_vec();
            p.sort();
            assert_eq!(p, (0..9).collect::<Vec<_>>());
        }
        let tet = Polytope::n_simplex(3).unwrap();
        let fm = FacetMaps::new(&tet, &Quadrature::n_simplex(2, 4)).unwrap();
        for g in 0..fm.num_permutations() {
            assert_eq!(fm.qpoints_permutation(g), (0..fm.num_points()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rt_piola() {
        let sq = Polytope::n_cube(2).unwrap();
        let fe = ReferenceFE::new(&sq, FeType::RaviartThomas, 0, FieldType::Vector, true).unwrap();
        let q = Quadrature::n_cube(2, 2);
        let mut m = CellMap::for_quadrature(&sq, &q).unwrap();
        m.update(&quad_coords([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])).unwrap();
        let mut ci = CellIntegrator::new(&fe, &q).unwrap();
        ci.update(&m).unwrap();
        let mut div = Vec::new();
        ci.get_divergences(&mut div).unwrap();
        // basis for facets x=0, x=1, y=0, y=1: divergence -1, +1, -1, +1
        let expect = [-1.0, 1.0, -1.0, 1.0];
        for f in 0..4 {
            for gp in 0..q.num_points() {
                assert_abs_diff_eq!(div[f * q.num_points() + gp], expect[f], epsilon = 1e-13);
            }
        }
        assert!(ci.get_values(&mut Vec::new()).is_err());

        let h = 0.5;
        let c = quad_coords([[0.0, 0.0], [h, 0.0], [0.1, h], [h + 0.2, h + 0.1]]);
        m.update(&c).unwrap();
        ci.update(&m).unwrap();
        for f in 0..4 {
            for gp in 0..q.num_points() {
                let ref_div = ci.reference().divergence(f, gp);
                let phys = ci.physical().divergence(f, gp);
                assert_abs_diff_eq!(phys * m.det_jacobian(gp), ref_div, epsilon = 1e-12);
            }
        }
        // unit flux on the scaled cell: the x = h facet
        let fq = Quadrature::n_cube(1, 4);
        let mut fm = FacetMaps::new(&sq, &fq).unwrap();
        let mut fi = FacetIntegrator::new(&fe, &fm).unwrap();
        for (k, lid) in sq.n_faces_of_dim(1).enumerate() {
            fm.update((&c, lid), None, 0).unwrap();
            fi.update(&fm).unwrap();
            let e = fi.side(0);
            for f in 0..4 {
                let flux: f64 = (0..fm.num_points())
                    .map(|gp| (0..2).map(|i| e.value(i, f, gp) * fm.normal(gp)[i]).sum::<f64>() * fm.measure(gp))
                    .sum();
                let expect = if f == k { if k % 2 == 0 { -1.0 } else { 1.0 } } else { 0.0 };
                assert_abs_diff_eq!(flux, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity_on_facets() {
        let sq = Polytope::n_cube(2).unwrap();
        let fe = ReferenceFE::new(&sq, FeType::Lagrangian, 1, FieldType::Scalar, true).unwrap();
        let mut fm = FacetMaps::new(&sq, &Quadrature::n_cube(1, 2)).unwrap();
        let mut fi = FacetIntegrator::new(&fe, &fm).unwrap();
        let c = quad_coords([[0.0, 0.0], [1.0, 0.1], [0.0, 1.0], [1.2, 1.0]]);
        for lid in sq.n_faces_of_dim(1) {
            fm.update((&c, lid), None, 0).unwrap();
            fi.update(&fm).unwrap();
            for gp in 0..fm.num_points() {
                let s: f64 = (0..4).map(|f| fi.side(0).value(0, f, gp)).sum();
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
            }
        }
    }
}
