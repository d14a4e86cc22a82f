//! Reference finite elements: a polytope, a local polynomial space and a set
//! of moments, with the shape functions obtained as the dual basis.

mod quadrature;

pub use quadrature::{gauss_legendre, Quadrature};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polynomial::{PolynomialSpace, TensorProductSpace, TruncatedTensorProductSpace};
use crate::polytope::{NFace, NodeArray, Polytope};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeType {
    Lagrangian,
    RaviartThomas,
    Void,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldType {
    Scalar,
    Vector,
    Tensor,
}

impl FieldType {
    pub fn num_components(self, num_dims: usize) -> usize {
        match self {
            Self::Scalar => 1,
            Self::Vector => num_dims,
            Self::Tensor => num_dims * num_dims,
        }
    }
}

/// Values and gradients of vector-valued functions at a set of points.
#[derive(Clone, Debug, Default)]
pub struct ShapeEvaluation {
    pub num_components: usize,
    pub num_dims: usize,
    pub n_functions: usize,
    pub n_points: usize,
    /// `values[(c * n_functions + f) * n_points + p]`
    pub values: Vec<f64>,
    /// `gradients[((c * num_dims + dir) * n_functions + f) * n_points + p]`
    pub gradients: Vec<f64>,
}

impl ShapeEvaluation {
    pub fn zeros(num_components: usize, num_dims: usize, n_functions: usize, n_points: usize) -> Self {
        Self {
            num_components,
            num_dims,
            n_functions,
            n_points,
            values: vec![0.0; num_components * n_functions * n_points],
            gradients: vec![0.0; num_components * num_dims * n_functions * n_points],
        }
    }

    #[inline]
    pub fn value(&self, c: usize, f: usize, p: usize) -> f64 {
        self.values[(c * self.n_functions + f) * self.n_points + p]
    }

    #[inline]
    pub fn gradient(&self, c: usize, dir: usize, f: usize, p: usize) -> f64 {
        self.gradients[((c * self.num_dims + dir) * self.n_functions + f) * self.n_points + p]
    }

    #[inline]
    pub(crate) fn value_index(&self, c: usize, f: usize, p: usize) -> usize {
        (c * self.n_functions + f) * self.n_points + p
    }

    #[inline]
    pub(crate) fn gradient_index(&self, c: usize, dir: usize, f: usize, p: usize) -> usize {
        ((c * self.num_dims + dir) * self.n_functions + f) * self.n_points + p
    }

    /// Divergence of a vector-valued function (`num_components == num_dims`).
    pub fn divergence(&self, f: usize, p: usize) -> f64 {
        (0..self.num_components).map(|c| self.gradient(c, c, f, p)).sum()
    }
}

/// Moments as weighted point evaluations of single components.
#[derive(Clone, Debug, Default)]
pub struct Moments {
    points: Vec<Vec<f64>>,
    functionals: Vec<Vec<(usize, usize, f64)>>,
}

impl Moments {
    /// Reference points at which the moments sample their argument.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Entries `(point, component, weight)` of moment `a`.
    pub fn functional(&self, a: usize) -> &[(usize, usize, f64)] {
        &self.functionals[a]
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    /// Applies every moment to a function given by its values `v(point, comp)`.
    pub fn apply(&self, v: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        self.functionals
            .iter()
            .map(|entries| entries.iter().map(|&(p, c, w)| w * v(p, c)).sum())
            .collect()
    }
}

/// Scalar polynomial spaces combined into single-component vector functions.
#[derive(Clone, Debug, Default)]
struct PreBasis {
    spaces: Vec<PolynomialSpace>,
    /// `(space, function in space, component)`
    functions: Vec<(usize, usize, usize)>,
}

/// The triplet of a reference cell, a local space and its moments.
#[derive(Clone, Debug)]
pub struct ReferenceFE {
    polytope: Polytope,
    fe_type: FeType,
    field_type: FieldType,
    order: usize,
    conformity: bool,
    num_components: usize,
    own_dofs_n_face: Vec<Vec<usize>>,
    dofs_n_face: Vec<Vec<usize>>,
    /// Per n-face dimension: `[permutation][node] -> node`.
    own_dof_permutations: Vec<Vec<Vec<usize>>>,
    dofs_per_node: usize,
    pre_basis: PreBasis,
    moments: Moments,
    change_of_basis: DMatrix<f64>,
    nodal: bool,
    node_array: Option<NodeArray>,
}

/// `Φ = C^{-T}` by LU with partial pivoting.
pub fn build_change_of_basis(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.nrows() != c.ncols() {
        return Err(Error::InvalidArgument(format!(
            "moment matrix is {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let n = c.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let max_row = c.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let threshold = 1e-12 * max_row;
    let lu = c.clone().lu();
    let u = lu.u();
    let pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(pivot >= threshold) || max_row == 0.0 {
        return Err(Error::SingularMatrix { pivot, threshold });
    }
    let inv = lu
        .try_inverse()
        .ok_or(Error::SingularMatrix { pivot, threshold })?;
    Ok(inv.transpose())
}

fn expand(nodes: &[usize], per_node: usize) -> Vec<usize> {
    nodes
        .iter()
        .flat_map(|&n| (0..per_node).map(move |c| n * per_node + c))
        .collect()
}

/// `[g][j]`: position of the image of `lex[j]` under symmetry `g` of `sub`.
fn lex_tables(sub: &Polytope, k: usize, lex: &[Vec<usize>]) -> Vec<Vec<usize>> {
    sub.symmetries()
        .iter()
        .map(|g| {
            lex.iter()
                .map(|a| {
                    let b = g.apply_lex(a, k);
                    lex.iter().position(|x| *x == b).expect("node set closed under symmetries")
                })
                .collect()
        })
        .collect()
}

fn facet_point(face: NFace, d: usize, s: &[f64]) -> Vec<f64> {
    let mut l = 0;
    (0..d)
        .map(|i| {
            if face.extrusion & (1 << i) != 0 {
                l += 1;
                s[l - 1]
            } else if face.anchor & (1 << i) != 0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

impl ReferenceFE {
    /// Builds a reference FE of the given kind.
    pub fn new(
        polytope: &Polytope,
        fe_type: FeType,
        order: usize,
        field_type: FieldType,
        conformity: bool,
    ) -> Result<Self> {
        match fe_type {
            FeType::Lagrangian => Self::lagrangian(polytope, order, field_type, conformity),
            FeType::RaviartThomas => Self::raviart_thomas(polytope, order, conformity),
            FeType::Void => Ok(Self::void(polytope, field_type)),
        }
    }

    /// A reference FE with no shape functions.
    pub fn void(polytope: &Polytope, field_type: FieldType) -> Self {
        let d = polytope.num_dims();
        let n = polytope.num_n_faces();
        Self {
            polytope: polytope.clone(),
            fe_type: FeType::Void,
            field_type,
            order: 0,
            conformity: true,
            num_components: field_type.num_components(d),
            own_dofs_n_face: vec![Vec::new(); n],
            dofs_n_face: vec![Vec::new(); n],
            own_dof_permutations: vec![Vec::new(); d + 1],
            dofs_per_node: 1,
            pre_basis: PreBasis::default(),
            moments: Moments::default(),
            change_of_basis: DMatrix::zeros(0, 0),
            nodal: true,
            node_array: None,
        }
    }

    fn lagrangian(
        polytope: &Polytope,
        k: usize,
        field_type: FieldType,
        conformity: bool,
    ) -> Result<Self> {
        let d = polytope.num_dims();
        if d == 0 {
            return Err(Error::Unsupported("Lagrangian FE on a point".into()));
        }
        let cube = polytope.is_n_cube();
        if !cube && !polytope.is_simplex() {
            return Err(Error::Unsupported(
                "Lagrangian FEs need an n-cube or n-simplex".into(),
            ));
        }
        let nc = field_type.num_components(d);
        let nodes = NodeArray::uniform(polytope, k)?;
        let space: PolynomialSpace = if cube {
            TensorProductSpace::lagrange(&vec![k; d]).into()
        } else {
            TruncatedTensorProductSpace::new(d, k).into()
        };
        let functions = (0..space.dimension())
            .flat_map(|f| (0..nc).map(move |c| (0, f, c)))
            .collect();
        let moments = Moments {
            points: (0..nodes.num_nodes()).map(|n| nodes.coords(n).to_vec()).collect(),
            functionals: (0..nodes.num_nodes())
                .flat_map(|n| (0..nc).map(move |c| vec![(n, c, 1.0)]))
                .collect(),
        };

        let nf = polytope.num_n_faces();
        let cell = polytope.cell_index();
        let mut own = vec![Vec::new(); nf];
        let mut dofs = vec![Vec::new(); nf];
        for i in 0..nf {
            dofs[i] = expand(&nodes.closed_nodes(i), nc);
            if conformity {
                own[i] = expand(&nodes.own_nodes(i), nc);
            }
        }
        if !conformity {
            own[cell] = (0..nodes.num_nodes() * nc).collect();
        }

        let mut perms = vec![Vec::new(); d + 1];
        for (dim, table) in perms.iter_mut().enumerate().take(d).skip(1) {
            let i = polytope.n_faces_of_dim(dim).start;
            let sub = polytope.n_face_polytope(i);
            let sub_nodes = NodeArray::uniform(&sub, k)?;
            let lex: Vec<Vec<usize>> = sub_nodes
                .own_nodes(sub.cell_index())
                .into_iter()
                .map(|n| sub_nodes.node(n).to_vec())
                .collect();
            *table = lex_tables(&sub, k, &lex);
        }

        let mut fe = Self {
            polytope: polytope.clone(),
            fe_type: FeType::Lagrangian,
            field_type,
            order: k,
            conformity,
            num_components: nc,
            own_dofs_n_face: own,
            dofs_n_face: dofs,
            own_dof_permutations: perms,
            dofs_per_node: nc,
            pre_basis: PreBasis {
                spaces: vec![space],
                functions,
            },
            moments,
            change_of_basis: DMatrix::zeros(0, 0),
            nodal: cube,
            node_array: Some(nodes),
        };
        fe.finish()?;
        Ok(fe)
    }

    fn raviart_thomas(polytope: &Polytope, k: usize, conformity: bool) -> Result<Self> {
        let d = polytope.num_dims();
        if d == 0 || !polytope.is_n_cube() {
            return Err(Error::Unsupported(
                "Raviart-Thomas FEs are only available on n-cubes".into(),
            ));
        }
        let mut spaces = Vec::with_capacity(d);
        let mut functions = Vec::new();
        for c in 0..d {
            let orders: Vec<usize> = (0..d).map(|i| if i == c { k + 1 } else { k }).collect();
            let space: PolynomialSpace = TensorProductSpace::lagrange(&orders).into();
            functions.extend((0..space.dimension()).map(|f| (c, f, c)));
            spaces.push(space);
        }

        let degree = 2 * k + 2;
        let mut points = Vec::new();
        let mut functionals = Vec::new();
        let nf = polytope.num_n_faces();
        let mut own = vec![Vec::new(); nf];
        let mut dofs = vec![Vec::new(); nf];

        let facet_quad = Quadrature::for_shape(d - 1, true, false, degree)?;
        let facet_space = TensorProductSpace::lagrange(&vec![k; d - 1]);
        let facet_eval = PolynomialSpace::from(facet_space.clone()).evaluate(facet_quad.points())?;
        for fi in polytope.n_faces_of_dim(d - 1) {
            let face = polytope.n_face(fi);
            let normal = (0..d)
                .find(|i| face.extrusion & (1 << i) == 0)
                .expect("facet misses one direction");
            let base = points.len();
            for s in facet_quad.points() {
                points.push(facet_point(face, d, s));
            }
            let first = functionals.len();
            for q in 0..facet_space.dimension() {
                functionals.push(
                    facet_quad
                        .weights()
                        .iter()
                        .enumerate()
                        .map(|(p, w)| (base + p, normal, w * facet_eval.value(q, p)))
                        .collect(),
                );
            }
            own[fi] = (first..functionals.len()).collect();
            dofs[fi] = own[fi].clone();
        }

        let cell = polytope.cell_index();
        let first_interior = functionals.len();
        if k > 0 {
            let quad = Quadrature::n_cube(d, degree);
            let base = points.len();
            points.extend(quad.points().iter().cloned());
            for c in 0..d {
                let orders: Vec<usize> = (0..d).map(|i| if i == c { k - 1 } else { k }).collect();
                let test = PolynomialSpace::from(TensorProductSpace::lagrange(&orders));
                let eval = test.evaluate(quad.points())?;
                for q in 0..test.dimension() {
                    functionals.push(
                        quad.weights()
                            .iter()
                            .enumerate()
                            .map(|(p, w)| (base + p, c, w * eval.value(q, p)))
                            .collect(),
                    );
                }
            }
        }
        let total = functionals.len();
        if conformity {
            own[cell] = (first_interior..total).collect();
        } else {
            for o in own.iter_mut() {
                o.clear();
            }
            own[cell] = (0..total).collect();
        }
        dofs[cell] = (0..total).collect();

        let mut perms = vec![Vec::new(); d + 1];
        if d >= 2 {
            let fi = polytope.n_faces_of_dim(d - 1).start;
            let sub = polytope.n_face_polytope(fi);
            let sub_nodes = NodeArray::uniform(&sub, k)?;
            let lex: Vec<Vec<usize>> = (0..sub_nodes.num_nodes())
                .map(|n| sub_nodes.node(n).to_vec())
                .collect();
            perms[d - 1] = lex_tables(&sub, k, &lex);
        }

        let mut fe = Self {
            polytope: polytope.clone(),
            fe_type: FeType::RaviartThomas,
            field_type: FieldType::Vector,
            order: k,
            conformity,
            num_components: d,
            own_dofs_n_face: own,
            dofs_n_face: dofs,
            own_dof_permutations: perms,
            dofs_per_node: 1,
            pre_basis: PreBasis { spaces, functions },
            moments: Moments {
                points,
                functionals,
            },
            change_of_basis: DMatrix::zeros(0, 0),
            nodal: false,
            node_array: None,
        };
        fe.finish()?;
        Ok(fe)
    }

    fn finish(&mut self) -> Result<()> {
        let n = self.pre_basis.functions.len();
        if n != self.moments.len() {
            return Err(Error::State(format!(
                "{n} pre-basis functions but {} moments",
                self.moments.len()
            )));
        }
        let pre = self.evaluate_pre_basis(&self.moments.points)?;
        let c = Self::moment_matrix_of(&self.moments, &pre);
        self.change_of_basis = if self.nodal {
            DMatrix::identity(n, n)
        } else {
            build_change_of_basis(&c)?
        };
        Ok(())
    }

    /// `M[a][b] = σ_a(f_b)` for functions evaluated at the moment points.
    fn moment_matrix_of(moments: &Moments, eval: &ShapeEvaluation) -> DMatrix<f64> {
        let n = eval.n_functions;
        let mut m = DMatrix::zeros(moments.len(), n);
        for (a, entries) in moments.functionals.iter().enumerate() {
            for b in 0..n {
                m[(a, b)] = entries.iter().map(|&(p, c, w)| w * eval.value(c, b, p)).sum();
            }
        }
        m
    }

    fn evaluate_pre_basis(&self, points: &[Vec<f64>]) -> Result<ShapeEvaluation> {
        let d = self.polytope.num_dims();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "point of dimension {} on a {d}-dimensional reference FE",
                p.len()
            )));
        }
        let np = points.len();
        let nf = self.pre_basis.functions.len();
        let mut out = ShapeEvaluation::zeros(self.num_components, d, nf, np);
        if nf == 0 || np == 0 {
            return Ok(out);
        }
        let evals = self
            .pre_basis
            .spaces
            .iter()
            .map(|s| s.evaluate(points))
            .collect::<Result<Vec<_>>>()?;
        for (b, &(s, f, c)) in self.pre_basis.functions.iter().enumerate() {
            let e = &evals[s];
            for p in 0..np {
                let vi = out.value_index(c, b, p);
                out.values[vi] = e.value(f, p);
                for dir in 0..d {
                    let gi = out.gradient_index(c, dir, b, p);
                    out.gradients[gi] = e.gradient(dir, f, p);
                }
            }
        }
        Ok(out)
    }

    /// Shape function values and gradients at reference points.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<ShapeEvaluation> {
        let pre = self.evaluate_pre_basis(points)?;
        if self.nodal {
            return Ok(pre);
        }
        let n = pre.n_functions;
        let np = pre.n_points;
        let d = pre.num_dims;
        let mut out = ShapeEvaluation::zeros(pre.num_components, d, n, np);
        let phi = &self.change_of_basis;
        for b in 0..n {
            for a in 0..n {
                let w = phi[(b, a)];
                if w == 0.0 {
                    continue;
                }
                for c in 0..pre.num_components {
                    for p in 0..np {
                        let v = pre.value(c, a, p);
                        if v != 0.0 {
                            let i = out.value_index(c, b, p);
                            out.values[i] += w * v;
                        }
                        for dir in 0..d {
                            let g = pre.gradient(c, dir, a, p);
                            if g != 0.0 {
                                let i = out.gradient_index(c, dir, b, p);
                                out.gradients[i] += w * g;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Shape functions at the points of a quadrature.
    pub fn create_interpolation(&self, quadrature: &Quadrature) -> Result<ShapeEvaluation> {
        if quadrature.num_dims() != self.num_dims() {
            return Err(Error::InvalidArgument(format!(
                "{}-dimensional quadrature on a {}-dimensional reference FE",
                quadrature.num_dims(),
                self.num_dims()
            )));
        }
        self.evaluate(quadrature.points())
    }

    /// Quadrature on the reference cell; the default degree is `2 * order`.
    pub fn create_quadrature(&self, degree: Option<usize>) -> Result<Quadrature> {
        Quadrature::for_polytope(&self.polytope, degree.unwrap_or(2 * self.order))
    }

    /// `σ_a(φ^b)` recomputed from the shape functions.
    pub fn moment_matrix(&self) -> Result<DMatrix<f64>> {
        let eval = self.evaluate(&self.moments.points)?;
        Ok(Self::moment_matrix_of(&self.moments, &eval))
    }

    /// `σ_a(ψ^b)` for the pre-basis.
    pub fn pre_basis_moment_matrix(&self) -> Result<DMatrix<f64>> {
        let eval = self.evaluate_pre_basis(&self.moments.points)?;
        Ok(Self::moment_matrix_of(&self.moments, &eval))
    }

    /// Local node id of the target cell for node `node` of an own-DOF set of
    /// an n-face of dimension `dim` under permutation `permutation`.
    pub fn permute_dof_lid_n_face(&self, permutation: usize, lid: usize, dim: usize) -> Result<usize> {
        let d = self.num_dims();
        if dim > d {
            return Err(Error::DimensionOutOfRange(dim, d));
        }
        if dim == 0 || dim == d || self.polytope.is_simplex() {
            return Ok(lid);
        }
        let table = &self.own_dof_permutations[dim];
        let row = table.get(permutation).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "permutation index {permutation} out of range ({} available)",
                table.len()
            ))
        })?;
        let (node, comp) = (lid / self.dofs_per_node, lid % self.dofs_per_node);
        let image = row.get(node).ok_or_else(|| {
            Error::InvalidArgument(format!("n-face dof {lid} out of range"))
        })?;
        Ok(image * self.dofs_per_node + comp)
    }

    /// Number of permutations of the n-faces of dimension `dim`.
    pub fn num_permutations(&self, dim: usize) -> usize {
        self.own_dof_permutations.get(dim).map_or(1, |t| t.len().max(1))
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn num_dims(&self) -> usize {
        self.polytope.num_dims()
    }

    pub fn fe_type(&self) -> FeType {
        self.fe_type
    }

    pub fn field_type(&self) -> FieldType {
        self.field_type
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn conformity(&self) -> bool {
        self.conformity
    }

    pub fn num_shape_functions(&self) -> usize {
        self.pre_basis.functions.len()
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn own_dofs_n_face(&self, n_face: usize) -> &[usize] {
        &self.own_dofs_n_face[n_face]
    }

    pub fn dofs_n_face(&self, n_face: usize) -> &[usize] {
        &self.dofs_n_face[n_face]
    }

    pub fn change_of_basis(&self) -> &DMatrix<f64> {
        &self.change_of_basis
    }

    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    /// Lagrangian node set, if any.
    pub fn node_array(&self) -> Option<&NodeArray> {
        self.node_array.as_ref()
    }

    /// Component carried by each shape function when it has a single one.
    pub fn shape_component(&self, f: usize) -> usize {
        self.pre_basis.functions[f].2
    }
}
