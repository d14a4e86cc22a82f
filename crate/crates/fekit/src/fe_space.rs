//! Global finite element spaces: DOF numbering over a triangulation,
//! strong Dirichlet data, FE functions and integration caches.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integration::{CellIntegrator, CellMap, FacetIntegrator, FacetMaps};
use crate::polytope::Polytope;
use crate::reference_fe::{FeType, FieldType, Quadrature, ReferenceFE, ShapeEvaluation};
use crate::triangulation::Triangulation;
use crate::{Point, SPACE_DIM};

/// Parameters of a reference FE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ElementSpec {
    pub fe_type: FeType,
    pub order: usize,
    pub field_type: FieldType,
    pub conformity: bool,
}

impl ElementSpec {
    pub fn lagrangian(order: usize, field_type: FieldType) -> Self {
        Self {
            fe_type: FeType::Lagrangian,
            order,
            field_type,
            conformity: true,
        }
    }

    pub fn discontinuous(order: usize, field_type: FieldType) -> Self {
        Self {
            conformity: false,
            ..Self::lagrangian(order, field_type)
        }
    }

    pub fn raviart_thomas(order: usize) -> Self {
        Self {
            fe_type: FeType::RaviartThomas,
            order,
            field_type: FieldType::Vector,
            conformity: true,
        }
    }

    pub fn void() -> Self {
        Self {
            fe_type: FeType::Void,
            order: 0,
            field_type: FieldType::Scalar,
            conformity: true,
        }
    }
}

/// Reference FEs of one field per cell set.
#[derive(Clone, Debug)]
pub struct FieldDescription {
    pub default: Option<ElementSpec>,
    pub per_set: BTreeMap<usize, ElementSpec>,
}

impl FieldDescription {
    /// The same reference FE on every cell.
    pub fn uniform(spec: ElementSpec) -> Self {
        Self {
            default: Some(spec),
            per_set: BTreeMap::new(),
        }
    }

    pub fn with_set(mut self, set: usize, spec: ElementSpec) -> Self {
        self.per_set.insert(set, spec);
        self
    }

    fn spec_for(&self, set: usize) -> Option<ElementSpec> {
        self.per_set.get(&set).copied().or(self.default)
    }
}

/// Boundary function writing one value per component.
pub type BoundaryFunction = Arc<dyn Fn(&Point, &mut [f64]) + Send + Sync>;

/// Strong condition on the vefs of one set for one field.
#[derive(Clone)]
pub struct Condition {
    pub field: usize,
    pub set: usize,
    /// Fixed components; Raviart-Thomas fields only read the first entry.
    pub mask: Vec<bool>,
    pub function: BoundaryFunction,
}

impl std::fmt::Debug for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Condition")
            .field("field", &self.field)
            .field("set", &self.set)
            .field("mask", &self.mask)
            .finish_non_exhaustive()
    }
}

/// Assignment of fields to blocks of the global system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    num_blocks: usize,
    field_blocks: Vec<usize>,
    field_coupling: Vec<Vec<bool>>,
}

impl BlockLayout {
    /// Every field in a single block, all fields coupled.
    pub fn monolithic(num_fields: usize) -> Self {
        Self {
            num_blocks: 1,
            field_blocks: vec![0; num_fields],
            field_coupling: vec![vec![true; num_fields]; num_fields],
        }
    }

    /// One block per field, all fields coupled.
    pub fn per_field(num_fields: usize) -> Self {
        Self {
            num_blocks: num_fields,
            field_blocks: (0..num_fields).collect(),
            field_coupling: vec![vec![true; num_fields]; num_fields],
        }
    }

    pub fn new(field_blocks: Vec<usize>, field_coupling: Vec<Vec<bool>>) -> Result<Self> {
        let n = field_blocks.len();
        let num_blocks = field_blocks.iter().max().map_or(0, |b| b + 1);
        if (0..num_blocks).any(|b| !field_blocks.contains(&b)) {
            return Err(Error::InvalidArgument("blocks must be numbered densely".into()));
        }
        if field_coupling.len() != n || field_coupling.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("coupling matrix does not match the fields".into()));
        }
        Ok(Self {
            num_blocks,
            field_blocks,
            field_coupling,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn num_fields(&self) -> usize {
        self.field_blocks.len()
    }

    pub fn field_block(&self, field: usize) -> usize {
        self.field_blocks[field]
    }

    pub fn coupled(&self, a: usize, b: usize) -> bool {
        self.field_coupling[a][b]
    }

    /// Fields of a block in ascending order.
    pub fn block_fields(&self, block: usize) -> Vec<usize> {
        (0..self.num_fields()).filter(|&f| self.field_blocks[f] == block).collect()
    }
}

/// Free values per block and fixed values of an FE function.
#[derive(Clone, Debug, PartialEq)]
pub struct FEFunction {
    pub free_dof_values: Vec<Vec<f64>>,
    pub fixed_dof_values: Vec<f64>,
}

impl FEFunction {
    /// Free DOF values of all blocks concatenated.
    pub fn free_flat(&self) -> Vec<f64> {
        self.free_dof_values.concat()
    }

    /// Overwrites the free values from a concatenated vector.
    pub fn set_free_flat(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.free_dof_values.iter().map(|b| b.len()).sum();
        if values.len() != total {
            return Err(Error::InvalidArgument(format!(
                "{} values for {total} free DOFs",
                values.len()
            )));
        }
        let mut off = 0;
        for b in &mut self.free_dof_values {
            let n = b.len();
            b.copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

/// Where interpolated values are written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolationTarget {
    Free,
    FixedDirichlet,
}

#[derive(Clone, Debug, Default)]
struct FieldDofs {
    ptr: Vec<usize>,
    ids: Vec<i64>,
    signs: Vec<f64>,
    owner: Vec<Option<usize>>,
}

#[derive(Clone, Debug)]
struct CellCache {
    quadratures: Vec<Quadrature>,
    maps: Vec<CellMap>,
    integrators: Vec<CellIntegrator>,
    cell_quadrature: Vec<usize>,
    /// `[field][cell]` integrator index, `None` for void FEs.
    cell_integrator: Vec<Vec<Option<usize>>>,
}

#[derive(Clone, Debug)]
struct FacetCache {
    facets: Vec<usize>,
    /// `(plus cell, plus lid, minus cell, minus lid, permutation)` per facet.
    sides: Vec<(usize, usize, Option<(usize, usize)>, usize)>,
    quadratures: Vec<Quadrature>,
    maps: Vec<FacetMaps>,
    facet_quadrature: Vec<usize>,
    integrator_keys: Vec<(usize, usize)>,
    integrators: Vec<FacetIntegrator>,
}

/// Cartesian product of per-field FE spaces on a triangulation.
#[derive(Clone, Debug)]
pub struct FESpace {
    triangulation: Arc<Triangulation>,
    catalog: Vec<(ElementSpec, ReferenceFE)>,
    field_cell_fe: Vec<Vec<usize>>,
    dofs: Vec<FieldDofs>,
    conditions: Vec<Condition>,
    fixed_condition: Vec<usize>,
    layout: Option<BlockLayout>,
    num_dofs_x_field: Vec<usize>,
    num_dofs_x_block: Vec<usize>,
    cell_det_sign: Vec<f64>,
    moment_maps: Vec<CellMap>,
    cell_cache: Option<CellCache>,
    facet_cache: Option<FacetCache>,
}

fn facet_side_sign(polytope: &Polytope, lid: usize) -> f64 {
    let f = polytope.n_face(lid);
    let d = polytope.num_dims();
    let missing = (0..d).find(|i| f.extrusion & (1 << i) == 0).unwrap_or(0);
    if f.anchor & (1 << missing) != 0 {
        1.0
    } else {
        -1.0
    }
}

impl FESpace {
    /// Creates the space and numbers its fixed DOFs.
    pub fn new(
        triangulation: Arc<Triangulation>,
        fields: &[FieldDescription],
        conditions: Vec<Condition>,
    ) -> Result<Self> {
        let tri = &*triangulation;
        let polytope = tri.polytope().clone();
        let mut catalog: Vec<(ElementSpec, ReferenceFE)> = Vec::new();
        let mut field_cell_fe = Vec::with_capacity(fields.len());
        for (fi, field) in fields.iter().enumerate() {
            let mut row = Vec::with_capacity(tri.num_cells());
            for c in tri.cells() {
                let set = tri.cell_set_id(c);
                let spec = field.spec_for(set).ok_or_else(|| {
                    Error::InvalidArgument(format!("field {fi} has no reference FE for cell set {set}"))
                })?;
                let idx = match catalog.iter().position(|(s, _)| *s == spec) {
                    Some(i) => i,
                    None => {
                        let fe = ReferenceFE::new(&polytope, spec.fe_type, spec.order, spec.field_type, spec.conformity)?;
                        catalog.push((spec, fe));
                        catalog.len() - 1
                    }
                };
                row.push(idx);
            }
            field_cell_fe.push(row);
        }
        for cond in &conditions {
            if cond.field >= fields.len() {
                return Err(Error::InvalidArgument(format!("condition on unknown field {}", cond.field)));
            }
        }

        let needs_signs = catalog.iter().any(|(s, _)| s.fe_type == FeType::RaviartThomas);
        let mut cell_det_sign = vec![1.0; tri.num_cells()];
        if needs_signs {
            let center = vec![vec![0.5; polytope.num_dims()]];
            let mut map = CellMap::new(&polytope, &center, &[1.0])?;
            for c in tri.cells() {
                map.update(&tri.cell_coordinates(c))?;
                cell_det_sign[c] = map.det_jacobian(0).signum();
            }
        }
        let moment_maps = catalog
            .iter()
            .map(|(_, fe)| CellMap::new(&polytope, fe.moments().points(), &vec![0.0; fe.moments().points().len()]))
            .collect::<Result<Vec<_>>>()?;

        let mut space = Self {
            catalog,
            field_cell_fe,
            dofs: Vec::new(),
            conditions,
            fixed_condition: Vec::new(),
            layout: None,
            num_dofs_x_field: vec![0; fields.len()],
            num_dofs_x_block: Vec::new(),
            cell_det_sign,
            moment_maps,
            cell_cache: None,
            facet_cache: None,
            triangulation,
        };
        space.check_conformity()?;
        space.number_fixed_dofs()?;
        Ok(space)
    }

    fn check_conformity(&self) -> Result<()> {
        let tri = &*self.triangulation;
        for (f, row) in self.field_cell_fe.iter().enumerate() {
            for v in tri.vefs() {
                let mut seen: Option<ElementSpec> = None;
                for &c in tri.cells_around(v) {
                    let spec = self.catalog[row[c]].0;
                    if spec.fe_type == FeType::Void {
                        continue;
                    }
                    if let Some(s) = seen {
                        if s != spec && (s.conformity || spec.conformity) {
                            return Err(Error::Nonconforming(format!(
                                "field {f} mixes {s:?} and {spec:?} on a shared vef"
                            )));
                        }
                    }
                    seen = Some(spec);
                }
            }
        }
        Ok(())
    }

    fn dof_component(fe: &ReferenceFE, dof: usize) -> usize {
        match fe.fe_type() {
            FeType::RaviartThomas => 0,
            _ => fe.shape_component(dof),
        }
    }

    fn number_fixed_dofs(&mut self) -> Result<()> {
        let tri = self.triangulation.clone();
        let nvefs_cell = tri.polytope().num_n_faces() - 1;
        let mut by_key: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, c) in self.conditions.iter().enumerate() {
            by_key.insert((c.field, c.set), i);
        }
        self.fixed_condition.clear();
        self.dofs.clear();
        for (f, row) in self.field_cell_fe.iter().enumerate() {
            let mut ptr = vec![0; tri.num_cells() + 1];
            for c in tri.cells() {
                ptr[c + 1] = ptr[c] + self.catalog[row[c]].1.num_shape_functions();
            }
            let owner: Vec<Option<usize>> = tri
                .vefs()
                .map(|v| {
                    tri.cells_around(v)
                        .iter()
                        .copied()
                        .find(|&c| self.catalog[row[c]].1.num_shape_functions() > 0)
                })
                .collect();
            let mut ids = vec![0i64; ptr[tri.num_cells()]];
            for c in tri.cells() {
                let fe = &self.catalog[row[c]].1;
                for lid in 0..nvefs_cell {
                    let v = tri.cell_vefs(c)[lid];
                    if owner[v] != Some(c) {
                        continue;
                    }
                    if let Some(&ci) = by_key.get(&(f, tri.vef_set_id(v))) {
                        let mask = &self.conditions[ci].mask;
                        for &dof in fe.own_dofs_n_face(lid) {
                            if mask.get(Self::dof_component(fe, dof)).copied().unwrap_or(false) {
                                self.fixed_condition.push(ci);
                                ids[ptr[c] + dof] = -(self.fixed_condition.len() as i64);
                            }
                        }
                    }
                }
            }
            let signs = vec![1.0; ids.len()];
            self.dofs.push(FieldDofs { ptr, ids, signs, owner });
        }
        for f in 0..self.dofs.len() {
            for c in tri.cells() {
                self.fetch_from_owners(f, c, false)?;
            }
        }
        Ok(())
    }

    /// Copies the ids of vefs not owned by `cell` from their owners; with
    /// `all == false` only fixed ids are copied.
    fn fetch_from_owners(&mut self, field: usize, cell: usize, all: bool) -> Result<()> {
        let tri = self.triangulation.clone();
        let polytope = tri.polytope();
        let nvefs_cell = polytope.num_n_faces() - 1;
        let fe_c = self.field_cell_fe[field][cell];
        let fe = &self.catalog[fe_c].1;
        if fe.num_shape_functions() == 0 {
            return Ok(());
        }
        let d = polytope.num_dims();
        for lid in 0..nvefs_cell {
            let own = fe.own_dofs_n_face(lid);
            if own.is_empty() {
                continue;
            }
            let v = tri.cell_vefs(cell)[lid];
            let o = self.dofs[field].owner[v].expect("a non-void cell is incident");
            if o == cell {
                continue;
            }
            let lid_o = tri.vef_lid(o, v).expect("owner is incident");
            let g = tri.get_permutation_index(cell, o, lid, lid_o)?;
            let fe_o = &self.catalog[self.field_cell_fe[field][o]].1;
            let own_o = fe_o.own_dofs_n_face(lid_o);
            let dim = tri.vef_dim(v);
            let sign = if fe.fe_type() == FeType::RaviartThomas && dim + 1 == d {
                -facet_side_sign(polytope, lid)
                    * facet_side_sign(polytope, lid_o)
                    * self.cell_det_sign[cell]
                    * self.cell_det_sign[o]
            } else {
                1.0
            };
            let fd = &self.dofs[field];
            let (pc, po) = (fd.ptr[cell], fd.ptr[o]);
            let mut updates = Vec::with_capacity(own.len());
            for (j, &dof) in own.iter().enumerate() {
                let jo = fe.permute_dof_lid_n_face(g, j, dim)?;
                let id = fd.ids[po + own_o[jo]];
                if all || id < 0 {
                    updates.push((pc + dof, id, sign * fd.signs[po + own_o[jo]]));
                }
            }
            let fd = &mut self.dofs[field];
            for (k, id, s) in updates {
                fd.ids[k] = id;
                fd.signs[k] = s;
            }
        }
        Ok(())
    }

    /// Numbers the free DOFs block by block, then field by field, visiting
    /// cells in increasing order with the cell interior before its vefs.
    pub fn generate_global_dof_numbering(&mut self, layout: &BlockLayout) -> Result<()> {
        if layout.num_fields() != self.num_fields() {
            return Err(Error::InvalidArgument(format!(
                "layout has {} fields, the space {}",
                layout.num_fields(),
                self.num_fields()
            )));
        }
        if self.layout.as_ref() == Some(layout) {
            return Ok(());
        }
        let tri = self.triangulation.clone();
        let polytope = tri.polytope();
        let cell_lid = polytope.cell_index();
        let nvefs_cell = polytope.num_n_faces() - 1;
        for fd in &mut self.dofs {
            for id in fd.ids.iter_mut().filter(|id| **id > 0) {
                *id = 0;
            }
        }
        self.num_dofs_x_block = vec![0; layout.num_blocks()];
        for block in 0..layout.num_blocks() {
            let mut next = 0i64;
            for field in layout.block_fields(block) {
                let start = next;
                for c in tri.cells() {
                    let fe = &self.catalog[self.field_cell_fe[field][c]].1;
                    let ptr = self.dofs[field].ptr[c];
                    let mut order: Vec<usize> = fe.own_dofs_n_face(cell_lid).to_vec();
                    for lid in 0..nvefs_cell {
                        let v = tri.cell_vefs(c)[lid];
                        if self.dofs[field].owner[v] == Some(c) {
                            order.extend_from_slice(fe.own_dofs_n_face(lid));
                        }
                    }
                    let fd = &mut self.dofs[field];
                    for dof in order {
                        if fd.ids[ptr + dof] == 0 {
                            next += 1;
                            fd.ids[ptr + dof] = next;
                        }
                    }
                    self.fetch_from_owners(field, c, true)?;
                }
                self.num_dofs_x_field[field] = (next - start) as usize;
            }
            self.num_dofs_x_block[block] = next as usize;
        }
        self.layout = Some(layout.clone());
        Ok(())
    }

    fn layout(&self) -> Result<&BlockLayout> {
        self.layout
            .as_ref()
            .ok_or_else(|| Error::State("global DOF numbering has not been generated".into()))
    }

    pub fn triangulation(&self) -> &Arc<Triangulation> {
        &self.triangulation
    }

    pub fn num_fields(&self) -> usize {
        self.field_cell_fe.len()
    }

    pub fn block_layout(&self) -> Option<&BlockLayout> {
        self.layout.as_ref()
    }

    /// Reference FE of a field on a cell.
    pub fn reference_fe(&self, field: usize, cell: usize) -> &ReferenceFE {
        &self.catalog[self.field_cell_fe[field][cell]].1
    }

    pub fn reference_fe_index(&self, field: usize, cell: usize) -> usize {
        self.field_cell_fe[field][cell]
    }

    pub fn num_reference_fes(&self) -> usize {
        self.catalog.len()
    }

    /// Signed global ids of a field on a cell: positive free ids (1-based per
    /// block), negative fixed ids.
    pub fn cell_dofs(&self, field: usize, cell: usize) -> &[i64] {
        let fd = &self.dofs[field];
        &fd.ids[fd.ptr[cell]..fd.ptr[cell + 1]]
    }

    /// Orientation signs of the global DOFs of a field on a cell.
    pub fn cell_dof_signs(&self, field: usize, cell: usize) -> &[f64] {
        let fd = &self.dofs[field];
        &fd.signs[fd.ptr[cell]..fd.ptr[cell + 1]]
    }

    pub fn num_fixed_dofs(&self) -> usize {
        self.fixed_condition.len()
    }

    /// Free DOFs of a field (after numbering).
    pub fn num_dofs_field(&self, field: usize) -> usize {
        self.num_dofs_x_field[field]
    }

    pub fn num_dofs_block(&self, block: usize) -> usize {
        self.num_dofs_x_block[block]
    }

    pub fn num_free_dofs(&self) -> usize {
        self.num_dofs_x_block.iter().sum()
    }

    /// Offset of each block in the concatenated free vector.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for n in &self.num_dofs_x_block {
            off.push(off.last().unwrap() + n);
        }
        off
    }

    /// A zero FE function shaped after the current numbering.
    pub fn create_fe_function(&self) -> Result<FEFunction> {
        self.layout()?;
        Ok(FEFunction {
            free_dof_values: self.num_dofs_x_block.iter().map(|&n| vec![0.0; n]).collect(),
            fixed_dof_values: vec![0.0; self.num_fixed_dofs()],
        })
    }

    /// Local DOF values of a field on a cell.
    pub fn gather_nodal_values(&self, function: &FEFunction, cell: usize, field: usize, out: &mut Vec<f64>) -> Result<()> {
        let block = self.layout()?.field_block(field);
        out.clear();
        for (&id, &s) in self.cell_dofs(field, cell).iter().zip(self.cell_dof_signs(field, cell)) {
            let v = if id > 0 {
                function.free_dof_values[block][(id - 1) as usize]
            } else if id < 0 {
                function.fixed_dof_values[(-id - 1) as usize]
            } else {
                return Err(Error::State("free DOFs are not numbered".into()));
            };
            out.push(s * v);
        }
        Ok(())
    }

    /// Moments of `function` on a cell for the reference FE of a field.
    fn local_moments(&mut self, field: usize, cell: usize, function: &dyn Fn(&Point, &mut [f64])) -> Result<Vec<f64>> {
        let k = self.field_cell_fe[field][cell];
        let fe = &self.catalog[k].1;
        if fe.num_shape_functions() == 0 {
            return Ok(Vec::new());
        }
        let map = &mut self.moment_maps[k];
        map.update(&self.triangulation.cell_coordinates(cell))?;
        let nc = fe.num_components();
        let d = map.num_dims();
        let mut vals = vec![0.0; nc];
        let mut at_points = Vec::with_capacity(map.num_points() * nc);
        for p in 0..map.num_points() {
            vals.iter_mut().for_each(|v| *v = 0.0);
            function(map.point(p), &mut vals);
            if fe.fe_type() == FeType::RaviartThomas {
                let inv = map.inv_jacobian(p);
                let det = map.det_jacobian(p);
                for j in 0..d {
                    at_points.push(det * (0..d).map(|i| inv[j][i] * vals[i]).sum::<f64>());
                }
            } else {
                at_points.extend_from_slice(&vals);
            }
        }
        Ok(fe.moments().apply(|p, c| at_points[p * nc + c]))
    }

    /// Interpolates an analytical function into the free values of a field,
    /// or, for `FixedDirichlet`, the installed boundary functions into the
    /// fixed values (`function` is then ignored).
    pub fn interpolate(
        &mut self,
        field: usize,
        function: &dyn Fn(&Point, &mut [f64]),
        target: &mut FEFunction,
        kind: InterpolationTarget,
    ) -> Result<()> {
        let block = self.layout()?.field_block(field);
        let tri = self.triangulation.clone();
        for c in tri.cells() {
            let ids = self.cell_dofs(field, c).to_vec();
            if ids.is_empty() {
                continue;
            }
            let signs = self.cell_dof_signs(field, c).to_vec();
            match kind {
                InterpolationTarget::Free => {
                    if ids.iter().all(|&id| id < 0) {
                        continue;
                    }
                    let local = self.local_moments(field, c, function)?;
                    for ((id, s), v) in ids.iter().zip(&signs).zip(local) {
                        if *id > 0 {
                            target.free_dof_values[block][(*id - 1) as usize] = s * v;
                        }
                    }
                }
                InterpolationTarget::FixedDirichlet => {
                    let mut by_condition: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                    for (l, &id) in ids.iter().enumerate() {
                        if id < 0 {
                            by_condition.entry(self.fixed_condition[(-id - 1) as usize]).or_default().push(l);
                        }
                    }
                    for (ci, locals) in by_condition {
                        let g = self.conditions[ci].function.clone();
                        let local = self.local_moments(field, c, &*g)?;
                        for l in locals {
                            target.fixed_dof_values[(-ids[l] - 1) as usize] = signs[l] * local[l];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Physical coordinates of the Lagrangian nodes of a field on a cell,
    /// one entry per local DOF.
    pub fn dof_coordinates(&mut self, field: usize, cell: usize) -> Result<Vec<Point>> {
        let k = self.field_cell_fe[field][cell];
        let fe = &self.catalog[k].1;
        if fe.fe_type() != FeType::Lagrangian {
            return Err(Error::Unsupported("DOF coordinates of a non-nodal FE".into()));
        }
        let map = &mut self.moment_maps[k];
        map.update(&self.triangulation.cell_coordinates(cell))?;
        Ok((0..fe.num_shape_functions())
            .map(|dof| *map.point(fe.moments().functional(dof)[0].0))
            .collect())
    }

    /// Default quadrature degree of a cell: twice the largest field order.
    pub fn default_degree(&self, cell: usize) -> usize {
        (0..self.num_fields())
            .map(|f| 2 * self.reference_fe(f, cell).order())
            .max()
            .unwrap_or(0)
    }

    /// Builds the cell integration caches; `degree` overrides the per-cell default.
    pub fn setup_cell_integration(&mut self, degree: Option<&dyn Fn(usize) -> usize>) -> Result<()> {
        let tri = self.triangulation.clone();
        let polytope = tri.polytope();
        let mut quadratures: Vec<Quadrature> = Vec::new();
        let mut maps = Vec::new();
        let mut cell_quadrature = Vec::with_capacity(tri.num_cells());
        for c in tri.cells() {
            let q = degree.map_or_else(|| self.default_degree(c), |f| f(c));
            let idx = match quadratures.iter().position(|x| x.degree() == q) {
                Some(i) => i,
                None => {
                    let quad = Quadrature::for_polytope(polytope, q)?;
                    maps.push(CellMap::for_quadrature(polytope, &quad)?);
                    quadratures.push(quad);
                    quadratures.len() - 1
                }
            };
            cell_quadrature.push(idx);
        }
        let mut integrator_keys = Vec::new();
        let mut integrators = Vec::new();
        let mut cell_integrator = vec![vec![None; tri.num_cells()]; self.num_fields()];
        for (f, row) in cell_integrator.iter_mut().enumerate() {
            for c in tri.cells() {
                let k = self.field_cell_fe[f][c];
                if self.catalog[k].0.fe_type == FeType::Void {
                    continue;
                }
                let key = (k, cell_quadrature[c]);
                let idx = match integrator_keys.iter().position(|x| *x == key) {
                    Some(i) => i,
                    None => {
                        integrators.push(CellIntegrator::new(&self.catalog[k].1, &quadratures[key.1])?);
                        integrator_keys.push(key);
                        integrators.len() - 1
                    }
                };
                row[c] = Some(idx);
            }
        }
        self.cell_cache = Some(CellCache {
            quadratures,
            maps,
            integrators,
            cell_quadrature,
            cell_integrator,
        });
        Ok(())
    }

    /// Builds the facet integration caches and stores facet permutation indices.
    pub fn setup_facet_integration(&mut self, degree: Option<&dyn Fn(usize) -> usize>) -> Result<()> {
        let tri = self.triangulation.clone();
        let polytope = tri.polytope();
        let d = polytope.num_dims();
        let facets: Vec<usize> = tri.facets().collect();
        let mut sides = Vec::with_capacity(facets.len());
        let mut quadratures: Vec<Quadrature> = Vec::new();
        let mut maps = Vec::new();
        let mut facet_quadrature = Vec::with_capacity(facets.len());
        let mut integrator_keys = Vec::new();
        let mut integrators = Vec::new();
        for &v in &facets {
            let around = tri.cells_around(v);
            let plus = around[0];
            let lp = tri.vef_lid(plus, v).expect("incident");
            let minus = around.get(1).map(|&m| (m, tri.vef_lid(m, v).expect("incident")));
            let perm = match minus {
                Some((m, lm)) => tri.get_permutation_index(plus, m, lp, lm)?,
                None => 0,
            };
            sides.push((plus, lp, minus, perm));
            let q = around
                .iter()
                .map(|&c| degree.map_or_else(|| self.default_degree(c), |f| f(c)))
                .max()
                .unwrap_or(0);
            let idx = match quadratures.iter().position(|x| x.degree() == q) {
                Some(i) => i,
                None => {
                    let quad = Quadrature::for_shape(d - 1, polytope.is_n_cube(), polytope.is_simplex() && d > 1, q)?;
                    maps.push(FacetMaps::new(polytope, &quad)?);
                    quadratures.push(quad);
                    quadratures.len() - 1
                }
            };
            facet_quadrature.push(idx);
            for f in 0..self.num_fields() {
                for &c in around {
                    let k = self.field_cell_fe[f][c];
                    let key = (k, idx);
                    if self.catalog[k].0.fe_type != FeType::Void && !integrator_keys.contains(&key) {
                        integrators.push(FacetIntegrator::new(&self.catalog[k].1, &maps[idx])?);
                        integrator_keys.push(key);
                    }
                }
            }
        }
        self.facet_cache = Some(FacetCache {
            facets,
            sides,
            quadratures,
            maps,
            facet_quadrature,
            integrator_keys,
            integrators,
        });
        Ok(())
    }

    /// Number of distinct cached cell quadratures and cell integrators.
    pub fn num_cached_cell_objects(&self) -> (usize, usize, usize) {
        self.cell_cache.as_ref().map_or((0, 0, 0), |c| {
            (c.quadratures.len(), c.maps.len(), c.integrators.len())
        })
    }

    /// Cell quadrature of a cell (after `setup_cell_integration`).
    pub fn cell_quadrature(&self, cell: usize) -> Result<&Quadrature> {
        let c = self.cell_cache()?;
        Ok(&c.quadratures[c.cell_quadrature[cell]])
    }

    fn cell_cache(&self) -> Result<&CellCache> {
        self.cell_cache
            .as_ref()
            .ok_or_else(|| Error::State("cell integration has not been set up".into()))
    }

    fn facet_cache(&self) -> Result<&FacetCache> {
        self.facet_cache
            .as_ref()
            .ok_or_else(|| Error::State("facet integration has not been set up".into()))
    }

    /// Private scratch for cell loops.
    pub fn cell_workspace(&self) -> Result<CellWorkspace> {
        let c = self.cell_cache()?;
        Ok(CellWorkspace {
            maps: c.maps.clone(),
            integrators: c.integrators.clone(),
            cell: None,
        })
    }

    /// Private scratch for facet loops.
    pub fn facet_workspace(&self) -> Result<FacetWorkspace> {
        let c = self.facet_cache()?;
        Ok(FacetWorkspace {
            maps: c.maps.clone(),
            integrators: c.integrators.clone(),
            facet: None,
        })
    }

    /// Facet quadrature of facet `i` of the facet loop.
    pub fn facet_quadrature(&self, i: usize) -> Result<&Quadrature> {
        let c = self.facet_cache()?;
        Ok(&c.quadratures[c.facet_quadrature[i]])
    }

    /// Number of facets handled by the facet caches.
    pub fn num_facets(&self) -> usize {
        self.facet_cache.as_ref().map_or(0, |c| c.facets.len())
    }

    /// `(plus cell, minus cell)` of facet `i` of the facet loop.
    pub fn facet_cells(&self, i: usize) -> Result<(usize, Option<usize>)> {
        let (p, _, m, _) = self.facet_cache()?.sides[i];
        Ok((p, m.map(|x| x.0)))
    }

    /// Global vef id and stored permutation index of facet `i`.
    pub fn facet_info(&self, i: usize) -> Result<(usize, usize)> {
        let c = self.facet_cache()?;
        Ok((c.facets[i], c.sides[i].3))
    }
}

/// Per-worker scratch of the cell loop.
#[derive(Clone, Debug)]
pub struct CellWorkspace {
    maps: Vec<CellMap>,
    integrators: Vec<CellIntegrator>,
    cell: Option<(usize, usize)>,
}

impl CellWorkspace {
    /// Updates the map and the integrators of every field for `cell`.
    pub fn update(&mut self, space: &FESpace, cell: usize) -> Result<()> {
        let cache = space.cell_cache()?;
        let q = cache.cell_quadrature[cell];
        self.maps[q].update(&space.triangulation.cell_coordinates(cell))?;
        for row in &cache.cell_integrator {
            if let Some(i) = row[cell] {
                self.integrators[i].update(&self.maps[q])?;
            }
        }
        self.cell = Some((cell, q));
        Ok(())
    }

    pub fn cell_map(&self) -> &CellMap {
        let (_, q) = self.cell.expect("workspace updated");
        &self.maps[q]
    }

    /// Integrator of a field on the current cell, `None` for void FEs.
    pub fn integrator<'a>(&'a self, space: &FESpace, field: usize) -> Option<&'a CellIntegrator> {
        let (cell, _) = self.cell.expect("workspace updated");
        let cache = space.cell_cache.as_ref()?;
        cache.cell_integrator[field][cell].map(|i| &self.integrators[i])
    }

    /// Physical shape functions of a field on the current cell.
    pub fn shapes<'a>(&'a self, space: &FESpace, field: usize) -> Option<&'a ShapeEvaluation> {
        self.integrator(space, field).map(|i| i.physical())
    }
}

/// Per-worker scratch of the facet loop.
#[derive(Clone, Debug)]
pub struct FacetWorkspace {
    maps: Vec<FacetMaps>,
    integrators: Vec<FacetIntegrator>,
    facet: Option<usize>,
}

impl FacetWorkspace {
    /// Updates the facet maps and integrators for facet `i` of the loop.
    pub fn update(&mut self, space: &FESpace, i: usize) -> Result<()> {
        let cache = space.facet_cache()?;
        let tri = &space.triangulation;
        let (plus, lp, minus, perm) = cache.sides[i];
        let q = cache.facet_quadrature[i];
        let cp = tri.cell_coordinates(plus);
        let cm = minus.map(|(m, _)| tri.cell_coordinates(m));
        self.maps[q].update(
            (&cp, lp),
            minus.map(|(_, lm)| (cm.as_deref().expect("minus coordinates"), lm)),
            perm,
        )?;
        for f in 0..space.num_fields() {
            let mut cells = vec![plus];
            cells.extend(minus.map(|x| x.0));
            for c in cells {
                let key = (space.field_cell_fe[f][c], q);
                if let Some(k) = cache.integrator_keys.iter().position(|x| *x == key) {
                    self.integrators[k].update(&self.maps[q])?;
                }
            }
        }
        self.facet = Some(i);
        Ok(())
    }

    pub fn facet_maps(&self, space: &FESpace) -> &FacetMaps {
        let i = self.facet.expect("workspace updated");
        let cache = space.facet_cache.as_ref().expect("facet cache");
        &self.maps[cache.facet_quadrature[i]]
    }

    /// Physical shape functions of a field on side 0 (plus) or 1 (minus),
    /// the minus side in plus quadrature-point order.
    pub fn shapes<'a>(&'a self, space: &FESpace, field: usize, side: usize) -> Option<&'a ShapeEvaluation> {
        let i = self.facet.expect("workspace updated");
        let cache = space.facet_cache.as_ref()?;
        let (plus, _, minus, _) = cache.sides[i];
        let cell = if side == 0 { plus } else { minus?.0 };
        let key = (space.field_cell_fe[field][cell], cache.facet_quadrature[i]);
        let k = cache.integrator_keys.iter().position(|x| *x == key)?;
        Some(self.integrators[k].side(side))
    }
}

/// An FE function restricted to a cell and evaluated at quadrature points.
#[derive(Clone, Debug, Default)]
pub struct CellFEFunction {
    pub nodal_values: Vec<f64>,
    /// `values[c * n_points + p]`
    pub values: Vec<f64>,
    /// `gradients[(c * SPACE_DIM + dir) * n_points + p]`
    pub gradients: Vec<f64>,
    pub n_points: usize,
}

impl CellFEFunction {
    /// Evaluates `Σ_a u_a φ^a` from gathered values and physical shapes.
    pub fn update_from(&mut self, nodal: &[f64], shapes: &ShapeEvaluation) {
        let (nc, np, d) = (shapes.num_components, shapes.n_points, shapes.num_dims);
        self.nodal_values.clear();
        self.nodal_values.extend_from_slice(nodal);
        self.n_points = np;
        self.values.clear();
        self.values.resize(nc * np, 0.0);
        self.gradients.clear();
        self.gradients.resize(nc * SPACE_DIM * np, 0.0);
        for (f, &u) in nodal.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            for c in 0..nc {
                for p in 0..np {
                    self.values[c * np + p] += u * shapes.value(c, f, p);
                    for dir in 0..d {
                        self.gradients[(c * SPACE_DIM + dir) * np + p] += u * shapes.gradient(c, dir, f, p);
                    }
                }
            }
        }
    }

    /// Gathers and evaluates a field on the workspace's current cell.
    pub fn update(
        &mut self,
        space: &FESpace,
        function: &FEFunction,
        workspace: &CellWorkspace,
        cell: usize,
        field: usize,
    ) -> Result<()> {
        let mut nodal = Vec::new();
        space.gather_nodal_values(function, cell, field, &mut nodal)?;
        match workspace.shapes(space, field) {
            Some(s) => self.update_from(&nodal, s),
            None => {
                self.nodal_values.clear();
                self.values.clear();
                self.gradients.clear();
            }
        }
        Ok(())
    }

    pub fn value(&self, c: usize, p: usize) -> f64 {
        self.values[c * self.n_points + p]
    }

    pub fn gradient(&self, c: usize, dir: usize, p: usize) -> f64 {
        self.gradients[(c * SPACE_DIM + dir) * self.n_points + p]
    }
}

/// An FE function on both sides of a facet.
#[derive(Clone, Debug, Default)]
pub struct FacetFEFunction {
    pub sides: [CellFEFunction; 2],
}

impl FacetFEFunction {
    pub fn update(
        &mut self,
        space: &FESpace,
        function: &FEFunction,
        workspace: &FacetWorkspace,
        i: usize,
        field: usize,
    ) -> Result<()> {
        let (plus, minus) = space.facet_cells(i)?;
        let mut nodal = Vec::new();
        for (side, cell) in [(0, Some(plus)), (1, minus)] {
            if let (Some(cell), Some(s)) = (cell, workspace.shapes(space, field, side)) {
                space.gather_nodal_values(function, cell, field, &mut nodal)?;
                self.sides[side].update_from(&nodal, s);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulation::StructuredMesh;
    use approx::assert_abs_diff_eq;

    fn mesh(n: &[usize]) -> Arc<Triangulation> {
        Arc::new(Triangulation::structured(&StructuredMesh::unit(n)).unwrap())
    }

    fn scalar_space(m: Arc<Triangulation>, spec: ElementSpec, dirichlet: bool) -> FESpace {
        let conditions = if dirichlet {
            vec![Condition {
                field: 0,
                set: 1,
                mask: vec![true],
                function: Arc::new(|_: &Point, v: &mut [f64]| v[0] = 1.0),
            }]
        } else {
            Vec::new()
        };
        let mut s = FESpace::new(m, &[FieldDescription::uniform(spec)], conditions).unwrap();
        s.generate_global_dof_numbering(&BlockLayout::monolithic(1)).unwrap();
        s
    }

    #[test]
    fn q1_counts() {
        let s = scalar_space(mesh(&[2, 2]), ElementSpec::lagrangian(1, FieldType::Scalar), false);
        assert_eq!(s.num_free_dofs(), 9);
        assert_eq!(s.num_fixed_dofs(), 0);
        let s = scalar_space(mesh(&[2, 2]), ElementSpec::discontinuous(1, FieldType::Scalar), false);
        assert_eq!(s.num_free_dofs(), 16);
        let s = scalar_space(mesh(&[4, 4]), ElementSpec::lagrangian(1, FieldType::Scalar), true);
        assert_eq!(s.num_free_dofs(), 9);
        assert_eq!(s.num_fixed_dofs(), 16);
    }

    #[test]
    fn taylor_hood_blocks() {
        let fields = [
            FieldDescription::uniform(ElementSpec::lagrangian(2, FieldType::Vector)),
            FieldDescription::uniform(ElementSpec::lagrangian(1, FieldType::Scalar)),
        ];
        let mut s = FESpace::new(mesh(&[2, 2]), &fields, Vec::new()).unwrap();
        s.generate_global_dof_numbering(&BlockLayout::monolithic(2)).unwrap();
        assert_eq!(s.num_dofs_field(0), 50);
        assert_eq!(s.num_dofs_field(1), 9);
        assert_eq!(s.num_free_dofs(), 59);
        let max_u = (0..4).flat_map(|c| s.cell_dofs(0, c).to_vec()).max().unwrap();
        let min_p = (0..4).flat_map(|c| s.cell_dofs(1, c).to_vec()).min().unwrap();
        assert_eq!(max_u, 50);
        assert_eq!(min_p, 51);
        let mono: Vec<Vec<i64>> = (0..4).map(|c| s.cell_dofs(1, c).to_vec()).collect();
        s.generate_global_dof_numbering(&BlockLayout::per_field(2)).unwrap();
        assert_eq!(s.num_dofs_block(0), 50);
        assert_eq!(s.num_dofs_block(1), 9);
        for c in 0..4 {
            let p: Vec<i64> = s.cell_dofs(1, c).to_vec();
            assert_eq!(p, mono[c].iter().map(|i| i - 50).collect::<Vec<_>>());
        }
    }

    #[test]
    fn conforming_ids_match_coordinates() {
        for k in 1..=3 {
            let mut s = scalar_space(mesh(&[3, 2]), ElementSpec::lagrangian(k, FieldType::Scalar), false);
            let mut by_id: HashMap<i64, Point> = HashMap::new();
            for c in 0..6 {
                let x = s.dof_coordinates(0, c).unwrap();
                for (l, &id) in s.cell_dofs(0, c).to_vec().iter().enumerate() {
                    if let Some(y) = by_id.insert(id, x[l]) {
                        assert!((0..2).all(|i| (y[i] - x[l][i]).abs() < 1e-12), "k={k} id={id}");
                    }
                }
            }
            assert_eq!(by_id.len(), (3 * k + 1) * (2 * k + 1));
        }
    }

    #[test]
    fn interpolation_and_gather() {
        let m = mesh(&[3, 3]);
        let mut s = scalar_space(m, ElementSpec::lagrangian(1, FieldType::Scalar), true);
        let mut u = s.create_fe_function().unwrap();
        s.interpolate(0, &|x: &Point, v: &mut [f64]| v[0] = x[0] + x[1], &mut u, InterpolationTarget::Free)
            .unwrap();
        s.interpolate(0, &|_: &Point, _: &mut [f64]| {}, &mut u, InterpolationTarget::FixedDirichlet)
            .unwrap();
        assert!(u.fixed_dof_values.iter().all(|&v| v == 1.0));
        s.setup_cell_integration(Some(&|_| 3)).unwrap();
        assert_eq!(s.num_cached_cell_objects(), (1, 1, 1));
        let mut ws = s.cell_workspace().unwrap();
        let mut cf = CellFEFunction::default();
        // interior cell 4 has only free DOFs
        ws.update(&s, 4).unwrap();
        cf.update(&s, &u, &ws, 4, 0).unwrap();
        for p in 0..cf.n_points {
            let x = ws.cell_map().point(p);
            assert_abs_diff_eq!(cf.value(0, p), x[0] + x[1], epsilon = 1e-13);
            assert_abs_diff_eq!(cf.gradient(0, 0, p), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn void_cells() {
        let mut m = Triangulation::structured(&StructuredMesh::unit(&[2, 1])).unwrap();
        m.set_cell_set_id(1, 2);
        let field = FieldDescription::uniform(ElementSpec::lagrangian(1, FieldType::Scalar)).with_set(2, ElementSpec::void());
        let mut s = FESpace::new(Arc::new(m), &[field], Vec::new()).unwrap();
        s.generate_global_dof_numbering(&BlockLayout::monolithic(1)).unwrap();
        assert_eq!(s.num_free_dofs(), 4);
        assert!(s.cell_dofs(0, 1).is_empty());
        let unmapped = FieldDescription {
            default: None,
            per_set: BTreeMap::from([(1, ElementSpec::lagrangian(1, FieldType::Scalar))]),
        };
        let mut m = Triangulation::structured(&StructuredMesh::unit(&[2, 1])).unwrap();
        m.set_cell_set_id(1, 2);
        assert!(FESpace::new(Arc::new(m), &[unmapped], Vec::new()).is_err());
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let mut m = Triangulation::structured(&StructuredMesh::unit(&[2, 1])).unwrap();
        m.set_cell_set_id(1, 2);
        let m = Arc::new(m);
        let f = FieldDescription::uniform(ElementSpec::lagrangian(1, FieldType::Scalar))
            .with_set(2, ElementSpec::lagrangian(2, FieldType::Scalar));
        assert!(matches!(FESpace::new(m.clone(), &[f], Vec::new()), Err(Error::Nonconforming(_))));
        let f = FieldDescription::uniform(ElementSpec::discontinuous(1, FieldType::Scalar))
            .with_set(2, ElementSpec::discontinuous(2, FieldType::Scalar));
        let mut s = FESpace::new(m, &[f], Vec::new()).unwrap();
        s.generate_global_dof_numbering(&BlockLayout::monolithic(1)).unwrap();
        assert_eq!(s.num_free_dofs(), 4 + 9);
        s.setup_cell_integration(None).unwrap();
        assert_eq!(s.num_cached_cell_objects().2, 2);
    }

    #[test]
    fn rt0_constant_field() {
        let m = mesh(&[3, 3]);
        let mut s = FESpace::new(m.clone(), &[FieldDescription::uniform(ElementSpec::raviart_thomas(0))], Vec::new()).unwrap();
        s.generate_global_dof_numbering(&BlockLayout::monolithic(1)).unwrap();
        assert_eq!(s.num_free_dofs(), 24);
        let mut u = s.create_fe_function().unwrap();
        s.interpolate(0, &|_: &Point, v: &mut [f64]| {
            v[0] = 1.0;
            v[1] = 0.0;
        }, &mut u, InterpolationTarget::Free)
            .unwrap();
        let h = 1.0 / 3.0;
        for c in 0..9 {
            let mut local = Vec::new();
            s.gather_nodal_values(&u, c, 0, &mut local).unwrap();
            let expect = [0.0, 0.0, h, h];
            for (a, b) in local.iter().zip(expect) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
            }
        }
        s.setup_cell_integration(None).unwrap();
        let mut ws = s.cell_workspace().unwrap();
        let mut cf = CellFEFunction::default();
        for c in 0..9 {
            ws.update(&s, c).unwrap();
            cf.update(&s, &u, &ws, c, 0).unwrap();
            for p in 0..cf.n_points {
                assert_abs_diff_eq!(cf.value(0, p), 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(cf.value(1, p), 0.0, epsilon = 1e-13);
            }
        }
    }
}
