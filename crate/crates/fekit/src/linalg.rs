//! Sparse storage, FE assembly, the affine operator and desk-scale solvers.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fe_space::{BlockLayout, FEFunction, FESpace};

/// Definiteness hint of a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixSign {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
}

/// Storage and algebraic flags of a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixProperties {
    pub symmetric_storage: bool,
    pub symmetric: bool,
    pub sign: MatrixSign,
}

impl MatrixProperties {
    pub const SPD_UPPER: Self = Self {
        symmetric_storage: true,
        symmetric: true,
        sign: MatrixSign::PositiveDefinite,
    };
    pub const SYMMETRIC_INDEFINITE: Self = Self {
        symmetric_storage: false,
        symmetric: true,
        sign: MatrixSign::Indefinite,
    };
    pub const GENERAL: Self = Self {
        symmetric_storage: false,
        symmetric: false,
        sign: MatrixSign::Indefinite,
    };
}

#[derive(Clone, Debug)]
enum Storage {
    Building {
        rows: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
    Compressed {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// Sparse matrix built from coordinate triplets and then compressed to CSR.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    num_rows: usize,
    num_cols: usize,
    properties: MatrixProperties,
    storage: Storage,
}

impl SparseMatrix {
    pub fn new(num_rows: usize, num_cols: usize, properties: MatrixProperties) -> Self {
        Self {
            num_rows,
            num_cols,
            properties,
            storage: Storage::Building {
                rows: Vec::new(),
                cols: Vec::new(),
                vals: Vec::new(),
            },
        }
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn properties(&self) -> MatrixProperties {
        self.properties
    }

    pub fn set_properties(&mut self, properties: MatrixProperties) {
        self.properties = properties;
    }

    pub fn is_compressed(&self) -> bool {
        matches!(self.storage, Storage::Compressed { .. })
    }

    /// Adds `v` at `(row, col)`; lower entries of upper storage are mirrored.
    pub fn add(&mut self, row: usize, col: usize, v: f64) -> Result<()> {
        if row >= self.num_rows || col >= self.num_cols {
            return Err(Error::InvalidArgument(format!(
                "entry ({row}, {col}) outside a {}x{} matrix",
                self.num_rows, self.num_cols
            )));
        }
        let (row, col) = if self.properties.symmetric_storage && row > col {
            (col, row)
        } else {
            (row, col)
        };
        match &mut self.storage {
            Storage::Building { rows, cols, vals } => {
                rows.push(row);
                cols.push(col);
                vals.push(v);
                Ok(())
            }
            Storage::Compressed { row_ptr, cols, vals } => {
                let range = row_ptr[row]..row_ptr[row + 1];
                match cols[range.clone()].binary_search(&col) {
                    Ok(k) => {
                        vals[range.start + k] += v;
                        Ok(())
                    }
                    Err(_) => Err(Error::OutsidePattern { row, col }),
                }
            }
        }
    }

    /// Moves the triplets of another building matrix into this one.
    pub fn append(&mut self, other: SparseMatrix) -> Result<()> {
        match other.storage {
            Storage::Building { rows, cols, vals } => {
                for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
                    self.add(r, c, v)?;
                }
                Ok(())
            }
            Storage::Compressed { .. } => Err(Error::State("only building matrices can be appended".into())),
        }
    }

    /// Sorts the triplets, sums duplicates and switches to CSR.
    pub fn compress(&mut self) {
        let Storage::Building { rows, cols, vals } = &mut self.storage else {
            return;
        };
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_unstable_by_key(|&k| (rows[k], cols[k]));
        let mut row_ptr = vec![0; self.num_rows + 1];
        let mut out_cols: Vec<usize> = Vec::with_capacity(order.len());
        let mut out_vals: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let key = (rows[k], cols[k]);
            if last == Some(key) {
                *out_vals.last_mut().unwrap() += vals[k];
            } else {
                row_ptr[key.0 + 1] += 1;
                out_cols.push(key.1);
                out_vals.push(vals[k]);
                last = Some(key);
            }
        }
        for r in 0..self.num_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        self.storage = Storage::Compressed {
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        };
    }

    /// Zeroes the values, keeping the compressed pattern.
    pub fn zero_values(&mut self) {
        match &mut self.storage {
            Storage::Building { rows, cols, vals } => {
                rows.clear();
                cols.clear();
                vals.clear();
            }
            Storage::Compressed { vals, .. } => vals.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    fn csr(&self) -> Result<(&[usize], &[usize], &[f64])> {
        match &self.storage {
            Storage::Compressed { row_ptr, cols, vals } => Ok((row_ptr, cols, vals)),
            Storage::Building { .. } => Err(Error::State("matrix is not compressed".into())),
        }
    }

    pub fn row_ptr(&self) -> Result<&[usize]> {
        Ok(self.csr()?.0)
    }

    pub fn col_indices(&self) -> Result<&[usize]> {
        Ok(self.csr()?.1)
    }

    pub fn values(&self) -> Result<&[f64]> {
        Ok(self.csr()?.2)
    }

    pub fn values_mut(&mut self) -> Result<&mut [f64]> {
        match &mut self.storage {
            Storage::Compressed { vals, .. } => Ok(vals),
            Storage::Building { .. } => Err(Error::State("matrix is not compressed".into())),
        }
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Building { vals, .. } => vals.len(),
            Storage::Compressed { vals, .. } => vals.len(),
        }
    }

    /// Stored value at `(row, col)`, resolving upper storage.
    pub fn get(&self, row: usize, col: usize) -> Result<f64> {
        let (row, col) = if self.properties.symmetric_storage && row > col {
            (col, row)
        } else {
            (row, col)
        };
        let (ptr, cols, vals) = self.csr()?;
        Ok(cols[ptr[row]..ptr[row + 1]]
            .binary_search(&col)
            .map_or(0.0, |k| vals[ptr[row] + k]))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let (ptr, cols, vals) = self.csr()?;
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.num_rows {
            for k in ptr[r]..ptr[r + 1] {
                let c = cols[k];
                y[r] += vals[k] * x[c];
                if self.properties.symmetric_storage && c != r {
                    y[c] += vals[k] * x[r];
                }
            }
        }
        Ok(())
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Result<Vec<f64>> {
        (0..self.num_rows.min(self.num_cols)).map(|i| self.get(i, i)).collect()
    }

    /// Full dense copy.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let (ptr, cols, vals) = self.csr()?;
        let mut m = DMatrix::zeros(self.num_rows, self.num_cols);
        for r in 0..self.num_rows {
            for k in ptr[r]..ptr[r + 1] {
                m[(r, cols[k])] += vals[k];
                if self.properties.symmetric_storage && cols[k] != r {
                    m[(cols[k], r)] += vals[k];
                }
            }
        }
        Ok(m)
    }

    /// Replaces row and column `i` by the identity row, inserting the
    /// diagonal entry into the pattern when it is missing.
    pub fn pin(&mut self, i: usize) -> Result<()> {
        if i >= self.num_rows.min(self.num_cols) {
            return Err(Error::OutsidePattern { row: i, col: i });
        }
        let Storage::Compressed { row_ptr, cols, vals } = &mut self.storage else {
            return Err(Error::State("matrix is not compressed".into()));
        };
        let mut has_diag = false;
        for r in 0..self.num_rows {
            for k in row_ptr[r]..row_ptr[r + 1] {
                if r == i || cols[k] == i {
                    vals[k] = if r == i && cols[k] == i { 1.0 } else { 0.0 };
                    has_diag |= r == i && cols[k] == i;
                }
            }
        }
        if !has_diag {
            let row = &cols[row_ptr[i]..row_ptr[i + 1]];
            let k = row_ptr[i] + row.partition_point(|&c| c < i);
            cols.insert(k, i);
            vals.insert(k, 1.0);
            row_ptr[i + 1..].iter_mut().for_each(|p| *p += 1);
        }
        Ok(())
    }

    /// Writes `row col value` lines with 1-based indices.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let (ptr, cols, vals) = self.csr()?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in 0..self.num_rows {
            for k in ptr[r]..ptr[r + 1] {
                writeln!(w, "{} {} {:e}", r + 1, cols[k] + 1, vals[k])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Square block matrix; uncoupled blocks have no storage.
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    sizes: Vec<usize>,
    blocks: Vec<Option<SparseMatrix>>,
    properties: MatrixProperties,
}

impl BlockMatrix {
    /// Diagonal blocks inherit `properties`; off-diagonal blocks use full storage.
    pub fn new(sizes: &[usize], coupling: &[Vec<bool>], properties: MatrixProperties) -> Self {
        let nb = sizes.len();
        let mut blocks = Vec::with_capacity(nb * nb);
        for i in 0..nb {
            for j in 0..nb {
                blocks.push(coupling[i][j].then(|| {
                    let props = if i == j {
                        properties
                    } else {
                        MatrixProperties {
                            symmetric_storage: false,
                            ..properties
                        }
                    };
                    SparseMatrix::new(sizes[i], sizes[j], props)
                }));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            blocks,
            properties,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn properties(&self) -> MatrixProperties {
        self.properties
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&SparseMatrix> {
        self.blocks[i * self.sizes.len() + j].as_ref()
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> Option<&mut SparseMatrix> {
        let n = self.sizes.len();
        self.blocks[i * n + j].as_mut()
    }

    pub fn compress(&mut self) {
        self.blocks.iter_mut().flatten().for_each(SparseMatrix::compress);
    }

    pub fn zero_values(&mut self) {
        self.blocks.iter_mut().flatten().for_each(SparseMatrix::zero_values);
    }

    pub fn is_compressed(&self) -> bool {
        self.blocks.iter().flatten().all(SparseMatrix::is_compressed)
    }

    /// Monolithic compressed copy with full storage.
    pub fn flatten(&self) -> Result<SparseMatrix> {
        let n: usize = self.sizes.iter().sum();
        let mut off = vec![0];
        for s in &self.sizes {
            off.push(off.last().unwrap() + s);
        }
        let mut out = SparseMatrix::new(
            n,
            n,
            MatrixProperties {
                symmetric_storage: false,
                ..self.properties
            },
        );
        let nb = self.sizes.len();
        for i in 0..nb {
            for j in 0..nb {
                let Some(b) = self.block(i, j) else { continue };
                let (ptr, cols, vals) = b.csr()?;
                let sym = b.properties.symmetric_storage;
                for r in 0..b.num_rows {
                    for k in ptr[r]..ptr[r + 1] {
                        out.add(off[i] + r, off[j] + cols[k], vals[k])?;
                        if sym && cols[k] != r {
                            out.add(off[i] + cols[k], off[j] + r, vals[k])?;
                        }
                    }
                }
            }
        }
        out.compress();
        Ok(out)
    }
}

/// Signed global ids of the local DOFs of one or more fields on a cell.
#[derive(Clone, Debug, Default)]
pub struct LocalDofs {
    pub blocks: Vec<usize>,
    pub ids: Vec<i64>,
    pub signs: Vec<f64>,
}

impl LocalDofs {
    /// Local DOFs of the given fields on a cell, concatenated in field order.
    pub fn for_cell(space: &FESpace, cell: usize, fields: &[usize]) -> Result<Self> {
        let layout = space
            .block_layout()
            .ok_or_else(|| Error::State("global DOF numbering has not been generated".into()))?;
        let mut out = Self::default();
        for &f in fields {
            let ids = space.cell_dofs(f, cell);
            out.blocks.extend(std::iter::repeat_n(layout.field_block(f), ids.len()));
            out.ids.extend_from_slice(ids);
            out.signs.extend_from_slice(space.cell_dof_signs(f, cell));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Concatenation of two sides.
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.blocks.extend_from_slice(&other.blocks);
        out.ids.extend_from_slice(&other.ids);
        out.signs.extend_from_slice(&other.signs);
        out
    }
}

/// Local facet matrices: one block for boundary facets, four
/// (`++`, `+-`, `-+`, `--`) for interior facets.
#[derive(Clone, Debug)]
pub struct FacetSystem {
    pub matrices: Vec<DMatrix<f64>>,
    pub vectors: Vec<Vec<f64>>,
}

/// Receiver of local systems.
pub trait Assemble {
    /// Adds a local system, eliminating fixed columns into the right-hand side.
    fn assemble_cell(&mut self, elmat: &DMatrix<f64>, elvec: &[f64], dofs: &LocalDofs, fixed: &[f64]) -> Result<()>;

    fn assemble_facet(&mut self, system: &FacetSystem, dofs: &[&LocalDofs], fixed: &[f64]) -> Result<()> {
        match (system.matrices.len(), dofs.len()) {
            (1, 1) => self.assemble_cell(&system.matrices[0], &system.vectors[0], dofs[0], fixed),
            (4, 2) => {
                let (np, nm) = (dofs[0].len(), dofs[1].len());
                let mut m = DMatrix::zeros(np + nm, np + nm);
                m.view_mut((0, 0), (np, np)).copy_from(&system.matrices[0]);
                m.view_mut((0, np), (np, nm)).copy_from(&system.matrices[1]);
                m.view_mut((np, 0), (nm, np)).copy_from(&system.matrices[2]);
                m.view_mut((np, np), (nm, nm)).copy_from(&system.matrices[3]);
                let mut v = system.vectors[0].clone();
                v.extend_from_slice(&system.vectors[1]);
                self.assemble_cell(&m, &v, &dofs[0].concat(dofs[1]), fixed)
            }
            _ => Err(Error::InvalidArgument("facet system does not match its sides".into())),
        }
    }
}

/// Block vector of free values.
pub type BlockVector = Vec<Vec<f64>>;

/// Matrix and right-hand side of the free-DOF system.
#[derive(Clone, Debug)]
pub struct Assembler {
    pub matrix: BlockMatrix,
    pub vector: BlockVector,
}

impl Assembler {
    /// An assembler shaped after the numbering of a space.
    pub fn for_space(space: &FESpace, properties: MatrixProperties) -> Result<Self> {
        let layout = space
            .block_layout()
            .ok_or_else(|| Error::State("global DOF numbering has not been generated".into()))?;
        let sizes: Vec<usize> = (0..layout.num_blocks()).map(|b| space.num_dofs_block(b)).collect();
        Ok(Self::new(&sizes, &block_coupling(layout), properties))
    }

    pub fn new(sizes: &[usize], coupling: &[Vec<bool>], properties: MatrixProperties) -> Self {
        Self {
            matrix: BlockMatrix::new(sizes, coupling, properties),
            vector: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn compress(&mut self) {
        self.matrix.compress();
    }

    pub fn zero(&mut self) {
        self.matrix.zero_values();
        self.vector.iter_mut().for_each(|b| b.iter_mut().for_each(|v| *v = 0.0));
    }

    /// Concatenated right-hand side.
    pub fn rhs_flat(&self) -> Vec<f64> {
        self.vector.concat()
    }
}

/// Block coupling implied by the field coupling of a layout.
pub fn block_coupling(layout: &BlockLayout) -> Vec<Vec<bool>> {
    let nb = layout.num_blocks();
    let mut c = vec![vec![false; nb]; nb];
    for a in 0..layout.num_fields() {
        for b in 0..layout.num_fields() {
            if layout.coupled(a, b) {
                c[layout.field_block(a)][layout.field_block(b)] = true;
            }
        }
    }
    c
}

impl Assemble for Assembler {
    fn assemble_cell(&mut self, elmat: &DMatrix<f64>, elvec: &[f64], dofs: &LocalDofs, fixed: &[f64]) -> Result<()> {
        let n = dofs.len();
        if elmat.nrows() != n || elmat.ncols() != n || elvec.len() != n {
            return Err(Error::InvalidArgument(format!(
                "local system {}x{} with {} entries for {n} DOFs",
                elmat.nrows(),
                elmat.ncols(),
                elvec.len()
            )));
        }
        for a in 0..n {
            let ia = dofs.ids[a];
            if ia <= 0 {
                continue;
            }
            let (ba, sa) = (dofs.blocks[a], dofs.signs[a]);
            let mut rhs = sa * elvec[a];
            for c in 0..n {
                let ic = dofs.ids[c];
                let v = sa * dofs.signs[c] * elmat[(a, c)];
                if ic < 0 {
                    rhs -= v * fixed[(-ic - 1) as usize];
                } else if ic > 0 {
                    let (r, col) = ((ia - 1) as usize, (ic - 1) as usize);
                    if let Some(block) = self.matrix.block_mut(ba, dofs.blocks[c]) {
                        if block.properties.symmetric_storage && r > col {
                            continue;
                        }
                        block.add(r, col, v)?;
                    }
                }
            }
            self.vector[ba][(ia - 1) as usize] += rhs;
        }
        Ok(())
    }
}

/// Cell and facet integration of a discrete problem.
pub trait DiscreteIntegration {
    fn integrate(&self, space: &FESpace, assembler: &mut dyn Assemble) -> Result<()>;

    /// Fixed DOF values used for strong conditions.
    fn fixed_values(&self) -> &[f64];
}

/// Life-cycle state of an affine operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorState {
    Created,
    NumericallySetUp,
}

/// `F(u) = A u - f` of a linear FE problem.
pub struct AffineOperator<'a> {
    integration: &'a dyn DiscreteIntegration,
    properties: MatrixProperties,
    assembler: Option<Assembler>,
    state: OperatorState,
}

impl<'a> AffineOperator<'a> {
    pub fn new(integration: &'a dyn DiscreteIntegration, properties: MatrixProperties) -> Self {
        Self {
            integration,
            properties,
            assembler: None,
            state: OperatorState::Created,
        }
    }

    pub fn state(&self) -> OperatorState {
        self.state
    }

    /// Assembles `A` and `f`, reusing a previously compressed pattern.
    pub fn numerical_setup(&mut self, space: &FESpace) -> Result<()> {
        let mut assembler = match self.assembler.take() {
            Some(mut a) => {
                a.zero();
                a
            }
            None => Assembler::for_space(space, self.properties)?,
        };
        self.integration.integrate(space, &mut assembler)?;
        assembler.compress();
        self.assembler = Some(assembler);
        self.state = OperatorState::NumericallySetUp;
        Ok(())
    }

    pub fn assembler(&self) -> Result<&Assembler> {
        self.assembler
            .as_ref()
            .ok_or_else(|| Error::State("operator is not set up".into()))
    }

    /// Monolithic matrix and right-hand side.
    pub fn system(&self) -> Result<(SparseMatrix, Vec<f64>)> {
        let a = self.assembler()?;
        let m = if a.matrix.num_blocks() == 1 {
            a.matrix.block(0, 0).cloned().ok_or_else(|| Error::State("empty system".into()))?
        } else {
            a.matrix.flatten()?
        };
        Ok((m, a.rhs_flat()))
    }

    /// `A u - f` on the free values of `u`.
    pub fn apply(&self, u: &FEFunction) -> Result<Vec<f64>> {
        let (m, f) = self.system()?;
        let x = u.free_flat();
        let mut y = vec![0.0; f.len()];
        m.matvec(&x, &mut y)?;
        y.iter_mut().zip(&f).for_each(|(y, f)| *y -= f);
        Ok(y)
    }
}

/// Linear solver choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    CgJacobi,
    DenseLu,
}

/// Default size limit of the dense LU solver.
pub const DENSE_LU_CAP: usize = 20_000;

/// Relative residual tolerance of CG.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Solution and convergence data of a linear solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    let mut r = vec![0.0; b.len()];
    a.matvec(x, &mut r)?;
    let res: f64 = r.iter().zip(b).map(|(r, b)| (r - b) * (r - b)).sum::<f64>().sqrt();
    let nb = norm(b);
    Ok(if nb > 0.0 { res / nb } else { res })
}

/// Jacobi-preconditioned conjugate gradients.
pub fn cg_jacobi(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<SolveReport> {
    let p = a.properties();
    if !p.symmetric || p.sign == MatrixSign::Indefinite {
        return Err(Error::Solver("CG needs a symmetric (semi)definite matrix".into()));
    }
    let n = b.len();
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(SolveReport {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()?
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut dir = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut q = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&dir, &mut q)?;
        let alpha = rz / dir.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * dir[i];
            r[i] -= alpha * q[i];
        }
        let rel = norm(&r) / nb;
        if rel <= tol {
            return Ok(SolveReport {
                relative_residual: relative_residual(a, &x, b)?,
                x,
                iterations: it,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    Err(Error::Solver(format!("CG did not converge in {max_iter} iterations")))
}

/// Dense LU with partial pivoting for systems up to `cap` unknowns.
pub fn dense_lu(a: &SparseMatrix, b: &[f64], cap: usize) -> Result<SolveReport> {
    let n = b.len();
    if n > cap {
        return Err(Error::Solver(format!("{n} unknowns exceed the dense LU limit {cap}")));
    }
    let dense = a.to_dense()?;
    let scale = dense.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let lu = dense.lu();
    let u = lu.u();
    let pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    let threshold = 1e-12 * scale;
    if n > 0 && pivot < threshold {
        return Err(Error::SingularMatrix { pivot, threshold });
    }
    let x = lu
        .solve(&nalgebra::DVector::from_column_slice(b))
        .ok_or(Error::SingularMatrix { pivot, threshold })?;
    let x: Vec<f64> = x.iter().copied().collect();
    Ok(SolveReport {
        relative_residual: relative_residual(a, &x, b)?,
        x,
        iterations: 1,
    })
}

/// Solves `A x = b` with the chosen method and default limits.
pub fn solve(a: &SparseMatrix, b: &[f64], kind: SolverKind) -> Result<SolveReport> {
    match kind {
        SolverKind::CgJacobi => cg_jacobi(a, b, CG_TOLERANCE, 10 * b.len().max(100)),
        SolverKind::DenseLu => dense_lu(a, b, DENSE_LU_CAP),
    }
}
