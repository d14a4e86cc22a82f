use std::sync::Arc;

use nalgebra::DMatrix;

use super::manufactured::StokesCase;
use super::norms::{compute_error_norms, ErrorNorms, ExactField};
use crate::error::{Error, Result};
use crate::fe_space::{
    BlockLayout, Condition, ElementSpec, FEFunction, FESpace, FieldDescription, InterpolationTarget,
};
use crate::linalg::{
    solve, AffineOperator, Assemble, DiscreteIntegration, LocalDofs, MatrixProperties, SolverKind, SparseMatrix,
};
use crate::reference_fe::FieldType;
use crate::triangulation::{Triangulation, DEFAULT_SET};
use crate::{Point, SPACE_DIM};

/// Taylor-Hood integration of
/// `μ ∫ ε(u):ε(v) - ∫ (∇·v) p - ∫ q (∇·u) = ∫ f·v`.
pub struct StokesIntegration {
    pub case: StokesCase,
    pub dirichlet: Vec<f64>,
}

impl DiscreteIntegration for StokesIntegration {
    fn integrate(&self, space: &FESpace, assembler: &mut dyn Assemble) -> Result<()> {
        let tri = space.triangulation();
        let d = tri.num_dims();
        let mu = self.case.mu;
        let mut ws = space.cell_workspace()?;
        let mut eps: Vec<[[f64; SPACE_DIM]; SPACE_DIM]> = Vec::new();
        let mut f = [0.0; SPACE_DIM];
        for cell in tri.cells() {
            ws.update(space, cell)?;
            let (Some(su), Some(sp)) = (ws.shapes(space, 0), ws.shapes(space, 1)) else {
                continue;
            };
            let map = ws.cell_map();
            let (nu, np) = (su.n_functions, sp.n_functions);
            let mut a = DMatrix::zeros(nu + np, nu + np);
            let mut b = vec![0.0; nu + np];
            for p in 0..su.n_points {
                let w = map.measure(p);
                f.iter_mut().for_each(|v| *v = 0.0);
                (self.case.forcing)(map.point(p), &mut f);
                eps.clear();
                for i in 0..nu {
                    let mut e = [[0.0; SPACE_DIM]; SPACE_DIM];
                    for r in 0..d {
                        for c in 0..d {
                            e[r][c] = 0.5 * (su.gradient(r, c, i, p) + su.gradient(c, r, i, p));
                        }
                    }
                    eps.push(e);
                    b[i] += w * (0..d).map(|c| f[c] * su.value(c, i, p)).sum::<f64>();
                }
                for i in 0..nu {
                    for j in 0..nu {
                        let mut s = 0.0;
                        for r in 0..d {
                            for c in 0..d {
                                s += eps[i][r][c] * eps[j][r][c];
                            }
                        }
                        a[(i, j)] += w * mu * s;
                    }
                    let div = su.divergence(i, p);
                    for q in 0..np {
                        let v = -w * div * sp.value(0, q, p);
                        a[(i, nu + q)] += v;
                        a[(nu + q, i)] += v;
                    }
                }
            }
            assembler.assemble_cell(&a, &b, &LocalDofs::for_cell(space, cell, &[0, 1])?, &self.dirichlet)?;
        }
        Ok(())
    }

    fn fixed_values(&self) -> &[f64] {
        &self.dirichlet
    }
}

/// A Taylor-Hood `Q_{k+1}/Q_k` Stokes problem.
pub struct StokesProblem {
    pub space: FESpace,
    pub integration: StokesIntegration,
    pub order: usize,
}

/// Solution and diagnostics of a Stokes run.
pub struct StokesRun {
    pub solution: FEFunction,
    pub velocity_errors: ErrorNorms,
    /// L2 error of the pressure modulo constants.
    pub pressure_error: f64,
    pub relative_residual: f64,
}

impl StokesProblem {
    /// `order` is the pressure order; `blocks` selects one block per field.
    pub fn new(triangulation: Arc<Triangulation>, order: usize, case: StokesCase, blocks: bool) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("Taylor-Hood needs a pressure order of at least 1".into()));
        }
        if triangulation.num_dims() != case.num_dims {
            return Err(Error::InvalidArgument("case and mesh dimensions differ".into()));
        }
        let u = case.u.clone();
        let d = case.num_dims;
        let cond = Condition {
            field: 0,
            set: DEFAULT_SET,
            mask: vec![true; d],
            function: Arc::new(move |x: &Point, v: &mut [f64]| u(x, v)),
        };
        let fields = [
            FieldDescription::uniform(ElementSpec::lagrangian(order + 1, FieldType::Vector)),
            FieldDescription::uniform(ElementSpec::lagrangian(order, FieldType::Scalar)),
        ];
        let mut space = FESpace::new(triangulation, &fields, vec![cond])?;
        let coupling = vec![vec![true, true], vec![true, false]];
        let layout = if blocks {
            BlockLayout::new(vec![0, 1], coupling)?
        } else {
            BlockLayout::new(vec![0, 0], coupling)?
        };
        space.generate_global_dof_numbering(&layout)?;
        let mut dirichlet = space.create_fe_function()?;
        space.interpolate(0, &|_: &Point, _: &mut [f64]| {}, &mut dirichlet, InterpolationTarget::FixedDirichlet)?;
        space.setup_cell_integration(None)?;
        Ok(Self {
            space,
            integration: StokesIntegration {
                case,
                dirichlet: dirichlet.fixed_dof_values,
            },
            order,
        })
    }

    /// Index of the pinned pressure unknown in the monolithic system.
    pub fn pinned_unknown(&self) -> Result<usize> {
        let layout = self.space.block_layout().expect("numbered");
        let block = layout.field_block(1);
        let first = self
            .space
            .triangulation()
            .cells()
            .flat_map(|c| self.space.cell_dofs(1, c).iter().copied())
            .filter(|&id| id > 0)
            .min()
            .ok_or_else(|| Error::State("no free pressure DOF".into()))?;
        Ok(self.space.block_offsets()[block] + (first - 1) as usize)
    }

    /// Assembled monolithic system without pressure pinning.
    pub fn system(&self) -> Result<(SparseMatrix, Vec<f64>)> {
        let mut op = AffineOperator::new(&self.integration, MatrixProperties::SYMMETRIC_INDEFINITE);
        op.numerical_setup(&self.space)?;
        op.system()
    }

    pub fn solve(&self) -> Result<StokesRun> {
        let (mut matrix, mut rhs) = self.system()?;
        let pin = self.pinned_unknown()?;
        matrix.pin(pin)?;
        rhs[pin] = 0.0;
        let report = solve(&matrix, &rhs, SolverKind::DenseLu)?;
        let mut solution = self.space.create_fe_function()?;
        solution.set_free_flat(&report.x)?;
        solution.fixed_dof_values = self.integration.dirichlet.clone();
        let case = &self.integration.case;
        let velocity_errors = compute_error_norms(
            &self.space,
            &solution,
            0,
            &ExactField {
                value: &|x, v| (case.u)(x, v),
                gradient: Some(&|x, g| (case.grad_u)(x, g)),
            },
            None,
            false,
        )?;
        let pressure = compute_error_norms(
            &self.space,
            &solution,
            1,
            &ExactField {
                value: &|x, v| v[0] = (case.p)(x),
                gradient: None,
            },
            None,
            true,
        )?;
        Ok(StokesRun {
            solution,
            velocity_errors,
            pressure_error: pressure.l2,
            relative_residual: report.relative_residual,
        })
    }
}
