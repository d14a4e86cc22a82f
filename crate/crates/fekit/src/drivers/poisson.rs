use std::sync::Arc;

use nalgebra::DMatrix;

use super::manufactured::PoissonCase;
use super::norms::{compute_error_norms, ErrorNorms, ExactField};
use crate::error::Result;
use crate::fe_space::{
    BlockLayout, Condition, ElementSpec, FEFunction, FESpace, FieldDescription, InterpolationTarget,
};
use crate::integration::diameter;
use crate::linalg::{
    solve, AffineOperator, Assemble, DiscreteIntegration, FacetSystem, LocalDofs, MatrixProperties, SolverKind,
};
use crate::reference_fe::FieldType;
use crate::triangulation::{Triangulation, DEFAULT_SET};
use crate::Point;

/// Discretization of the Poisson problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoissonMethod {
    /// Continuous Galerkin with strong Dirichlet conditions.
    Cg,
    /// Interior penalty DG with weak Dirichlet conditions.
    Dg { penalty: f64, tau: f64 },
}

impl PoissonMethod {
    /// Symmetric interior penalty with `γ = 10 (k + 1)²`.
    pub fn sipg(order: usize) -> Self {
        Self::Dg {
            penalty: default_penalty(order),
            tau: 1.0,
        }
    }
}

pub fn default_penalty(order: usize) -> f64 {
    10.0 * ((order + 1) * (order + 1)) as f64
}

/// Cell and facet integration of the Poisson problem.
pub struct PoissonIntegration {
    pub method: PoissonMethod,
    pub case: PoissonCase,
    pub dirichlet: Vec<f64>,
}

impl PoissonIntegration {
    fn cell_terms(&self, space: &FESpace, assembler: &mut dyn Assemble) -> Result<()> {
        let tri = space.triangulation();
        let d = tri.num_dims();
        let kappa = self.case.kappa;
        let mut ws = space.cell_workspace()?;
        for cell in tri.cells() {
            ws.update(space, cell)?;
            let Some(shapes) = ws.shapes(space, 0) else { continue };
            let map = ws.cell_map();
            let n = shapes.n_functions;
            let mut a = DMatrix::zeros(n, n);
            let mut b = vec![0.0; n];
            for p in 0..shapes.n_points {
                let w = map.measure(p);
                let f = (self.case.forcing)(map.point(p));
                for i in 0..n {
                    b[i] += w * f * shapes.value(0, i, p);
                    for j in 0..n {
                        let g: f64 = (0..d).map(|k| shapes.gradient(0, k, i, p) * shapes.gradient(0, k, j, p)).sum();
                        a[(i, j)] += w * kappa * g;
                    }
                }
            }
            assembler.assemble_cell(&a, &b, &LocalDofs::for_cell(space, cell, &[0])?, &self.dirichlet)?;
        }
        Ok(())
    }

    fn facet_terms(&self, space: &FESpace, penalty: f64, tau: f64, assembler: &mut dyn Assemble) -> Result<()> {
        let tri = space.triangulation();
        let d = tri.num_dims();
        let kappa = self.case.kappa;
        let mut ws = space.facet_workspace()?;
        for i in 0..space.num_facets() {
            ws.update(space, i)?;
            let maps = ws.facet_maps(space);
            let (plus, minus) = space.facet_cells(i)?;
            let h = if d > 1 {
                maps.facet_measure().powf(1.0 / (d - 1) as f64)
            } else {
                std::iter::once(plus)
                    .chain(minus)
                    .map(|c| diameter(&tri.cell_coordinates(c)))
                    .fold(f64::INFINITY, f64::min)
            };
            let sides: Vec<usize> = if minus.is_some() { vec![0, 1] } else { vec![0] };
            let shapes: Vec<_> = sides
                .iter()
                .map(|&s| ws.shapes(space, 0, s).expect("non-void DG field"))
                .collect();
            let avg = if minus.is_some() { 0.5 } else { 1.0 };
            let jump = [1.0, -1.0];
            let mut system = FacetSystem {
                matrices: Vec::new(),
                vectors: sides.iter().map(|&s| vec![0.0; shapes[s].n_functions]).collect(),
            };
            for &s in &sides {
                for &t in &sides {
                    let (ss, st) = (shapes[s], shapes[t]);
                    let mut a = DMatrix::zeros(ss.n_functions, st.n_functions);
                    for gp in 0..maps.num_points() {
                        let w = maps.measure(gp);
                        let nrm = maps.normal(gp);
                        for r in 0..ss.n_functions {
                            let v = ss.value(0, r, gp);
                            let dv: f64 = (0..d).map(|k| ss.gradient(0, k, r, gp) * nrm[k]).sum();
                            for c in 0..st.n_functions {
                                let u = st.value(0, c, gp);
                                let du: f64 = (0..d).map(|k| st.gradient(0, k, c, gp) * nrm[k]).sum();
                                a[(r, c)] += w
                                    * (-avg * kappa * du * jump[s] * v - tau * avg * kappa * dv * jump[t] * u
                                        + penalty / h * jump[s] * jump[t] * v * u);
                            }
                        }
                    }
                    system.matrices.push(a);
                }
            }
            if minus.is_none() {
                let s0 = shapes[0];
                for gp in 0..maps.num_points() {
                    let w = maps.measure(gp);
                    let nrm = maps.normal(gp);
                    let ud = (self.case.u)(maps.point(gp));
                    for r in 0..s0.n_functions {
                        let dv: f64 = (0..d).map(|k| s0.gradient(0, k, r, gp) * nrm[k]).sum();
                        system.vectors[0][r] += w * ud * (-tau * kappa * dv + penalty / h * s0.value(0, r, gp));
                    }
                }
            }
            let dp = LocalDofs::for_cell(space, plus, &[0])?;
            match minus {
                Some(m) => {
                    let dm = LocalDofs::for_cell(space, m, &[0])?;
                    assembler.assemble_facet(&system, &[&dp, &dm], &self.dirichlet)?;
                }
                None => assembler.assemble_facet(&system, &[&dp], &self.dirichlet)?,
            }
        }
        Ok(())
    }
}

impl DiscreteIntegration for PoissonIntegration {
    fn integrate(&self, space: &FESpace, assembler: &mut dyn Assemble) -> Result<()> {
        self.cell_terms(space, assembler)?;
        if let PoissonMethod::Dg { penalty, tau } = self.method {
            self.facet_terms(space, penalty, tau, assembler)?;
        }
        Ok(())
    }

    fn fixed_values(&self) -> &[f64] {
        &self.dirichlet
    }
}

/// A Poisson problem ready to be assembled.
pub struct PoissonProblem {
    pub space: FESpace,
    pub integration: PoissonIntegration,
    pub order: usize,
}

/// Solution and diagnostics of a Poisson run.
pub struct PoissonRun {
    pub solution: FEFunction,
    pub errors: ErrorNorms,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl PoissonProblem {
    pub fn new(triangulation: Arc<Triangulation>, method: PoissonMethod, order: usize, case: PoissonCase) -> Result<Self> {
        let (spec, conditions) = match method {
            PoissonMethod::Cg => {
                let u = case.u.clone();
                let cond = Condition {
                    field: 0,
                    set: DEFAULT_SET,
                    mask: vec![true],
                    function: Arc::new(move |x: &Point, v: &mut [f64]| v[0] = u(x)),
                };
                (ElementSpec::lagrangian(order, FieldType::Scalar), vec![cond])
            }
            PoissonMethod::Dg { .. } => (ElementSpec::discontinuous(order, FieldType::Scalar), Vec::new()),
        };
        let mut space = FESpace::new(triangulation, &[FieldDescription::uniform(spec)], conditions)?;
        space.generate_global_dof_numbering(&BlockLayout::monolithic(1))?;
        let mut dirichlet = space.create_fe_function()?;
        space.interpolate(0, &|_: &Point, _: &mut [f64]| {}, &mut dirichlet, InterpolationTarget::FixedDirichlet)?;
        space.setup_cell_integration(None)?;
        if matches!(method, PoissonMethod::Dg { .. }) {
            space.setup_facet_integration(None)?;
        }
        Ok(Self {
            space,
            integration: PoissonIntegration {
                method,
                case,
                dirichlet: dirichlet.fixed_dof_values,
            },
            order,
        })
    }

    /// Matrix storage used by the assembler.
    pub fn properties(&self) -> MatrixProperties {
        match self.integration.method {
            PoissonMethod::Dg { tau, .. } if tau != 1.0 => MatrixProperties::GENERAL,
            _ => MatrixProperties::SPD_UPPER,
        }
    }

    pub fn solve(&self, solver: Option<SolverKind>) -> Result<PoissonRun> {
        let mut op = AffineOperator::new(&self.integration, self.properties());
        op.numerical_setup(&self.space)?;
        let (matrix, rhs) = op.system()?;
        let kind = solver.unwrap_or(if matrix.properties().symmetric {
            SolverKind::CgJacobi
        } else {
            SolverKind::DenseLu
        });
        let report = solve(&matrix, &rhs, kind)?;
        let mut solution = self.space.create_fe_function()?;
        solution.set_free_flat(&report.x)?;
        solution.fixed_dof_values = self.integration.dirichlet.clone();
        let case = &self.integration.case;
        let errors = compute_error_norms(
            &self.space,
            &solution,
            0,
            &ExactField {
                value: &|x, v| v[0] = (case.u)(x),
                gradient: Some(&|x, g| g[..3].copy_from_slice(&(case.grad_u)(x))),
            },
            None,
            false,
        )?;
        Ok(PoissonRun {
            solution,
            errors,
            iterations: report.iterations,
            relative_residual: report.relative_residual,
        })
    }
}
