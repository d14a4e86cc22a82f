//! Poisson (CG and SIPG) and Taylor-Hood Stokes drivers, error norms,
//! convergence studies and VTK output.

mod manufactured;
mod norms;
mod poisson;
mod stokes;
mod vtk;

use std::sync::Arc;

pub use manufactured::{PoissonCase, ScalarFn, StokesCase, VectorFn};
pub use norms::{compute_error_norms, ErrorNorms, ExactField};
pub use poisson::{default_penalty, PoissonIntegration, PoissonMethod, PoissonProblem, PoissonRun};
pub use stokes::{StokesIntegration, StokesProblem, StokesRun};
pub use vtk::{write_vtk, VtkField};

use crate::error::{Error, Result};
use crate::triangulation::{StructuredMesh, Triangulation};

/// Problems available to convergence studies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Driver {
    PoissonCg,
    PoissonDg { penalty: Option<f64>, tau: f64 },
    Stokes,
}

/// One refinement level of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub cells_per_dim: usize,
    pub h: f64,
    pub free_dofs: usize,
    pub l2: f64,
    pub h1: f64,
    /// Mean-free pressure L2 error of Stokes runs.
    pub pressure_l2: Option<f64>,
    pub l2_order: Option<f64>,
    pub h1_order: Option<f64>,
}

/// Runs `levels` uniform refinements of the unit box starting from
/// `coarsest` cells per direction, with the sine manufactured solutions.
pub fn convergence(driver: Driver, order: usize, num_dims: usize, coarsest: usize, levels: usize) -> Result<Vec<ConvergenceRow>> {
    if coarsest == 0 || levels == 0 {
        return Err(Error::InvalidArgument("a study needs at least one cell and one level".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let n = coarsest << level;
        let tri = Arc::new(Triangulation::structured(&StructuredMesh::unit(&vec![n; num_dims]))?);
        let mut row = match driver {
            Driver::PoissonCg | Driver::PoissonDg { .. } => {
                let method = match driver {
                    Driver::PoissonDg { penalty, tau } => PoissonMethod::Dg {
                        penalty: penalty.unwrap_or_else(|| default_penalty(order)),
                        tau,
                    },
                    _ => PoissonMethod::Cg,
                };
                let problem = PoissonProblem::new(tri, method, order, PoissonCase::sine(num_dims))?;
                let run = problem.solve(None)?;
                ConvergenceRow {
                    cells_per_dim: n,
                    h: 1.0 / n as f64,
                    free_dofs: problem.space.num_free_dofs(),
                    l2: run.errors.l2,
                    h1: run.errors.h1_semi,
                    pressure_l2: None,
                    l2_order: None,
                    h1_order: None,
                }
            }
            Driver::Stokes => {
                let problem = StokesProblem::new(tri, order, StokesCase::sine(num_dims)?, false)?;
                let run = problem.solve()?;
                ConvergenceRow {
                    cells_per_dim: n,
                    h: 1.0 / n as f64,
                    free_dofs: problem.space.num_free_dofs(),
                    l2: run.velocity_errors.l2,
                    h1: run.velocity_errors.h1_semi,
                    pressure_l2: Some(run.pressure_error),
                    l2_order: None,
                    h1_order: None,
                }
            }
        };
        if let Some(prev) = rows.last() {
            row.l2_order = Some((prev.l2 / row.l2).log2());
            row.h1_order = Some((prev.h1 / row.h1).log2());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Tab-separated table of a convergence study.
pub fn convergence_table(rows: &[ConvergenceRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let mut s = String::from("cells\th\tfree_dofs\tl2_error\tl2_order\th1_error\th1_order\tpressure_l2\n");
    for r in rows {
        s.push_str(&format!(
            "{}\t{:.6e}\t{}\t{:.6e}\t{}\t{:.6e}\t{}\t{}\n",
            r.cells_per_dim,
            r.h,
            r.free_dofs,
            r.l2,
            fmt(r.l2_order),
            r.h1,
            fmt(r.h1_order),
            r.pressure_l2.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}")),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Assemble, LocalDofs};
    use nalgebra::DMatrix;

    fn unit(n: &[usize]) -> Arc<Triangulation> {
        Arc::new(Triangulation::structured(&StructuredMesh::unit(n)).unwrap())
    }

    struct Capture(Vec<DMatrix<f64>>);

    impl Assemble for Capture {
        fn assemble_cell(&mut self, elmat: &DMatrix<f64>, _: &[f64], _: &LocalDofs, _: &[f64]) -> Result<()> {
            self.0.push(elmat.clone());
            Ok(())
        }
    }

    #[test]
    fn q1_reference_stiffness() {
        let problem = PoissonProblem::new(unit(&[1, 1]), PoissonMethod::Cg, 1, PoissonCase::polynomial(2, 1)).unwrap();
        let mut cap = Capture(Vec::new());
        use crate::linalg::DiscreteIntegration;
        problem.integration.integrate(&problem.space, &mut cap).unwrap();
        let k = &cap.0[0];
        let exact = DMatrix::from_row_slice(4, 4, &[
            4.0, -1.0, -1.0, -2.0, -1.0, 4.0, -2.0, -1.0, -1.0, -2.0, 4.0, -1.0, -2.0, -1.0, -1.0, 4.0,
        ]) / 6.0;
        assert!((k - exact).abs().max() < 1e-14);
    }

    #[test]
    fn linear_reproduction() {
        for method in [PoissonMethod::Cg, PoissonMethod::sipg(1)] {
            let p = PoissonProblem::new(unit(&[3, 3]), method, 1, PoissonCase::polynomial(2, 1)).unwrap();
            let run = p.solve(None).unwrap();
            assert!(run.errors.l2 < 1e-9, "{method:?} {}", run.errors.l2);
        }
        let p = PoissonProblem::new(unit(&[1, 1]), PoissonMethod::sipg(1), 1, PoissonCase::polynomial(2, 1)).unwrap();
        assert!(p.solve(None).unwrap().errors.l2 < 1e-9);
    }

    #[test]
    fn stokes_polynomial_reproduction() {
        let p = StokesProblem::new(unit(&[2, 2]), 1, StokesCase::polynomial(2).unwrap(), false).unwrap();
        let run = p.solve().unwrap();
        assert!(run.velocity_errors.l2 < 1e-9);
        assert!(run.pressure_error < 1e-9);
    }

    #[test]
    fn vtk_layout() {
        let tri = unit(&[2, 2]);
        let p = PoissonProblem::new(tri.clone(), PoissonMethod::Cg, 1, PoissonCase::polynomial(2, 1)).unwrap();
        let run = p.solve(None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.vtk");
        write_vtk(&tri, &[VtkField {
            name: "u",
            space: &p.space,
            function: &run.solution,
            field: 0,
        }], &path)
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 16 double"));
        assert!(text.contains("CELLS 4 20"));
        assert!(text.contains("SCALARS u double 1"));
        let geometry_only = dir.path().join("g.vtk");
        write_vtk(&tri, &[], &geometry_only).unwrap();
        assert!(!std::fs::read_to_string(geometry_only).unwrap().contains("POINT_DATA"));
    }
}
