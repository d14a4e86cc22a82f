//! Command-line front end.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::drivers::{
    convergence, convergence_table, default_penalty, write_vtk, Driver, PoissonCase, PoissonMethod, PoissonProblem,
    StokesCase, StokesProblem, VtkField,
};
use crate::error::{Error, Result};
use crate::linalg::AffineOperator;
use crate::triangulation::{StructuredMesh, Triangulation};

#[derive(Parser, Debug)]
#[command(name = "fekit", version, about = "Finite element drivers on structured and imported meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Cg,
    Dg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DriverArg {
    PoissonCg,
    PoissonDg,
    Stokes,
}

#[derive(clap::Args, Debug)]
struct MeshArgs {
    /// Cells per direction, `nx[,ny[,nz]]`; a single value is repeated `--dim` times.
    #[arg(long, value_delimiter = ',', default_values_t = vec![4])]
    cells: Vec<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Read the mesh from a file instead of generating it.
    #[arg(long, conflicts_with_all = ["cells"])]
    mesh: Option<PathBuf>,
}

impl MeshArgs {
    fn structured(&self, default_dim: usize) -> Result<StructuredMesh> {
        let cells = match (self.cells.len(), self.dim) {
            (1, d) => vec![self.cells[0]; d.unwrap_or(default_dim)],
            (n, Some(d)) if n != d => {
                return Err(Error::InvalidArgument(format!("{n} cell counts for dimension {d}")));
            }
            _ => self.cells.clone(),
        };
        if cells.is_empty() || cells.len() > 3 || cells.contains(&0) {
            return Err(Error::InvalidArgument("cell counts must be 1 to 3 positive integers".into()));
        }
        Ok(StructuredMesh::unit(&cells))
    }

    fn triangulation(&self, default_dim: usize) -> Result<Arc<Triangulation>> {
        let tri = match &self.mesh {
            Some(path) => Triangulation::import(path)?,
            None => Triangulation::structured(&self.structured(default_dim)?)?,
        };
        Ok(Arc::new(tri))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a structured mesh of the unit box and export it.
    Mesh {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Solve a manufactured Poisson problem.
    Poisson {
        #[arg(long, value_enum, default_value_t = Method::Cg)]
        method: Method,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[command(flatten)]
        mesh: MeshArgs,
        /// Interior penalty parameter (default 10 (k+1)²).
        #[arg(long)]
        penalty: Option<f64>,
        /// Adjoint-consistency parameter of the DG method.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Manufactured solution: `sine` or `polynomial`.
        #[arg(long, default_value = "sine")]
        case: String,
        #[arg(long)]
        vtk: Option<PathBuf>,
        /// Write the assembled matrix as `row col value` lines.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Solve a manufactured Stokes problem with Q_{k+1}/Q_k elements.
    Stokes {
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value = "sine")]
        case: String,
        /// One block per field instead of a monolithic system.
        #[arg(long)]
        blocks: bool,
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Run uniform refinements and print errors and observed orders.
    Convergence {
        #[arg(long, value_enum)]
        driver: DriverArg,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Cells per direction on the coarsest level.
        #[arg(long)]
        coarsest: Option<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
}

fn execute(command: Command) -> Result<String> {
    let mut out = String::new();
    match command {
        Command::Mesh { mesh, output } => {
            let tri = mesh.triangulation(2)?;
            tri.export(&output)?;
            out.push_str(&format!("cells\t{}\nvertices\t{}\n", tri.num_cells(), tri.num_vertices()));
        }
        Command::Poisson {
            method,
            order,
            mesh,
            penalty,
            tau,
            case,
            vtk,
            dump,
        } => {
            let tri = mesh.triangulation(2)?;
            let method = match method {
                Method::Cg => PoissonMethod::Cg,
                Method::Dg => PoissonMethod::Dg {
                    penalty: penalty.unwrap_or_else(|| default_penalty(order)),
                    tau,
                },
            };
            let case = PoissonCase::by_name(&case, tri.num_dims(), order)?;
            let problem = PoissonProblem::new(tri.clone(), method, order, case)?;
            if let Some(path) = dump {
                let mut op = AffineOperator::new(&problem.integration, problem.properties());
                op.numerical_setup(&problem.space)?;
                op.system()?.0.dump(&path)?;
            }
            let run = problem.solve(None)?;
            out.push_str(&format!(
                "cells\t{}\nfree_dofs\t{}\nfixed_dofs\t{}\niterations\t{}\nrelative_residual\t{:.3e}\nl2_error\t{:.6e}\nh1_error\t{:.6e}\n",
                tri.num_cells(),
                problem.space.num_free_dofs(),
                problem.space.num_fixed_dofs(),
                run.iterations,
                run.relative_residual,
                run.errors.l2,
                run.errors.h1_semi,
            ));
            if let Some(path) = vtk {
                write_vtk(&tri, &[VtkField {
                    name: "u",
                    space: &problem.space,
                    function: &run.solution,
                    field: 0,
                }], &path)?;
            }
        }
        Command::Stokes {
            order,
            mesh,
            case,
            blocks,
            vtk,
        } => {
            let tri = mesh.triangulation(2)?;
            let case = StokesCase::by_name(&case, tri.num_dims())?;
            let problem = StokesProblem::new(tri.clone(), order, case, blocks)?;
            let run = problem.solve()?;
            out.push_str(&format!(
                "cells\t{}\nvelocity_dofs\t{}\npressure_dofs\t{}\nfixed_dofs\t{}\nrelative_residual\t{:.3e}\nvelocity_l2_error\t{:.6e}\nvelocity_h1_error\t{:.6e}\npressure_l2_error\t{:.6e}\n",
                tri.num_cells(),
                problem.space.num_dofs_field(0),
                problem.space.num_dofs_field(1),
                problem.space.num_fixed_dofs(),
                run.relative_residual,
                run.velocity_errors.l2,
                run.velocity_errors.h1_semi,
                run.pressure_error,
            ));
            if let Some(path) = vtk {
                let fields = [
                    VtkField {
                        name: "velocity",
                        space: &problem.space,
                        function: &run.solution,
                        field: 0,
                    },
                    VtkField {
                        name: "pressure",
                        space: &problem.space,
                        function: &run.solution,
                        field: 1,
                    },
                ];
                write_vtk(&tri, &fields, &path)?;
            }
        }
        Command::Convergence {
            driver,
            order,
            levels,
            coarsest,
            dim,
            penalty,
            tau,
        } => {
            let (driver, default_coarsest) = match driver {
                DriverArg::PoissonCg => (Driver::PoissonCg, 8),
                DriverArg::PoissonDg => (Driver::PoissonDg { penalty, tau }, 8),
                DriverArg::Stokes => (Driver::Stokes, 4),
            };
            let rows = convergence(driver, order, dim, coarsest.unwrap_or(default_coarsest), levels)?;
            out.push_str(&convergence_table(&rows));
        }
    }
    Ok(out)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os())
}
