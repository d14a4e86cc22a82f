//! C ABI over the `fekit` library.
//!
//! Objects are exposed as opaque handles created by `*_new`/`*_import`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`FekitStatus`]; the message of the last failure on the calling
//! thread is available through [`fekit_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use fekit::drivers::{default_penalty, PoissonCase, PoissonMethod, PoissonProblem, StokesCase, StokesProblem};
use fekit::polytope::Polytope;
use fekit::triangulation::{StructuredMesh, Triangulation};
use fekit::Error;

/// Result codes of the C API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FekitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    SingularMatrix = 4,
    DegenerateGeometry = 5,
    Nonconforming = 6,
    Parse = 7,
    Solver = 8,
    State = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for FekitStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionOutOfRange(..) | Error::InvalidArgument(_) | Error::OutsidePattern { .. } => {
                Self::InvalidArgument
            }
            Error::Unsupported(_) => Self::Unsupported,
            Error::SingularMatrix { .. } => Self::SingularMatrix,
            Error::DegenerateGeometry(_) => Self::DegenerateGeometry,
            Error::Nonconforming(_) => Self::Nonconforming,
            Error::Parse { .. } => Self::Parse,
            Error::Solver(_) => Self::Solver,
            Error::State(_) => Self::State,
            Error::Io(_) => Self::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (FekitStatus, String)>) -> FekitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FekitStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FekitStatus::Panic
        }
    }
}

fn lib(e: Error) -> (FekitStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (FekitStatus, String) {
    (FekitStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (FekitStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (FekitStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Copies the last error message of this thread into `buffer` (NUL
/// terminated, truncated to `capacity`) and returns the full message length,
/// or 0 when the last call succeeded.
///
/// # Safety
/// `buffer` must be null or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fekit_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Opaque cell topology.
pub struct FekitPolytope(Polytope);

/// Opaque mesh.
pub struct FekitTriangulation(Arc<Triangulation>);

/// Creates the polytope of dimension `num_dims` whose bit `i` of `topology`
/// selects a prism (1) or pyramid (0) extrusion in direction `i`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fekit_polytope_new(num_dims: usize, topology: u32, out: *mut *mut FekitPolytope) -> FekitStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = Polytope::new(num_dims, topology).map_err(lib)?;
        *out = Box::into_raw(Box::new(FekitPolytope(p)));
        Ok(())
    })
}

/// Number of n-faces of dimension `dim`, or of all dimensions when `dim`
/// exceeds the polytope dimension. Returns 0 for a null handle.
///
/// # Safety
/// `polytope` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fekit_polytope_num_n_faces(polytope: *const FekitPolytope, dim: usize) -> usize {
    let Some(p) = polytope.as_ref() else { return 0 };
    if dim > p.0.num_dims() {
        p.0.num_n_faces()
    } else {
        p.0.n_faces_of_dim(dim).len()
    }
}

/// # Safety
/// `polytope` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fekit_polytope_free(polytope: *mut FekitPolytope) {
    if !polytope.is_null() {
        drop(Box::from_raw(polytope));
    }
}

/// Structured mesh of the unit box with `cells[i]` cells in direction `i`.
///
/// # Safety
/// `cells` must point to `num_dims` readable values and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_structured(
    num_dims: usize,
    cells: *const usize,
    out: *mut *mut FekitTriangulation,
) -> FekitStatus {
    guard(|| {
        if cells.is_null() {
            return Err(null("cells"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let cells = std::slice::from_raw_parts(cells, num_dims);
        let tri = Triangulation::structured(&StructuredMesh::unit(cells)).map_err(lib)?;
        *out = Box::into_raw(Box::new(FekitTriangulation(Arc::new(tri))));
        Ok(())
    })
}

/// Reads a mesh file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_import(path: *const c_char, out: *mut *mut FekitTriangulation) -> FekitStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tri = Triangulation::import(&path).map_err(lib)?;
        *out = Box::into_raw(Box::new(FekitTriangulation(Arc::new(tri))));
        Ok(())
    })
}

/// Writes a mesh file.
///
/// # Safety
/// `tri` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_export(tri: *const FekitTriangulation, path: *const c_char) -> FekitStatus {
    guard(|| {
        let tri = tri.as_ref().ok_or_else(|| null("triangulation"))?;
        let path = path_arg(path)?;
        tri.0.export(&path).map_err(lib)
    })
}

/// Cell count, or 0 for a null handle.
///
/// # Safety
/// `tri` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_num_cells(tri: *const FekitTriangulation) -> usize {
    tri.as_ref().map_or(0, |t| t.0.num_cells())
}

/// Vertex count, or 0 for a null handle.
///
/// # Safety
/// `tri` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_num_vertices(tri: *const FekitTriangulation) -> usize {
    tri.as_ref().map_or(0, |t| t.0.num_vertices())
}

/// Count of vertices, edges and faces below the cell dimension, or 0 for a
/// null handle.
///
/// # Safety
/// `tri` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_num_vefs(tri: *const FekitTriangulation) -> usize {
    tri.as_ref().map_or(0, |t| t.0.num_vefs())
}

/// # Safety
/// `tri` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fekit_triangulation_free(tri: *mut FekitTriangulation) {
    if !tri.is_null() {
        drop(Box::from_raw(tri));
    }
}

/// Manufactured solution selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FekitCase {
    Sine = 0,
    Polynomial = 1,
}

/// Poisson discretization selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FekitPoissonMethod {
    Continuous = 0,
    InteriorPenalty = 1,
}

/// Summary of a solved problem.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FekitReport {
    pub free_dofs: usize,
    pub fixed_dofs: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    /// Mean-free pressure L2 error; zero for Poisson.
    pub pressure_l2_error: f64,
    pub relative_residual: f64,
}

/// Solves a manufactured Poisson problem of order `order` on `tri`. A
/// non-positive `penalty` selects the default `10 (k+1)²`.
///
/// # Safety
/// `tri` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn fekit_poisson_solve(
    tri: *const FekitTriangulation,
    method: FekitPoissonMethod,
    order: usize,
    case: FekitCase,
    penalty: f64,
    out: *mut FekitReport,
) -> FekitStatus {
    guard(|| {
        let tri = tri.as_ref().ok_or_else(|| null("triangulation"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = tri.0.num_dims();
        let case = match case {
            FekitCase::Sine => PoissonCase::sine(d),
            FekitCase::Polynomial => PoissonCase::polynomial(d, order),
        };
        let method = match method {
            FekitPoissonMethod::Continuous => PoissonMethod::Cg,
            FekitPoissonMethod::InteriorPenalty => PoissonMethod::Dg {
                penalty: if penalty > 0.0 { penalty } else { default_penalty(order) },
                tau: 1.0,
            },
        };
        let problem = PoissonProblem::new(tri.0.clone(), method, order, case).map_err(lib)?;
        let run = problem.solve(None).map_err(lib)?;
        *out = FekitReport {
            free_dofs: problem.space.num_free_dofs(),
            fixed_dofs: problem.space.num_fixed_dofs(),
            l2_error: run.errors.l2,
            h1_error: run.errors.h1_semi,
            pressure_l2_error: 0.0,
            relative_residual: run.relative_residual,
        };
        Ok(())
    })
}

/// Solves a manufactured Stokes problem with `Q_{order+1}/Q_order` elements;
/// velocity errors are reported in `l2_error`/`h1_error`.
///
/// # Safety
/// `tri` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn fekit_stokes_solve(
    tri: *const FekitTriangulation,
    order: usize,
    case: FekitCase,
    out: *mut FekitReport,
) -> FekitStatus {
    guard(|| {
        let tri = tri.as_ref().ok_or_else(|| null("triangulation"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = tri.0.num_dims();
        let case = match case {
            FekitCase::Sine => StokesCase::sine(d),
            FekitCase::Polynomial => StokesCase::polynomial(d),
        }
        .map_err(lib)?;
        let problem = StokesProblem::new(tri.0.clone(), order, case, false).map_err(lib)?;
        let run = problem.solve().map_err(lib)?;
        *out = FekitReport {
            free_dofs: problem.space.num_free_dofs(),
            fixed_dofs: problem.space.num_fixed_dofs(),
            l2_error: run.velocity_errors.l2,
            h1_error: run.velocity_errors.h1_semi,
            pressure_l2_error: run.pressure_error,
            relative_residual: run.relative_residual,
        };
        Ok(())
    })
}
