use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::error::Result;
use crate::fe_space::{CellFEFunction, FEFunction, FESpace};
use crate::integration::{CellIntegrator, CellMap};
use crate::reference_fe::Quadrature;
use crate::{Point, SPACE_DIM};

/// L2 and H1-seminorm of an error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Exact field used in error computations.
pub struct ExactField<'a> {
    /// Writes one value per component.
    pub value: &'a dyn Fn(&Point, &mut [f64]),
    /// Writes `∂u_c/∂x_j` at `c * SPACE_DIM + j`; `None` skips the H1 part.
    pub gradient: Option<&'a dyn Fn(&Point, &mut [f64])>,
}

/// Integrates `|u_h - u|²` and `|∇u_h - ∇u|²` over the mesh with a
/// quadrature of degree `degree` (default `2k + 2`). With `mean_adjust`
/// the L2 error is measured modulo constants.
pub fn compute_error_norms(
    space: &FESpace,
    function: &FEFunction,
    field: usize,
    exact: &ExactField<'_>,
    degree: Option<usize>,
    mean_adjust: bool,
) -> Result<ErrorNorms> {
    let sums = accumulate(space, function, field, exact, degree, 0.0)?;
    let sums = if mean_adjust && sums.vol > 0.0 {
        accumulate(space, function, field, exact, degree, sums.e1 / sums.vol)?
    } else {
        sums
    };
    Ok(ErrorNorms {
        l2: sums.e2.sqrt(),
        h1_semi: sums.g2.sqrt(),
    })
}

struct Sums {
    e2: f64,
    g2: f64,
    e1: f64,
    vol: f64,
}

/// Integrals of the error shifted by `shift`, its square and its gradient.
fn accumulate(
    space: &FESpace,
    function: &FEFunction,
    field: usize,
    exact: &ExactField<'_>,
    degree: Option<usize>,
    shift: f64,
) -> Result<Sums> {
    let tri = space.triangulation();
    let polytope = tri.polytope();
    let mut cache: HashMap<(usize, usize), (CellMap, CellIntegrator)> = HashMap::new();
    let mut cf = CellFEFunction::default();
    let mut nodal = Vec::new();
    let (mut e2, mut g2, mut e1, mut vol) = (0.0, 0.0, 0.0, 0.0);
    let mut val = [0.0; SPACE_DIM];
    let mut grad = [0.0; SPACE_DIM * SPACE_DIM];
    for cell in tri.cells() {
        let fe = space.reference_fe(field, cell);
        if fe.num_shape_functions() == 0 {
            continue;
        }
        let q = degree.unwrap_or(2 * fe.order() + 2);
        let key = (space.reference_fe_index(field, cell), q);
        let (map, integ) = match cache.entry(key) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let quad = Quadrature::for_polytope(polytope, q)?;
                e.insert((CellMap::for_quadrature(polytope, &quad)?, CellIntegrator::new(fe, &quad)?))
            }
        };
        map.update(&tri.cell_coordinates(cell))?;
        integ.update(map)?;
        space.gather_nodal_values(function, cell, field, &mut nodal)?;
        cf.update_from(&nodal, integ.physical());
        let nc = fe.num_components();
        let d = tri.num_dims();
        for p in 0..map.num_points() {
            let x = map.point(p);
            let w = map.measure(p);
            val.iter_mut().for_each(|v| *v = 0.0);
            (exact.value)(x, &mut val);
            for c in 0..nc {
                let e = cf.value(c, p) - val[c] - shift;
                e2 += w * e * e;
                e1 += w * e;
            }
            vol += w;
            if let Some(gf) = exact.gradient {
                grad.iter_mut().for_each(|v| *v = 0.0);
                gf(x, &mut grad);
                for c in 0..nc {
                    for j in 0..d {
                        let e = cf.gradient(c, j, p) - grad[c * SPACE_DIM + j];
                        g2 += w * e * e;
                    }
                }
            }
        }
    }
    Ok(Sums { e2, g2, e1, vol })
}
