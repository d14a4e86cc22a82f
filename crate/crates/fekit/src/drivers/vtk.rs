use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fe_space::{CellFEFunction, FEFunction, FESpace};
use crate::integration::{CellIntegrator, CellMap};
use crate::triangulation::Triangulation;

/// A field of an FE function to be written as point data.
pub struct VtkField<'a> {
    pub name: &'a str,
    pub space: &'a FESpace,
    pub function: &'a FEFunction,
    pub field: usize,
}

fn cell_type(tri: &Triangulation) -> Result<(u8, Vec<usize>)> {
    let p = tri.polytope();
    let d = p.num_dims();
    let lex: Vec<usize> = (0..p.num_vertices()).collect();
    let out = match (d, p.is_n_cube(), p.is_simplex()) {
        (1, _, _) => (3, lex),
        (2, true, _) => (9, vec![0, 1, 3, 2]),
        (2, _, true) => (5, lex),
        (3, true, _) => (12, vec![0, 1, 3, 2, 4, 5, 7, 6]),
        (3, _, true) => (10, lex),
        _ => return Err(Error::Unsupported("VTK output of this cell topology".into())),
    };
    Ok(out)
}

/// Writes a legacy ASCII unstructured grid with points duplicated per cell,
/// field values at the cell vertices and cell set ids.
pub fn write_vtk(tri: &Triangulation, fields: &[VtkField<'_>], path: &Path) -> Result<()> {
    let (vtk_type, order) = cell_type(tri)?;
    let polytope = tri.polytope();
    let nv = polytope.num_vertices();
    let ncells = tri.num_cells();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "fekit output")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", ncells * nv)?;
    for c in tri.cells() {
        let coords = tri.cell_coordinates(c);
        for &v in &order {
            let x = coords[v];
            writeln!(w, "{:e} {:e} {:e}", x[0], x[1], x[2])?;
        }
    }
    writeln!(w, "CELLS {} {}", ncells, ncells * (nv + 1))?;
    for c in 0..ncells {
        let ids: Vec<String> = (0..nv).map(|k| (c * nv + k).to_string()).collect();
        writeln!(w, "{nv} {}", ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {ncells}")?;
    for _ in 0..ncells {
        writeln!(w, "{vtk_type}")?;
    }
    writeln!(w, "CELL_DATA {ncells}")?;
    writeln!(w, "SCALARS cell_set int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for c in tri.cells() {
        writeln!(w, "{}", tri.cell_set_id(c))?;
    }
    if fields.is_empty() {
        w.flush()?;
        return Ok(());
    }
    writeln!(w, "POINT_DATA {}", ncells * nv)?;
    let vertices: Vec<Vec<f64>> = order.iter().map(|&v| polytope.vertex_coords(v)).collect();
    for field in fields {
        let mut cache: HashMap<usize, (CellMap, CellIntegrator)> = HashMap::new();
        let mut cf = CellFEFunction::default();
        let mut nodal = Vec::new();
        let mut values: Vec<[f64; 3]> = Vec::with_capacity(ncells * nv);
        let mut nc = 1;
        for c in tri.cells() {
            let fe = field.space.reference_fe(field.field, c);
            if fe.num_shape_functions() == 0 {
                values.extend(std::iter::repeat_n([0.0; 3], nv));
                continue;
            }
            nc = nc.max(fe.num_components());
            let k = field.space.reference_fe_index(field.field, c);
            let (map, integ) = match cache.entry(k) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let map = CellMap::new(polytope, &vertices, &vec![0.0; nv])?;
                    e.insert((map, CellIntegrator::at_points(fe, &vertices)?))
                }
            };
            map.update(&tri.cell_coordinates(c))?;
            integ.update(map)?;
            field.space.gather_nodal_values(field.function, c, field.field, &mut nodal)?;
            cf.update_from(&nodal, integ.physical());
            for p in 0..nv {
                let mut v = [0.0; 3];
                for (comp, x) in v.iter_mut().enumerate().take(fe.num_components()) {
                    *x = cf.value(comp, p);
                }
                values.push(v);
            }
        }
        if nc == 1 {
            writeln!(w, "SCALARS {} double 1", field.name)?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in &values {
                writeln!(w, "{:e}", v[0])?;
            }
        } else {
            writeln!(w, "VECTORS {} double", field.name)?;
            for v in &values {
                writeln!(w, "{:e} {:e} {:e}", v[0], v[1], v[2])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
