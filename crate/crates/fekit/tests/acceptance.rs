//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured) with its measured value, tolerance and run time.

#![allow(clippy::type_complexity)]

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use fekit::drivers::{
    convergence, Driver, PoissonCase, PoissonMethod, PoissonProblem, StokesCase, StokesProblem,
};
use fekit::fe_space::{
    BlockLayout, ElementSpec, FEFunction, FESpace, FacetFEFunction, FieldDescription, InterpolationTarget,
};
use fekit::linalg::{Assemble, AffineOperator, DiscreteIntegration, LocalDofs, MatrixProperties};
use fekit::polytope::Polytope;
use fekit::reference_fe::{FeType, FieldType, Quadrature, ReferenceFE};
use fekit::triangulation::{StructuredMesh, Triangulation};
use fekit::{Point, Result};
use nalgebra::{DMatrix, DVector};

type Outcome = std::result::Result<String, String>;

fn criterion(id: usize, name: &str, limit_s: f64, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed().as_secs_f64();
    let (ok, detail) = match &outcome {
        Ok(d) if elapsed < limit_s => (true, d.clone()),
        Ok(d) => (false, format!("{d}; over the time limit")),
        Err(e) => (false, e.clone()),
    };
    let line = format!(
        "{} criterion {id}: {name}: {detail} [{elapsed:.2} s / {limit_s} s]",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(ok, "{line}");
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- meshes

/// Deterministic pseudo-random value in [-1, 1].
fn jitter(seed: usize, i: usize) -> f64 {
    (12.9898 * seed as f64 + 78.233 * i as f64).sin()
}

/// Grid of `n^d` cube cells on the unit box. Interior vertices are moved by
/// up to `perturb / n`; cell `c` lists its vertices through the hypercube
/// symmetry `sym(c) = (axis permutation, flip mask)`.
fn grid(d: usize, n: usize, perturb: f64, sym: impl Fn(usize) -> (Vec<usize>, usize)) -> Triangulation {
    let np = n + 1;
    let num_vertices = np.pow(d as u32);
    let coords: Vec<Point> = (0..num_vertices)
        .map(|id| {
            let mut x = [0.0; 3];
            let mut r = id;
            let mut interior = true;
            for xi in x.iter_mut().take(d) {
                let k = r % np;
                r /= np;
                interior &= k > 0 && k < n;
                *xi = k as f64 / n as f64;
            }
            if interior {
                for (i, xi) in x.iter_mut().enumerate().take(d) {
                    *xi += perturb / n as f64 * jitter(id, i);
                }
            }
            x
        })
        .collect();
    let mut cells = Vec::new();
    for c in 0..n.pow(d as u32) {
        let mut origin = vec![0; d];
        let mut r = c;
        for o in origin.iter_mut() {
            *o = r % n;
            r /= n;
        }
        let (perm, flip) = sym(c);
        let verts: Vec<usize> = (0..1usize << d)
            .map(|alpha| {
                let mut id = 0;
                let mut stride = 1;
                let mut beta = vec![0; d];
                for i in 0..d {
                    beta[perm[i]] = ((alpha >> i) & 1) ^ ((flip >> i) & 1);
                }
                for i in 0..d {
                    id += (origin[i] + beta[i]) * stride;
                    stride *= np;
                }
                id
            })
            .collect();
        cells.push(verts);
    }
    Triangulation::from_cells(&Polytope::n_cube(d).unwrap(), coords, cells, &[]).unwrap()
}

fn symmetric_grid(d: usize, n: usize, perturb: f64) -> Triangulation {
    let perms: Vec<Vec<usize>> = if d == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1], vec![0, 2, 1]]
    };
    grid(d, n, perturb, move |c| (perms[(c * 7 + 3) % perms.len()].clone(), (c * 5 + 1) % (1 << d)))
}

/// Unit square split into `2 n²` triangles listed in scrambled vertex order.
fn triangles(n: usize) -> Triangulation {
    let np = n + 1;
    let coords: Vec<Point> = (0..np * np)
        .map(|id| [(id % np) as f64 / n as f64, (id / np) as f64 / n as f64, 0.0])
        .collect();
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let v = |a: usize, b: usize| (i + a) + (j + b) * np;
            cells.push(vec![v(1, 1), v(0, 0), v(1, 0)]);
            cells.push(vec![v(0, 1), v(1, 1), v(0, 0)]);
        }
    }
    Triangulation::from_cells(&Polytope::n_simplex(2).unwrap(), coords, cells, &[]).unwrap()
}

/// Unit cube split into `6 n³` Kuhn tetrahedra listed in scrambled order.
fn tetrahedra(n: usize) -> Triangulation {
    let np = n + 1;
    let coords: Vec<Point> = (0..np * np * np)
        .map(|id| {
            [
                (id % np) as f64 / n as f64,
                (id / np % np) as f64 / n as f64,
                (id / (np * np)) as f64 / n as f64,
            ]
        })
        .collect();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for p in perms {
                    let mut x = [i, j, k];
                    let mut path = vec![x[0] + x[1] * np + x[2] * np * np];
                    for axis in p {
                        x[axis] += 1;
                        path.push(x[0] + x[1] * np + x[2] * np * np);
                    }
                    path.reverse();
                    path.swap(0, 2);
                    cells.push(path);
                }
            }
        }
    }
    Triangulation::from_cells(&Polytope::n_simplex(3).unwrap(), coords, cells, &[]).unwrap()
}

/// Two unit hexes sharing the face `x = 1`; the second one is listed through
/// a quarter turn about the x axis.
fn misoriented_hexes() -> Triangulation {
    let id = |i: usize, j: usize, k: usize| i + 3 * j + 6 * k;
    let coords: Vec<Point> = (0..12).map(|v| [(v % 3) as f64, (v / 3 % 2) as f64, (v / 6) as f64]).collect();
    let a: Vec<usize> = (0..8).map(|n| id(n & 1, (n >> 1) & 1, (n >> 2) & 1)).collect();
    let b: Vec<usize> = (0..8)
        .map(|n| {
            let (x, y, z) = (n & 1, (n >> 1) & 1, (n >> 2) & 1);
            id(1 + x, 1 - z, y)
        })
        .collect();
    Triangulation::from_cells(&Polytope::n_cube(3).unwrap(), coords, vec![a, b], &[]).unwrap()
}

fn via_file(t: &Triangulation) -> Triangulation {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.txt");
    t.export(&path).unwrap();
    Triangulation::import(&path).unwrap()
}

fn numbered(t: Triangulation, spec: ElementSpec) -> FESpace {
    let mut s = FESpace::new(Arc::new(t), &[FieldDescription::uniform(spec)], Vec::new()).unwrap();
    s.generate_global_dof_numbering(&BlockLayout::monolithic(1)).unwrap();
    s
}

// ------------------------------------------------------------ criterion 1

/// Faces of a convex polytope as vertex sets: facets are maximal vertex sets
/// on a supporting hyperplane, faces are their intersections.
fn face_oracle(vertices: &[Vec<f64>]) -> BTreeSet<Vec<usize>> {
    let d = vertices[0].len();
    let nv = vertices.len();
    let mut facets: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut subset = vec![0usize; d];
    fn next(subset: &mut [usize], nv: usize) -> bool {
        let d = subset.len();
        let mut i = d;
        while i > 0 {
            i -= 1;
            if subset[i] < nv - d + i {
                subset[i] += 1;
                for j in i + 1..d {
                    subset[j] = subset[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, s) in subset.iter_mut().enumerate() {
        *s = i;
    }
    loop {
        // hyperplane through the d points: normal spans the null space of the differences
        let m = DMatrix::from_fn(d - 1, d, |r, c| vertices[subset[r + 1]][c] - vertices[subset[0]][c]);
        let normal = if d == 1 {
            Some(DVector::from_element(1, 1.0))
        } else {
            let svd = m.clone().transpose().svd(true, false);
            let u = svd.u.unwrap();
            let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9).count();
            (rank == d - 1).then(|| {
                let mut full = DMatrix::<f64>::zeros(d, d);
                full.view_mut((0, 0), (d, u.ncols())).copy_from(&u);
                let mut n = DVector::from_fn(d, |i, _| (i as f64 + 1.3).sin());
                for k in 0..u.ncols() {
                    let col = u.column(k);
                    n -= col * col.dot(&n);
                }
                n.normalize()
            })
        };
        if let Some(n) = normal {
            let h = |v: &Vec<f64>| (0..d).map(|i| n[i] * (v[i] - vertices[subset[0]][i])).sum::<f64>();
            let vals: Vec<f64> = vertices.iter().map(h).collect();
            let pos = vals.iter().any(|&x| x > 1e-9);
            let neg = vals.iter().any(|&x| x < -1e-9);
            if !(pos && neg) {
                facets.insert((0..nv).filter(|&v| vals[v].abs() <= 1e-9).collect());
            }
        }
        if !next(&mut subset, nv) {
            break;
        }
    }
    let mut faces: BTreeSet<Vec<usize>> = facets.clone();
    faces.insert((0..nv).collect());
    loop {
        let list: Vec<Vec<usize>> = faces.iter().cloned().collect();
        let before = faces.len();
        for a in &list {
            for b in &facets {
                let i: Vec<usize> = a.iter().copied().filter(|x| b.contains(x)).collect();
                if !i.is_empty() {
                    faces.insert(i);
                }
            }
        }
        if faces.len() == before {
            break;
        }
    }
    faces
}

#[test]
fn criterion_1_polytope_combinatorics() {
    criterion(1, "polytope n-face counts vs face-lattice oracle", 1.0, || {
        let cases = [
            ("quad", 2, u32::MAX, 9),
            ("hex", 3, u32::MAX, 27),
            ("tet", 3, 0, 15),
            ("prism", 3, 0b100, 21),
            ("pyramid", 3, 0b011, 19),
            ("4-cube", 4, u32::MAX, 81),
            ("4-simplex", 4, 0, 31),
        ];
        let mut counts = Vec::new();
        for (name, d, t, expected) in cases {
            let p = lib(Polytope::new(d, t))?;
            let verts: Vec<Vec<f64>> = (0..p.num_vertices()).map(|v| p.vertex_coords(v)).collect();
            let oracle = face_oracle(&verts);
            let ours: BTreeSet<Vec<usize>> = (0..p.num_n_faces())
                .map(|i| {
                    let mut v = p.n_face_vertices(i).to_vec();
                    v.sort_unstable();
                    v
                })
                .collect();
            check(p.num_n_faces() == expected && oracle.len() == expected && ours == oracle, || {
                format!("{name}: {} n-faces, oracle {}, expected {expected}", p.num_n_faces(), oracle.len())
            })?;
            counts.push(format!("{name} {expected}"));
        }
        let quad = lib(Polytope::n_cube(2))?;
        let ptr: Vec<usize> = quad.ptr_n_faces_x_dim().iter().map(|p| p + 1).collect();
        check(ptr.starts_with(&[1, 5, 9, 10]), || format!("quad ptr (1-based) {ptr:?}"))?;
        Ok(format!("{}; quad ptr {:?}", counts.join(", "), &ptr[..4]))
    });
}

// ------------------------------------------------------------ criterion 2

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn multi_indices(d: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..=max).map(move |k| {
                    let mut b = a.clone();
                    b.push(k);
                    b
                })
            })
            .collect();
    }
    out
}

fn integrate_monomial(q: &Quadrature, alpha: &[usize]) -> f64 {
    q.points()
        .iter()
        .zip(q.weights())
        .map(|(p, w)| w * p.iter().zip(alpha).map(|(x, &a)| x.powi(a as i32)).product::<f64>())
        .sum()
}

#[test]
fn criterion_2_quadrature_exactness() {
    criterion(2, "Gauss tensor and Duffy rule exactness", 1.0, || {
        let mut worst_cube: f64 = 0.0;
        for d in 1..=3 {
            for n in 1..=(if d == 3 { 6 } else { 10 }) {
                let q = Quadrature::n_cube(d, 2 * n - 1);
                check(q.num_points() == n.pow(d as u32), || format!("cube d={d} n={n}: {} points", q.num_points()))?;
                for alpha in multi_indices(d, 2 * n - 1) {
                    let exact: f64 = alpha.iter().map(|&a| 1.0 / (a as f64 + 1.0)).product();
                    worst_cube = worst_cube.max((integrate_monomial(&q, &alpha) - exact).abs());
                }
            }
        }
        check(worst_cube <= 1e-13, || format!("tensor Gauss error {worst_cube:e}"))?;
        let mut worst_simplex: f64 = 0.0;
        for d in 2..=3 {
            for p in 0..=4 {
                let q = Quadrature::n_simplex(d, 2 * p);
                let n = p + d.div_ceil(2);
                check(q.num_points() == n.pow(d as u32), || format!("simplex d={d} p={p}: {} points", q.num_points()))?;
                for alpha in multi_indices(d, 2 * p).into_iter().filter(|a| a.iter().sum::<usize>() <= 2 * p) {
                    let exact = alpha.iter().map(|&a| factorial(a)).product::<f64>()
                        / factorial(alpha.iter().sum::<usize>() + d);
                    worst_simplex = worst_simplex.max((integrate_monomial(&q, &alpha) - exact).abs());
                }
            }
        }
        check(worst_simplex <= 1e-13, || format!("Duffy error {worst_simplex:e}"))?;
        Ok(format!("max error tensor {worst_cube:.1e}, Duffy {worst_simplex:.1e} (tol 1e-13)"))
    });
}

// ------------------------------------------------------------ criterion 3

#[test]
fn criterion_3_reference_fe_duality() {
    criterion(3, "reference FE duality", 5.0, || {
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for d in 1..=3 {
            for p in [lib(Polytope::n_cube(d))?, lib(Polytope::n_simplex(d))?] {
                for k in 1..=3 {
                    for ft in [FieldType::Scalar, FieldType::Vector] {
                        let fe = lib(ReferenceFE::new(&p, FeType::Lagrangian, k, ft, true))?;
                        let m = lib(fe.moment_matrix())?;
                        worst = worst.max((m - DMatrix::identity(fe.num_shape_functions(), fe.num_shape_functions())).abs().max());
                        count += 1;
                    }
                }
            }
        }
        for d in 2..=3 {
            let p = lib(Polytope::n_cube(d))?;
            for k in 0..=2 {
                let fe = lib(ReferenceFE::new(&p, FeType::RaviartThomas, k, FieldType::Vector, true))?;
                let n = fe.num_shape_functions();
                let expected = d * (k + 1).pow(d as u32 - 1) * (k + 2);
                check(n == expected, || format!("RT d={d} k={k}: {n} functions, expected {expected}"))?;
                let m = lib(fe.moment_matrix())?;
                worst = worst.max((m - DMatrix::identity(n, n)).abs().max());
                count += 1;
            }
        }
        check(worst <= 1e-10, || format!("max |σ_a(φ^b) - δ_ab| = {worst:e}"))?;
        Ok(format!("{count} elements, max |σ_a(φ^b) - δ_ab| = {worst:.1e} (tol 1e-10)"))
    });
}

// ------------------------------------------------------------ criterion 4

/// Checks that two local DOFs share a global id iff their nodes (and
/// components) coincide.
fn classes_match_coordinates(space: &mut FESpace) -> std::result::Result<usize, String> {
    let tri = space.triangulation().clone();
    let mut by_id: HashMap<i64, (Point, usize)> = HashMap::new();
    for c in tri.cells() {
        let x = lib(space.dof_coordinates(0, c))?;
        let fe = space.reference_fe(0, c).clone();
        let ids = space.cell_dofs(0, c).to_vec();
        for (l, &id) in ids.iter().enumerate() {
            let key = (x[l], fe.shape_component(l));
            match by_id.get(&id) {
                Some(&(y, comp)) => {
                    let dist = (0..3).map(|i| (y[i] - key.0[i]).abs()).fold(0.0, f64::max);
                    check(dist < 1e-10 && comp == key.1, || format!("id {id} joins distinct nodes at distance {dist:e}"))?;
                }
                None => {
                    by_id.insert(id, key);
                }
            }
        }
    }
    let mut nodes: Vec<(Point, usize)> = by_id.values().copied().collect();
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[j].0[0] - nodes[i].0[0] > 1e-10 {
                break;
            }
            let dist = (0..3).map(|k| (nodes[i].0[k] - nodes[j].0[k]).abs()).fold(0.0, f64::max);
            check(dist >= 1e-10 || nodes[i].1 != nodes[j].1, || "one node carries two ids".to_string())?;
        }
    }
    check(by_id.len() == space.num_free_dofs(), || "ids are not dense".into())?;
    Ok(by_id.len())
}

#[test]
fn criterion_4_dof_numbering_oracle() {
    criterion(4, "DOF numbering vs coordinate matching", 5.0, || {
        let meshes: Vec<(&str, Triangulation)> = vec![
            ("structured 5x4", lib(Triangulation::structured(&StructuredMesh::unit(&[5, 4])))?),
            ("structured 3x2x2", lib(Triangulation::structured(&StructuredMesh::unit(&[3, 2, 2])))?),
            ("imported rotated quads 6x6", via_file(&symmetric_grid(2, 6, 0.2))),
            ("imported rotated hexes 3x3x3", via_file(&symmetric_grid(3, 3, 0.15))),
            ("imported misoriented hex pair", via_file(&misoriented_hexes())),
            ("imported triangles 5x5", via_file(&triangles(5))),
            ("imported tetrahedra 2x2x2", via_file(&tetrahedra(2))),
        ];
        let mut checked = 0;
        for (name, mesh) in &meshes {
            check(mesh.num_cells() <= 100, || format!("{name} has too many cells"))?;
            for k in 1..=3 {
                for ft in [FieldType::Scalar, FieldType::Vector] {
                    if ft == FieldType::Vector && k > 2 {
                        continue;
                    }
                    let mut s = numbered(mesh.clone(), ElementSpec::lagrangian(k, ft));
                    classes_match_coordinates(&mut s).map_err(|e| format!("{name} k={k}: {e}"))?;
                    let dg = numbered(mesh.clone(), ElementSpec::discontinuous(k, ft));
                    let per_cell: usize = mesh.cells().map(|c| dg.reference_fe(0, c).num_shape_functions()).sum();
                    check(dg.num_free_dofs() == per_cell, || format!("{name} DG k={k}: {} vs {per_cell}", dg.num_free_dofs()))?;
                    checked += 1;
                }
            }
        }
        let full = fekit::fe_space::Condition {
            field: 0,
            set: 1,
            mask: vec![true],
            function: Arc::new(|_: &Point, v: &mut [f64]| v[0] = 0.0),
        };
        let mut s = lib(FESpace::new(
            Arc::new(lib(Triangulation::structured(&StructuredMesh::unit(&[4, 4])))?),
            &[FieldDescription::uniform(ElementSpec::lagrangian(1, FieldType::Scalar))],
            vec![full],
        ))?;
        lib(s.generate_global_dof_numbering(&BlockLayout::monolithic(1)))?;
        check(s.num_free_dofs() == 9 && s.num_fixed_dofs() == 16, || {
            format!("4x4 Q1 Dirichlet: {} free / {} fixed", s.num_free_dofs(), s.num_fixed_dofs())
        })?;
        Ok(format!("{checked} space/mesh pairs over {} meshes; 4x4 Q1 Dirichlet 9 free / 16 fixed", meshes.len()))
    });
}

// ------------------------------------------------------------ criterion 5

/// Largest distance between matched facet quadrature points of the two sides
/// and the number of interior facets with a non-identity permutation.
fn facet_mismatch(mesh: Triangulation) -> std::result::Result<(f64, usize, usize), String> {
    let mut s = numbered(mesh, ElementSpec::discontinuous(1, FieldType::Scalar));
    lib(s.setup_facet_integration(None))?;
    let mut ws = lib(s.facet_workspace())?;
    let (mut worst, mut nonidentity, mut interior) = (0.0f64, 0, 0);
    for i in 0..s.num_facets() {
        lib(ws.update(&s, i))?;
        let maps = ws.facet_maps(&s);
        if !maps.is_interior() {
            continue;
        }
        interior += 1;
        if lib(s.facet_info(i))?.1 != 0 {
            nonidentity += 1;
        }
        for gp in 0..maps.num_points() {
            let a = maps.side_map(0).point(gp);
            let b = maps.side_map(1).point(maps.side_point_index(1, gp));
            worst = worst.max((0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max));
        }
    }
    Ok((worst, nonidentity, interior))
}

#[test]
fn criterion_5_facet_permutation() {
    criterion(5, "facet quadrature permutation", 1.0, || {
        let mut worst: f64 = 0.0;
        let mut lines = Vec::new();
        for (name, mesh) in [
            ("misoriented hex pair", misoriented_hexes()),
            ("reversed-edge quads", symmetric_grid(2, 4, 0.2)),
            ("rotated hexes", symmetric_grid(3, 2, 0.1)),
        ] {
            let (w, nonid, interior) = facet_mismatch(mesh)?;
            check(nonid > 0, || format!("{name}: no non-identity permutation exercised"))?;
            worst = worst.max(w);
            lines.push(format!("{name} {nonid}/{interior} permuted"));
        }
        for (name, mesh) in [("triangles", triangles(3)), ("tetrahedra", tetrahedra(2))] {
            let (w, nonid, _) = facet_mismatch(mesh)?;
            check(nonid == 0, || format!("{name}: {nonid} non-identity permutations after reorientation"))?;
            worst = worst.max(w);
        }
        check(worst <= 1e-10, || format!("max coordinate mismatch {worst:e}"))?;
        Ok(format!("{}; simplices identity; max mismatch {worst:.1e} (tol 1e-10)", lines.join(", ")))
    });
}

// ------------------------------------------------------------ criterion 6

/// Dense assembly over all DOFs (free and fixed) followed by elimination.
struct DenseOracle {
    offsets: Vec<usize>,
    num_free: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl DenseOracle {
    fn new(space: &FESpace) -> Self {
        let n = space.num_free_dofs() + space.num_fixed_dofs();
        Self {
            offsets: space.block_offsets(),
            num_free: space.num_free_dofs(),
            a: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
        }
    }

    fn index(&self, dofs: &LocalDofs, l: usize) -> usize {
        let id = dofs.ids[l];
        if id > 0 {
            self.offsets[dofs.blocks[l]] + (id - 1) as usize
        } else {
            self.num_free + (-id - 1) as usize
        }
    }

    fn eliminate(&self, fixed: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let nf = self.num_free;
        let nd = fixed.len();
        let aff = self.a.view((0, 0), (nf, nf)).into_owned();
        let afd = self.a.view((0, nf), (nf, nd));
        let rhs = self.b.rows(0, nf) - afd * DVector::from_column_slice(fixed);
        (aff, rhs)
    }
}

impl Assemble for DenseOracle {
    fn assemble_cell(&mut self, elmat: &DMatrix<f64>, elvec: &[f64], dofs: &LocalDofs, _: &[f64]) -> Result<()> {
        for r in 0..dofs.len() {
            let gr = self.index(dofs, r);
            self.b[gr] += dofs.signs[r] * elvec[r];
            for c in 0..dofs.len() {
                let gc = self.index(dofs, c);
                self.a[(gr, gc)] += dofs.signs[r] * dofs.signs[c] * elmat[(r, c)];
            }
        }
        Ok(())
    }
}

fn oracle_difference(
    space: &FESpace,
    integration: &dyn DiscreteIntegration,
    props: MatrixProperties,
) -> std::result::Result<(f64, DMatrix<f64>), String> {
    let mut oracle = DenseOracle::new(space);
    lib(integration.integrate(space, &mut oracle))?;
    let (a, b) = oracle.eliminate(integration.fixed_values());
    let mut op = AffineOperator::new(integration, props);
    lib(op.numerical_setup(space))?;
    let (m, f) = lib(op.system())?;
    let dense = lib(m.to_dense())?;
    let da = (dense.clone() - a).abs().max();
    let db = (DVector::from_vec(f) - b).abs().max();
    Ok((da.max(db), dense))
}

#[test]
fn criterion_6_assembly_oracle() {
    criterion(6, "assembler vs dense brute-force assembly", 10.0, || {
        let mut worst: f64 = 0.0;
        let mut runs = 0;
        let quads = || Arc::new(symmetric_grid(2, 4, 0.2));
        for (mesh, k) in [
            (quads(), 2),
            (Arc::new(lib(Triangulation::structured(&StructuredMesh::unit(&[8, 8])))?), 1),
            (Arc::new(symmetric_grid(3, 2, 0.1)), 2),
            (Arc::new(triangles(4)), 3),
        ] {
            check(mesh.num_cells() <= 64, || "mesh too large".into())?;
            let d = mesh.num_dims();
            for method in [PoissonMethod::Cg, PoissonMethod::sipg(k)] {
                let p = lib(PoissonProblem::new(mesh.clone(), method, k, PoissonCase::sine(d)))?;
                let (diff, _) = oracle_difference(&p.space, &p.integration, p.properties())?;
                worst = worst.max(diff);
                runs += 1;
            }
        }
        let mut mono = None;
        for blocks in [false, true] {
            let p = lib(StokesProblem::new(quads(), 1, lib(StokesCase::sine(2))?, blocks))?;
            let (diff, dense) = oracle_difference(&p.space, &p.integration, MatrixProperties::SYMMETRIC_INDEFINITE)?;
            worst = worst.max(diff);
            runs += 1;
            let asym = (dense.clone() - dense.transpose()).abs().max();
            check(asym <= 1e-13, || format!("Stokes asymmetry {asym:e}"))?;
            match &mono {
                None => mono = Some(dense),
                Some(m) => {
                    let same = (m.clone() - dense).abs().max();
                    check(same <= 1e-12, || format!("2-block Stokes differs from monolithic by {same:e}"))?;
                }
            }
        }
        check(worst <= 1e-12, || format!("max entrywise difference {worst:e}"))?;
        Ok(format!("{runs} systems (CG, SIPG, Stokes 1 and 2 blocks), max difference {worst:.1e} (tol 1e-12)"))
    });
}

// ------------------------------------------------------------ criterion 7

#[test]
fn criterion_7_convergence() {
    criterion(7, "observed convergence orders", 120.0, || {
        let orders = |rows: &[fekit::drivers::ConvergenceRow], h1: bool| -> Vec<f64> {
            rows.iter().filter_map(|r| if h1 { r.h1_order } else { r.l2_order }).collect()
        };
        let mut summary = Vec::new();
        let studies: [(&str, Driver, usize, usize, usize, bool, f64, f64); 4] = [
            ("CG Q1 L2", Driver::PoissonCg, 1, 8, 4, false, 2.0, 0.1),
            ("CG Q2 L2", Driver::PoissonCg, 2, 8, 4, false, 3.0, 0.1),
            ("SIPG k=1 L2", Driver::PoissonDg { penalty: None, tau: 1.0 }, 1, 8, 4, false, 2.0, 0.15),
            ("Taylor-Hood velocity H1", Driver::Stokes, 1, 4, 3, true, 2.0, 0.15),
        ];
        for (name, driver, k, coarsest, levels, h1, target, tol) in studies {
            let rows = lib(convergence(driver, k, 2, coarsest, levels))?;
            check(rows.last().unwrap().cells_per_dim == coarsest << (levels - 1), || "finest level".into())?;
            let o = orders(&rows, h1);
            check(o.iter().all(|x| (x - target).abs() <= tol), || format!("{name}: orders {o:?}, expected {target} ± {tol}"))?;
            summary.push(format!("{name} {:.3}", o.last().unwrap()));
        }
        Ok(summary.join(", "))
    });
}

// ------------------------------------------------------------ criterion 8

/// `|∫_K ∇·φ dx - ∫_∂K φ·n ds|` over the shape functions of a vector FE on
/// one distorted cell.
fn divergence_identity(coords: Vec<Point>, spec: ElementSpec) -> std::result::Result<f64, String> {
    let d = if coords.len() == 4 { 2 } else { 3 };
    let p = lib(Polytope::n_cube(d))?;
    let tri = lib(Triangulation::from_cells(&p, coords, vec![(0..1 << d).collect()], &[]))?;
    let mut s = numbered(tri, spec);
    lib(s.setup_cell_integration(Some(&|_| 10)))?;
    lib(s.setup_facet_integration(Some(&|_| 10)))?;
    let mut cw = lib(s.cell_workspace())?;
    lib(cw.update(&s, 0))?;
    let shapes = cw.shapes(&s, 0).unwrap();
    let map = cw.cell_map();
    let n = shapes.n_functions;
    let mut balance: Vec<f64> = (0..n)
        .map(|f| (0..shapes.n_points).map(|q| map.measure(q) * shapes.divergence(f, q)).sum())
        .collect();
    let mut fw = lib(s.facet_workspace())?;
    for i in 0..s.num_facets() {
        lib(fw.update(&s, i))?;
        let maps = fw.facet_maps(&s);
        let fs = fw.shapes(&s, 0, 0).unwrap();
        for (f, b) in balance.iter_mut().enumerate() {
            for gp in 0..maps.num_points() {
                let nrm = maps.normal(gp);
                *b -= maps.measure(gp) * (0..d).map(|c| fs.value(c, f, gp) * nrm[c]).sum::<f64>();
            }
        }
    }
    Ok(balance.iter().fold(0.0, |m, x| m.max(x.abs())))
}

#[test]
fn criterion_8_exact_reproduction() {
    criterion(8, "exact reproduction and divergence identity", 10.0, || {
        let mut worst: f64 = 0.0;
        let mut runs = 0;
        for (mesh, ks) in [
            (Arc::new(symmetric_grid(2, 4, 0.2)), 1..=3),
            (Arc::new(triangles(3)), 1..=3),
            (Arc::new(symmetric_grid(3, 2, 0.1)), 1..=2),
            (Arc::new(tetrahedra(1)), 1..=2),
        ] {
            let d = mesh.num_dims();
            for k in ks {
                for method in [PoissonMethod::Cg, PoissonMethod::sipg(k)] {
                    let p = lib(PoissonProblem::new(mesh.clone(), method, k, PoissonCase::polynomial(d, k)))?;
                    let run = lib(p.solve(None))?;
                    check(run.errors.l2 <= 1e-9, || format!("Poisson {method:?} d={d} k={k}: L2 {:e}", run.errors.l2))?;
                    worst = worst.max(run.errors.l2);
                    runs += 1;
                }
            }
        }
        for (mesh, k) in [(Arc::new(symmetric_grid(2, 3, 0.2)), 1), (Arc::new(symmetric_grid(2, 2, 0.0)), 2), (Arc::new(symmetric_grid(3, 2, 0.0)), 1)] {
            let d = mesh.num_dims();
            let p = lib(StokesProblem::new(mesh, k, lib(StokesCase::polynomial(d))?, false))?;
            let run = lib(p.solve())?;
            let e = run.velocity_errors.l2.max(run.pressure_error);
            check(e <= 1e-9, || format!("Stokes d={d} k={k}: velocity {:e}, pressure {:e}", run.velocity_errors.l2, run.pressure_error))?;
            worst = worst.max(e);
            runs += 1;
        }
        let quad = vec![[0.0, 0.0, 0.0], [1.2, 0.1, 0.0], [-0.1, 0.9, 0.0], [1.3, 1.4, 0.0]];
        let hex: Vec<Point> = (0..8)
            .map(|v| {
                let x = [(v & 1) as f64, ((v >> 1) & 1) as f64, ((v >> 2) & 1) as f64];
                [x[0] + 0.1 * jitter(v, 0), x[1] + 0.1 * jitter(v, 1), x[2] + 0.1 * jitter(v, 2)]
            })
            .collect();
        let mut div: f64 = 0.0;
        for (coords, spec) in [
            (quad.clone(), ElementSpec::discontinuous(2, FieldType::Vector)),
            (quad, ElementSpec::raviart_thomas(1)),
            (hex.clone(), ElementSpec::discontinuous(2, FieldType::Vector)),
            (hex, ElementSpec::raviart_thomas(1)),
        ] {
            div = div.max(divergence_identity(coords, spec)?);
        }
        check(div <= 1e-12, || format!("divergence identity defect {div:e}"))?;
        Ok(format!("{runs} solves, max L2 error {worst:.1e} (tol 1e-9); divergence identity {div:.1e} (tol 1e-12)"))
    });
}

// ------------------------------------------------------------ criterion 9

fn rt_jump(mesh: Triangulation, k: usize) -> std::result::Result<(f64, f64), String> {
    let mut s = lib(FESpace::new(Arc::new(mesh), &[FieldDescription::uniform(ElementSpec::raviart_thomas(k))], Vec::new()))?;
    lib(s.generate_global_dof_numbering(&BlockLayout::monolithic(1)))?;
    let mut u: FEFunction = lib(s.create_fe_function())?;
    let field = |x: &Point, v: &mut [f64]| {
        v[0] = (x[0] + 2.0 * x[1]).sin() + x[0] * x[1];
        v[1] = (3.0 * x[0] - x[1]).cos();
    };
    lib(s.interpolate(0, &field, &mut u, InterpolationTarget::Free))?;
    lib(s.setup_facet_integration(None))?;
    let mut ws = lib(s.facet_workspace())?;
    let mut ff = FacetFEFunction::default();
    let (mut jump, mut scale) = (0.0f64, 0.0f64);
    for i in 0..s.num_facets() {
        lib(ws.update(&s, i))?;
        let maps = ws.facet_maps(&s);
        if !maps.is_interior() {
            continue;
        }
        lib(ff.update(&s, &u, &ws, i, 0))?;
        for gp in 0..maps.num_points() {
            let n = maps.normal(gp);
            let side = |sd: usize| (0..2).map(|c| ff.sides[sd].value(c, gp) * n[c]).sum::<f64>();
            jump = jump.max((side(0) - side(1)).abs());
            scale = scale.max(side(0).abs());
        }
    }
    Ok((jump, scale))
}

#[test]
fn criterion_9_rt_conformity() {
    criterion(9, "Raviart-Thomas normal-trace continuity", 2.0, || {
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for k in 0..=1 {
            for (name, mesh) in [
                ("structured", lib(Triangulation::structured(&StructuredMesh::unit(&[4, 4])))?),
                ("rotated/reflected", symmetric_grid(2, 4, 0.0)),
                ("distorted", symmetric_grid(2, 4, 0.2)),
            ] {
                let (jump, scale) = rt_jump(mesh, k)?;
                check(scale > 0.1, || "normal traces vanish".into())?;
                worst = worst.max(jump);
                parts.push(format!("RT{k} {name} {jump:.1e}"));
            }
        }
        check(worst <= 1e-12, || format!("max normal jump {worst:e}: {}", parts.join(", ")))?;
        Ok(format!("max normal-trace jump {worst:.1e} on 4x4 meshes (tol 1e-12)"))
    });
}

