use std::process::Command;

fn fekit(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fekit")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn imported_mesh_matches_structured_run() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("out.msh");
    let (code, out, _) = fekit(&["mesh", "--cells", "2,2", "-o", mesh.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "cells"), "4");
    let (_, structured, _) = fekit(&["poisson", "--cells", "2,2"]);
    let (code, imported, _) = fekit(&["poisson", "--mesh", mesh.to_str().unwrap()]);
    assert_eq!(code, 0);
    for key in ["free_dofs", "fixed_dofs", "l2_error"] {
        assert_eq!(value(&structured, key), value(&imported, key));
    }
}

#[test]
fn convergence_table_reports_orders() {
    let (code, out, _) = fekit(&["convergence", "--driver", "poisson-cg", "--order", "1", "--levels", "3"]);
    assert_eq!(code, 0);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    let order: f64 = rows[2][4].parse().unwrap();
    assert!((order - 2.0).abs() < 0.1, "{out}");
}

#[test]
fn stokes_and_dg_runs() {
    let (code, out, _) = fekit(&["stokes", "--cells", "4", "--case", "polynomial", "--blocks"]);
    assert_eq!(code, 0);
    assert!(value(&out, "velocity_l2_error").parse::<f64>().unwrap() < 1e-9);
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("u.vtk");
    let (code, out, _) = fekit(&["poisson", "--method", "dg", "--order", "2", "--cells", "3", "--vtk", vtk.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "free_dofs"), "81");
    assert!(std::fs::read_to_string(vtk).unwrap().starts_with("# vtk DataFile"));
}

#[test]
fn bad_arguments_fail() {
    let (code, _, err) = fekit(&["poisson", "--bogus"]);
    assert_ne!(code, 0);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, err) = fekit(&["poisson", "--case", "nope"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    let (code, _, _) = fekit(&["mesh", "--cells", "0", "-o", "/nonexistent/x"]);
    assert_eq!(code, 1);
}
