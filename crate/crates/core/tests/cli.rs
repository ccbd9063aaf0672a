use std::process::Command;

use xls_topopt::mesh::{build_structured_mesh, MeshSpec};
use xls_topopt::output::{read_vtk, write_vtk, xls_from_vtk, PointArray};

fn xlsopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xlsopt"))
}

#[test]
fn presets_are_listed() {
    let out = xlsopt().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 30);
    assert!(text.lines().any(|l| l.starts_with("case17")));
}

#[test]
fn verify_passes_and_usage_errors_exit_one() {
    let out = xlsopt().args(["verify", "--samples", "300", "--seed", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().lines().all(|l| l.starts_with("PASS")));
    assert_eq!(xlsopt().args(["run", "case2", "--bogus"]).output().unwrap().status.code(), Some(1));
    assert_eq!(xlsopt().args(["run", "no_such_problem"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn unconverged_run_exits_two_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = xlsopt()
        .args(["run", "case1", "--quiet", "--max-iters", "4", "--snapshot-every", "2", "--override", "mesh.resolution=[40,20]"])
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["history.csv", "final.vtk", "final.ppm", "snapshot_00000.vtk", "snapshot_00002.vtk"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 5);
    let x = xls_from_vtk(&read_vtk(&dir.path().join("final.vtk")).unwrap()).unwrap();
    assert_eq!(x.phases(), 2);
}

#[test]
fn pcls_snapshot_converts_to_xls() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = build_structured_mesh(&MeshSpec { lengths: vec![1.0, 1.0], resolution: vec![3, 3], char_length: None }).unwrap();
    let values: Vec<f64> = (0..mesh.n_nodes()).map(|n| (n % 3) as f64).collect();
    let input = dir.path().join("legacy.vtk");
    let output = dir.path().join("xls.vtk");
    write_vtk(&mesh, &[PointArray::scalar("pcls", values.clone())], &input).unwrap();
    let status = xlsopt().args(["convert", "--kind", "pcls", "--phases", "3"]).arg(&input).arg(&output).status().unwrap();
    assert!(status.success());
    let data = read_vtk(&output).unwrap();
    let x = xls_from_vtk(&data).unwrap();
    assert_eq!(x.phases(), 3);
    match data.array("phase") {
        Some(PointArray::Integer { values: phase, .. }) => {
            assert_eq!(phase, &values.iter().map(|v| *v as i64).collect::<Vec<_>>());
        }
        other => panic!("phase array missing: {other:?}"),
    }
    let bad = xlsopt().args(["convert", "--kind", "mmls"]).arg(&input).arg(&output).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("mmls"));
}
