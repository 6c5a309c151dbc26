use std::path::Path;
use std::process::{Command, Output};

fn glvortex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glvortex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn minimize_finds_four_vortices() {
    let o = glvortex(&["minimize", "--icosphere", "5", "--rank", "2", "--seeds", "5", "--max-iters", "400"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("with 4 vortices"), "{text}");
    let rows: Vec<&str> = text.lines().filter(|l| l.contains("tetrahedron")).collect();
    assert_eq!(rows.len(), 5, "{text}");
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = glvortex(&["minimize", "--icosphere", "3", "--seeds", "2", "--seed", "7", "--out", path(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["convergence.csv", "runs.csv", "section.json", "vortices.json", "minimize.ply"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(!x.is_empty() && x == y, "{f} differs");
    }
    let header = std::fs::read_to_string(a.join("convergence.csv")).unwrap();
    assert!(header.starts_with("stream,stage,iter,energy,gradnorm\n"));
}

#[test]
fn minimize_validation_errors() {
    let o = glvortex(&["minimize", "--mesh", "/no/such/mesh.obj"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/mesh.obj"));
    let o = glvortex(&["minimize", "--rank", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rank"));
    let o = glvortex(&["minimize", "--icosphere", "2", "--epsilon", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn renorm_reference_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = glvortex(&["renorm", "--d", "4", "--seeds", "20", "--tol", "1e-3", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("tetrahedron"));
    let csv = std::fs::read_to_string(dir.path().join("renorm.csv")).unwrap();
    assert!(csv.starts_with("seed,value,distance,iterations"));
    assert_eq!(csv.lines().count(), 21);
    let best: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("best.json")).unwrap()).unwrap();
    assert_eq!(best["points"].as_array().unwrap().len(), 4);

    let o = glvortex(&["renorm", "--d", "5", "--seeds", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no reference polyhedron"));

    let o = glvortex(&["renorm", "--d", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = glvortex(&["renorm", "--d", "4", "--seeds", "1", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn renorm_on_a_mesh_uses_green_functions() {
    let o = glvortex(&["renorm", "--icosphere", "2", "--d", "4", "--seeds", "2", "--tol", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("best vertices"));
    let o = glvortex(&["renorm", "--torus", "2,0.7,12,8", "--d", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn crosscheck_reconciles_and_rejects_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let o = glvortex(&["crosscheck", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("crosscheck.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    let o = glvortex(&["crosscheck", "--icosphere", "3", "--rho0", "0.9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("geometry"));
    let o = glvortex(&["crosscheck", "--torus", "2,0.7,12,8"]);
    assert_eq!(o.status.code(), Some(1));
    let o = glvortex(&["crosscheck", "--icosphere", "3", "--eps", "0.05,0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn harmonic_on_sphere_and_torus() {
    let dir = tempfile::tempdir().unwrap();
    let o = glvortex(&["harmonic", "--icosphere", "3", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("vortices 4 (total degree 4)"));
    let section: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("section.json")).unwrap()).unwrap();
    assert_eq!(section["values"].as_array().unwrap().len(), 642);
    assert_eq!(section["config"].as_array().unwrap().len(), 4);

    let o = glvortex(&["harmonic", "--torus", "2,0.7,24,12", "--rank", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = glvortex(&["harmonic", "--torus", "2,0.7,24,12", "--rank", "1", "--fluxes", "0.3,0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("inconsistent"));
    let o = glvortex(&["harmonic", "--icosphere", "2", "--points", "0,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tensor_selftest_passes() {
    let o = glvortex(&["tensor-selftest"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("51 of 51 checks passed"));
    assert_eq!(glvortex(&["tensor-selftest", "--max-rank", "13"]).status.code(), Some(1));
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# mesh report\nicosphere = 1\nrank = 3\n").unwrap();
    let o = glvortex(&["mesh", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("vertices         42"));
    assert!(stdout(&o).contains("euler number (k = 3) 6"));

    let o = glvortex(&["mesh", "--config", path(&cfg), "--rank", "1", "--icosphere", "0"]);
    assert!(stdout(&o).contains("vertices         12"));
    assert!(stdout(&o).contains("euler number (k = 1) 2"));

    let o = glvortex(&["mesh", "--config", path(&cfg), "--torus", "2,0.7,12,8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("genus            1"));

    std::fs::write(&cfg, "icosphere = 1\nseeds = 4\n").unwrap();
    let o = glvortex(&["mesh", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key 'seeds'"));

    std::fs::write(&cfg, "rank = zero\n").unwrap();
    assert_eq!(glvortex(&["mesh", "--config", path(&cfg)]).status.code(), Some(1));
    assert_eq!(glvortex(&["mesh", "--config", "/no/such.cfg"]).status.code(), Some(1));
}

#[test]
fn help_documents_every_key() {
    let o = glvortex(&["minimize", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in ["--config", "--out", "--icosphere", "--torus", "--mesh", "--rank", "--epsilon", "--stages", "--max-iters", "--grad-tol", "--seeds", "--seed"] {
        assert!(text.contains(key), "{key} missing from help");
    }
    assert_eq!(glvortex(&[]).status.code(), Some(1));
    assert_eq!(glvortex(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn mesh_export_round_trips_through_obj() {
    let dir = tempfile::tempdir().unwrap();
    let o = glvortex(&["mesh", "--torus", "2,0.7,16,8", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let obj = dir.path().join("mesh.obj");
    let o = glvortex(&["mesh", "--mesh", path(&obj)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("genus            1"));
    assert!(stdout(&o).contains("euler number (k = 2) 0"));

    let open = dir.path().join("open.obj");
    std::fs::write(&open, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
    let o = glvortex(&["mesh", "--mesh", path(&open)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("boundary edge"));
}
