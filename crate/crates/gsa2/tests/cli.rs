use std::path::{Path, PathBuf};
use std::process::Command;

use gsa2::config::{emit_config, load_config, validate_config, Format};
use gsa2::run::{run_file, Command as Cmd, Overrides};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gsa2"))
}

#[test]
fn shipped_configs_validate_and_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        // external.toml points at a sample produced by a gsa1 run
        if path.file_name().unwrap() == "external.toml" {
            continue;
        }
        let r = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        for f in [Format::Toml, Format::Json] {
            let again = validate_config(&emit_config(&r.config, f).unwrap(), f, None).unwrap();
            assert_eq!(again.config, r.config, "{}", path.display());
        }
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn worker_count_does_not_change_payload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let body = std::fs::read_to_string(configs().join("ishigami_gsa2.toml")).unwrap().replace("n2 = 1000", "n2 = 300");
    std::fs::write(&cfg, body).unwrap();
    let mut payloads = Vec::new();
    for w in [1, 8] {
        let out = dir.path().join(format!("w{w}"));
        let st = bin()
            .args(["gsa2", "--config"])
            .arg(&cfg)
            .args(["--workers", &w.to_string(), "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        payloads.push(std::fs::read(out.join("payload.json")).unwrap());
        for f in ["report.json", "qois.csv", "indices.csv", "sample.csv", "drawing_1.csv"] {
            assert!(out.join(f).is_file(), "{f}");
        }
    }
    assert_eq!(payloads[0], payloads[1]);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("w8/report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "v1");
    assert_eq!(report["command"], "gsa2");
    let defaults: Vec<&str> = report["defaults"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaults.contains(&"tests.permutations"));
    assert!(!defaults.contains(&"run.seed"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // config error: unknown key
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nkind = \"ishigami-variant\"\ncolour = 3\n").unwrap();
    let o = bin().args(["gsa1", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("model"));

    // I/O error: missing config file
    let o = bin().args(["gsa1", "--config"]).arg(dir.path().join("none.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(4));

    // numerical degeneracy: every draw picks the same laws
    let same = dir.path().join("same.toml");
    let law = "{ family = \"uniform\", a = 0.0, b = 1.0 }";
    let mut doc = String::from("[model]\nkind = \"ishigami-variant\"\n");
    for _ in 0..3 {
        doc.push_str(&format!("[[ensemble]]\ncandidates = [{law}, {law}]\n"));
    }
    doc.push_str("[gsa2]\nn1 = 4\nn2 = 50\n");
    std::fs::write(&same, doc).unwrap();
    let o = bin().args(["gsa2-double", "--config"]).arg(&same).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // external-csv cannot drive the double loop
    let csv = dir.path().join("s.csv");
    let mut body = String::from("x1,x2,x3,y\n");
    for i in 0..10 {
        let v = i as f64 / 10.0;
        body.push_str(&format!("{v},{v},{v},{v}\n"));
    }
    std::fs::write(&csv, body).unwrap();
    let ext = dir.path().join("ext.toml");
    std::fs::write(&ext, "[model]\nkind = \"external-csv\"\npath = \"s.csv\"\n").unwrap();
    let o = bin().args(["gsa2-double", "--config"]).arg(&ext).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn first_level_config(dir: &Path, model: &str, n: usize) -> PathBuf {
    let tri = "{ family = \"triangular\", a = 0.0, b = 1.0, mode = 0.5 }";
    let uni = "{ family = \"uniform\", a = 0.0, b = 1.0 }";
    let body = format!(
        "[model]\n{model}\n[gsa1]\nn = {n}\ndrawing = [{uni}, {uni}, {uni}]\ntarget = [{tri}, {tri}, {tri}]\n[tests]\npermutations = 100\n"
    );
    let p = dir.join(format!("{}.toml", if model.contains("external") { "ext" } else { "own" }));
    std::fs::write(&p, body).unwrap();
    p
}

// The sample of an in-process run, fed back through the external-csv model,
// reproduces the in-process first- and second-level results exactly.
#[test]
fn external_csv_workflow_matches_in_process_run() {
    let dir = tempfile::tempdir().unwrap();
    let own = first_level_config(dir.path(), "kind = \"ishigami-variant\"", 300);
    let a = run_file(Cmd::Gsa1, &own, &Overrides { seed: Some(11), out: Some(dir.path().join("a")), ..Default::default() })
        .unwrap();
    std::fs::copy(dir.path().join("a/sample.csv"), dir.path().join("sample.csv")).unwrap();
    let ext = first_level_config(dir.path(), "kind = \"external-csv\"\npath = \"sample.csv\"", 300);
    let b = run_file(Cmd::Gsa1, &ext, &Overrides { seed: Some(11), out: Some(dir.path().join("b")), ..Default::default() })
        .unwrap();
    assert_eq!(a.payload, b.payload);
    let v: serde_json::Value = serde_json::from_str(&b.payload).unwrap();
    assert_eq!(v["weighted"], true);
    assert_eq!(v["indices"].as_array().unwrap().len(), 3);

    // second level from the same file
    let cfg = dir.path().join("g.toml");
    let body = std::fs::read_to_string(configs().join("ishigami_gsa2.toml")).unwrap().replace("n2 = 1000", "n2 = 200");
    std::fs::write(&cfg, &body).unwrap();
    let a = run_file(Cmd::Gsa2, &cfg, &Overrides { out: Some(dir.path().join("c")), ..Default::default() }).unwrap();
    std::fs::copy(dir.path().join("c/sample.csv"), dir.path().join("sample2.csv")).unwrap();
    let ext = dir.path().join("g2.toml");
    std::fs::write(
        &ext,
        body.replace("kind = \"ishigami-variant\"", "kind = \"external-csv\"\npath = \"sample2.csv\""),
    )
    .unwrap();
    let b = run_file(Cmd::Gsa2, &ext, &Overrides { out: Some(dir.path().join("d")), ..Default::default() }).unwrap();
    let (va, vb): (serde_json::Value, serde_json::Value) =
        (serde_json::from_str(&a.payload).unwrap(), serde_json::from_str(&b.payload).unwrap());
    assert_eq!(va["indices"], vb["indices"]);
    assert_eq!(va["evaluations"], 200);
    assert_eq!(vb["evaluations"], 0);
}

#[test]
fn external_sample_needs_its_drawing_law() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("x1,x2,x3,y\n");
    for i in 0..20 {
        let v = (i as f64 + 0.5) / 20.0;
        body.push_str(&format!("{v},{},{},{}\n", 1.0 - v, (v * 7.0) % 1.0, v.sin()));
    }
    std::fs::write(dir.path().join("s.csv"), body).unwrap();
    let tri = "{ family = \"triangular\", a = 0.0, b = 1.0, mode = 0.5 }";
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!("[model]\nkind = \"external-csv\"\npath = \"s.csv\"\n[gsa1]\ntarget = [{tri}, {tri}, {tri}]\n"),
    )
    .unwrap();
    let e = run_file(Cmd::Gsa1, &cfg, &Overrides { out: Some(dir.path().join("o")), ..Default::default() }).unwrap_err();
    assert!(e.to_string().contains("gsa1.drawing"), "{e}");
}

#[test]
fn weight_diagnostics_become_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let uni = "{ family = \"uniform\", a = 0.0, b = 1.0 }";
    let peaked = "{ family = \"truncated-normal\", a = 0.0, b = 1.0, mean = 0.5, sd = 0.03 }";
    std::fs::write(
        &cfg,
        format!(
            "[model]\nkind = \"ishigami-variant\"\n[gsa1]\nn = 200\ndrawing = [{uni}, {uni}, {uni}]\ntarget = [{uni}, {peaked}, {uni}]\n[tests]\npermutations = 20\nweight_threshold = 2.0\n"
        ),
    )
    .unwrap();
    let o = run_file(Cmd::Gsa1, &cfg, &Overrides { out: Some(dir.path().join("o")), ..Default::default() }).unwrap();
    assert_eq!(o.warnings.len(), 1);
    assert_eq!(o.warnings[0].input, 2);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["warnings"][0]["input"], 2);
}

#[test]
fn small_studies_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let body = std::fs::read_to_string(configs().join("budget.toml"))
        .unwrap()
        .replace("budget = 1026", "budget = 270")
        .replace("replications = 50", "replications = 2");
    std::fs::write(&cfg, body).unwrap();
    let o = run_file(Cmd::Budget, &cfg, &Overrides { out: Some(dir.path().join("b")), ..Default::default() }).unwrap();
    let v: serde_json::Value = serde_json::from_str(&o.payload).unwrap();
    assert_eq!(v["n2_inner"], 10);
    assert_eq!(v["single"]["replications"], 2);
    let table = std::fs::read_to_string(dir.path().join("b/budget_double.csv")).unwrap();
    assert!(table.starts_with("rep,seed,est_1,est_2,est_3,ranking,good\n"));
    assert_eq!(table.lines().count(), 3);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, std::fs::read_to_string(&cfg).unwrap().replace("budget = 270", "budget = 271")).unwrap();
    let e = run_file(Cmd::Budget, &bad, &Overrides { out: Some(dir.path().join("x")), ..Default::default() }).unwrap_err();
    assert_eq!(e.exit_code(), 2);

    let conv = dir.path().join("conv.toml");
    let body = std::fs::read_to_string(configs().join("first_level.toml"))
        .unwrap()
        .replace("sizes = [100, 200, 300, 500]", "sizes = [40, 80]\nreference = [2, 1, 3]")
        .replace("replications = 200", "replications = 3");
    std::fs::write(&conv, body).unwrap();
    let o = run_file(Cmd::Converge, &conv, &Overrides { out: Some(dir.path().join("c")), ..Default::default() }).unwrap();
    let v: serde_json::Value = serde_json::from_str(&o.payload).unwrap();
    assert_eq!(v["sizes"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("c/study_n40.csv").is_file());
    assert!(dir.path().join("c/study_n80.csv").is_file());
}
