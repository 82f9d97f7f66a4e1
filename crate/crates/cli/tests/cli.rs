use std::path::Path;
use std::process::{Command, Output};

fn resrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resrate"))
        .args(args)
        .output()
        .expect("spawn resrate")
}

fn ok(args: &[&str]) -> Output {
    let out = resrate(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, blocks: &str, seed: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    ok(&["gen", "--blocks", blocks, "--seed", seed, "-o", p(&path)]);
    path
}

#[test]
fn help_lists_subcommands() {
    let out = ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen", "features", "fit", "eval", "cv", "cross-qp", "ablate", "plot"] {
        assert!(text.contains(cmd), "missing {cmd} in help");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(resrate(&["fit", "--bogus"]).status.code(), Some(1));
    assert_eq!(resrate(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "50", "1");
    let out = dir.path().join("m.json");
    let bad_features = resrate(&["fit", "--data", p(&data), "--features", "SQ", "-o", p(&out)]);
    assert_eq!(bad_features.status.code(), Some(1));
    let bad_sparsity = resrate(&["gen", "--sparsity", "1.5", "-o", p(&out)]);
    assert_eq!(bad_sparsity.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn data_errors_exit_2_and_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let missing = resrate(&["fit", "--data", p(&dir.path().join("nope.jsonl")), "-o", p(&out)]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"format_version\":1}\n{\"source_id\":\"x\",\"width\":4,\"height\":4,\"qp\":22,\"coeffs\":[1,2],\"rate\":3}\n",
    )
    .unwrap();
    let malformed = resrate(&["fit", "--data", p(&bad), "-o", p(&out)]);
    assert_eq!(malformed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&malformed.stderr).contains("line 2"));

    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("m.json"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn numerical_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "200", "2");
    let model = dir.path().join("rho.json");
    ok(&["fit", "--data", p(&data), "--model", "rho", "-o", p(&model)]);

    // Constant actual rates leave the correlation undefined.
    let flat = dir.path().join("flat.jsonl");
    let line = format!(
        "{{\"source_id\":\"f\",\"width\":4,\"height\":4,\"qp\":22,\"coeffs\":{:?},\"rate\":5}}",
        [0; 16]
    );
    std::fs::write(&flat, format!("{{\"format_version\":1}}\n{line}\n{line}\n")).unwrap();
    let out = resrate(&["eval", "--model", p(&model), "--data", p(&flat)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "500", "3");
    let mut reports = Vec::new();
    for i in 0..2 {
        let model = dir.path().join(format!("m{i}.json"));
        ok(&["fit", "--data", p(&data), "--model", "logistic", "-o", p(&model)]);
        let out = ok(&["eval", "--model", p(&model), "--data", p(&data)]);
        reports.push((std::fs::read(&model).unwrap(), out.stdout));
    }
    assert_eq!(reports[0], reports[1]);
    let table = String::from_utf8_lossy(&reports[0].1);
    assert!(table.contains("logistic"));
    assert!(table.contains('-'), "time column should be blank without --timing");
}

#[test]
fn ablate_writes_fifteen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "600", "4");
    let csv = dir.path().join("ablation.csv");
    ok(&["ablate", "--data", p(&data), "-o", p(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "features,P,MAE,MRE,in_sample_mse");
    assert_eq!(lines.len(), 16);
    assert!(lines[1].starts_with("S,"));
    assert!(lines[15].starts_with("SLZE,"));
}

#[test]
fn features_and_plot_emit_one_row_per_block() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "120", "5");
    let feats = ok(&["features", "--data", p(&data)]);
    let text = String::from_utf8_lossy(&feats.stdout);
    assert!(text.starts_with("source_id,width,height,qp,S,L,Z,E,rate_bits\n"));
    assert_eq!(text.lines().count(), 121);

    let model = dir.path().join("m.json");
    ok(&["fit", "--data", p(&data), "-o", p(&model)]);
    let scatter = dir.path().join("scatter.csv");
    ok(&["plot", "--model", p(&model), "--data", p(&data), "-o", p(&scatter)]);
    let text = std::fs::read_to_string(&scatter).unwrap();
    assert!(text.starts_with("actual,estimated,pixels\n"));
    assert_eq!(text.lines().count(), 121);
}

#[test]
fn cv_json_reports_fold_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "103", "6");
    let out = ok(&["cv", "--data", p(&data), "--model", "rho,subblock", "--seed", "9", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["seed"], 9);
    assert_eq!(rows[0]["fold_sizes"], serde_json::json!([21, 21, 21, 20, 20]));
}
