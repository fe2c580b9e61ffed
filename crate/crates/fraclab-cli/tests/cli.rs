use std::path::Path;
use std::process::{Command, Output};

fn fraclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab")).args(args).output().expect("binary runs")
}

fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let body: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (comment, body)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn spectrum_sweep_is_simple_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spectrum.csv");
    let s = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    let o = fraclab(&["spectrum", "--s", s, "--k", "10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(&out).unwrap();
    let (comment, body) = rows(&out);
    assert!(comment.starts_with("# config sha256="));
    assert_eq!(body[0], ["s", "k", "lambda", "cluster"]);
    assert_eq!(body.len(), 91);
    for r in &body[1..] {
        assert_eq!(r[1], r[3], "every eigenvalue is its own cluster");
    }
    fraclab(&["spectrum", "--s", s, "--k", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn disk_pair_shares_a_cluster() {
    let o = fraclab(&["spectrum", "--domain", "disk", "--h", "0.125", "--k", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let ids: Vec<String> = text.lines().skip(2).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(ids, ["1", "2", "2"]);
}

#[test]
fn invalid_order_is_a_config_error() {
    let o = fraclab(&["spectrum", "--s", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`s`"));
}

#[test]
fn too_many_eigenvalues_is_rejected() {
    let o = fraclab(&["pohozaev", "--n", "4", "--k", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`k`"));
}

#[test]
fn numerical_failure_reports_json() {
    let o = fraclab(&["spectrum", "--domain", "disk", "--h", "0.9"]);
    assert_eq!(o.status.code(), Some(3));
    let diag: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(diag["error"].as_str().unwrap().contains("coarse"));
}

#[test]
fn pohozaev_residuals_on_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = fraclab(&["pohozaev", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (_, body) = rows(&out);
    assert_eq!(body.len(), 16);
    assert!(body[1..].iter().all(|r| num(&r[2]) < 1e-3));
}

#[test]
fn hadamard_check_on_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let (out, json) = (dir.path().join("h.csv"), dir.path().join("h.json"));
    let o = fraclab(&["hadamard-check", "--s", "0.5", "--k", "4", "--out", out.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success());
    let (_, body) = rows(&out);
    let spectrum = fraclab(&["spectrum", "--s", "0.5", "--k", "4"]);
    let lambdas: Vec<f64> =
        String::from_utf8(spectrum.stdout).unwrap().lines().skip(2).map(|l| num(l.split(',').nth(2).unwrap())).collect();
    for r in &body[1..] {
        let k: usize = r[2].parse().unwrap();
        if r[1] == "dilation" {
            assert_eq!(r[6], "relative");
            assert!(num(&r[5]) < 1e-3);
            assert!((num(&r[3]) + lambdas[k - 1]).abs() < 1e-3 * lambdas[k - 1]);
        } else {
            assert_eq!(r[6], "absolute");
            assert!(num(&r[3]).abs() < 1e-8 && num(&r[4]).abs() < 1e-8);
        }
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), body.len() - 1);
}

#[test]
fn interval_simplify_needs_no_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = fraclab(&["simplify", "--q", "10", "--json", json.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 iterations"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["report"]["iterations"].as_array().unwrap().len(), 0);
    assert_eq!(doc["report"]["intervals"].as_array().unwrap().len(), 10);
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "command = \"spectrum\"\ns = 0.3\nk = 3\n\n[domain]\nkind = \"interval\"\na = 0.0\nb = 3.0\n\n\
         [discretization]\nmethod = \"spectral\"\nn = 32\n",
    )
    .unwrap();
    let o = fraclab(&["spectrum", "--config", cfg.to_str().unwrap(), "--s", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let l1 = num(text.lines().nth(2).unwrap().split(',').nth(2).unwrap());
    assert!((l1 - 0.77185).abs() < 1e-4, "{l1}");

    std::fs::write(&cfg, "command = \"spectrum\"\ns = 0.3\n[domain]\nkind = \"interval\"\na = 1.0\nb = 0.0\n[discretization]\nmethod = \"spectral\"\nn = 8\n").unwrap();
    let o = fraclab(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`domain`"));
}
