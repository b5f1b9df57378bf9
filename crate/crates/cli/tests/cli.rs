use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"
seed = 3
target = 1e-8
taus = [1.0]
max_outer = 60

[graph]
kind = "cycle"
n = 4

[data]
source = "quadratic"
dim = 3
mu = 0.1
l = 2.0

[[algorithm]]
name = "ideal"
t_inner = 20
"#;

fn decopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decopt")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_run_writes_trace_summary_and_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = decopt(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(listing(&out), ["ideal_tau1.csv", "schedule.csv", "summary.csv"]);

    let trace = fs::read_to_string(out.join("ideal_tau1.csv")).unwrap();
    assert!(trace.contains("# algorithm=ideal\n"));
    assert!(trace.contains("time,suboptimality,consensus_gap\n"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert!(row.starts_with("ideal,1,") && row.ends_with(",ok"), "{row}");
    assert!(!row.contains(",inf,"), "target missed: {row}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("taus = [1.0]", "taus = [0.5, 2.0]")
        + "\n[[algorithm]]\nname = \"ideal\"\nlabel = \"ideal-sgd\"\ninner = \"sgd\"\nt_inner = 5\nmax_outer = 5\n";
    let cfg = write_config(tmp.path(), &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(decopt(&["run", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]).status.success());
    assert!(decopt(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "4"]).status.success());
    assert_eq!(listing(&a), listing(&b));
    for name in listing(&a) {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    assert!(decopt(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "99"]).status.success());
    let trace = fs::read_to_string(out.join("ideal_tau1.csv")).unwrap();
    assert!(trace.contains("# master_seed=99\n"));
}

#[test]
fn unknown_algorithm_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &MINIMAL.replace("name = \"ideal\"", "name = \"admm\""));
    let o = decopt(&["run", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("algorithm[0].name"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_config_error() {
    let o = decopt(&["run", "/nonexistent/exp.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("source = \"quadratic\"", "source = \"file\"\npath = \"nope.csv\"");
    let cfg = write_config(tmp.path(), &text);
    let o = decopt(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("data.path"), "{}", stderr(&o));
}

#[test]
fn csv_dataset_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,x2,label\n");
    for i in 0..40 {
        let t = i as f64 / 40.0;
        csv.push_str(&format!("{},{},{}\n", t, 1.0 - t, if i % 3 == 0 { 1 } else { 0 }));
    }
    fs::write(tmp.path().join("data.csv"), csv).unwrap();
    let text = MINIMAL
        .replace("source = \"quadratic\"", "source = \"file\"\npath = \"data.csv\"\nformat = \"csv\"")
        .replace("target = 1e-8", "target = 1e-4");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = decopt(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(out.join("ideal_tau1.csv")).unwrap();
    assert!(trace.contains("# d=2\n"));
}

#[test]
fn ablation_over_rho_writes_one_trace_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = decopt(&["ablate", &cfg, "--axis", "rho", "--values", "0.5,1,2,10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traces: Vec<String> = listing(&out).into_iter().filter(|n| n.starts_with("ideal_rho")).collect();
    assert_eq!(traces.len(), 4, "{traces:?}");
    assert_eq!(fs::read_to_string(out.join("ablation.csv")).unwrap().lines().count(), 5);
}

#[test]
fn ablation_over_inner_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = decopt(&[
        "ablate", &cfg, "--axis", "t-inner", "--values", "1,10,100", "--inner-beta", "0.8", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = listing(&out);
    for t in ["1", "10", "100"] {
        assert!(names.contains(&format!("ideal_t_inner{t}_tau1.csv")), "{names:?}");
    }
}

#[test]
fn ablation_rejects_empty_and_nonpositive_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let o = decopt(&["ablate", &cfg, "--axis", "rho", "--values"]);
    assert_eq!(o.status.code(), Some(2));
    let o = decopt(&["ablate", &cfg, "--axis", "rho", "--values", "1,-2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = decopt(&["ablate", &cfg, "--axis", "t-inner", "--values", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_cycle_four() {
    let o = decopt(&["validate", "cycle:4"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("kappa_w: 2.000000000000"), "{text}");
    assert!(text.contains("kappa_q: 2.000000000000"), "{text}");
    assert!(text.contains("status: valid"));
}

#[test]
fn validate_barbell_eight() {
    let o = decopt(&["validate", "barbell:8"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("status: valid"));
}

#[test]
fn validate_rejects_asymmetric_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("w.txt");
    fs::write(&p, "1 -1 0\n-0.5 1 -0.5\n0 -1 1\n").unwrap();
    let o = decopt(&["validate", &format!("matrix:{}", p.display())]);
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("symmetry") && l.contains("FAIL")), "{text}");
}

#[test]
fn validate_edge_list_and_bad_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("g.txt");
    fs::write(&p, "# triangle plus tail\n0 1\n1 2\n2 0\n2 3\n").unwrap();
    assert!(decopt(&["validate", &format!("edges:{}", p.display())]).status.success());
    assert_eq!(decopt(&["validate", "cycle"]).status.code(), Some(2));
    assert_eq!(decopt(&["validate", "barbell:7"]).status.code(), Some(2));
    assert_eq!(decopt(&["validate", "edges:/nonexistent"]).status.code(), Some(2));
}
