use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use subcause::fixtures;
use subcause_cli::model::ModelFile;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subcause")).args(args).output().unwrap()
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn last(out: &Output, kind: &str) -> Value {
    records(out).into_iter().filter(|r| r["record"] == kind).last().unwrap_or_else(|| panic!("no {kind} record"))
}

fn running_example() -> String {
    models().join("running_example.model").to_string_lossy().into_owned()
}

#[test]
fn repro_cases_pass() {
    for case in ["regularity", "multiplicity", "separators"] {
        let out = run(&["repro", "--case", case]);
        assert_eq!(out.status.code(), Some(0), "{case}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(last(&out, "repro")["verdict"], "PASS");
    }
    let out = run(&["repro", "--case", "multiplicity"]);
    let eq: Vec<f64> = records(&out)
        .iter()
        .filter(|r| r["record"] == "equilibrium")
        .map(|r| r["choice"][0].as_f64().unwrap())
        .collect();
    assert_eq!(eq.len(), 3);
    for (p, t) in eq.iter().zip([0.02, 0.34, 0.99]) {
        assert!((p - t).abs() <= 0.01);
    }
}

#[test]
fn repro_is_deterministic() {
    let (a, b) = (run(&["repro", "--case", "separators"]), run(&["repro", "--case", "separators"]));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn identify_running_example() {
    let out = run(&["identify", "--model", &running_example(), "--dag", "R_TP"]);
    assert_eq!(out.status.code(), Some(0));
    let id = last(&out, "identification");
    assert_eq!(id["order"], serde_json::json!([["T"], ["P"], ["H"]]));
    assert_eq!(id["revealed_causes"], serde_json::json!([["action", "T"], ["P", "H"], ["T", "P"]]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("order ({T},{P},{H})"));
    assert!(records(&out).iter().any(|r| r["record"] == "query"));
}

#[test]
fn solve_reports_every_equilibrium() {
    let path = models().join("multiplicity.model");
    let out = run(&["solve", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let eq: Vec<Value> = records(&out).into_iter().filter(|r| r["record"] == "equilibrium").collect();
    assert_eq!(eq.len(), 3);
    assert!(eq.iter().all(|r| r["residual"].as_f64().unwrap() < 1e-9 && r["basin"].is_u64()));
    // exogenous dataset at rho = 1/2: log odds 15 (3/4 - 2/3), up to the 1e-5 perturbation
    let escr = last(&out, "escr");
    let (a, b) = (escr["choice"]["a"].as_f64().unwrap(), escr["choice"]["b"].as_f64().unwrap());
    assert!(((a / b).ln() - 1.25).abs() < 1e-3);
}

#[test]
fn axioms_exit_codes() {
    let m = running_example();
    let out = run(&["axioms", "--model", &m, "--dag", "R_PT"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(records(&out).iter().filter(|r| r["record"] == "axiom").all(|r| r["verdict"] == "pass"));
    let out = run(&["axioms", "--model", &m, "--oracle", "hard-max"]);
    assert_eq!(out.status.code(), Some(1));
    let failed: Vec<Value> = records(&out).into_iter().filter(|r| r["verdict"] == "fail").collect();
    assert!(!failed.is_empty() && failed.iter().all(|r| r["witness"].is_object()));
}

#[test]
fn utility_recovery() {
    let out = run(&["utility", "--model", &running_example(), "--dag", "R_PT"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<Value> = records(&out).into_iter().filter(|r| r["record"] == "utility").collect();
    for r in rows {
        assert!((r["recovered"].as_f64().unwrap() - r["model"].as_f64().unwrap()).abs() <= 1e-4);
    }
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let out = run(&["repro", "--case", "regularity", "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let all: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(all, records(&out));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("row,record,key,value\n"));
    assert!(table.lines().any(|l| l.ends_with(",repro,verdict,PASS")));
}

fn write_variant(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let text = std::fs::read_to_string(running_example()).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cyclic = write_variant(dir.path(), "cyclic.model", |v| {
        v["dags"]["R_P"].as_array_mut().unwrap().push(serde_json::json!(["H", "P"]));
    });
    let out = run(&["solve", "--model", &cyclic]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(last(&out, "error")["kind"], "acyclicity");

    let short = write_variant(dir.path(), "short.model", |v| {
        v["actions"]["pi"][0]["p"] = Value::String("0.249".into());
    });
    let out = run(&["solve", "--model", &short]);
    assert_eq!(out.status.code(), Some(3));
    let err = last(&out, "error");
    assert_eq!(err["kind"], "mass");
    assert!(err["message"].as_str().unwrap().contains("action pi"));

    let version = write_variant(dir.path(), "version.model", |v| v["schema"] = Value::from(7));
    assert_eq!(last(&run(&["solve", "--model", &version]), "error")["kind"], "parse");
    let unknown = write_variant(dir.path(), "unknown.model", |v| v["colour"] = Value::from(1));
    let err = last(&run(&["solve", "--model", &unknown]), "error");
    assert!(err["message"].as_str().unwrap().contains("line"));

    let out = run(&["identify", "--model", &running_example(), "--dag", "R_Nope"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["repro", "--case", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn running_example_contents() {
    let file = ModelFile::load(&models().join("running_example.model")).unwrap();
    assert_eq!(file.dags.len(), 6);
    for (name, dag) in fixtures::dags() {
        assert_eq!(file.dag(Some(name)).unwrap(), &dag, "{name}");
    }
    assert_eq!(file.space, fixtures::space());
    assert_eq!(file.action("iota").unwrap(), &fixtures::iota());
    assert_eq!(file.action("pi").unwrap(), &fixtures::pi());
    assert_eq!(file.action("nu").unwrap(), &fixtures::nu());
}

#[test]
fn model_round_trip() {
    for name in ["running_example.model", "multiplicity.model"] {
        let file = ModelFile::load(&models().join(name)).unwrap();
        let text = file.to_json();
        let again = ModelFile::parse(&text).unwrap();
        assert_eq!(again, file, "{name}");
        assert_eq!(again.to_json(), text);
    }
}

#[test]
fn rational_and_decimal_probabilities() {
    use subcause_cli::model::parse_number;
    let cases = [("1/3", 1.0 / 3.0), ("0.25", 0.25), ("1e-4", 1e-4), (" 3 / 4 ", 0.75)];
    for (s, want) in cases {
        assert_eq!(parse_number(&Value::String(s.into()), "x").unwrap(), want);
    }
    assert_eq!(parse_number(&Value::from(0.5), "x").unwrap(), 0.5);
    for bad in ["1/0", "half", ""] {
        assert!(parse_number(&Value::String(bad.into()), "x").is_err());
    }
}

#[test]
fn random_models_round_trip() {
    use rand::SeedableRng;
    use subcause::gen::{random_action, random_dag, random_utility};
    use subcause::VarSpace;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for n in 1..=4 {
        let space = VarSpace::with_consequence(n, vec![-1.5, 0.0, 2.25]);
        let actions: Vec<_> = (0..3).map(|k| (format!("a{k}"), random_action(&mut rng, &space))).collect();
        let file = ModelFile {
            space: space.clone(),
            dags: vec![("C".into(), subcause::Dag::complete(n + 2)), ("R".into(), random_dag(&mut rng, n, 0.6))],
            default_dag: Some("C".into()),
            utility: random_utility(&mut rng, 3),
            menus: vec![("M".into(), vec!["a0".into(), "a2".into()])],
            actions,
            perturbation: Some(1e-3),
            dataset: Some(subcause_cli::model::Dataset { menu: "M".into(), weights: vec![0.3, 0.7] }),
            menu_weights: Some(vec![("M".into(), 1.0)]),
        };
        assert_eq!(ModelFile::parse(&file.to_json()).unwrap(), file);
    }
}
