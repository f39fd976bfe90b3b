use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lml"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const P2_TABLE: &str = r#"{
  "variables": [{"name": "A", "one": "1", "zero": "0"}, {"name": "B", "one": "1", "zero": "0"}],
  "counts": [
    {"levels": ["0", "0"], "n": 0.4}, {"levels": ["1", "0"], "n": 0.3},
    {"levels": ["0", "1"], "n": 0.2}, {"levels": ["1", "1"], "n": 0.1}
  ]
}"#;

fn value_at(v: &Value, subset: &[&str]) -> f64 {
    v["values"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| {
            e["subset"]
                .as_array()
                .unwrap()
                .iter()
                .map(|s| s.as_str().unwrap())
                .eq(subset.iter().copied())
        })
        .unwrap()["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn convert_small_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "t.json", P2_TABLE);
    let mu = lml(&["convert", "--in", &table, "--from", "pi", "--to", "mu"]);
    assert_eq!(code(&mu), 0, "{}", String::from_utf8_lossy(&mu.stderr));
    let mu = json_out(&mu);
    assert_eq!(mu["kind"], "mu");
    assert!((value_at(&mu, &["A", "B"]) - 0.1).abs() < 1e-12);
    assert!((value_at(&mu, &["A"]) - 0.4).abs() < 1e-12);

    let tau = json_out(&lml(&[
        "convert", "--in", &table, "--from", "pi", "--to", "tau",
    ]));
    assert!((value_at(&tau, &["A", "B"]) - 0.833_333_333_333).abs() < 1e-12);
}

#[test]
fn convert_coppen_counts_to_gamma() {
    let out = lml(&[
        "convert",
        "--in",
        "builtin:coppen",
        "--from",
        "counts",
        "--to",
        "gamma",
    ]);
    assert_eq!(code(&out), 0);
    let gamma = json_out(&out);
    assert_eq!(gamma["values"].as_array().unwrap().len(), 16);
    assert_eq!(value_at(&gamma, &[]), 0.0);
    assert_eq!(gamma["variables"][2], "Depression");
}

#[test]
fn convert_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let original = lml(&[
        "convert",
        "--in",
        "builtin:coppen",
        "--from",
        "counts",
        "--to",
        "pi",
    ]);
    let pi_path = write(dir.path(), "pi.json", &stdout(&original));
    let pi = json_out(&original);
    for kind in ["mu", "gamma", "lambda", "tau"] {
        let there = dir.path().join(format!("{kind}.json"));
        let there = there.to_str().unwrap();
        let out = lml(&[
            "convert", "--in", &pi_path, "--from", "pi", "--to", kind, "--out", there,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let back = json_out(&lml(&[
            "convert", "--in", there, "--from", kind, "--to", "pi",
        ]));
        for (a, b) in pi["values"]
            .as_array()
            .unwrap()
            .iter()
            .zip(back["values"].as_array().unwrap())
        {
            assert_eq!(a["subset"], b["subset"]);
            assert!(
                (a["value"].as_f64().unwrap() - b["value"].as_f64().unwrap()).abs() <= 1e-9,
                "{kind}"
            );
        }
    }
}

#[test]
fn convert_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.json", "{ not json");
    assert_eq!(
        code(&lml(&[
            "convert", "--in", &broken, "--from", "pi", "--to", "mu"
        ])),
        2
    );
    assert_eq!(
        code(&lml(&[
            "convert",
            "--in",
            "missing.json",
            "--from",
            "pi",
            "--to",
            "mu"
        ])),
        2
    );

    let negative_tau = r#"{"kind": "tau", "variables": ["A", "B"], "values": [
        {"subset": [], "value": 1}, {"subset": ["A"], "value": 0.5},
        {"subset": ["B"], "value": 0.5}, {"subset": ["A", "B"], "value": 3.0}]}"#;
    let tau = write(dir.path(), "tau.json", negative_tau);
    assert_eq!(
        code(&lml(&[
            "convert", "--in", &tau, "--from", "tau", "--to", "pi"
        ])),
        3
    );
    let mu = write(
        dir.path(),
        "mu.json",
        &stdout(&lml(&[
            "convert",
            "--in",
            "builtin:coppen",
            "--from",
            "counts",
            "--to",
            "mu",
        ])),
    );
    assert_eq!(
        code(&lml(&[
            "convert", "--in", &mu, "--from", "gamma", "--to", "pi"
        ])),
        2
    );
    assert_eq!(
        code(&lml(&[
            "convert", "--in", &mu, "--from", "mu", "--to", "pi"
        ])),
        0
    );
}

#[test]
fn fit_reproduces_the_coppen_models() {
    let out = lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--graph",
        "1-2,2-3,3-4",
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    let r = json_out(&out);
    assert_eq!(r["df"], 5);
    assert!((r["deviance"].as_f64().unwrap() - 8.6).abs() < 0.05);
    assert!((r["bic"].as_f64().unwrap() + 20.85).abs() < 0.1);
    assert!((r["p_value"].as_f64().unwrap() - 0.13).abs() < 0.01);

    for (coding, dev, bic) in [
        ("Depression=yes", 17.08, -24.16),
        ("Depression=no", 9.3, -31.94),
    ] {
        let out = lml(&[
            "fit",
            "--in",
            "builtin:coppen",
            "--graph",
            "1-2,2-3,3-4",
            "--extra-zeros",
            "2,3,4",
            "1,2,3,4",
            "--coding",
            coding,
            "--json",
        ]);
        assert_eq!(code(&out), 0);
        let r = json_out(&out);
        assert_eq!(r["df"], 7);
        assert!(
            (r["deviance"].as_f64().unwrap() - dev).abs() < 0.05,
            "{coding}"
        );
        assert!((r["bic"].as_f64().unwrap() - bic).abs() < 0.1, "{coding}");
    }
}

#[test]
fn fit_text_report() {
    let out = lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--graph",
        "Stability-Validity Validity-Depression Depression-Solidity",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("deviance  8.6069"), "{text}");
    assert!(text.contains("{Stability,Depression}"));
    assert_eq!(text.matches("(fixed at 0)").count(), 5);
}

#[test]
fn fit_with_constraint_files() {
    let dir = tempfile::tempdir().unwrap();
    let sets = write(
        dir.path(),
        "h.json",
        r#"{"sets": [["Stability", "Depression"], [1, 4], [2, 4], [1, 2, 4], [1, 3, 4]]}"#,
    );
    let by_sets = json_out(&lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--constraints",
        &sets,
        "--json",
    ]));
    let by_graph = json_out(&lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--graph",
        "1-2,2-3,3-4",
        "--json",
    ]));
    assert!(
        (by_sets["deviance"].as_f64().unwrap() - by_graph["deviance"].as_f64().unwrap()).abs()
            < 1e-9
    );

    let mut col = vec![0.0; 16];
    col[0b0101] = 1.0;
    let dense = write(
        dir.path(),
        "dense.json",
        &format!("{{\"columns\": [{col:?}]}}"),
    );
    let out = lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--constraints",
        &dense,
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_out(&out)["df"], 1);

    let deficient = write(
        dir.path(),
        "bad.json",
        &format!("{{\"columns\": [{col:?}, {col:?}]}}"),
    );
    assert_eq!(
        code(&lml(&[
            "fit",
            "--in",
            "builtin:coppen",
            "--constraints",
            &deficient
        ])),
        2
    );
}

#[test]
fn fit_graph_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(
        dir.path(),
        "g.json",
        r#"{"p": 4, "edges": [[1, 2], [2, 3], [3, 4]]}"#,
    );
    let r = json_out(&lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--graph",
        &graph,
        "--json",
    ]));
    assert_eq!(r["df"], 5);
}

#[test]
fn fit_reports_non_convergence() {
    let out = lml(&[
        "fit",
        "--in",
        "builtin:coppen",
        "--graph",
        "1-2,2-3,3-4",
        "--max-iterations",
        "1",
    ]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("NOT converged"));
}

#[test]
fn fit_argument_errors() {
    assert_eq!(code(&lml(&["fit", "--in", "builtin:coppen"])), 2);
    assert_eq!(
        code(&lml(&["fit", "--in", "builtin:coppen", "--graph", "1-9"])),
        2
    );
    assert_eq!(
        code(&lml(&[
            "fit",
            "--in",
            "builtin:coppen",
            "--graph",
            "1-2",
            "--coding",
            "Mood=low"
        ])),
        2
    );
}

#[test]
fn search_selects_the_path_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("search.json");
    let out = lml(&[
        "search",
        "--in",
        "builtin:coppen",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(
        text.contains("selected: Stability-Validity Validity-Depression Depression-Solidity"),
        "{text}"
    );

    let saved: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let selected = &saved["selected"];
    assert_eq!(
        selected["edges"],
        serde_json::json!([
            ["Stability", "Validity"],
            ["Validity", "Depression"],
            ["Depression", "Solidity"]
        ])
    );
    let models = saved["models"].as_array().unwrap();
    assert_eq!(models.len(), 64);
    let complete = models
        .iter()
        .find(|m| m["edges"].as_array().unwrap().len() == 6)
        .unwrap();
    assert_eq!(complete["df"], 0);
    assert_eq!(complete["deviance"], 0.0);
}

#[test]
fn search_output_is_deterministic() {
    let a = lml(&["search", "--in", "builtin:coppen", "--json"]);
    let b = lml(&["search", "--in", "builtin:coppen", "--json"]);
    assert_eq!(a.stdout, b.stdout);
    let c = lml(&["fit", "--in", "builtin:coppen", "--graph", "1-2", "--json"]);
    let d = lml(&["fit", "--in", "builtin:coppen", "--graph", "1-2", "--json"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn search_on_independent_data_selects_no_edges() {
    let dir = tempfile::tempdir().unwrap();
    // 10000 draws from the product of Bernoulli(0.3) and Bernoulli(0.6), as expected counts.
    let csv = write(
        dir.path(),
        "ind.csv",
        "X,Y,n\n0,0,2800\n1,0,1200\n0,1,4200\n1,1,1800\n",
    );
    let out = lml(&["search", "--in", &csv, "--json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_out(&out)["selected"]["edges"], serde_json::json!([]));
}

#[test]
fn search_exit_code_when_nothing_passes() {
    let out = lml(&["search", "--in", "builtin:coppen", "--alpha", "1.5"]);
    assert_eq!(code(&out), 5);
}

#[test]
fn check_lists_disconnected_sets() {
    let out = lml(&[
        "check",
        "--in",
        "builtin:coppen",
        "--graph",
        "1-2,2-3,3-4",
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    let r = json_out(&out);
    let sets: Vec<Value> = r["disconnected_sets"].as_array().unwrap().clone();
    assert_eq!(sets.len(), 5);
    assert_eq!(
        sets[0]["subset"],
        serde_json::json!(["Stability", "Depression"])
    );
    assert_eq!(r["markov_property_holds"], false);

    let complete = json_out(&lml(&[
        "check",
        "--in",
        "builtin:coppen",
        "--graph",
        "1-2,1-3,1-4,2-3,2-4,3-4",
        "--json",
    ]));
    assert!(complete["disconnected_sets"].as_array().unwrap().is_empty());
}

#[test]
fn check_flags_strong_dependence() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "dep.csv",
        "X,Y,n\n0,0,400\n1,0,100\n0,1,100\n1,1,400\n",
    );
    let r = json_out(&lml(&["check", "--in", &csv, "--graph", "none", "--json"]));
    let row = &r["disconnected_sets"][0];
    assert!(row["z"].as_f64().unwrap().abs() > 10.0, "{row}");
    assert!(stdout(&lml(&["check", "--in", &csv, "--graph", "none"])).contains("<-"));
}

#[test]
fn check_needs_positive_cells() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "zero.csv",
        "X,Y,n\n0,0,4\n1,0,0\n0,1,3\n1,1,5\n",
    );
    assert_eq!(code(&lml(&["check", "--in", &csv, "--graph", "none"])), 3);
    assert_eq!(
        code(&lml(&[
            "check", "--in", &csv, "--graph", "none", "--smooth", "0.5"
        ])),
        0
    );
}

#[test]
fn csv_with_labels_and_codings() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "labels.csv",
        "Smoker,Cough\nyes,yes\nno,no\nyes,no\nno,yes\nyes,yes\n",
    );
    assert_eq!(
        code(&lml(&[
            "convert", "--in", &csv, "--from", "counts", "--to", "mu"
        ])),
        2
    );
    let out = lml(&[
        "convert",
        "--in",
        &csv,
        "--from",
        "counts",
        "--to",
        "mu",
        "--coding",
        "Smoker=yes",
        "Cough=yes",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mu = json_out(&out);
    assert!((value_at(&mu, &["Smoker"]) - 0.6).abs() < 1e-12);
    assert!((value_at(&mu, &["Cough"]) - 0.6).abs() < 1e-12);
    assert!((value_at(&mu, &["Smoker", "Cough"]) - 0.4).abs() < 1e-12);
}

#[test]
fn coppen_coding_changes_gamma_but_not_graph_fit() {
    let yes = json_out(&lml(&[
        "convert",
        "--in",
        "builtin:coppen",
        "--from",
        "counts",
        "--to",
        "gamma",
    ]));
    let no = json_out(&lml(&[
        "convert",
        "--in",
        "builtin:coppen",
        "--from",
        "counts",
        "--to",
        "gamma",
        "--coding",
        "Depression=no",
    ]));
    assert_ne!(
        value_at(&yes, &["Depression"]),
        value_at(&no, &["Depression"])
    );
    let fit = |coding: &str| {
        json_out(&lml(&[
            "fit",
            "--in",
            "builtin:coppen",
            "--graph",
            "1-2,2-3,3-4",
            "--coding",
            coding,
            "--json",
        ]))["deviance"]
            .as_f64()
            .unwrap()
    };
    assert!((fit("Depression=yes") - fit("Depression=no")).abs() < 1e-6);
}
