use std::fs;

use proxcg_core::harness::{format_summary, load_spec, parse_spec, read_csv, run_experiment, LambdaSpec, RunStatus};
use proxcg_core::Error;

const LIBSVM: &str = "\
+1 1:0.5 3:1.0
-1 2:1.5 4:-0.5
+1 1:-1.0 2:0.2 4:1.0
-1 3:0.7
+1 2:-0.3 3:0.4 4:0.9
-1 1:0.8 4:0.1
+1 1:0.1 2:0.1 3:0.1
-1 2:1.1 3:-0.6
";

fn write_spec(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    fs::write(dir.join("tiny.libsvm"), LIBSVM).unwrap();
    let p = dir.join("spec.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn file_experiment_writes_csv_next_to_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{
            "dataset": {"path": "tiny.libsvm"},
            "loss": "lorenz",
            "lambda": 1e-3,
            "algorithms": [
                {"algorithm": "v1"},
                {"algorithm": "RS-v2", "label": "restart"},
                {"algorithm": "ST-v1", "t": 2, "eta_f": 0.1, "overrides": {"m": 4}},
                {"algorithm": "prox-spiderboost"}
            ],
            "seeds": [1, 2],
            "epochs": 3,
            "output": "out/metrics.csv"
        }"#,
    );
    let spec = load_spec(&spec).unwrap();
    let res = run_experiment(&spec).unwrap();
    assert_eq!(res.runs.len(), 8);
    assert!(res.runs.iter().all(|r| r.status == RunStatus::Completed));
    let out = res.output.clone().unwrap();
    assert_eq!(out, dir.path().join("out/metrics.csv"));

    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(
        "run_id,algo,dataset,loss,seed,epoch,effective_passes,objective,subopt,gmap_sq,ls_calls,fallback_count,wall_ms"
    ));
    let back = read_csv(&out).unwrap();
    assert_eq!(back.len(), res.rows.len());
    assert!(back.iter().all(|r| r.dataset == "tiny" && r.loss == "lorenz"));
    let min = back.iter().map(|r| r.subopt).fold(f64::INFINITY, f64::min);
    assert_eq!(min, 0.0);
    assert!(back.iter().all(|r| r.subopt >= 0.0));
    // every run starts from the same point
    let starts: Vec<f64> = back.iter().filter(|r| r.epoch == 0).map(|r| r.objective).collect();
    assert!(starts.windows(2).all(|w| w[0] == w[1]));

    let table = format_summary(&res.summary);
    for label in ["v1", "restart", "ST-v1", "prox-spiderboost"] {
        assert!(table.contains(label), "{table}");
    }
}

#[test]
fn diverged_run_keeps_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{
            "dataset": {"path": "tiny.libsvm"},
            "loss": "two_layer_nn",
            "algorithms": [
                {"algorithm": "v1"},
                {"algorithm": "prox-spiderboost", "overrides": {"eta": 1e9}}
            ],
            "seeds": [3],
            "epochs": 20
        }"#,
    );
    let res = run_experiment(&load_spec(&spec).unwrap()).unwrap();
    assert!(res.output.is_none());
    assert!(!res.all_failed());
    let sb = res.runs.iter().find(|r| r.label == "prox-spiderboost").unwrap();
    if let RunStatus::Diverged { epoch } = sb.status {
        let rows = res.rows.iter().filter(|r| r.algo == "prox-spiderboost").count();
        assert_eq!(rows, epoch + 1);
    }
}

#[test]
fn spec_errors_name_the_field() {
    let cases = [
        (r#"{"dataset": {"synthetic": {"n": 10, "d": 2}}, "loss": "lorenz", "algorithms": [], "seeds": [1], "epochs": 1}"#, "algorithms"),
        (r#"{"dataset": {"synthetic": {"n": 10, "d": 2}}, "loss": "hinge", "algorithms": [{"algorithm": "v1"}], "seeds": [1], "epochs": 1}"#, "loss"),
        (r#"{"dataset": {"synthetic": {"n": 10, "d": 2, "extra": 1}}, "loss": "a", "algorithms": [{"algorithm": "v1"}], "seeds": [1], "epochs": 1}"#, "dataset.synthetic"),
        (r#"{"dataset": {"synthetic": {"n": 10, "d": 2}}, "loss": "a", "algorithms": [{"algorithm": "v1"}], "seeds": [], "epochs": 1}"#, "seeds"),
        (r#"{"dataset": {"synthetic": {"n": 10, "d": 2}}, "loss": "a", "lambda": -1, "algorithms": [{"algorithm": "v1"}], "seeds": [1], "epochs": 1}"#, "lambda"),
    ];
    for (text, field) in cases {
        match parse_spec(text) {
            Err(Error::Spec { path, .. }) => assert!(path.starts_with(field), "{path} vs {field}"),
            other => panic!("{field}: expected spec error, got {other:?}"),
        }
    }
}

#[test]
fn bad_entries_fail_before_running() {
    let base = |entry: &str| {
        format!(
            r#"{{"dataset": {{"synthetic": {{"n": 50, "d": 3}}}}, "loss": "c",
                "algorithms": [{entry}], "seeds": [1], "epochs": 1}}"#
        )
    };
    for entry in [
        r#"{"algorithm": "v9"}"#,
        r#"{"algorithm": "ST-v1"}"#,
        r#"{"algorithm": "ST-v1", "t": 50, "eta_f": 0.1}"#,
        r#"{"algorithm": "v1", "overrides": {"gamma": 3.0}}"#,
    ] {
        let spec = parse_spec(&base(entry)).unwrap();
        assert!(matches!(run_experiment(&spec), Err(Error::Spec { .. })), "{entry}");
    }
    let missing = parse_spec(
        r#"{"dataset": {"path": "/nonexistent/x.libsvm"}, "loss": "a", "algorithms": [{"algorithm": "v1"}], "seeds": [1], "epochs": 1}"#,
    )
    .unwrap();
    assert!(run_experiment(&missing).unwrap_err().is_data_error());
}

#[test]
fn lambda_rules_scale_with_size() {
    let w8a = LambdaSpec::Rule("paper:w8a".into());
    assert_eq!(w8a.resolve(100, 5).unwrap(), 1e-4);
    assert_eq!(LambdaSpec::Rule("a9a".into()).resolve(1000, 5).unwrap(), 1e-6);
    let g = LambdaSpec::Rule("gisette".into()).resolve(400, 100).unwrap();
    assert!((g - 2e-7).abs() < 1e-20);
    assert!(LambdaSpec::Rule("nope".into()).resolve(1, 1).is_err());
}
