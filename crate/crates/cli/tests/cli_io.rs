//! End-to-end I/O behavior: JSON round trips, report schema conformance,
//! SVG determinism, and process exit codes.

use std::io::Write;
use std::process::Command;

use serde_json::Value;

use sdma_cli::config::{AnalysisConfig, Framework};
use sdma_cli::ingest::read_estimates;
use sdma_cli::json_out::{file_digest, to_json_string};
use sdma_cli::report::{run_analysis, Provenance};
use sdma_cli::svg::render_forest_svg;
use sdma_core::{ModelKind, ScaleTag};

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(content.as_bytes()).unwrap();
    file
}

const TOY_CSV: &str = "label,team,y,se\n\
    a,alpha,0.30,0.12\n\
    b,alpha,0.25,0.15\n\
    c,bravo,0.10,0.18\n";

fn toy_report(config: &AnalysisConfig, csv: &str) -> sdma_cli::Report {
    let file = write_temp(csv);
    let data = read_estimates(file.path(), config).unwrap();
    let provenance = Provenance {
        tool: "sdma".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input_digest: file_digest(file.path()).unwrap(),
        input_path: "toy.csv".into(),
    };
    run_analysis(config, &data, provenance).unwrap()
}

#[test]
fn json_round_trip_is_exact() {
    let report = toy_report(&AnalysisConfig::default(), TOY_CSV);
    let text = to_json_string(&report).unwrap();
    let parsed: Value = serde_json::from_str(&text).unwrap();
    let original = serde_json::to_value(&report).unwrap();
    assert_eq!(parsed, original);
}

#[test]
fn csv_to_json_preserves_inputs_bitwise() {
    let report = toy_report(&AnalysisConfig::default(), TOY_CSV);
    let text = to_json_string(&report).unwrap();
    let parsed: Value = serde_json::from_str(&text).unwrap();
    let estimates = parsed["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 3);
    assert_eq!(estimates[0]["y"].as_f64().unwrap().to_bits(), 0.30f64.to_bits());
    assert_eq!(estimates[1]["se"].as_f64().unwrap().to_bits(), 0.15f64.to_bits());
}

#[test]
fn digest_changes_with_one_byte() {
    let a = write_temp(TOY_CSV);
    let changed = TOY_CSV.replace("0.30", "0.31");
    let b = write_temp(&changed);
    let da = file_digest(a.path()).unwrap();
    let db = file_digest(b.path()).unwrap();
    assert_eq!(da.len(), 64);
    assert_ne!(da, db);
}

#[test]
fn identical_reports_emit_identical_bytes() {
    let config = AnalysisConfig::default();
    let report = toy_report(&config, TOY_CSV);
    assert_eq!(to_json_string(&report).unwrap(), to_json_string(&report).unwrap());
    assert_eq!(render_forest_svg(&report), render_forest_svg(&report));
}

#[test]
fn forest_svg_structure() {
    let config = AnalysisConfig {
        framework: Framework::Classical,
        ..AnalysisConfig::default()
    };
    let report = toy_report(&config, TOY_CSV);
    let svg = render_forest_svg(&report);
    assert_eq!(svg.matches("class=\"whisker\"").count(), 3);
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn ratio_ingestion_round_trips_through_display_transform() {
    // exp is the exact inverse of the ln taken at ingestion.
    let config = AnalysisConfig {
        input_scale: sdma_cli::InputScale::Ratio,
        scale: ScaleTag::LogOr,
        ..AnalysisConfig::default()
    };
    let ratios = [1.31, 0.89, 2.93, 1.0001];
    let csv = format!(
        "label,team,y,se\n{}",
        ratios
            .iter()
            .enumerate()
            .map(|(i, r)| format!("r{i},t{i},{r},0.1\n"))
            .collect::<String>()
    );
    let file = write_temp(&csv);
    let data = read_estimates(file.path(), &config).unwrap();
    for (rec, &ratio) in data.set.records().iter().zip(&ratios) {
        assert!((rec.y.exp() - ratio).abs() <= 1e-12 * ratio);
    }
}

#[test]
fn log_bf_reported_even_when_bf_overflows() {
    // Hundreds of precise agreeing estimates: the standard Bayesian fit's
    // effect Bayes factor overflows f64, the log field stays finite and
    // the natural-scale fields go null.
    let csv = format!(
        "label,team,y,se\n{}",
        (0..400)
            .map(|i| format!("r{i},t{i},0.5,0.01\n"))
            .collect::<String>()
    );
    let config = AnalysisConfig {
        framework: Framework::Bayes,
        model_kind: ModelKind::Common,
        ..AnalysisConfig::default()
    };
    let report = toy_report(&config, &csv);
    let standard = &report.bayesian.as_ref().unwrap().standard;
    assert!(standard.fit.log_bf10_effect.is_finite());
    assert!(standard.fit.log_bf10_effect > 700.0);
    assert!(standard.bf10_effect.is_none());

    let text = to_json_string(&report).unwrap();
    let parsed: Value = serde_json::from_str(&text).unwrap();
    assert!(parsed["bayesian"]["standard"]["log_bf10_effect"].is_number());
    assert!(parsed["bayesian"]["standard"]["bf10_effect"].is_null());
}

#[test]
fn ratio_forest_reference_line_labeled_one() {
    let config = AnalysisConfig {
        framework: Framework::Classical,
        scale: ScaleTag::LogOr,
        model_kind: ModelKind::Common,
        input_scale: sdma_cli::InputScale::Ratio,
        ..AnalysisConfig::default()
    };
    let csv = "label,team,y,se\na,alpha,1.31,0.12\nb,bravo,1.10,0.15\n";
    let report = toy_report(&config, csv);
    let svg = render_forest_svg(&report);
    // The additive tick at zero is displayed as the ratio 1.00.
    assert!(svg.contains(">1.00</text>"));
}

// --- schema conformance ------------------------------------------------

/// Minimal JSON Schema interpreter covering the subset the shipped schema
/// uses: type (string or list), enum, required, properties, items, oneOf,
/// and `$ref` into `#/definitions`.
fn validate(schema: &Value, value: &Value, root: &Value, path: &str, errors: &mut Vec<String>) {
    let schema = if let Some(reference) = schema.get("$ref").and_then(Value::as_str) {
        let key = reference.trim_start_matches("#/definitions/");
        &root["definitions"][key]
    } else {
        schema
    };

    if let Some(one_of) = schema.get("oneOf").and_then(Value::as_array) {
        let ok = one_of.iter().any(|sub| {
            let mut sub_errors = Vec::new();
            validate(sub, value, root, path, &mut sub_errors);
            sub_errors.is_empty()
        });
        if !ok {
            errors.push(format!("{path}: no oneOf branch matched"));
        }
        return;
    }

    if let Some(required_type) = schema.get("type") {
        let names: Vec<&str> = match required_type {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let actual = match value {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Number(_) => "number",
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        if !names.contains(&actual) {
            errors.push(format!("{path}: expected {names:?}, got {actual}"));
            return;
        }
        if value.is_null() {
            return; // nullable and null: nothing more to check
        }
    }

    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{path}: {value} not in {allowed:?}"));
        }
    }

    if let Some(object) = value.as_object() {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !object.contains_key(key) {
                    errors.push(format!("{path}: missing required key '{key}'"));
                }
            }
        }
        if let Some(properties) = schema.get("properties").and_then(Value::as_object) {
            for (key, sub) in properties {
                if let Some(child) = object.get(key) {
                    validate(sub, child, root, &format!("{path}.{key}"), errors);
                }
            }
        }
    }

    if let (Some(items), Some(array)) = (schema.get("items"), value.as_array()) {
        for (i, child) in array.iter().enumerate() {
            validate(items, child, root, &format!("{path}[{i}]"), errors);
        }
    }
}

#[test]
fn report_validates_against_shipped_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    for config in [
        AnalysisConfig::default(),
        AnalysisConfig {
            framework: Framework::Classical,
            model_kind: ModelKind::Common,
            scale: ScaleTag::Beta,
            ..AnalysisConfig::default()
        },
        AnalysisConfig {
            framework: Framework::Bayes,
            scale: ScaleTag::LogRr,
            ..AnalysisConfig::default()
        },
    ] {
        let report = toy_report(&config, TOY_CSV);
        let value = serde_json::to_value(&report).unwrap();
        let mut errors = Vec::new();
        validate(&schema, &value, &schema, "$", &mut errors);
        assert!(errors.is_empty(), "schema violations: {errors:#?}");
    }
}

// --- process-level behavior --------------------------------------------

fn sdma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdma"))
}

#[test]
fn analyze_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    std::fs::write(&good, TOY_CSV).unwrap();
    let status = sdma()
        .args(["analyze", "--input", good.to_str().unwrap(), "--scale", "smd"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    // Validation failure: negative standard error.
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "label,team,y,se\na,alpha,0.1,-0.1\n").unwrap();
    let status = sdma()
        .args(["analyze", "--input", bad.to_str().unwrap(), "--scale", "smd"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    // Validation failure: random-effects fit on a single estimate.
    let single = dir.path().join("single.csv");
    std::fs::write(&single, "label,team,y,se\na,alpha,0.1,0.1\n").unwrap();
    let status = sdma()
        .args(["analyze", "--input", single.to_str().unwrap(), "--scale", "smd", "--model", "random"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn version_subcommand() {
    let output = sdma().arg("version").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.starts_with("sdma "));
}

#[test]
fn simulate_custom_grid_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    std::fs::write(&grid, "k,beta,tau,n_obs\n3,0.0,0.0,50\n").unwrap();

    let csv_out = dir.path().join("sim.csv");
    let status = sdma()
        .args([
            "simulate",
            "--grid",
            &format!("custom:{}", grid.display()),
            "--reps",
            "50",
            "--seed",
            "9",
            "--out",
            csv_out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let table = std::fs::read_to_string(&csv_out).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("k,beta,tau,n_obs"));
    assert_eq!(lines.count(), 2); // one row per condition x method

    let json_out = dir.path().join("sim.json");
    let status = sdma()
        .args([
            "simulate",
            "--grid",
            &format!("custom:{}", grid.display()),
            "--reps",
            "50",
            "--seed",
            "9",
            "--out",
            json_out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success());
    let parsed: Value = serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    let reports = parsed.as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert!(reports[0]["adjusted"]["avg_se"].is_number());
    assert_eq!(reports[0]["n_failed"], 0);
}
