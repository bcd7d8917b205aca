use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dlife(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlife"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn assert_valid(report: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/report-1.0.0.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn sample_to(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["sample"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output", path.to_str().unwrap()]);
    let out = dlife(&full);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows(csv).iter().map(|r| r[j].parse().unwrap()).collect()
}

fn fit_params(report: &Value, model: &str) -> Value {
    report["results"]["fits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["model"] == model)
        .unwrap()["parameters"]
        .clone()
}

#[test]
fn sample_geometric_without_censoring() {
    let out = dlife(&["sample", "--model", "ipd", "--alpha", "0.3", "--zeta", "0", "--count", "5", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("time,event\n"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1] == "1"));
}

#[test]
fn sample_censor_rate_and_determinism() {
    let args = [
        "sample", "--model", "w1", "--eta", "300", "--beta", "2.3", "--count", "100", "--censor-rate", "0.75", "--seed", "7",
    ];
    let a = dlife(&args);
    let b = dlife(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let censored = rows(&stdout(&a)).iter().filter(|r| r[1] == "0").count();
    // Binomial(100, 0.75): four standard deviations either side.
    assert!((58..=92).contains(&censored), "{censored}");
    let mut other = args.to_vec();
    other[args.len() - 1] = "8";
    assert_ne!(dlife(&other).stdout, a.stdout);
}

#[test]
fn sample_without_seed_prints_one() {
    let out = dlife(&["sample", "--model", "weibull", "--eta", "10", "--beta", "1", "--count", "3"]);
    assert_eq!(code(&out), 0);
    let seed: u64 = stderr(&out).trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let again = dlife(&["sample", "--model", "weibull", "--eta", "10", "--beta", "1", "--count", "3", "--seed", &seed.to_string()]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn sample_rejects_bad_parameters() {
    for args in [
        vec!["sample", "--model", "ipd", "--alpha", "1.5", "--zeta", "0", "--count", "5", "--seed", "1"],
        vec!["sample", "--model", "w1", "--eta", "300", "--count", "5", "--seed", "1"],
        vec!["sample", "--model", "w1", "--eta", "300", "--beta", "2", "--count", "5", "--censor-rate", "1", "--seed", "1"],
        vec!["sample", "--model", "w1", "--eta", "300", "--beta", "2", "--count", "0", "--seed", "1"],
        vec!["sample", "--model", "gamma", "--count", "5"],
    ] {
        assert_eq!(code(&dlife(&args)), 2, "{args:?}");
    }
}

#[test]
fn sampled_data_fits_and_report_validates() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_to(
        dir.path(),
        "w1.csv",
        &["--model", "w1", "--eta", "300", "--beta", "2.3", "--count", "500", "--censor-rate", "0.96", "--seed", "11"],
    );
    let out = dlife(&["fit", "--input", data.to_str().unwrap(), "--model", "all"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&out);
    assert_valid(&report);
    assert_eq!(report["command"], "fit");
    let summary = &report["results"]["data"];
    assert_eq!(summary["size"], 500);
    assert_eq!(
        summary["failures"].as_u64().unwrap() + summary["censors"].as_u64().unwrap(),
        500
    );
    let w1 = fit_params(&report, "w1")["eta"].as_f64().unwrap();
    let weibull = fit_params(&report, "weibull")["eta"].as_f64().unwrap();
    assert!((w1 - weibull).abs() / w1 < 0.05, "{w1} vs {weibull}");
    for fit in report["results"]["fits"].as_array().unwrap() {
        assert_eq!(fit["derived"]["quantiles"].as_array().unwrap().len(), 4);
        assert!(fit["ageing_report"].is_object());
    }
}

#[test]
fn all_censored_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "c.csv", "time,event\n3,0\n9,0\n");
    let out = dlife(&["fit", "--input", data.to_str().unwrap(), "--model", "ipd"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("AllCensored"));
    let report = json(&out);
    assert_valid(&report);
    assert_eq!(report["results"]["fits"][0]["status"], "AllCensored");
}

#[test]
fn geometric_data_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_to(
        dir.path(),
        "geo.csv",
        &["--model", "ipd", "--alpha", "0.05", "--zeta", "0", "--count", "2000", "--seed", "3"],
    );
    let out = dlife(&["fit", "--input", data.to_str().unwrap(), "--model", "ipd"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    let ageing = &report["results"]["fits"][0]["ageing_report"];
    let ratio = ageing["ratio_zeta_alpha"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ratio), "{ratio}");
    let expected = if ratio <= 1e-5 { "Boundary" } else { "Plausible" };
    assert_eq!(ageing["plausibility_flag"], expected);
}

#[test]
fn grouped_and_flat_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write(dir.path(), "f.csv", "time,event\n4,1\n4,1\n7,1\n9,0\n12,1\n12,0\n15,1\n");
    let grouped = write(dir.path(), "g.csv", "n,count,event\n4,2,1\n7,1,1\n9,1,0\n12,1,1\n12,1,0\n15,1,1\n");
    let a = json(&dlife(&["fit", "--input", flat.to_str().unwrap(), "--model", "w1"]));
    let b = json(&dlife(&["fit", "--input", grouped.to_str().unwrap(), "--model", "w1"]));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(b["inputs"]["format"], "grouped");
}

#[test]
fn malformed_rows_exit_2_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    for (text, row) in [
        ("time,event\n3,1\n-2,1\n", "row 3"),
        ("time,event\n3,1\n4,x\n", "row 3"),
        ("n,count,event\n3,0,1\n", "row 2"),
        ("when,what\n3,1\n", "row 1"),
    ] {
        let data = write(dir.path(), "bad.csv", text);
        let out = dlife(&["fit", "--input", data.to_str().unwrap()]);
        assert_eq!(code(&out), 2, "{text}");
        assert!(stderr(&out).contains(row), "{}", stderr(&out));
    }
    assert_eq!(code(&dlife(&["fit", "--input", "/nonexistent/data.csv"])), 2);
}

#[test]
fn curves_from_parameters() {
    let out = dlife(&["curves", "--model", "w1", "--eta", "306.814", "--beta", "2.320", "--range", "1:600"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let n = column(&text, "n");
    let cdf = column(&text, "w1_cdf");
    assert_eq!(n.len(), 600);
    let oracle = 1.0 - (-(307.0f64 / 306.814).powf(2.32)).exp();
    assert!((cdf[306] - oracle).abs() < 1e-12);
    assert!((cdf[306] - (1.0 - (-1.0f64).exp())).abs() < 1e-3);
}

#[test]
fn ipd_is_more_optimistic_at_extended_range() {
    let out = dlife(&[
        "curves", "--model", "ipd", "--model", "w1", "--alpha", "7.037e-12", "--zeta", "1.349e-5", "--eta", "306.814", "--beta",
        "2.320", "--range", "400:1000", "--step", "100",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let ipd = column(&text, "ipd_cdf");
    let w1 = column(&text, "w1_cdf");
    assert_eq!(ipd.len(), 7);
    assert!(ipd.iter().zip(&w1).all(|(a, b)| a < b));
}

#[test]
fn curves_from_dataset_and_range_rules() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_to(
        dir.path(),
        "d.csv",
        &["--model", "w1", "--eta", "50", "--beta", "1.5", "--count", "200", "--censor-rate", "0.3", "--seed", "5"],
    );
    let path = data.to_str().unwrap();
    let out = dlife(&["curves", "--input", path]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    for col in ["ipd_cdf", "w1_hazard", "weibull_survival", "km_survival", "km_cdf"] {
        assert!(header.split(',').any(|h| h == col), "{header}");
    }
    let km = column(&text, "km_survival");
    assert!(km.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(code(&dlife(&["curves", "--input", path, "--range", "9:3"])), 2);
    assert_eq!(code(&dlife(&["curves", "--input", path, "--range", "1:100000"])), 2);
    let extended = dlife(&["curves", "--input", path, "--range", "1:1000", "--extend-range", "--step", "10"]);
    assert_eq!(code(&extended), 0);
    assert_eq!(rows(&stdout(&extended)).len(), 100);
    assert_eq!(code(&dlife(&["curves", "--input", path, "--eta", "3"])), 2);
    assert_eq!(code(&dlife(&["curves", "--model", "w1", "--eta", "3"])), 2);
}

#[test]
fn diagnose_examples() {
    let out = dlife(&["diagnose", "--model", "ipd", "--alpha", "0.1", "--zeta", "0.2"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_valid(&report);
    let ageing = &report["results"]["reports"][0]["ageing_report"];
    assert_eq!(ageing["plausibility_flag"], "ImplausibleRatioAboveOne");
    assert!(!report["warnings"].as_array().unwrap().is_empty());

    let report = json(&dlife(&["diagnose", "--model", "w1", "--eta", "100", "--beta", "1"]));
    assert_eq!(report["results"]["reports"][0]["ageing_report"]["ageing_class"], "NoAgeing");

    let report = json(&dlife(&["diagnose", "--model", "w1", "--eta", "1000", "--beta", "10"]));
    assert_valid(&report);
    assert!(report["results"]["reports"][0]["ageing_report"]["inflection_point"].as_u64().unwrap() > 1000);
}

#[test]
fn diagnose_dataset_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_to(
        dir.path(),
        "d.csv",
        &["--model", "w1", "--eta", "80", "--beta", "2.5", "--count", "300", "--seed", "9"],
    );
    let out = dlife(&["diagnose", "--input", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_valid(&report);
    assert_eq!(report["results"]["reports"].as_array().unwrap().len(), 3);
    let censored = write(dir.path(), "c.csv", "time,event\n5,0\n");
    assert_eq!(code(&dlife(&["diagnose", "--input", censored.to_str().unwrap(), "--model", "w1"])), 3);
}

fn experiment(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["experiment"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output", dir.to_str().unwrap()]);
    dlife(&full)
}

#[test]
fn experiment_ratio_bands_has_eight_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment(dir.path(), &["ratio-bands", "--replicates", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = PathBuf::from(stdout(&out).trim());
    assert_eq!(summary, dir.path().join("ratio-bands_summary.csv"));
    assert_eq!(rows(&fs::read_to_string(summary).unwrap()).len(), 8);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ratio-bands_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["replicates"], 2);
    assert!(dir.path().join("ratio-bands_raw.csv").exists());
}

#[test]
fn experiment_mttf_bounds_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment(dir.path(), &["mttf-bounds"]);
    assert_eq!(code(&out), 0);
    let raw = fs::read_to_string(dir.path().join("mttf-bounds_raw.csv")).unwrap();
    let header: Vec<&str> = raw.lines().next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == "holds").unwrap();
    let rows = rows(&raw);
    assert_eq!(rows.len(), 48);
    assert!(rows.iter().all(|r| r[j] == "true"));
}

#[test]
fn experiment_closeness_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = experiment(dir.path(), &["closeness", "--replicates", "2", "--seed", "99"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for file in ["closeness_summary.csv", "closeness_raw.csv", "closeness_paired.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn experiment_config_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "c.json",
        r#"{"experiment":"sup-distance","replicates":1,"sample_sizes":[],"parameter_grid":[[10,1],[100,1]],"censor_rates":[0],"master_seed":1}"#,
    );
    let out = experiment(dir.path(), &["--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(rows(&fs::read_to_string(dir.path().join("sup-distance_raw.csv")).unwrap()).len(), 2);

    let c = config.to_str().unwrap();
    assert_eq!(code(&experiment(dir.path(), &["mttf-bounds", "--config", c])), 2);
    assert_eq!(code(&experiment(dir.path(), &["no-such-study"])), 2);
    assert_eq!(code(&experiment(dir.path(), &["closeness", "--replicates", "0"])), 2);
    assert_eq!(code(&experiment(dir.path(), &[])), 2);
    let broken = write(dir.path(), "b.json", r#"{"experiment":"closeness","replicates":2}"#);
    assert_eq!(code(&experiment(dir.path(), &["--config", broken.to_str().unwrap()])), 2);
    let bad_rate = write(
        dir.path(),
        "r.json",
        r#"{"experiment":"closeness","replicates":1,"sample_sizes":[50],"parameter_grid":[[10,1]],"censor_rates":[1.5],"master_seed":1}"#,
    );
    assert_eq!(code(&experiment(dir.path(), &["--config", bad_rate.to_str().unwrap()])), 2);
}
