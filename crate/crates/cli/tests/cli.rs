use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_circle-displace"))
}

fn here(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a CSV, without the provenance and header lines.
fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn error_code(out: &Output) -> String {
    assert!(!out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error report is JSON");
    assert!(doc["error"]["message"].is_string());
    doc["error"]["code"].as_str().unwrap().to_string()
}

#[test]
fn golden_files() {
    let cases: [(&str, &[&str]); 4] = [
        (
            "disp_rotation.csv",
            &["disp", "--map", "rotation:0.3", "--x0", "0.1", "--n", "5"],
        ),
        (
            "orbit_rotation.csv",
            &["orbit", "--map", "rotation:0.25", "--x0", "0.5", "--n", "4"],
        ),
        (
            "isi_constant.csv",
            &[
                "isi",
                "--model",
                r#"{"kind":"perfect_integrator","I":2.0,"A":0.0}"#,
                "--n",
                "4",
            ],
        ),
        (
            "shred_x_squared.csv",
            &["shred", "--map", "unit_graph:x_squared", "--eps", "0.5,0.1,0.01,0.001"],
        ),
    ];
    for (file, args) in cases {
        let expected = std::fs::read_to_string(here(&format!("golden/{file}"))).unwrap();
        assert_eq!(stdout_ok(args), expected, "{file}");
    }
}

#[test]
fn rotation_displacements_are_constant() {
    let out = stdout_ok(&["disp", "--map", "rotation:0.3", "--x0", "0.1", "--n", "5"]);
    let r = rows(&out);
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|row| row[1] == 0.3));
}

#[test]
fn squaring_shreds_increase_to_one() {
    let out = stdout_ok(&["shred", "--map", "unit_graph:x_squared", "--eps", "0.5,0.1,0.01,0.001"]);
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    let shreds: Vec<f64> = r.iter().map(|row| row[5]).collect();
    assert!(shreds.windows(2).all(|w| w[0] < w[1]), "{shreds:?}");
    assert!(shreds.iter().all(|&z| z > 0.0 && z < 1.0));
}

#[test]
fn wass_on_two_diracs() {
    let a = here("fixtures/dirac_0.2.csv");
    let b = here("fixtures/dirac_0.7.csv");
    let out = stdout_ok(&["wass", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert_eq!(out, "0.5\n");
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let args = ["pushforward", "--map", "conjugated:golden,0.5", "--m", "2000"];
    let first = bin().args(args).env("CIRCLE_DISPLACE_THREADS", "1").output().unwrap();
    let second = bin().args(args).env("CIRCLE_DISPLACE_THREADS", "4").output().unwrap();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# circle-displace"));
    assert_eq!(lines.next().unwrap(), "atom,weight");

    let d = [
        "density",
        "--map",
        "conjugated:golden,0.5",
        "--grid",
        "300",
        "--clustered",
    ];
    assert_eq!(stdout_ok(&d), stdout_ok(&d));
}

#[test]
fn provenance_echoes_the_parsed_config() {
    let out = stdout_ok(&["disp", "--map", r#"{"family":"rotation","rho":0.3}"#, "--n", "2"]);
    let first = out.lines().next().unwrap();
    let doc: serde_json::Value = serde_json::from_str(first.splitn(4, ' ').nth(3).unwrap()).unwrap();
    assert_eq!(doc["command"], "disp");
    assert_eq!(doc["map"]["family"], "rotation");
    assert_eq!(doc["n"], 2);
    assert_eq!(doc["rng_seed"], 0);
    // shorthand and JSON describe the same run
    let short = stdout_ok(&["disp", "--map", "rotation:0.3", "--n", "2"]);
    assert_eq!(out, short);
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("orbit.csv");
    let args = ["orbit", "--map", "arnold:0.25,0.9", "--n", "50"];
    let mut with_out: Vec<&str> = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let status = run(&with_out);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout_ok(&args));
}

#[test]
fn measures_written_by_sample_read_back_by_wass() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let sample = [
        "sample",
        "--map",
        "conjugated:golden,0.5",
        "--n",
        "20000",
        "--out",
        a.to_str().unwrap(),
    ];
    assert!(run(&sample).status.success());
    let push = [
        "pushforward",
        "--map",
        "conjugated:golden,0.5",
        "--m",
        "20000",
        "--out",
        b.to_str().unwrap(),
    ];
    assert!(run(&push).status.success());
    let d: f64 = stdout_ok(&["wass", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()])
        .trim()
        .parse()
        .unwrap();
    assert!(d > 0.0 && d < 0.01, "{d}");
    let same: f64 = stdout_ok(&["wass", "--a", a.to_str().unwrap(), "--b", a.to_str().unwrap()])
        .trim()
        .parse()
        .unwrap();
    assert_eq!(same, 0.0);
}

#[test]
fn json_reports() {
    let rot: serde_json::Value = serde_json::from_str(&stdout_ok(&["rotnum", "--map", "arnold:0.5,0.9"])).unwrap();
    assert_eq!(rot["classification"], "rational");
    assert_eq!(rot["value"], 0.5);

    let per: serde_json::Value =
        serde_json::from_str(&stdout_ok(&["periodic", "--map", "unit_graph:x_squared"])).unwrap();
    assert_eq!(per["q"], 1);
    assert_eq!(per["kind"], "isolated");

    let un: serde_json::Value = serde_json::from_str(&stdout_ok(&[
        "universal-n",
        "--map",
        "unit_graph:x_squared",
        "--eps",
        "0.1",
    ]))
    .unwrap();
    assert_eq!(un["n"], 3);

    let conc: serde_json::Value = serde_json::from_str(&stdout_ok(&["conc", "--map", "rotation:0.3"])).unwrap();
    assert_eq!(conc["width"], 0.0);
}

#[test]
fn errors_are_machine_readable() {
    assert_eq!(error_code(&run(&["disp", "--map", "bogus:1", "--n", "3"])), "E_PARSE");
    assert_eq!(error_code(&run(&["disp", "--n", "3"])), "E_USAGE");
    assert_eq!(error_code(&run(&["density", "--map", "rotation:0.3"])), "E_SINGULAR");
    assert_eq!(
        error_code(&run(&["shred", "--map", "unit_graph:x_squared", "--eps", "1.5"])),
        "E_PARAM"
    );
    assert_eq!(
        error_code(&run(&["universal-n", "--map", "arnold:0.618,0.5", "--eps", "0.1"])),
        "E_IRRATIONAL"
    );
    assert_eq!(
        error_code(&run(&["disp", "--map", "arnold:0.2,1.5", "--n", "3"])),
        "E_PARAM"
    );
    assert_eq!(
        error_code(&run(&["wass", "--a", "/nonexistent.csv", "--b", "/nonexistent.csv"])),
        "E_IO"
    );
    let bad_threads = bin()
        .args(["disp", "--map", "rotation:0.3", "--n", "2"])
        .env("CIRCLE_DISPLACE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(error_code(&bad_threads), "E_PARSE");
}

#[test]
fn isi_measure_matches_sample_of_firing_map() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("isi.csv");
    let b = dir.path().join("sample.csv");
    let model = r#"{"kind":"perfect_integrator","I":1.2,"A":0.5}"#;
    let map = format!(r#"{{"family":"firing","model":{model}}}"#);
    assert!(
        run(&["isi", "--model", model, "--n", "2000", "--measure", a.to_str().unwrap()])
            .status
            .success()
    );
    assert!(
        run(&["sample", "--map", &map, "--n", "2000", "--out", b.to_str().unwrap()])
            .status
            .success()
    );
    let strip = |p: &Path| -> String {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}
