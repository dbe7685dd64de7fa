use std::fs;
use std::path::{Path, PathBuf};

use realitygame_cli::experiment::{run_experiment, schemas_for};
use realitygame_cli::output::ALL_SCHEMAS;
use realitygame_cli::spec::{load_spec, parse_spec, ExperimentKind};

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

const SMALL: [&str; 6] = [
    "kind = bias-dynamics\nmap = self-defeating\nensemble = 3\nhorizon = 300\n",
    "kind = wealth-dynamics\nmap = identity\nensemble = 2\nhorizon = 1000\n",
    "kind = subjective-distribution\nmap = identity\nhorizon = 1000\n",
    "kind = rational-curve\nmap = arctan\nalpha = 2\nn_players = 1\n",
    "kind = inefficiency\nmap = constant\nn_players = 200\nhorizon = 1000\nensemble = 8\nfit_lo = 20\n",
    "kind = table1\nn_players = 100\nhorizon = 1000\nensemble = 4\nfit_lo = 20\n",
];

#[test]
fn csv_headers_match_golden_file() {
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/csv_headers.txt")).unwrap();
    let expected: Vec<(String, String, String)> = golden
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split_whitespace();
            (
                parts.next().unwrap().to_string(),
                parts.next().unwrap().to_string(),
                parts.next().unwrap().to_string(),
            )
        })
        .collect();
    assert_eq!(expected.len(), ALL_SCHEMAS.len());
    for schema in ALL_SCHEMAS {
        assert!(
            expected
                .iter()
                .any(|(_, tag, header)| *tag == schema.tag() && *header == schema.columns.join(",")),
            "schema {} changed without updating the golden file",
            schema.tag()
        );
    }

    let tmp = tempfile::tempdir().unwrap();
    for (k, text) in SMALL.iter().enumerate() {
        let spec = parse_spec(text).unwrap();
        let out = tmp.path().join(k.to_string());
        run_experiment(&spec, &out).unwrap();
        for schema in schemas_for(spec.kind) {
            let (file, _, header) = expected.iter().find(|(_, tag, _)| *tag == schema.tag()).unwrap();
            let path = if spec.kind == ExperimentKind::Table1 && schema.name == "inefficiency" {
                out.join("inefficiency_constant-0.5.csv")
            } else {
                out.join(file)
            };
            assert_eq!(&first_line(&path), header, "{}", path.display());
        }
    }
}

#[test]
fn every_kind_writes_csv_svg_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    for (k, text) in SMALL.iter().enumerate() {
        let spec = parse_spec(text).unwrap();
        let out = tmp.path().join(k.to_string());
        let result = run_experiment(&spec, &out).unwrap();
        assert!(!result.summary.is_empty());
        let names: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().any(|n| n.ends_with(".csv")), "{names:?}");
        assert!(names.iter().any(|n| n.ends_with(".svg")), "{names:?}");
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["spec"]["kind"], spec.kind.name());
        assert_eq!(manifest["master_seed"], 0);
        let outputs = manifest["outputs"].as_array().unwrap();
        assert_eq!(outputs.len() + 1, names.len());
        for schema in schemas_for(spec.kind) {
            assert!(manifest["schemas"]
                .as_object()
                .unwrap()
                .values()
                .any(|v| v == &schema.tag()));
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical_apart_from_timestamps() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = parse_spec(SMALL[4]).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_experiment(&spec, &a).unwrap();
    run_experiment(&spec, &b).unwrap();
    for name in ["inefficiency.csv", "fits.csv", "inefficiency.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        let obj = v.as_object_mut().unwrap();
        obj.remove("started_unix");
        obj.remove("elapsed_seconds");
        v
    };
    assert_eq!(strip(&a.join("manifest.json")), strip(&b.join("manifest.json")));
}

#[test]
fn bias_rows_cover_every_toss_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = parse_spec(SMALL[0]).unwrap();
    run_experiment(&spec, tmp.path()).unwrap();
    let mut reader = csv::Reader::from_path(tmp.path().join("bias.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 300);
    assert_eq!(&rows[0][0], "1");
    assert_eq!(&rows[300][1], "1");
    for row in rows {
        let p: f64 = row[2].parse().unwrap();
        let q: f64 = row[3].parse().unwrap();
        assert!((q - (1.0 - p)).abs() < 1e-15);
    }
}

#[test]
fn subjective_distribution_shows_peaks() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = parse_spec(SMALL[2]).unwrap();
    let out = run_experiment(&spec, tmp.path()).unwrap();
    assert!(out.summary.contains("29 peaks"), "{}", out.summary);
    let mut reader = csv::Reader::from_path(tmp.path().join("subjective.csv")).unwrap();
    let total: f64 = reader.records().map(|r| r.unwrap()[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn table_has_six_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = parse_spec(SMALL[5]).unwrap();
    let out = run_experiment(&spec, tmp.path()).unwrap();
    assert_eq!(out.fits.len(), 6);
    let table = fs::read_to_string(tmp.path().join("table1.txt")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("alpha=2") && lines[0].contains("q(p)=1-p"));
    assert!(lines[2].starts_with("predicted"));
    for expected in ["0.30", "0.23", "0.25", "0.50", "1.00"] {
        assert!(lines[2].contains(expected), "{table}");
    }
    let mut reader = csv::Reader::from_path(tmp.path().join("fits.csv")).unwrap();
    assert_eq!(reader.records().count(), 6);
}

#[test]
fn bundled_specs_parse() {
    let mut count = 0;
    for entry in fs::read_dir(specs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "spec") {
            load_spec(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 6);
}

#[test]
fn binary_runs_a_spec_and_rejects_bad_input() {
    let exe = env!("CARGO_BIN_EXE_realitygame");
    let tmp = tempfile::tempdir().unwrap();
    let spec_path = tmp.path().join("run.spec");
    fs::write(&spec_path, SMALL[0]).unwrap();
    let out = tmp.path().join("out");
    let status = std::process::Command::new(exe)
        .args(["bias-dynamics", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "5", "--workers", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 5"));

    // Spec kind and subcommand disagree.
    let status = std::process::Command::new(exe)
        .args(["inefficiency", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!status.status.success());

    fs::write(&spec_path, "kind = bias-dynamics\nmap = arctan\nalpha = -1\n").unwrap();
    let status = std::process::Command::new(exe)
        .args(["bias-dynamics", "--spec"])
        .arg(&spec_path)
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("alpha"));
}
