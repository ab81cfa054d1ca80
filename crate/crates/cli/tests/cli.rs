use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wannier_decay::csv::parse_numeric;
use wannier_decay::rmt::{survival_closed, RmtSpec};

fn wsdecay(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsdecay"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = wsdecay(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    parse_numeric(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_line(o: &Output) -> String {
    let text = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(text.trim_end().lines().count(), 1, "stderr: {text}");
    text.trim_end().to_string()
}

#[test]
fn rmt_curve_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["rmt-curve", "--q", "1", "--th", "53.2", "--periods", "200"],
        dir.path(),
    );
    let (header, rows) = table(&dir.path().join("rmt_curve.csv"));
    assert_eq!(header, ["t_over_T_omega", "P"]);
    assert_eq!(rows.len(), 201);
    let tw = 2.0 * std::f64::consts::PI;
    let spec = RmtSpec::new(1, 53.2 * tw).unwrap();
    for row in rows {
        assert_eq!(row[1], survival_closed(row[0] * tw, &spec).unwrap());
    }
}

#[test]
fn empty_config_lists_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    fs::write(&cfg, "# nothing here\n").unwrap();
    let o = wsdecay(
        &["quantum-decay", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    let line = stderr_line(&o);
    assert!(line.starts_with("error[config]:"), "{line}");
    assert!(
        line.contains("missing keys: hbar,omega,epsilon,q"),
        "{line}"
    );
    assert!(
        !dir.path().join("out").exists(),
        "validation must precede output"
    );
}

#[test]
fn bad_arguments_fail_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = wsdecay(&["quantum-decay", "--periods", "ten"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).starts_with("error[usage]:"));

    let o = wsdecay(&["classical-decay", "--members", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).contains("members"));

    let o = wsdecay(&["quantum-decay", "--p1", "-20"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).starts_with("error[config]:"));
}

#[test]
fn config_file_sets_the_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "hbar = 0.1\nomega = 1\nepsilon = 3\nq = 2\nseed = 9 # ensemble\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(
        &[
            "rmt-curve",
            "--config",
            cfg.to_str().unwrap(),
            "--th",
            "36.5",
            "--periods",
            "3",
        ],
        &out,
    );
    let text = fs::read_to_string(out.join("rmt_curve.csv")).unwrap();
    assert!(
        text.contains("# q=2\n") && text.contains("# seed=9\n") && text.contains("# rmt_q=2\n")
    );
}

#[test]
fn classical_decay_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "classical-decay",
        "--members",
        "100",
        "--periods",
        "12",
        "--seed",
        "4",
    ];
    ok(&args, &dir.path().join("a"));
    ok(&args, &dir.path().join("b"));
    let read = |d: &str| fs::read(dir.path().join(d).join("classical_survival.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let (_, rows) = table(&dir.path().join("a/classical_survival.csv"));
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0], [0.0, 1.0]);
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/classical_fit.json")).unwrap())
            .unwrap();
    assert_eq!(fit["result"]["accepted"], 100);
    assert!(fit["inputs_sha256"]["classical_survival.csv"].is_string());
}

#[test]
fn every_output_starts_with_the_parameter_block() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["monodromy-map", "--grid-n", "6", "--periods", "2"],
        dir.path(),
    );
    for name in ["monodromy_map.csv", "manifest.txt"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# experiment=monodromy-map\n"), "{name}");
        assert!(text.contains("# f0="), "{name}");
    }
    let (header, rows) = table(&dir.path().join("monodromy_map.csv"));
    assert_eq!(header, ["x", "p", "log10_norm"]);
    assert_eq!(rows.len(), 36);
    // p outer, x inner.
    assert_eq!(rows[0][1], rows[5][1]);
    assert!(rows[6][1] > rows[0][1]);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("file=monodromy_map.csv sha256="));
    assert!(manifest.contains("file=monodromy_map.json sha256="));
}

#[test]
fn strobe_with_no_periods_returns_the_seeds() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["strobe", "--orbits", "4", "--periods", "0"], dir.path());
    let (_, rows) = table(&dir.path().join("strobe.csv"));
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i as f64);
        assert_eq!(row[1], 0.0);
        assert!((row[2] - std::f64::consts::PI).abs() < 1e-12);
    }
}

const SMALL_GRID: [&str; 4] = ["--grid-n", "2048", "--cells", "6"];

#[test]
fn single_ratio_scan_reduces_to_the_resonant_decay() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["quantum-decay", "--periods", "3", "--snapshot-stride", "3"];
    args.extend(SMALL_GRID);
    ok(&args, &dir.path().join("q"));
    let mut args = vec!["resonance-scan", "--ratio", "1", "--t-star", "3"];
    args.extend(SMALL_GRID);
    ok(&args, &dir.path().join("s"));

    let (_, decay) = table(&dir.path().join("q/quantum_survival.csv"));
    let (header, scan) = table(&dir.path().join("s/resonance_scan.csv"));
    assert_eq!(header, ["ratio", "f0", "P_3T"]);
    assert_eq!(scan.len(), 1);
    assert_eq!(scan[0][2], decay[3][1]);

    let (_, density) = table(&dir.path().join("q/quantum_density.csv"));
    assert_eq!(density.len(), 2048);
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("q/quantum_fit.json")).unwrap())
            .unwrap();
    assert!(fit["result"]["ledger_deviation"].as_f64().unwrap().abs() < 1e-8);
    let peaks = fs::read_to_string(dir.path().join("s/peak_fits.json")).unwrap();
    assert!(
        peaks.contains("not enough samples"),
        "one point cannot be fitted"
    );
}

#[test]
fn width_scaling_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "width-scaling",
        "--points",
        "11",
        "--lo",
        "0.9",
        "--hi",
        "1.1",
        "--t-star",
        "1,2,3,4",
        "--workers",
        "1",
    ];
    args.extend(SMALL_GRID);
    ok(&args, dir.path());
    let (header, rows) = table(&dir.path().join("resonance_scan.csv"));
    assert_eq!(header, ["ratio", "f0", "P_1T", "P_2T", "P_3T", "P_4T"]);
    assert_eq!(rows.len(), 11);
    assert!((rows[5][0] - 1.0).abs() < 1e-12);
    assert!(rows
        .iter()
        .all(|r| r[2..].iter().all(|p| *p > 0.0 && *p <= 1.0 + 1e-9)));
    let scaling: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("width_scaling.json")).unwrap())
            .unwrap();
    assert!(scaling["result"]["scaling"].is_object());
}

#[test]
fn amplitude_statistics_report_all_classes() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["amp-stats", "--periods", "2"];
    args.extend(SMALL_GRID);
    ok(&args, dir.path());
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("amp_stats.json")).unwrap())
            .unwrap();
    for class in ["GOE", "GUE", "GSE"] {
        assert!(
            stats["result"]["ks_distance"][class].as_f64().is_some(),
            "{class}: {stats}"
        );
    }
    let (header, rows) = table(&dir.path().join("amp_histogram.csv"));
    assert_eq!(header, ["log10_x", "density", "goe", "gue", "gse"]);
    assert_eq!(rows.len(), 40);
}
