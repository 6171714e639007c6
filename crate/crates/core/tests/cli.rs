use std::path::Path;
use std::process::{Command, Output};

use fluxtalk::config::DeviceConfig;

fn fluxtalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxtalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn dc_matrix_run_writes_matrix_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "m.json",
        r#"{"name":"m","seed":3,"study":{"kind":"dc_matrix","method":"dc_resonator"}}"#,
    );
    let out = tmp.path().join("out");
    let o = fluxtalk(&["run", &sc, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let matrix = std::fs::read_to_string(out.join("matrix.csv")).unwrap();
    let rows: Vec<Vec<&str>> = matrix.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0][0], "to\\from");
    for (i, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(row.len(), 8);
        for (j, cell) in row.iter().enumerate().skip(1) {
            assert_eq!(cell.is_empty(), i == j, "row {i} col {j}");
        }
    }
    // planted Q0 <- Q12 entry, in percent
    let q0_q12: f64 = rows[1][5].parse().unwrap();
    assert!((q0_q12 - 3.53).abs() < 0.05, "{q0_q12}");

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["study"], "dc_matrix");
    let scenario_hash = fluxtalk::scenario::sha256_hex(&std::fs::read(&sc).unwrap());
    assert_eq!(manifest["inputs"][0]["sha256"], scenario_hash.as_str());
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"], fluxtalk::scenario::sha256_hex(&bytes).as_str());
    }
}

#[test]
fn seed_flag_overrides_and_is_required() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "s.json",
        r#"{"name":"s","study":{"kind":"dc_qubit","to":0,"from":12}}"#,
    );
    let o = fluxtalk(&["run", &sc, "--out", tmp.path().join("a").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario::Invalid"), "{}", stderr(&o));

    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = fluxtalk(&["run", &sc, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("estimates.csv")).unwrap()
    };
    assert_eq!(run("5", "b"), run("5", "c"));
    assert_ne!(run("5", "b"), run("6", "d"));
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"name":"x","seed":1,"study":{"kind":"dc_qubit","to":0,"from":99}}"#,
            "device::UnknownQubit",
        ),
        (
            r#"{"name":"x","seed":1,"study":{"kind":"dc_matrix"}}"#,
            "scenario::Parse",
        ),
        (
            r#"{"name":"x","seed":1,"study":{"kind":"qpt","gate":"nope"}}"#,
            "device::InvalidConfig",
        ),
        (
            r#"{"name":"x","seed":1,"study":{"kind":"ac_matrix","freq_mhz":700}}"#,
            "device::FrequencyOutOfRange",
        ),
        (
            r#"{"name":"x","seed":1,"device_config":"missing.json","study":{"kind":"dc_matrix","method":"dc_qubit"}}"#,
            "config::ConfigIo",
        ),
    ];
    for (k, (text, name)) in cases.iter().enumerate() {
        let sc = write(tmp.path(), &format!("v{k}.json"), text);
        let o = fluxtalk(&[
            "run",
            &sc,
            "--out",
            tmp.path().join(format!("o{k}")).to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(name), "{text}: {}", stderr(&o));
    }
}

#[test]
fn unusable_traces_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = DeviceConfig::default_device();
    // readout noise far above the resonator's flux response
    cfg.noise.resonator_fit_sigma = 50.0;
    write(
        tmp.path(),
        "noisy.json",
        &serde_json::to_string_pretty(&cfg).unwrap(),
    );
    let sc = write(
        tmp.path(),
        "r.json",
        r#"{"name":"r","seed":1,"device_config":"noisy.json","study":{"kind":"dc_resonator","to":0,"from":12}}"#,
    );
    let o = fluxtalk(&["run", &sc, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("estimate::DegenerateTraces"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn full_realism_flag_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "q.json",
        r#"{"name":"q","seed":2,"study":{"kind":"dc_qubit","to":2,"from":0}}"#,
    );
    let out = tmp.path().join("o");
    let o = fluxtalk(&["run", &sc, "--full", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["realism"], "full");
}

#[test]
fn default_device_subcommand_prints_a_loadable_config() {
    let o = fluxtalk(&["default-device"]);
    assert!(o.status.success());
    let cfg = DeviceConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg.build().unwrap().device.len(), 7);
}
