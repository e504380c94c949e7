use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optostore"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn list_presets_shows_both_samples() {
    let o = bin().arg("list-presets").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sample-a: (160, 0.013, 6) MHz"), "{text}");
    assert!(text.contains("sample-b: (160.9, 0.096, 20) MHz"), "{text}");
    assert!(text.contains("fig5-omit"));
}

#[test]
fn storage_run_writes_traces_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "scenario = \"fig3\"\n[sweep]\ndelays_us = [0.0, 4.0, 8.0]\n");
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "gated_scan.csv", "beat.csv", "delay_series.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let s = summary(&out);
    let ratio = s["storage_ratio_dimensionless"].as_f64().unwrap();
    assert!((ratio - 0.52).abs() < 0.01, "{ratio}");
    assert!(s["fitted_energy_decay_rate_mhz"].as_f64().unwrap() > 0.0);
}

#[test]
fn summary_numbers_carry_units() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let s = summary(&out);
    let suffixes = ["_mhz", "_us", "_mw", "_photons", "_phonons", "_dimensionless", "_rad"];
    for (k, v) in s.as_object().unwrap() {
        if v.is_number() {
            assert!(suffixes.iter().any(|u| k.ends_with(u)), "{k} has no unit");
        }
    }
}

#[test]
fn omit_run_reports_broadened_width() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sample = \"sample-b\"\nscenario = \"fig5-omit\"\n[sequence]\nwrite_duration_us = 20.0\n\
         [detection]\ngate_offset_us = 18.5\n",
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &["--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("spectrum.csv").is_file() && out.join("fit.json").is_file());
    let s = summary(&out);
    let width = s["dip_width_mhz"].as_f64().unwrap();
    assert!((width / 0.125 - 1.0).abs() < 0.05, "{width}");
    assert!((s["dip_position_mhz"].as_f64().unwrap() - 160.9).abs() < 0.01);
    assert_eq!(s["steady_state_warning"], Value::Bool(false));
}

#[test]
fn invalid_parameters_exit_one_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[params]\nkappa_mhz = -6.0\n");
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let cfg = write_config(tmp.path(), "scenario = \"fig9\"\n");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(1));
    let cfg = write_config(tmp.path(), "[grid]\nnot_a_key = 1\n");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(1));
    let v = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn divergence_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sequence]\nsignal_power_mw = 1e20\n");
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn existing_outputs_need_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    fs::write(out.join("summary.json"), "stale").unwrap();
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(1));
    assert_eq!(fs::read_to_string(out.join("summary.json")).unwrap(), "stale");
    assert!(run(&cfg, &out, &["--force"]).status.success());
    assert_ne!(fs::read_to_string(out.join("summary.json")).unwrap(), "stale");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "scenario = \"fig4\"\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&cfg, &a, &["--threads", "1"]).status.success());
    assert!(run(&cfg, &b, &["--threads", "3"]).status.success());
    for f in ["trajectory.csv", "beat.csv", "readout_envelopes.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn validate_prints_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sample = \"sample-b\"\n");
    let o = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("resolved_sideband"), "{text}");
}
