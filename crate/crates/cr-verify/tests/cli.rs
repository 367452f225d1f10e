use std::io::Write;
use std::process::Command;

use tempfile::NamedTempFile;

fn config(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn verify(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_verify"))
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap(), out.stdout)
}

const PASSING: &str = r#"
[[scenario]]
name = "identity"
chart = { model = "heisenberg" }
symbol = { kind = "identity" }
checks = ["toeplitz_b0", "toeplitz_b1"]
"#;

// Deviations of order 1e-17 cannot meet a 1e-300 tolerance.
const FAILING: &str = r#"
[[scenario]]
name = "tight"
chart = { model = "heisenberg" }
symbol = { kind = "multiplication", seed = 5 }
checks = ["toeplitz_b1"]
tolerance = { absolute = 1e-300, relative = 1e-300 }
"#;

const BRANCH: &str = r#"
[[scenario]]
name = "deep"
chart = { model = "heisenberg" }
amplitudes = { top_powers = [-3.0, -3.0] }
checks = ["uniqueness_b1"]
"#;

#[test]
fn exit_codes() {
    let ok = config(PASSING);
    let path = ok.path().to_str().unwrap();
    assert_eq!(verify(&["--config", path]).0, 0);
    assert_eq!(verify(&["--config", path, "--strict"]).0, 0);

    let bad = config(FAILING);
    let path = bad.path().to_str().unwrap();
    let (code, out) = verify(&["--config", path]);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().contains("\"pass\": false"));
    assert_eq!(verify(&["--config", path, "--strict"]).0, 1);

    let broken = config("[[scenario]]\nname = 1\n");
    assert_eq!(verify(&["--config", broken.path().to_str().unwrap()]).0, 2);
    assert_eq!(verify(&["--config", "/nonexistent/config.toml"]).0, 2);

    let branch = config(BRANCH);
    let path = branch.path().to_str().unwrap();
    assert_eq!(verify(&["--config", path]).0, 0);
    assert_eq!(verify(&["--config", path, "--strict"]).0, 3);
}

#[test]
fn csv_to_file_and_stable_output() {
    let cfg = config(PASSING);
    let path = cfg.path().to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let out_s = out.to_str().unwrap();
    let (code, stdout) = verify(&["--config", path, "--format", "csv", "--out", out_s]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(&cr_verify::RECORD_FIELDS.join(",")));
    assert_eq!(text.lines().count(), 3);

    let a = verify(&["--config", path, "--seed", "4"]).1;
    let b = verify(&["--config", path, "--seed", "4"]).1;
    assert_eq!(a, b);
}

#[test]
fn filter_selects_scenarios() {
    let cfg = config(&format!("{PASSING}{FAILING}"));
    let path = cfg.path().to_str().unwrap();
    assert_eq!(
        verify(&["--config", path, "--strict", "--filter", "iden*"]).0,
        0
    );
    assert_eq!(
        verify(&["--config", path, "--strict", "--filter", "tig*"]).0,
        1
    );
}
