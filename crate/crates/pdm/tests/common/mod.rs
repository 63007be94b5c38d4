//! Shared helpers for driving the `pdm` binary.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

/// Five short runs, one cheap formulation and two aggregations.
pub const SMALL_CONFIG: &str = r#"
seed = 7

[data]
n_corrective = 3
n_preventive = 2

[data.profile]
run_days = [6.0, 8.0]
degradation_days = [2.0, 3.0]

[features]
k = 4

[[validation.formulations]]
kind = "binary"
w_days = 2.0
grid = { c = [1.0], rbf = false }

[[validation.formulations]]
kind = "relu"
td_days = 2.0
grid = { c = [1.0], epsilon = [0.1], rbf = false }

[decision]
aggregations = ["identity", "ma12h"]
"#;

pub fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("pdm.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn pdm(config: Option<&Path>, out: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pdm"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.arg("--out").arg(out).arg("--jobs").arg("1").args(args);
    cmd.output().expect("pdm binary runs")
}

pub fn ok(o: &Output) -> String {
    assert!(o.status.success(), "pdm failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Runs generate, extract and run into a fresh directory under `dir`.
pub fn pipeline(config: &Path, out: &Path) {
    for stage in ["generate", "extract", "run"] {
        ok(&pdm(Some(config), out, &[stage]));
    }
}
