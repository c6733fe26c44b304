//! Shared helpers for CLI tests.
#![allow(dead_code)]

use std::path::Path;

use loadsynth::datapipe::{toy, DAY_LEN, SLOT_MINUTES};

/// Runs the CLI in process; returns (exit code, stdout, stderr).
pub fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("loadsynth").chain(args.iter().copied());
    let code = loadsynth_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Writes the toy sinusoid days as a quarter-hour meter CSV with
/// `timestamp,aggregate_load_w,pv_w` columns; PV is half the load.
pub fn write_toy_csv(path: &Path, days: usize, seed: u64) {
    let m = toy::sinusoid_days(days, seed);
    let mut text = String::from("timestamp,aggregate_load_w,pv_w\n");
    for (date, row) in m.dates().iter().zip(m.iter_rows()) {
        for (slot, v) in row.iter().enumerate() {
            let minutes = slot as u32 * SLOT_MINUTES;
            text.push_str(&format!("{date}T{:02}:{:02}:00Z,{v},{}\n", minutes / 60, minutes % 60, v / 2.0));
        }
    }
    assert_eq!(text.lines().count(), 1 + days * DAY_LEN);
    std::fs::write(path, text).unwrap();
}

/// Config for a tiny, fast network.
pub const TINY: &str = "channels=4\nlatent_dim=4\ndilations=1,2\nbatch_size=8\nlr_g=0.001\nlr_d=0.001\n";

pub fn write_config(path: &Path, extra: &str) {
    std::fs::write(path, format!("{TINY}{extra}")).unwrap();
}

/// The single `run-*` directory under `out`.
pub fn run_dir(out: &Path) -> std::path::PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("run-"))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}
