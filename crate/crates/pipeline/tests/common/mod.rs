#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use hrrp_pipeline::Config;

/// Default config shrunk to `per_class` samples and the given shards.
pub fn small_config(per_class: usize, sjr_db: &[f64]) -> Config {
    let mut c = Config::default();
    c.dataset.samples_per_class = per_class;
    c.dataset.sjr_db = sjr_db.to_vec();
    c.dataset.jam_only_captures = 16;
    c
}

pub fn write_config(dir: &Path, config: &Config) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_json()).unwrap();
    path
}

pub fn hrrp<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_hrrp")).args(args).output().expect("run hrrp")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn quiet(_: &str) {}
