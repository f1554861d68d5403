//! Accuracy versus SJR for every configured front end.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Config, Mode};
use crate::dataset::{generate, Dataset};
use crate::error::{io_err, Result};
use crate::svg::{Chart, Series};
use crate::train::{train, TrainOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: Mode,
    pub sjr_db: f64,
    pub best_accuracy: f64,
    pub final_accuracy: f64,
    pub best_epoch: usize,
}

/// Reuses `out/dataset` when its manifest was generated from the same
/// settings, otherwise regenerates it.
fn dataset_for(config: &Config, out: &Path, log: &dyn Fn(&str)) -> Result<Dataset> {
    let dir = out.join("dataset");
    if let Ok(ds) = Dataset::open(&dir) {
        let m = &ds.manifest;
        let same = m.seed == config.dataset.seed
            && m.radar == config.radar
            && m.jammers == config.jammers
            && m.classes == config.classes
            && DatasetKey::of(&m.dataset) == DatasetKey::of(&config.dataset);
        if same {
            log(&format!("reusing dataset in {}", dir.display()));
            return Ok(ds);
        }
    }
    generate(config, config.dataset.seed, &dir, log)?;
    Dataset::open(&dir)
}

/// Dataset settings other than the SJR list, which only selects shards.
#[derive(PartialEq)]
struct DatasetKey(String);

impl DatasetKey {
    fn of(d: &crate::config::DatasetConfig) -> Self {
        let mut d = d.clone();
        d.sjr_db.clear();
        Self(serde_json::to_string(&d).expect("json"))
    }
}

/// Trains one model per `(mode, SJR)` and writes `sweep.csv`, `sweep.svg`
/// and `sweep.json`. Shards missing from a reused dataset are skipped with
/// a warning.
pub fn sweep_sjr(config: &Config, out: &Path, log: &dyn Fn(&str)) -> Result<Vec<SweepRow>> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let dataset = dataset_for(config, out, log)?;
    let mut rows = Vec::new();
    for &mode in &config.training.modes {
        for &sjr in &config.dataset.sjr_db {
            if dataset.shard_info(Some(sjr)).is_err() {
                log(&format!("warning: no shard at {sjr} dB; skipping {mode}"));
                continue;
            }
            let ckpt = out.join("models").join(format!("{mode}_sjr{sjr}dB.jrck"));
            let opts = TrainOptions { mode, sjr_db: Some(sjr), training: config.training.clone() };
            let state = train(&dataset, &opts, &ckpt, log)?;
            log(&format!(
                "{mode} @ {sjr} dB: best {:.4} (epoch {}), final {:.4}",
                state.best_test_accuracy, state.best_epoch, state.final_test_accuracy
            ));
            rows.push(SweepRow {
                mode,
                sjr_db: sjr,
                best_accuracy: state.best_test_accuracy,
                final_accuracy: state.final_test_accuracy,
                best_epoch: state.best_epoch,
            });
        }
    }
    write_outputs(&rows, out)?;
    Ok(rows)
}

pub fn write_outputs(rows: &[SweepRow], out: &Path) -> Result<()> {
    let mut csv = String::from("mode,sjr_db,best_accuracy,final_accuracy,best_epoch\n");
    for r in rows {
        csv.push_str(&format!("{},{},{},{},{}\n", r.mode, r.sjr_db, r.best_accuracy, r.final_accuracy, r.best_epoch));
    }
    let path = out.join("sweep.csv");
    std::fs::write(&path, csv).map_err(io_err(&path))?;

    let mut modes: Vec<Mode> = Vec::new();
    rows.iter().for_each(|r| {
        if !modes.contains(&r.mode) {
            modes.push(r.mode)
        }
    });
    let lines = modes
        .iter()
        .map(|&m| {
            let mut points: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.mode == m).map(|r| (r.sjr_db, 100.0 * r.best_accuracy)).collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name: m.to_string(), points }
        })
        .collect();
    let chart = Chart {
        title: "Recognition accuracy vs SJR".into(),
        x_label: "SJR (dB)".into(),
        y_label: "test accuracy (%)".into(),
        lines,
        bars: None,
        y_range: Some((0.0, 100.0)),
    };
    let path = out.join("sweep.svg");
    std::fs::write(&path, chart.render()).map_err(io_err(&path))?;
    let path = out.join("sweep.json");
    std::fs::write(&path, serde_json::to_string_pretty(rows).expect("json")).map_err(io_err(&path))
}
