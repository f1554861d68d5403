//! Per-sample CFA weights next to the jamming PSD they respond to.

use std::path::Path;

use hrrp_core::jamming::wideband_psd;
use hrrp_neural::Layer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::dataset::Dataset;
use crate::error::{io_err, PipelineError, Result};
use crate::frontend::Inputs;
use crate::svg::{Chart, Series};
use crate::train::{dataset_split, load, EVAL_CHUNK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSummary {
    pub sjr_db: f64,
    pub samples: usize,
    pub channels: usize,
    /// Channels whose frequency span carries jamming.
    pub jammed_channels: Vec<usize>,
    /// Mean jamming PSD per channel, power per Hz.
    pub channel_psd: Vec<f64>,
    pub mean_weight: Vec<f64>,
    pub mean_jammed_weight: f64,
    pub mean_clean_weight: f64,
    /// Share of samples whose mean jammed-channel weight is below their mean
    /// clean-channel weight.
    pub fraction_jammed_below_clean: f64,
}

pub struct AttentionExport {
    /// `weights[sample][channel]`, in the order of `sample_ids`.
    pub weights: Vec<Vec<f64>>,
    pub sample_ids: Vec<usize>,
    pub summary: AttentionSummary,
}

/// Runs the CFA checkpoint over the test split of its shard and writes
/// `attention.csv`, `attention.svg` and `attention_summary.json` to `out`.
pub fn export_attention(ckpt: &Path, dataset: &Dataset, sjr_db: Option<f64>, out: &Path) -> Result<AttentionExport> {
    let (net, state) = load(ckpt)?;
    if state.mode != Mode::Cfa || net.cfa.is_none() {
        return Err(PipelineError::Config(format!("checkpoint was trained in mode {}, not cfa", state.mode)));
    }
    let shard = dataset.load_shard(Some(sjr_db.unwrap_or(state.sjr_db))).or_else(|e| match sjr_db {
        None => dataset.load_shard(None),
        Some(_) => Err(e),
    })?;
    let m = &dataset.manifest;
    let inputs = Inputs::encode(&shard, None, m.dataset.normalization)?;
    let ids = dataset_split(dataset, &shard).test;
    let channels = state.network.cfa.channels;

    let weights: Vec<Vec<f64>> = ids
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let mut model = net.clone();
            let (x, _) = inputs.batch(chunk);
            model.forward(&x, false)?;
            let w = model.attention().expect("cfa model").to_f64();
            Ok(w.chunks(channels).map(<[f64]>::to_vec).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let psd = wideband_psd(&m.calibrated_jammers(&shard.info), &m.radar)?;
    let per = psd.len() / channels;
    let channel_psd: Vec<f64> = psd.chunks(per).map(|c| c.iter().sum::<f64>() / per as f64).collect();
    let jammed: Vec<usize> = (0..channels).filter(|&c| channel_psd[c] > 0.0).collect();
    let clean: Vec<usize> = (0..channels).filter(|&c| channel_psd[c] == 0.0).collect();
    let mean_over = |w: &[f64], set: &[usize]| set.iter().map(|&c| w[c]).sum::<f64>() / set.len().max(1) as f64;
    let n = weights.len().max(1) as f64;
    let mean_weight: Vec<f64> = (0..channels).map(|c| weights.iter().map(|w| w[c]).sum::<f64>() / n).collect();
    let below = weights.iter().filter(|w| mean_over(w, &jammed) < mean_over(w, &clean)).count();
    let summary = AttentionSummary {
        sjr_db: shard.info.sjr_db,
        samples: weights.len(),
        channels,
        mean_jammed_weight: mean_over(&mean_weight, &jammed),
        mean_clean_weight: mean_over(&mean_weight, &clean),
        fraction_jammed_below_clean: below as f64 / n,
        jammed_channels: jammed,
        channel_psd,
        mean_weight,
    };

    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut csv = String::from("sample_id,channel,weight\n");
    for (id, w) in ids.iter().zip(&weights) {
        for (c, v) in w.iter().enumerate() {
            csv.push_str(&format!("{id},{c},{v}\n"));
        }
    }
    write(out, "attention.csv", &csv)?;
    let peak = summary.channel_psd.iter().copied().fold(0.0, f64::max);
    let chart = Chart {
        title: format!("CFA weights vs jamming PSD, SJR {} dB", summary.sjr_db),
        x_label: "channel (sub-band)".into(),
        y_label: "weight / relative PSD".into(),
        lines: vec![
            Series { name: "mean weight".into(), points: points(&summary.mean_weight) },
            Series {
                name: "min weight".into(),
                points: points(
                    &(0..channels).map(|c| weights.iter().map(|w| w[c]).fold(1.0, f64::min)).collect::<Vec<_>>(),
                ),
            },
            Series {
                name: "max weight".into(),
                points: points(
                    &(0..channels).map(|c| weights.iter().map(|w| w[c]).fold(0.0, f64::max)).collect::<Vec<_>>(),
                ),
            },
        ],
        bars: Some(Series {
            name: "jam PSD / peak".into(),
            points: points(
                &summary.channel_psd.iter().map(|p| if peak > 0.0 { p / peak } else { 0.0 }).collect::<Vec<_>>(),
            ),
        }),
        y_range: Some((0.0, 1.0)),
    };
    write(out, "attention.svg", &chart.render())?;
    write(out, "attention_summary.json", &serde_json::to_string_pretty(&summary).expect("json"))?;
    Ok(AttentionExport { weights, sample_ids: ids, summary })
}

fn points(values: &[f64]) -> Vec<(f64, f64)> {
    values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(io_err(&path))
}
