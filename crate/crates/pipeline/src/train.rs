//! Stratified split, the training loop, checkpoints and evaluation.

use std::ffi::OsString;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hrrp_core::filters::{write_gains_csv, WienerGains};
use hrrp_core::Prng;
use hrrp_neural::checkpoint::{load_into, write_checkpoint};
use hrrp_neural::layers::{export_state, import_state, softmax_cross_entropy};
use hrrp_neural::{Adam, AdamConfig, Layer, Network, NetworkConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{InputNorm, Mode, TrainingConfig};
use crate::dataset::{Dataset, Shard};
use crate::error::{io_err, PipelineError, Result};
use crate::frontend::{fit_gains, Inputs};
use crate::metrics::Metrics;

/// Evaluation chunk size; fixed so results do not depend on the thread count.
pub const EVAL_CHUNK: usize = 64;
const SPLIT_STREAM: u64 = 0x5350_4c54;
const SHUFFLE_STREAM: u64 = 0x5348_4646;
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffle, then the first `round(n·train_fraction)` of each class
/// go to training. Both lists come back sorted.
pub fn split_dataset(labels: &[usize], n_classes: usize, train_fraction: f64, seed: u64) -> Split {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        shuffle(&mut idx, &mut Prng::new(seed, SPLIT_STREAM + c as u64));
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

fn shuffle<T>(v: &mut [T], prng: &mut Prng) {
    for i in (1..v.len()).rev() {
        v.swap(i, prng.below(i + 1));
    }
}

/// The split used by every command for a given dataset.
pub fn dataset_split(dataset: &Dataset, shard: &Shard) -> Split {
    let m = &dataset.manifest;
    split_dataset(&shard.labels(), m.n_classes(), m.dataset.train_fraction, m.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// JSON sidecar stored next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingState {
    pub version: u32,
    pub mode: Mode,
    pub sjr_db: f64,
    pub dataset_seed: u64,
    pub normalization: InputNorm,
    pub network: NetworkConfig,
    pub adam: AdamConfig,
    pub cfa_lr_scale: f64,
    pub adam_steps: u64,
    pub epochs_requested: usize,
    pub epochs_run: usize,
    pub batch: usize,
    pub seed: u64,
    /// Wiener gains the inputs were filtered with (Wiener modes only).
    pub gains: Option<Vec<f64>>,
    pub history: Vec<EpochLog>,
    /// The checkpoint holds the weights of this epoch.
    pub best_epoch: usize,
    pub best_test_accuracy: f64,
    pub final_test_accuracy: f64,
}

pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    suffixed(ckpt, ".json")
}

pub fn gains_path(ckpt: &Path) -> PathBuf {
    suffixed(ckpt, ".gains.csv")
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub mode: Mode,
    pub sjr_db: Option<f64>,
    pub training: TrainingConfig,
}

/// Predicted classes for `indices`, evaluated in inference mode.
pub fn predict(net: &Network<f32>, inputs: &Inputs, indices: &[usize]) -> Result<Vec<usize>> {
    let chunks: Vec<Vec<usize>> = indices
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let mut model = net.clone();
            let (x, _) = inputs.batch(chunk);
            let logits = model.forward(&x, false)?;
            Ok(argmax_rows(&logits.data, logits.shape[1]))
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

fn argmax_rows(data: &[f32], k: usize) -> Vec<usize> {
    data.chunks(k)
        .map(|row| row.iter().enumerate().fold(0, |best, (i, v)| if *v > row[best] { i } else { best }))
        .collect()
}

fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Trains one model and writes `ckpt`, its sidecar and (Wiener modes) the
/// gains CSV. The checkpoint holds the best-test-accuracy weights.
pub fn train(dataset: &Dataset, opts: &TrainOptions, ckpt: &Path, log: &dyn Fn(&str)) -> Result<TrainingState> {
    let t = &opts.training;
    let m = &dataset.manifest;
    let shard = dataset.load_shard(opts.sjr_db)?;
    let split = dataset_split(dataset, &shard);
    let gains = fit_gains(opts.mode, dataset, &shard, &split.train)?;
    let inputs = Inputs::encode(&shard, gains.as_ref(), m.dataset.normalization)?;

    let mut network = t.network.clone();
    network.use_cfa = opts.mode == Mode::Cfa;
    if network.n_bins != m.n_bins() || network.classifier.n_classes != m.n_classes() {
        return Err(PipelineError::Config(format!(
            "network ({} bins, {} classes) does not fit the dataset ({} bins, {} classes)",
            network.n_bins,
            network.classifier.n_classes,
            m.n_bins(),
            m.n_classes()
        )));
    }
    let mut net = Network::<f32>::new(network.clone(), t.seed)?;
    let mut adam = Adam::new(t.adam).with_group("cfa.", t.cfa_lr_scale);
    let test_labels: Vec<usize> = split.test.iter().map(|&i| inputs.labels[i]).collect();

    let mut history = Vec::new();
    let mut best = (0usize, f64::NEG_INFINITY, export_state(&net));
    let mut order = split.train.clone();
    for epoch in 1..=t.epochs {
        shuffle(&mut order, &mut Prng::new(t.seed, SHUFFLE_STREAM + epoch as u64));
        let (mut loss_sum, mut hits, mut seen) = (0.0f64, 0usize, 0usize);
        for batch in batches(&order, t.batch) {
            let (x, labels) = inputs.batch(batch);
            let logits = net.forward(&x, true)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(PipelineError::Numerical(format!("loss became {loss} in epoch {epoch}")));
            }
            hits += argmax_rows(&logits.data, logits.shape[1]).iter().zip(&labels).filter(|(p, y)| p == y).count();
            loss_sum += loss as f64 * labels.len() as f64;
            seen += labels.len();
            net.backward(&grad)?;
            adam.step(&mut net);
        }
        let test_accuracy = accuracy(&predict(&net, &inputs, &split.test)?, &test_labels);
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: hits as f64 / seen as f64,
            test_accuracy,
        };
        log(&format!(
            "[{}] epoch {epoch:>3}  loss {:.4}  train acc {:.3}  test acc {:.3}",
            opts.mode, entry.train_loss, entry.train_accuracy, entry.test_accuracy
        ));
        history.push(entry);
        if test_accuracy > best.1 {
            best = (epoch, test_accuracy, export_state(&net));
        }
        if t.patience.is_some_and(|p| epoch - best.0 >= p) {
            log(&format!("[{}] no improvement for {} epochs; stopping", opts.mode, epoch - best.0));
            break;
        }
    }
    let final_test_accuracy = history.last().map_or(0.0, |h| h.test_accuracy);
    import_state(&mut net, &best.2)?;

    let state = TrainingState {
        version: STATE_VERSION,
        mode: opts.mode,
        sjr_db: shard.info.sjr_db,
        dataset_seed: m.seed,
        normalization: m.dataset.normalization,
        network,
        adam: t.adam,
        cfa_lr_scale: t.cfa_lr_scale,
        adam_steps: adam.step,
        epochs_requested: t.epochs,
        epochs_run: history.len(),
        batch: t.batch,
        seed: t.seed,
        gains: gains.as_ref().map(|g| g.h.clone()),
        history,
        best_epoch: best.0,
        best_test_accuracy: best.1,
        final_test_accuracy,
    };
    save(&net, &state, ckpt, gains.as_ref(), &m.radar.wideband_grid())?;
    Ok(state)
}

/// Consecutive batches of `size`; a trailing single sample is folded into
/// the previous batch because batch statistics need at least two.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let n = out.len();
        out[n - 1] = &order[(n - 1) * size..];
    }
    out
}

pub fn save(
    net: &Network<f32>,
    state: &TrainingState,
    ckpt: &Path,
    gains: Option<&WienerGains>,
    grid: &[f64],
) -> Result<()> {
    if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut bytes = Vec::new();
    write_checkpoint(net, &mut bytes)?;
    std::fs::write(ckpt, bytes).map_err(io_err(ckpt))?;
    let side = sidecar_path(ckpt);
    std::fs::write(&side, serde_json::to_string_pretty(state).expect("state serializes")).map_err(io_err(&side))?;
    if let Some(g) = gains {
        let path = gains_path(ckpt);
        let mut csv = Vec::new();
        write_gains_csv(&mut csv, g, grid).expect("writing to memory");
        std::fs::write(&path, csv).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Loads a checkpoint and its sidecar.
pub fn load(ckpt: &Path) -> Result<(Network<f32>, TrainingState)> {
    let side = sidecar_path(ckpt);
    let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let state: TrainingState =
        serde_json::from_str(&text).map_err(|e| PipelineError::Format { path: side.clone(), reason: e.to_string() })?;
    if state.version != STATE_VERSION {
        return Err(PipelineError::Format {
            path: side,
            reason: format!("unsupported state version {}", state.version),
        });
    }
    let mut net = Network::<f32>::new(state.network.clone(), state.seed)?;
    let file = std::fs::File::open(ckpt).map_err(io_err(ckpt))?;
    load_into(&mut net, BufReader::new(file))
        .map_err(|e| PipelineError::Format { path: ckpt.to_path_buf(), reason: e.to_string() })?;
    Ok((net, state))
}

/// Test-split metrics of a checkpoint on the shard it was trained at (or
/// `sjr_db` when given). `expect_mode`, if set, must match the checkpoint.
pub fn evaluate(
    ckpt: &Path,
    dataset: &Dataset,
    sjr_db: Option<f64>,
    expect_mode: Option<Mode>,
) -> Result<(Metrics, TrainingState)> {
    let (net, state) = load(ckpt)?;
    if let Some(mode) = expect_mode.filter(|m| *m != state.mode) {
        return Err(PipelineError::Config(format!(
            "checkpoint was trained in mode {} but {mode} was requested",
            state.mode
        )));
    }
    if state.mode.is_wiener() != state.gains.is_some() || (state.mode == Mode::Cfa) != state.network.use_cfa {
        return Err(PipelineError::Config(format!("checkpoint sidecar is inconsistent with mode {}", state.mode)));
    }
    let shard = match sjr_db {
        Some(s) => dataset.load_shard(Some(s))?,
        None => dataset.load_shard(Some(state.sjr_db)).or_else(|_| dataset.load_shard(None))?,
    };
    let m = &dataset.manifest;
    if state.network.n_bins != m.n_bins() || state.network.classifier.n_classes != m.n_classes() {
        return Err(PipelineError::Config("checkpoint does not fit the dataset's bins or classes".into()));
    }
    let gains = state.gains.clone().map(|h| WienerGains { h });
    let inputs = Inputs::encode(&shard, gains.as_ref(), m.dataset.normalization)?;
    let split = dataset_split(dataset, &shard);
    let pred = predict(&net, &inputs, &split.test)?;
    let labels: Vec<usize> = split.test.iter().map(|&i| inputs.labels[i]).collect();
    let curve = state.history.iter().map(|h| h.train_loss).collect();
    Ok((Metrics::from_predictions(&labels, &pred, m.n_classes(), curve), state))
}
