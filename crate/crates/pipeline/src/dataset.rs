//! Synthetic datasets: generation, the `HRRP1` sample file and its manifest.
//!
//! A dataset directory holds `manifest.json` plus one sample file per SJR
//! shard. Every record is reproducible from `(master seed, class, index)`
//! and the shard SJR, so clean references and jam-only captures can be
//! regenerated on demand instead of being stored.
//!
//! Sample file layout (little-endian):
//!
//! ```text
//! "HRRP1" | version u32 | n_samples u32 | n_bins u32
//! n_samples × { label u8 | pad [u8; 3] | sjr_db f32 | seed u64 | (re f32, im f32) × n_bins }
//! ```

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use hrrp_core::hrrp::{centering_reference, deramp, motion_compensate, stitch, WidebandSpectrum};
use hrrp_core::jamming::{calibrate_sjr, synthesize_jamming, CompoundJammingConfig};
use hrrp_core::numerics::{energy, mix_seed};
use hrrp_core::radar_sim::{make_schedule, simulate_cpi, FaSchedule, MotionState, PulseEcho, RadarParams};
use hrrp_core::scene::{sample_instance, TargetClass};
use hrrp_core::{Prng, C32, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Config, DatasetConfig};
use crate::error::{io_err, PipelineError, Result};

pub const SAMPLE_MAGIC: &[u8; 5] = b"HRRP1";
pub const SAMPLE_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

const HEADER_BYTES: usize = 5 + 3 * 4;
const RECORD_FIXED_BYTES: usize = 1 + 3 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub label: u8,
    pub sjr_db: f32,
    pub seed: u64,
    pub spectrum: Vec<C32>,
}

pub fn write_samples<W: Write>(mut out: W, n_bins: usize, records: &[SampleRecord]) -> std::io::Result<()> {
    out.write_all(SAMPLE_MAGIC)?;
    out.write_all(&SAMPLE_VERSION.to_le_bytes())?;
    out.write_all(&(records.len() as u32).to_le_bytes())?;
    out.write_all(&(n_bins as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(RECORD_FIXED_BYTES + 8 * n_bins);
    for r in records {
        assert_eq!(r.spectrum.len(), n_bins, "record length differs from the header");
        buf.clear();
        buf.push(r.label);
        buf.extend_from_slice(&[0; 3]);
        buf.extend_from_slice(&r.sjr_db.to_le_bytes());
        buf.extend_from_slice(&r.seed.to_le_bytes());
        for z in &r.spectrum {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Parses a whole sample file; returns `(n_bins, records)`.
pub fn read_samples<R: Read>(mut input: R) -> std::result::Result<(usize, Vec<SampleRecord>), String> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| e.to_string())?;
    parse_samples(&bytes)
}

fn parse_samples(bytes: &[u8]) -> std::result::Result<(usize, Vec<SampleRecord>), String> {
    if bytes.len() < HEADER_BYTES || &bytes[..5] != SAMPLE_MAGIC {
        return Err("missing HRRP1 magic".into());
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u32_at(5);
    if version != SAMPLE_VERSION {
        return Err(format!("unsupported sample file version {version}"));
    }
    let n_samples = u32_at(9) as usize;
    let n_bins = u32_at(13) as usize;
    let record = RECORD_FIXED_BYTES + 8 * n_bins;
    let expected = n_samples.checked_mul(record).and_then(|b| b.checked_add(HEADER_BYTES));
    if expected != Some(bytes.len()) {
        return Err(format!("{} bytes on disk for {n_samples} records of {n_bins} bins", bytes.len()));
    }
    let f32_at = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap());
    let records = bytes[HEADER_BYTES..]
        .chunks_exact(record)
        .map(|r| SampleRecord {
            label: r[0],
            sjr_db: f32_at(&r[4..8]),
            seed: u64::from_le_bytes(r[8..16].try_into().unwrap()),
            spectrum: r[16..].chunks_exact(8).map(|z| C32::new(f32_at(&z[..4]), f32_at(&z[4..]))).collect(),
        })
        .collect();
    Ok((n_bins, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardInfo {
    pub sjr_db: f64,
    pub file: String,
    pub n_samples: usize,
    /// Mean clean-echo energy per sample the shard was calibrated against.
    pub signal_power: f64,
    /// Common factor applied to every jammer's power.
    pub jam_scale: f64,
    /// Energy of every jamming realization in the shard.
    pub jam_power: f64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub radar: RadarParams,
    /// Scenario before SJR calibration.
    pub jammers: CompoundJammingConfig,
    pub classes: Vec<TargetClass>,
    /// Samples per class, split fraction, normalization and geometry.
    pub dataset: DatasetConfig,
    pub created_utc: String,
    pub shards: Vec<ShardInfo>,
}

impl Manifest {
    pub fn n_bins(&self) -> usize {
        self.radar.n_bins()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Target-echo → stored-spectrum chain settings.
    pub fn scene(&self) -> SceneSpec<'_> {
        SceneSpec { radar: &self.radar, classes: &self.classes, dataset: &self.dataset }
    }

    /// Scenario scaled to a shard's SJR.
    pub fn calibrated_jammers(&self, shard: &ShardInfo) -> CompoundJammingConfig {
        self.jammers.scaled(shard.jam_scale)
    }
}

/// Borrowed view of what determines a clean spectrum.
#[derive(Debug, Clone, Copy)]
pub struct SceneSpec<'a> {
    pub radar: &'a RadarParams,
    pub classes: &'a [TargetClass],
    pub dataset: &'a DatasetConfig,
}

/// Per-sample seed; independent of the SJR so every shard shares targets.
pub fn sample_seed(master: u64, class: usize, index: usize) -> u64 {
    mix_seed(master, ((class as u64) << 32) | index as u64)
}

/// Geometry and raw echoes of one sample.
#[derive(Debug, Clone)]
pub struct Scene {
    pub motion: MotionState,
    pub schedule: FaSchedule,
    pub echoes: Vec<PulseEcho>,
}

impl SceneSpec<'_> {
    pub fn simulate(&self, class: usize, seed: u64) -> Result<Scene> {
        let template =
            self.classes.get(class).ok_or_else(|| PipelineError::Config(format!("class {class} is not defined")))?;
        let mut prng = Prng::new(seed, 0);
        let instance = sample_instance(template, &mut prng);
        let v = (2.0 * prng.uniform() - 1.0) * self.dataset.max_speed_mps;
        let motion = MotionState::new(self.dataset.range_m, v)?;
        let schedule = make_schedule(self.radar, &mut prng, self.dataset.schedule);
        let echoes = simulate_cpi(&instance, self.radar, &schedule, &motion, &mut prng)?;
        Ok(Scene { motion, schedule, echoes })
    }

    /// Motion compensation with the known velocity, stitching, and the deramp
    /// that centres the target in the range window.
    pub fn form_spectrum(&self, scene: &Scene, echoes: &[PulseEcho]) -> Result<WidebandSpectrum> {
        let compensated: Vec<PulseEcho> =
            echoes.iter().map(|e| motion_compensate(e, scene.motion.velocity_mps, self.radar)).collect();
        let spec = stitch(&compensated, &scene.schedule, self.radar)?;
        Ok(deramp(&spec, centering_reference(self.dataset.range_m, self.radar)))
    }

    pub fn clean_spectrum(&self, class: usize, seed: u64) -> Result<WidebandSpectrum> {
        let scene = self.simulate(class, seed)?;
        self.form_spectrum(&scene, &scene.echoes)
    }

    /// Returns `(clean, jammed)`. The jamming realization is rescaled to
    /// energy `jam_power` exactly, so every shard hits its SJR on the nose.
    pub fn jammed_spectrum(
        &self,
        class: usize,
        seed: u64,
        jam: &CompoundJammingConfig,
        jam_power: f64,
        sjr_db: f64,
    ) -> Result<(WidebandSpectrum, WidebandSpectrum)> {
        let scene = self.simulate(class, seed)?;
        let clean = self.form_spectrum(&scene, &scene.echoes)?;
        let mut prng = Prng::new(mix_seed(seed, sjr_db.to_bits()), 1);
        let noise = exact_power(synthesize_jamming(jam, self.radar, &scene.schedule, &mut prng)?, jam_power);
        let jammed: Vec<PulseEcho> = scene
            .echoes
            .iter()
            .zip(noise)
            .map(|(e, j)| {
                let spectrum = e.spectrum.iter().zip(j).map(|(s, n)| s + n).collect();
                PulseEcho { spectrum, ..e.clone() }
            })
            .collect();
        Ok((clean, self.form_spectrum(&scene, &jammed)?))
    }

    /// A capture with the target absent, for PSD estimation.
    pub fn jam_only_spectrum(
        &self,
        jam: &CompoundJammingConfig,
        jam_power: f64,
        seed: u64,
    ) -> Result<WidebandSpectrum> {
        let mut prng = Prng::new(seed, 2);
        let schedule = make_schedule(self.radar, &mut prng, self.dataset.schedule);
        let noise = exact_power(synthesize_jamming(jam, self.radar, &schedule, &mut prng)?, jam_power);
        let echoes: Vec<PulseEcho> = noise
            .into_iter()
            .enumerate()
            .map(|(n, spectrum)| PulseEcho {
                pulse_index: n,
                band_index: schedule.band_of_pulse[n],
                spectrum,
                baseband_freqs: self.radar.baseband_offsets(),
            })
            .collect();
        let spec = stitch(&echoes, &schedule, self.radar)?;
        Ok(deramp(&spec, centering_reference(self.dataset.range_m, self.radar)))
    }
}

fn exact_power(mut pulses: Vec<Vec<C64>>, power: f64) -> Vec<Vec<C64>> {
    let e: f64 = pulses.iter().map(|p| energy(p)).sum();
    if e > 0.0 {
        let k = (power / e).sqrt();
        pulses.iter_mut().flatten().for_each(|z| *z *= k);
    }
    pulses
}

pub fn shard_file_name(sjr_db: f64) -> String {
    format!("sjr_{sjr_db}dB.hrrp")
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Generates every shard of `config` into `out` and writes the manifest.
pub fn generate(config: &Config, seed: u64, out: &Path, log: &dyn Fn(&str)) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut dataset = config.dataset.clone();
    if let Some(sjr) = config.jammers.sjr_override_db {
        dataset.sjr_db = vec![sjr];
    }
    let scene = SceneSpec { radar: &config.radar, classes: &config.classes, dataset: &dataset };
    let ids: Vec<(usize, usize)> =
        (0..config.classes.len()).flat_map(|c| (0..dataset.samples_per_class).map(move |i| (c, i))).collect();
    let clean_energy: Vec<f64> = ids
        .par_iter()
        .map(|&(c, i)| scene.clean_spectrum(c, sample_seed(seed, c, i)).map(|s| energy(&s.bins)))
        .collect::<Result<_>>()?;
    let signal_power = clean_energy.iter().sum::<f64>() / clean_energy.len() as f64;

    let mut shards = Vec::new();
    for &sjr in &dataset.sjr_db {
        let cal = calibrate_sjr(signal_power, &config.jammers, &config.radar, sjr)?;
        let records: Vec<SampleRecord> = ids
            .par_iter()
            .map(|&(c, i)| {
                let s = sample_seed(seed, c, i);
                let (_, jammed) = scene.jammed_spectrum(c, s, &cal.config, cal.jam_power, sjr)?;
                Ok(SampleRecord {
                    label: c as u8,
                    sjr_db: sjr as f32,
                    seed: s,
                    spectrum: jammed.bins.iter().map(|z| C32::new(z.re as f32, z.im as f32)).collect(),
                })
            })
            .collect::<Result<_>>()?;
        let mut bytes = Vec::new();
        write_samples(&mut bytes, config.radar.n_bins(), &records).expect("writing to memory");
        let file = shard_file_name(sjr);
        let path = out.join(&file);
        std::fs::write(&path, &bytes).map_err(io_err(&path))?;
        log(&format!("wrote {} ({} samples, SJR {sjr} dB)", path.display(), records.len()));
        shards.push(ShardInfo {
            sjr_db: sjr,
            file,
            n_samples: records.len(),
            signal_power,
            jam_scale: cal.scale,
            jam_power: cal.jam_power,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        seed,
        radar: config.radar.clone(),
        jammers: config.jammers.clone(),
        classes: config.classes.clone(),
        dataset,
        created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        shards,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// One shard loaded into memory.
#[derive(Debug, Clone)]
pub struct Shard {
    pub info: ShardInfo,
    pub records: Vec<SampleRecord>,
}

impl Shard {
    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label as usize).collect()
    }
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Format { path: path.clone(), reason: e.to_string() })?;
        if manifest.schema_version != MANIFEST_SCHEMA {
            return Err(PipelineError::Format {
                path,
                reason: format!("unsupported manifest schema {}", manifest.schema_version),
            });
        }
        if manifest.shards.is_empty() {
            return Err(PipelineError::Format { path, reason: "manifest lists no shards".into() });
        }
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    /// Picks the shard at `sjr_db`, or the only shard when `None`.
    pub fn shard_info(&self, sjr_db: Option<f64>) -> Result<&ShardInfo> {
        let shards = &self.manifest.shards;
        match sjr_db {
            Some(s) => shards.iter().find(|i| i.sjr_db == s).ok_or_else(|| {
                let have: Vec<f64> = shards.iter().map(|i| i.sjr_db).collect();
                PipelineError::Config(format!("dataset has no shard at {s} dB (available: {have:?})"))
            }),
            None if shards.len() == 1 => Ok(&shards[0]),
            None => Err(PipelineError::Config(format!("dataset has {} shards; choose one with --sjr", shards.len()))),
        }
    }

    /// Loads a shard and verifies its checksum and contents.
    pub fn load_shard(&self, sjr_db: Option<f64>) -> Result<Shard> {
        let info = self.shard_info(sjr_db)?.clone();
        let path = self.dir.join(&info.file);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let bad = |reason: String| PipelineError::Format { path: path.clone(), reason };
        if sha256_hex(&bytes) != info.sha256 {
            return Err(bad("checksum does not match the manifest".into()));
        }
        let (n_bins, records) = parse_samples(&bytes).map_err(bad)?;
        if n_bins != self.manifest.n_bins() || records.len() != info.n_samples {
            return Err(bad(format!("{} records × {n_bins} bins disagree with the manifest", records.len())));
        }
        if let Some(r) = records.iter().find(|r| r.label as usize >= self.manifest.n_classes()) {
            return Err(bad(format!("label {} out of range", r.label)));
        }
        if records.iter().any(|r| r.spectrum.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(bad("non-finite spectrum sample".into()));
        }
        Ok(Shard { info, records })
    }
}
