//! Turning stored records into network inputs, including the Wiener
//! baselines' gains.

use hrrp_core::filters::{estimated_psds, oracle_psds, wiener_gains, WienerGains};
use hrrp_core::hrrp::WidebandSpectrum;
use hrrp_core::numerics::mix_seed;
use hrrp_core::C64;
use hrrp_neural::Tensor;
use rayon::prelude::*;

use crate::config::{InputNorm, Mode};
use crate::dataset::{Dataset, SampleRecord, Shard};
use crate::error::{PipelineError, Result};

/// Stream tag separating jam-only captures from sample seeds.
const JAM_ONLY_TAG: u64 = 0x4a41_4d4f;

pub fn record_spectrum(r: &SampleRecord, freq_grid: &[f64]) -> WidebandSpectrum {
    WidebandSpectrum {
        bins: r.spectrum.iter().map(|z| C64::new(z.re as f64, z.im as f64)).collect(),
        freq_grid: freq_grid.to_vec(),
    }
}

/// Wiener gains for `mode` computed from the training records only.
///
/// Oracle: ensemble `p_s` of the regenerated clean spectra and the analytic
/// jamming PSD. Estimated: periodograms of the jammed training spectra and
/// of the manifest's quota of jam-only captures.
pub fn fit_gains(mode: Mode, dataset: &Dataset, shard: &Shard, train: &[usize]) -> Result<Option<WienerGains>> {
    let m = &dataset.manifest;
    let scene = m.scene();
    let jam = m.calibrated_jammers(&shard.info);
    let psd = match mode {
        Mode::Cfa | Mode::None => return Ok(None),
        Mode::WienerOracle => {
            let clean = train
                .par_iter()
                .map(|&i| {
                    let r = &shard.records[i];
                    scene.clean_spectrum(r.label as usize, r.seed)
                })
                .collect::<Result<Vec<_>>>()?;
            oracle_psds(&clean, &jam, &m.radar)?
        }
        Mode::WienerEstimated => {
            let grid = m.radar.wideband_grid();
            let jammed: Vec<WidebandSpectrum> =
                train.iter().map(|&i| record_spectrum(&shard.records[i], &grid)).collect();
            let base = mix_seed(m.seed ^ JAM_ONLY_TAG, shard.info.sjr_db.to_bits());
            let jam_only = (0..m.dataset.jam_only_captures as u64)
                .into_par_iter()
                .map(|k| scene.jam_only_spectrum(&jam, shard.info.jam_power, mix_seed(base, k)))
                .collect::<Result<Vec<_>>>()?;
            estimated_psds(&jammed, &jam_only, m.radar.bin_width())?
        }
    };
    Ok(Some(wiener_gains(&psd)))
}

/// Network input for one record: optional Wiener gains, per-sample
/// normalization, then `[re plane | im plane]` in `f32`.
pub fn encode(record: &SampleRecord, gains: Option<&[f64]>, norm: InputNorm) -> Vec<f32> {
    let n = record.spectrum.len();
    let bins: Vec<C64> = record
        .spectrum
        .iter()
        .enumerate()
        .map(|(k, z)| C64::new(z.re as f64, z.im as f64) * gains.map_or(1.0, |g| g[k]))
        .collect();
    let scale = match norm {
        InputNorm::Rms => (bins.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt(),
        InputNorm::Max => bins.iter().map(|z| z.norm()).fold(0.0, f64::max),
        InputNorm::None => 1.0,
    };
    let inv = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    let mut out = vec![0.0f32; 2 * n];
    for (k, z) in bins.iter().enumerate() {
        out[k] = (z.re * inv) as f32;
        out[n + k] = (z.im * inv) as f32;
    }
    out
}

/// Encoded inputs and labels of a whole shard.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub n_bins: usize,
    pub data: Vec<f32>,
    pub labels: Vec<usize>,
}

impl Inputs {
    pub fn encode(shard: &Shard, gains: Option<&WienerGains>, norm: InputNorm) -> Result<Self> {
        let n_bins = shard.records.first().map_or(0, |r| r.spectrum.len());
        if let Some(g) = gains {
            if g.h.len() != n_bins {
                return Err(PipelineError::Config(format!("{} gains for {n_bins} bins", g.h.len())));
            }
        }
        let rows: Vec<Vec<f32>> =
            shard.records.par_iter().map(|r| encode(r, gains.map(|g| g.h.as_slice()), norm)).collect();
        Ok(Self { n_bins, data: rows.concat(), labels: shard.labels() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[indices.len(), 2, n_bins]` batch.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let row = 2 * self.n_bins;
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(&self.data[i * row..(i + 1) * row]);
        }
        let x = Tensor::new(&[indices.len(), 2, self.n_bins], data).expect("batch shape");
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hrrp_core::C32;

    fn rec(values: &[(f32, f32)]) -> SampleRecord {
        SampleRecord { label: 0, sjr_db: 0.0, seed: 0, spectrum: values.iter().map(|&(a, b)| C32::new(a, b)).collect() }
    }

    #[test]
    fn planes_and_normalization() {
        let r = rec(&[(3.0, 4.0), (0.0, 0.0), (0.0, 2.0), (1.0, 0.0)]);
        assert_eq!(encode(&r, None, InputNorm::None), vec![3.0, 0.0, 0.0, 1.0, 4.0, 0.0, 2.0, 0.0]);
        // Peak magnitude 5.
        assert_eq!(encode(&r, None, InputNorm::Max)[0], 0.6);
        // Mean power (25 + 4 + 1)/4 = 7.5.
        let x = encode(&r, None, InputNorm::Rms);
        let p: f32 = x.iter().map(|v| v * v).sum::<f32>() / 4.0;
        assert!((p - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gains_apply_before_normalization() {
        let r = rec(&[(1.0, 0.0), (0.0, 1.0)]);
        let x = encode(&r, Some(&[0.5, 0.0]), InputNorm::Max);
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0]);
        // All-zero input stays zero instead of dividing by zero.
        assert!(encode(&rec(&[(0.0, 0.0)]), None, InputNorm::Rms).iter().all(|v| *v == 0.0));
    }
}
