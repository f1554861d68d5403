//! Frequency-agile pulse schedule and per-pulse echo spectra.
//!
//! Each pulse `n` is transmitted on carrier `f_n` (centre of its sub-band).
//! After pulse compression its baseband spectrum at offset `f` is
//!
//! ```text
//! X_n(f) = A(f) · H(f + f_n) · exp(−j·4π·(f + f_n)·(R + n·V·T_r)/c)
//! ```
//!
//! under the stop-and-go model, with `H` the target transfer function.

use serde::{Deserialize, Serialize};

use crate::numerics::{gaussian_complex, Prng};
use crate::scene::{target_transfer, two_way_phase, TargetInstance};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// Baseband pulse spectrum shape `A(f)` within a sub-band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PulseTaper {
    /// Unit magnitude across the whole sub-band.
    #[default]
    Flat,
    /// Unit magnitude in the middle with cosine roll-off over `rolloff/2` of the
    /// band at each edge, `0 < rolloff <= 1`.
    RaisedCosine { rolloff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarParams {
    pub f_start_hz: f64,
    pub n_bands: usize,
    pub band_bw_hz: f64,
    pub bins_per_band: usize,
    pub pri_s: f64,
    pub c_mps: f64,
    pub taper: PulseTaper,
    /// Per-bin variance of an optional white receiver-noise floor (0 = off).
    pub noise_floor: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        Self {
            f_start_hz: 2.4e9,
            n_bands: 16,
            band_bw_hz: 50e6,
            bins_per_band: 64,
            pri_s: 1e-3,
            c_mps: SPEED_OF_LIGHT,
            taper: PulseTaper::Flat,
            noise_floor: 0.0,
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_bands == 0 || self.bins_per_band == 0 {
            return Err(Error::Argument("n_bands and bins_per_band must be >= 1".into()));
        }
        if !self.n_bins().is_power_of_two() {
            return Err(Error::Size(self.n_bins()));
        }
        for (name, v) in [
            ("f_start_hz", self.f_start_hz),
            ("band_bw_hz", self.band_bw_hz),
            ("pri_s", self.pri_s),
            ("c_mps", self.c_mps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_floor >= 0.0) {
            return Err(Error::Argument("noise_floor must be >= 0".into()));
        }
        if let PulseTaper::RaisedCosine { rolloff } = self.taper {
            if !(rolloff > 0.0 && rolloff <= 1.0) {
                return Err(Error::Argument(format!("taper rolloff must be in (0, 1], got {rolloff}")));
            }
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_bands * self.bins_per_band
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.n_bands as f64 * self.band_bw_hz
    }

    /// Spectral sample spacing `Δf = band_bw / bins_per_band`.
    pub fn bin_width(&self) -> f64 {
        self.band_bw_hz / self.bins_per_band as f64
    }

    /// Carrier (sub-band centre) of `band`.
    pub fn carrier(&self, band: usize) -> f64 {
        self.f_start_hz + (band as f64 + 0.5) * self.band_bw_hz
    }

    /// Baseband offsets of the sub-band bins relative to the carrier.
    ///
    /// Bins sit at half-bin positions, `−B/2 + (b + ½)·Δf`, so sub-band edges
    /// fall between samples and bands abut without overlap.
    pub fn baseband_offsets(&self) -> Vec<f64> {
        let df = self.bin_width();
        (0..self.bins_per_band).map(|b| -self.band_bw_hz / 2.0 + (b as f64 + 0.5) * df).collect()
    }

    /// Absolute frequency of wideband bin `k`.
    pub fn wideband_freq(&self, k: usize) -> f64 {
        self.f_start_hz + (k as f64 + 0.5) * self.bin_width()
    }

    pub fn wideband_grid(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.wideband_freq(k)).collect()
    }

    /// Range bin spacing `c / (2·B_total)`.
    pub fn range_resolution(&self) -> f64 {
        self.c_mps / (2.0 * self.total_bandwidth())
    }

    /// Sub-band containing absolute frequency `f`, if any.
    pub fn band_of(&self, f: f64) -> Option<usize> {
        let x = (f - self.f_start_hz) / self.band_bw_hz;
        (x >= 0.0 && x < self.n_bands as f64).then_some(x as usize)
    }

    /// `A(f)` at each baseband offset.
    pub fn pulse_spectrum(&self) -> Vec<f64> {
        match self.taper {
            PulseTaper::Flat => vec![1.0; self.bins_per_band],
            PulseTaper::RaisedCosine { rolloff } => {
                let half = self.band_bw_hz / 2.0;
                let edge = rolloff * half;
                self.baseband_offsets()
                    .into_iter()
                    .map(|f| {
                        let d = half - f.abs();
                        if d >= edge {
                            1.0
                        } else {
                            0.5 * (1.0 - (std::f64::consts::PI * d / edge).cos())
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Band visited by each pulse of one coherent processing interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaSchedule {
    pub band_of_pulse: Vec<usize>,
}

impl FaSchedule {
    /// Checks that the schedule visits each of `n_bands` exactly once.
    pub fn validate(&self, n_bands: usize) -> Result<()> {
        let mut seen = vec![false; n_bands];
        if self.band_of_pulse.len() != n_bands {
            return Err(Error::Argument(format!(
                "schedule has {} pulses for {n_bands} bands",
                self.band_of_pulse.len()
            )));
        }
        for &b in &self.band_of_pulse {
            if b >= n_bands || std::mem::replace(&mut seen[b], true) {
                return Err(Error::Argument(format!("schedule is not a permutation: band {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Sequential,
    #[default]
    Random,
}

pub fn make_schedule(params: &RadarParams, prng: &mut Prng, mode: ScheduleMode) -> FaSchedule {
    let mut bands: Vec<usize> = (0..params.n_bands).collect();
    if mode == ScheduleMode::Random {
        // Fisher–Yates.
        for i in (1..bands.len()).rev() {
            let j = prng.below(i + 1);
            bands.swap(i, j);
        }
    }
    FaSchedule { band_of_pulse: bands }
}

/// Target range and radial velocity (positive = receding).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionState {
    pub range_m: f64,
    pub velocity_mps: f64,
}

impl MotionState {
    pub fn new(range_m: f64, velocity_mps: f64) -> Result<Self> {
        if !(range_m > 0.0 && range_m.is_finite()) || !velocity_mps.is_finite() {
            return Err(Error::Domain(format!("invalid motion state R={range_m}, V={velocity_mps}")));
        }
        Ok(Self { range_m, velocity_mps })
    }

    /// Stop-and-go range at pulse `n`, `R + n·V·T_r`.
    pub fn range_at(&self, n: usize, pri_s: f64) -> f64 {
        self.range_m + n as f64 * self.velocity_mps * pri_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseEcho {
    pub pulse_index: usize,
    pub band_index: usize,
    pub spectrum: Vec<C64>,
    /// Offsets of `spectrum` samples from the carrier, Hz.
    pub baseband_freqs: Vec<f64>,
}

/// Noise-free echo `A·H(F)·exp(−j4πF·range/c)` at absolute frequencies `freqs`.
pub fn echo_spectrum(target: &TargetInstance, freqs: &[f64], pulse_gain: &[f64], range_m: f64) -> Result<Vec<C64>> {
    let h = target_transfer(target, freqs)?;
    Ok(h.into_iter().zip(freqs).zip(pulse_gain).map(|((h, &f), &a)| h * a * two_way_phase(f, range_m)).collect())
}

pub fn simulate_pulse(
    target: &TargetInstance,
    params: &RadarParams,
    schedule: &FaSchedule,
    n: usize,
    motion: &MotionState,
) -> Result<PulseEcho> {
    let band = *schedule
        .band_of_pulse
        .get(n)
        .ok_or_else(|| Error::Argument(format!("pulse index {n} outside the schedule")))?;
    if band >= params.n_bands {
        return Err(Error::Argument(format!("band {band} out of range")));
    }
    let carrier = params.carrier(band);
    let offsets = params.baseband_offsets();
    let freqs: Vec<f64> = offsets.iter().map(|f| f + carrier).collect();
    let spectrum = echo_spectrum(target, &freqs, &params.pulse_spectrum(), motion.range_at(n, params.pri_s))?;
    Ok(PulseEcho { pulse_index: n, band_index: band, spectrum, baseband_freqs: offsets })
}

/// All pulses of one CPI. `prng` is only consumed when the receiver noise
/// floor is enabled.
pub fn simulate_cpi(
    target: &TargetInstance,
    params: &RadarParams,
    schedule: &FaSchedule,
    motion: &MotionState,
    prng: &mut Prng,
) -> Result<Vec<PulseEcho>> {
    schedule.validate(params.n_bands)?;
    (0..schedule.band_of_pulse.len())
        .map(|n| {
            let mut echo = simulate_pulse(target, params, schedule, n, motion)?;
            if params.noise_floor > 0.0 {
                let noise = gaussian_complex(prng, params.bins_per_band, params.noise_floor)?;
                echo.spectrum.iter_mut().zip(noise).for_each(|(s, w)| *s += w);
            }
            Ok(echo)
        })
        .collect()
}
