//! Motion compensation, coherent stitching and range-profile formation.

use serde::{Deserialize, Serialize};

use crate::numerics::{ifft, Real};
use crate::radar_sim::{FaSchedule, PulseEcho, RadarParams};
use crate::scene::two_way_phase;
use crate::{Error, Result, C64};

/// Stitched spectrum ordered by ascending absolute frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct WidebandSpectrum {
    pub bins: Vec<C64>,
    pub freq_grid: Vec<f64>,
}

impl WidebandSpectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hrrp {
    pub range_profile: Vec<f64>,
    pub range_axis: Vec<f64>,
    pub complex_profile: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RangeWindow {
    #[default]
    Rectangular,
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Peak magnitude 1.
    Max,
    /// Unit energy.
    L2,
}

/// Removes the velocity-induced inter-pulse phase:
/// each bin is multiplied by `exp(+j·4π·(f + f_n)·n·v_est·T_r/c)`.
pub fn motion_compensate(echo: &PulseEcho, v_est: f64, params: &RadarParams) -> PulseEcho {
    let carrier = params.carrier(echo.band_index);
    let shift = echo.pulse_index as f64 * v_est * params.pri_s;
    let spectrum = echo
        .spectrum
        .iter()
        .zip(&echo.baseband_freqs)
        .map(|(z, f)| z * two_way_phase(f + carrier, shift).conj())
        .collect();
    PulseEcho { spectrum, ..echo.clone() }
}

/// Places every pulse's samples at its sub-band position, independent of
/// transmit order.
pub fn stitch(echoes: &[PulseEcho], schedule: &FaSchedule, params: &RadarParams) -> Result<WidebandSpectrum> {
    let per = params.bins_per_band;
    let mut filled = vec![false; params.n_bands];
    let mut bins = vec![C64::default(); params.n_bins()];
    for e in echoes {
        if e.band_index >= params.n_bands {
            return Err(Error::Stitch(format!("band {} out of range", e.band_index)));
        }
        if schedule.band_of_pulse.get(e.pulse_index) != Some(&e.band_index) {
            return Err(Error::Stitch(format!(
                "pulse {} is on band {} but the schedule disagrees",
                e.pulse_index, e.band_index
            )));
        }
        if e.spectrum.len() != per {
            return Err(Error::Stitch(format!(
                "pulse {} has {} bins, expected {per}",
                e.pulse_index,
                e.spectrum.len()
            )));
        }
        if std::mem::replace(&mut filled[e.band_index], true) {
            return Err(Error::Stitch(format!("band {} appears twice", e.band_index)));
        }
        bins[e.band_index * per..(e.band_index + 1) * per].copy_from_slice(&e.spectrum);
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(Error::Stitch(format!("band {missing} is missing")));
    }
    Ok(WidebandSpectrum { bins, freq_grid: params.wideband_grid() })
}

/// Multiplies by `exp(+j·4π·F·r_ref/c)` so a scatterer at absolute range
/// `R` lands at relative range `R − r_ref` in the profile.
pub fn deramp(spec: &WidebandSpectrum, r_ref: f64) -> WidebandSpectrum {
    let bins = spec.bins.iter().zip(&spec.freq_grid).map(|(z, &f)| z * two_way_phase(f, r_ref).conj()).collect();
    WidebandSpectrum { bins, freq_grid: spec.freq_grid.clone() }
}

/// Reference range that puts a target at `range_m` in the middle of the window.
pub fn centering_reference(range_m: f64, params: &RadarParams) -> f64 {
    range_m - params.range_resolution() * params.n_bins() as f64 / 2.0
}

/// Inverse transform of the stitched spectrum; bin `k` maps to range
/// `k·c/(2·B_total)` relative to the deramp reference.
pub fn form_hrrp(spec: &WidebandSpectrum, params: &RadarParams) -> Result<Hrrp> {
    form_hrrp_windowed(spec, params, RangeWindow::Rectangular)
}

pub fn form_hrrp_windowed(spec: &WidebandSpectrum, params: &RadarParams, window: RangeWindow) -> Result<Hrrp> {
    let n = spec.bins.len();
    let weighted: Vec<C64> = match window {
        RangeWindow::Rectangular => spec.bins.clone(),
        RangeWindow::Hamming => spec
            .bins
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (n as f64 - 1.0)).cos();
                z * w
            })
            .collect(),
    };
    let complex_profile = ifft(&weighted)?;
    let dr = params.c_mps / (2.0 * params.total_bandwidth());
    Ok(Hrrp {
        range_profile: complex_profile.iter().map(|z| z.norm()).collect(),
        range_axis: (0..n).map(|k| k as f64 * dr).collect(),
        complex_profile,
    })
}

/// Scales the profile (magnitude and complex parts alike).
pub fn normalize_profile(h: &Hrrp, mode: NormMode) -> Result<Hrrp> {
    let factor = profile_norm(&h.range_profile, mode);
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Normalization("profile is all zero".into()));
    }
    Ok(Hrrp {
        range_profile: h.range_profile.iter().map(|v| v / factor).collect(),
        range_axis: h.range_axis.clone(),
        complex_profile: h.complex_profile.iter().map(|z| z / factor).collect(),
    })
}

/// Norm used by [`normalize_profile`] on a magnitude array.
pub fn profile_norm<T: Real>(values: &[T], mode: NormMode) -> T {
    match mode {
        NormMode::Max => values.iter().fold(T::zero(), |m, v| m.max(v.abs())),
        NormMode::L2 => values.iter().map(|v| *v * *v).sum::<T>().sqrt(),
    }
}

/// Indices of strict local maxima above `threshold` (circular neighbours).
pub fn local_maxima(profile: &[f64], threshold: f64) -> Vec<usize> {
    let n = profile.len();
    (0..n)
        .filter(|&i| {
            let v = profile[i];
            v > threshold && v > profile[(i + n - 1) % n] && v > profile[(i + 1) % n]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{energy, Prng};
    use crate::radar_sim::{echo_spectrum, make_schedule, simulate_cpi, MotionState, ScheduleMode};
    use crate::scene::{builtin_classes, Scatterer, TargetInstance};

    fn target(offsets: &[f64]) -> TargetInstance {
        TargetInstance {
            scatterers: offsets.iter().map(|&o| Scatterer::new(o, C64::new(1.0, 0.0))).collect(),
            class_id: 0,
            aspect_seed: 0,
        }
    }

    fn profile_of(t: &TargetInstance, motion: MotionState, mode: ScheduleMode, seed: u64) -> (WidebandSpectrum, Hrrp) {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(seed, 0), mode);
        let echoes = simulate_cpi(t, &p, &s, &motion, &mut Prng::new(0, 0)).unwrap();
        let comp: Vec<_> = echoes.iter().map(|e| motion_compensate(e, motion.velocity_mps, &p)).collect();
        let wide = deramp(&stitch(&comp, &s, &p).unwrap(), motion.range_m);
        let h = form_hrrp(&wide, &p).unwrap();
        (wide, h)
    }

    #[test]
    fn zero_velocity_compensation_is_identity() {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(1, 0), ScheduleMode::Random);
        let m = MotionState::new(500.0, 80.0).unwrap();
        let echoes = simulate_cpi(&target(&[0.0]), &p, &s, &m, &mut Prng::new(0, 0)).unwrap();
        for e in &echoes {
            assert_eq!(motion_compensate(e, 0.0, &p), *e);
        }
    }

    #[test]
    fn compensation_inverse_pair() {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(1, 0), ScheduleMode::Random);
        let m = MotionState::new(500.0, 80.0).unwrap();
        let echoes = simulate_cpi(&target(&[0.0, 2.0]), &p, &s, &m, &mut Prng::new(0, 0)).unwrap();
        for e in &echoes {
            let back = motion_compensate(&motion_compensate(e, 123.0, &p), -123.0, &p);
            for (a, b) in back.spectrum.iter().zip(&e.spectrum) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn true_velocity_removes_inter_pulse_phase() {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(2, 0), ScheduleMode::Random);
        let m = MotionState::new(3000.0, 300.0).unwrap();
        let t = target(&[0.0]);
        let echoes = simulate_cpi(&t, &p, &s, &m, &mut Prng::new(0, 0)).unwrap();
        for e in &echoes {
            let c = motion_compensate(e, m.velocity_mps, &p);
            let freqs: Vec<f64> = c.baseband_freqs.iter().map(|f| f + p.carrier(c.band_index)).collect();
            // Oracle: the stationary echo at the same absolute frequencies.
            let stationary = echo_spectrum(&t, &freqs, &p.pulse_spectrum(), m.range_m).unwrap();
            for (a, b) in c.spectrum.iter().zip(&stationary) {
                assert!((a / b).arg().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stitch_rejects_missing_and_duplicate_bands() {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(2, 0), ScheduleMode::Sequential);
        let m = MotionState::new(100.0, 0.0).unwrap();
        let echoes = simulate_cpi(&target(&[0.0]), &p, &s, &m, &mut Prng::new(0, 0)).unwrap();
        assert!(matches!(stitch(&echoes[1..], &s, &p), Err(Error::Stitch(_))));
        let mut dup = echoes.clone();
        dup[1] = dup[0].clone();
        assert!(matches!(stitch(&dup, &s, &p), Err(Error::Stitch(_))));
    }

    #[test]
    fn stitch_of_zero_echoes_is_zero() {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(5, 0), ScheduleMode::Random);
        let echoes: Vec<PulseEcho> = s
            .band_of_pulse
            .iter()
            .enumerate()
            .map(|(n, &b)| PulseEcho {
                pulse_index: n,
                band_index: b,
                spectrum: vec![C64::default(); p.bins_per_band],
                baseband_freqs: p.baseband_offsets(),
            })
            .collect();
        let w = stitch(&echoes, &s, &p).unwrap();
        assert!(w.bins.iter().all(|z| *z == C64::default()));
    }

    #[test]
    fn schedule_invariance_for_stationary_target() {
        let t = &builtin_classes()[5];
        let inst = TargetInstance { scatterers: t.scatterers.clone(), class_id: 5, aspect_seed: 0 };
        let m = MotionState::new(3000.0, 0.0).unwrap();
        let (a, _) = profile_of(&inst, m, ScheduleMode::Sequential, 0);
        let (b, _) = profile_of(&inst, m, ScheduleMode::Random, 17);
        assert_eq!(a, b);
    }

    #[test]
    fn point_scatterer_peak_bin() {
        let p = RadarParams::default();
        let r_ref = 1000.0;
        let m = MotionState::new(r_ref + 9.375, 0.0).unwrap();
        let s = make_schedule(&p, &mut Prng::new(0, 0), ScheduleMode::Random);
        let echoes = simulate_cpi(&target(&[0.0]), &p, &s, &m, &mut Prng::new(0, 0)).unwrap();
        let wide = deramp(&stitch(&echoes, &s, &p).unwrap(), r_ref);
        let h = form_hrrp(&wide, &p).unwrap();
        let peak = h.range_profile.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, 50);
        assert!((h.range_axis[1] - p.range_resolution()).abs() < 1e-15);
    }

    #[test]
    fn flat_spectrum_is_impulse() {
        let p = RadarParams::default();
        let w = WidebandSpectrum { bins: vec![C64::new(1.0, 0.0); 1024], freq_grid: p.wideband_grid() };
        let h = form_hrrp(&w, &p).unwrap();
        assert!((h.range_profile[0] - 1.0).abs() < 1e-12);
        assert!(h.range_profile[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_scatterers_resolved_two_bins_apart() {
        let m = MotionState::new(3000.0, 0.0).unwrap();
        let (_, h) = profile_of(&target(&[0.0, 0.375]), m, ScheduleMode::Random, 3);
        let peak = h.range_profile.iter().cloned().fold(0.0, f64::max);
        let maxima = local_maxima(&h.range_profile, 0.5 * peak);
        assert_eq!(maxima.len(), 2);
        assert_eq!(maxima[1] - maxima[0], 2);
    }

    #[test]
    fn sub_resolution_pair_is_one_peak() {
        let m = MotionState::new(3000.0, 0.0).unwrap();
        let (_, h) = profile_of(&target(&[0.0, 0.09]), m, ScheduleMode::Random, 3);
        let peak = h.range_profile.iter().cloned().fold(0.0, f64::max);
        assert_eq!(local_maxima(&h.range_profile, 0.5 * peak).len(), 1);
    }

    #[test]
    fn isolated_peak_within_half_bin_anywhere() {
        let p = RadarParams::default();
        let r_ref = 3000.0;
        let dr = p.range_resolution();
        for &rel in &[0.3, 17.77, 60.1, 96.02, 150.4, 191.0] {
            let m = MotionState::new(r_ref + rel, 0.0).unwrap();
            let s = make_schedule(&p, &mut Prng::new(0, 0), ScheduleMode::Random);
            let e = simulate_cpi(&target(&[0.0]), &p, &s, &m, &mut Prng::new(0, 0)).unwrap();
            let h = form_hrrp(&deramp(&stitch(&e, &s, &p).unwrap(), r_ref), &p).unwrap();
            let peak = h.range_profile.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!((peak as f64 * dr - rel).abs() <= dr / 2.0 + 1e-9, "rel {rel} peak bin {peak}");
        }
    }

    #[test]
    fn parseval_through_profile() {
        let m = MotionState::new(3000.0, 120.0).unwrap();
        let t = &builtin_classes()[1];
        let inst = TargetInstance { scatterers: t.scatterers.clone(), class_id: 1, aspect_seed: 0 };
        let (w, h) = profile_of(&inst, m, ScheduleMode::Random, 9);
        let lhs = energy(&w.bins);
        let rhs = energy(&h.complex_profile) * w.len() as f64;
        assert!(((lhs - rhs) / lhs).abs() < 1e-9);
    }

    #[test]
    fn hamming_window_lowers_sidelobes() {
        let m = MotionState::new(3000.0, 0.0).unwrap();
        let p = RadarParams::default();
        let (w, rect) = profile_of(&target(&[0.3]), m, ScheduleMode::Random, 2);
        let ham = form_hrrp_windowed(&w, &p, RangeWindow::Hamming).unwrap();
        let far = |h: &Hrrp| {
            let peak = h.range_profile.iter().cloned().fold(0.0, f64::max);
            h.range_profile[700..900].iter().cloned().fold(0.0, f64::max) / peak
        };
        assert!(far(&ham) < far(&rect));
    }

    #[test]
    fn normalization_modes() {
        let h = Hrrp {
            range_profile: vec![0.0, 2.0, 1.0],
            range_axis: vec![0.0, 1.0, 2.0],
            complex_profile: vec![C64::default(), C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
        };
        let m = normalize_profile(&h, NormMode::Max).unwrap();
        assert_eq!(m.range_profile, vec![0.0, 1.0, 0.5]);
        assert_eq!(normalize_profile(&m, NormMode::Max).unwrap(), m);
        let l = normalize_profile(&h, NormMode::L2).unwrap();
        let e: f64 = l.range_profile.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-9);
        let zero = Hrrp { range_profile: vec![0.0; 3], ..h };
        assert!(matches!(normalize_profile(&zero, NormMode::L2), Err(Error::Normalization(_))));
    }
}
