//! Compound noise jamming from several independent jammers.
//!
//! Each jammer contributes received power `σ² = P·G_J·G_R·λ²/(4π·R_J)²` spread
//! uniformly over its bandwidth, so the total PSD is a staircase of
//! rectangles. Realizations are synthesized directly on the spectral grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::numerics::Prng;
use crate::radar_sim::{FaSchedule, RadarParams};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerSpec {
    pub p_jt_w: f64,
    pub g_j: f64,
    pub g_r: f64,
    pub lambda_m: f64,
    pub r_j_m: f64,
    pub f_center_hz: f64,
    pub bandwidth_hz: f64,
}

impl JammerSpec {
    /// PSD height `σ²/B` inside the jammer band.
    pub fn psd_level(&self) -> Result<f64> {
        Ok(jammer_power(self)? / self.bandwidth_hz)
    }

    fn covers(&self, f: f64) -> bool {
        (f - self.f_center_hz).abs() <= self.bandwidth_hz / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompoundJammingConfig {
    pub jammers: Vec<JammerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sjr_override_db: Option<f64>,
    /// Sub-bands the scenario is declared to jam. When present it must match
    /// the bands actually touched by the jammer rectangles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jammed_band_indices: Option<Vec<usize>>,
}

impl CompoundJammingConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Argument(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        for (i, j) in self.jammers.iter().enumerate() {
            let positive = [j.g_j, j.g_r, j.lambda_m, j.r_j_m, j.f_center_hz, j.bandwidth_hz];
            if !(j.p_jt_w >= 0.0) || positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Argument(format!("jammer {i} has non-positive parameters: {j:?}")));
            }
        }
        if let Some(declared) = &self.jammed_band_indices {
            let mut declared = declared.clone();
            declared.sort_unstable();
            declared.dedup();
            let actual = covered_bands(self, params)?;
            if declared != actual {
                return Err(Error::Argument(format!(
                    "jammed_band_indices {declared:?} do not match jammer coverage {actual:?}"
                )));
            }
        }
        Ok(())
    }

    /// Copy with every jammer's transmit power multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for j in &mut out.jammers {
            j.p_jt_w *= scale;
        }
        out
    }

    /// Jammed sub-bands: the declared set if present, otherwise derived from
    /// the PSD support on the wideband grid.
    pub fn jammed_bands(&self, params: &RadarParams) -> Result<Vec<usize>> {
        match &self.jammed_band_indices {
            Some(b) => {
                let mut b = b.clone();
                b.sort_unstable();
                b.dedup();
                Ok(b)
            }
            None => covered_bands(self, params),
        }
    }
}

fn covered_bands(config: &CompoundJammingConfig, params: &RadarParams) -> Result<Vec<usize>> {
    let psd = wideband_psd(config, params)?;
    Ok((0..params.n_bands)
        .filter(|b| psd[b * params.bins_per_band..(b + 1) * params.bins_per_band].iter().any(|&v| v > 0.0))
        .collect())
}

/// Received jamming power from the one-way range equation.
pub fn jammer_power(spec: &JammerSpec) -> Result<f64> {
    if !(spec.r_j_m > 0.0) {
        return Err(Error::Domain(format!("jammer range must be > 0, got {}", spec.r_j_m)));
    }
    let denom = (4.0 * PI * spec.r_j_m).powi(2);
    Ok(spec.p_jt_w * spec.g_j * spec.g_r * spec.lambda_m * spec.lambda_m / denom)
}

/// Sum of rectangular jammer PSDs evaluated at `freqs` (power per Hz).
pub fn compound_psd(config: &CompoundJammingConfig, freqs: &[f64]) -> Result<Vec<f64>> {
    let levels = config.jammers.iter().map(JammerSpec::psd_level).collect::<Result<Vec<_>>>()?;
    Ok(freqs
        .iter()
        .map(|&f| config.jammers.iter().zip(&levels).filter(|(j, _)| j.covers(f)).map(|(_, l)| l).sum())
        .collect())
}

/// `compound_psd` sampled on the radar's wideband grid.
pub fn wideband_psd(config: &CompoundJammingConfig, params: &RadarParams) -> Result<Vec<f64>> {
    compound_psd(config, &params.wideband_grid())
}

/// Expected jamming power landing in the radar's sampled band,
/// `Σ_k S_J(F_k)·Δf`.
pub fn in_band_power(config: &CompoundJammingConfig, params: &RadarParams) -> Result<f64> {
    Ok(wideband_psd(config, params)?.iter().sum::<f64>() * params.bin_width())
}

/// Mean jamming PSD per sub-band, power per Hz.
pub fn band_psd(config: &CompoundJammingConfig, params: &RadarParams) -> Result<Vec<f64>> {
    let psd = wideband_psd(config, params)?;
    Ok(psd.chunks(params.bins_per_band).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect())
}

/// One jamming realization per pulse, `bins_per_band` samples each.
///
/// Bin `b` of pulse `n` draws an independent circular Gaussian with variance
/// `S_J(F)·Δf` at its absolute frequency `F`; bins outside every jammer band
/// stay zero. Draws are taken for every bin so the stream position does not
/// depend on the scenario.
pub fn synthesize_jamming(
    config: &CompoundJammingConfig,
    params: &RadarParams,
    schedule: &FaSchedule,
    prng: &mut Prng,
) -> Result<Vec<Vec<C64>>> {
    let offsets = params.baseband_offsets();
    let df = params.bin_width();
    schedule
        .band_of_pulse
        .iter()
        .map(|&band| {
            let carrier = params.carrier(band);
            let freqs: Vec<f64> = offsets.iter().map(|f| f + carrier).collect();
            let psd = compound_psd(config, &freqs)?;
            Ok(psd
                .into_iter()
                .map(|s| {
                    let (a, b) = prng.normal_pair();
                    let sigma = (s * df / 2.0).sqrt();
                    C64::new(sigma * a, sigma * b)
                })
                .collect())
        })
        .collect()
}

/// Result of scaling a scenario to a target SJR.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub config: CompoundJammingConfig,
    pub scale: f64,
    /// Expected in-band jamming power after scaling.
    pub jam_power: f64,
}

/// Scales all jammer powers by one common factor so that
/// `10·log10(signal_power / in_band_jam_power) = target_sjr_db`.
pub fn calibrate_sjr(
    signal_power: f64,
    config: &CompoundJammingConfig,
    params: &RadarParams,
    target_sjr_db: f64,
) -> Result<Calibration> {
    if !(signal_power > 0.0 && signal_power.is_finite()) {
        return Err(Error::Calibration(format!("signal power must be > 0, got {signal_power}")));
    }
    let jam = in_band_power(config, params)?;
    if !(jam > 0.0) {
        return Err(Error::Calibration("scenario has no in-band jamming power".into()));
    }
    let wanted = signal_power / 10f64.powf(target_sjr_db / 10.0);
    let scale = wanted / jam;
    let config = config.scaled(scale);
    let jam_power = in_band_power(&config, params)?;
    Ok(Calibration { config, scale, jam_power })
}

/// Default stand-in scenario: three noise jammers at 10, 20 and 40 km
/// (received power ratio 16 : 4 : 1) covering sub-bands {1,2}, {5,6,7} and
/// {10,11,12}, i.e. 8 of the 16 bands.
pub fn default_scenario(params: &RadarParams) -> CompoundJammingConfig {
    let lambda = params.c_mps / (params.f_start_hz + params.total_bandwidth() / 2.0);
    let bw = params.band_bw_hz;
    let spec = |first: usize, count: usize, range: f64| JammerSpec {
        p_jt_w: 100.0,
        g_j: 10.0,
        g_r: 1.0,
        lambda_m: lambda,
        r_j_m: range,
        f_center_hz: params.f_start_hz + (first as f64 + count as f64 / 2.0) * bw,
        bandwidth_hz: count as f64 * bw,
    };
    CompoundJammingConfig {
        jammers: vec![spec(1, 2, 10e3), spec(5, 3, 20e3), spec(10, 3, 40e3)],
        sjr_override_db: None,
        jammed_band_indices: Some(vec![1, 2, 5, 6, 7, 10, 11, 12]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::energy;
    use crate::radar_sim::{make_schedule, ScheduleMode};

    fn jammer(power_w: f64, f_center: f64, bw: f64) -> JammerSpec {
        // g_j·λ²/(4πR)² = 1 so that σ² = p_jt.
        let r = 1.0 / (4.0 * PI);
        JammerSpec {
            p_jt_w: power_w,
            g_j: 1.0,
            g_r: 1.0,
            lambda_m: 1.0,
            r_j_m: r,
            f_center_hz: f_center,
            bandwidth_hz: bw,
        }
    }

    #[test]
    fn range_equation_value() {
        let spec = JammerSpec {
            p_jt_w: 1e3,
            g_j: 10.0,
            g_r: 1.0,
            lambda_m: 0.1,
            r_j_m: 1e4,
            f_center_hz: 3e9,
            bandwidth_hz: 1e6,
        };
        let expected = 1e3 * 10.0 * 1.0 * 0.01 / (4.0 * PI * 1e4f64).powi(2);
        let p = jammer_power(&spec).unwrap();
        assert!(((p - expected) / expected).abs() < 1e-12);
        assert!((p - 6.333e-9).abs() < 1e-12);
        let far = JammerSpec { r_j_m: 2e4, ..spec };
        assert_eq!(jammer_power(&far).unwrap() * 4.0, p);
        assert_eq!(jammer_power(&JammerSpec { p_jt_w: 0.0, ..spec }).unwrap(), 0.0);
        assert!(matches!(jammer_power(&JammerSpec { r_j_m: 0.0, ..spec }), Err(Error::Domain(_))));
    }

    #[test]
    fn single_rectangle() {
        let cfg = CompoundJammingConfig { jammers: vec![jammer(2.0, 10e6, 1e6)], ..Default::default() };
        let psd = compound_psd(&cfg, &[9.0e6, 9.6e6, 10e6, 10.4e6, 11e6]).unwrap();
        assert_eq!(psd, vec![0.0, 2e-6, 2e-6, 2e-6, 0.0]);
    }

    #[test]
    fn disjoint_and_overlapping_superposition() {
        let a = jammer(1.0, 10e6, 2e6);
        let b = jammer(3.0, 20e6, 2e6);
        let c = jammer(4.0, 11e6, 2e6);
        let freqs: Vec<f64> = (0..300).map(|i| 8e6 + i as f64 * 0.05e6).collect();
        let single = |j: JammerSpec| {
            compound_psd(&CompoundJammingConfig { jammers: vec![j], ..Default::default() }, &freqs).unwrap()
        };
        let pa = single(a);
        let pb = single(b);
        let pc = single(c);
        let ab = compound_psd(&CompoundJammingConfig { jammers: vec![a, b], ..Default::default() }, &freqs).unwrap();
        let ac = compound_psd(&CompoundJammingConfig { jammers: vec![a, c], ..Default::default() }, &freqs).unwrap();
        for i in 0..freqs.len() {
            assert!(pa[i] * pb[i] == 0.0);
            assert!((ab[i] - pa[i] - pb[i]).abs() < 1e-18);
            assert!((ac[i] - pa[i] - pc[i]).abs() < 1e-18);
            assert!(ab[i] >= 0.0 && ac[i] >= 0.0);
        }
        // 10.5 MHz lies in both a and c.
        let k = freqs.iter().position(|&f| (f - 10.5e6).abs() < 1.0).unwrap();
        assert!((ac[k] - (0.5e-6 + 2e-6)).abs() < 1e-18);
    }

    #[test]
    fn empty_scenario_synthesizes_zeros() {
        let p = RadarParams::default();
        let s = make_schedule(&p, &mut Prng::new(0, 0), ScheduleMode::Random);
        let j = synthesize_jamming(&CompoundJammingConfig::default(), &p, &s, &mut Prng::new(1, 1)).unwrap();
        assert_eq!(j.len(), 16);
        assert!(j.iter().flatten().all(|z| *z == C64::default()));
    }

    #[test]
    fn single_band_jammer_touches_only_its_pulse() {
        let p = RadarParams::default();
        let cfg =
            CompoundJammingConfig { jammers: vec![jammer(1.0, p.carrier(3), p.band_bw_hz)], ..Default::default() };
        let s = make_schedule(&p, &mut Prng::new(4, 0), ScheduleMode::Random);
        let j = synthesize_jamming(&cfg, &p, &s, &mut Prng::new(1, 1)).unwrap();
        for (n, pulse) in j.iter().enumerate() {
            let jammed = pulse.iter().any(|z| z.norm() > 0.0);
            assert_eq!(jammed, s.band_of_pulse[n] == 3, "pulse {n}");
            if s.band_of_pulse[n] == 3 {
                assert!(pulse.iter().all(|z| z.norm() > 0.0));
            }
        }
        assert_eq!(cfg.jammed_bands(&p).unwrap(), vec![3]);
    }

    #[test]
    fn realized_power_converges_to_in_band_integral() {
        let p = RadarParams::default();
        // Third jammer straddles the upper band edge; only half is in band.
        let cfg = CompoundJammingConfig {
            jammers: vec![jammer(1.0, p.carrier(2), 100e6), jammer(4.0, p.carrier(8), 50e6), jammer(2.0, 3.2e9, 100e6)],
            ..Default::default()
        };
        let analytic = 1.0 + 4.0 + 1.0;
        assert!((in_band_power(&cfg, &p).unwrap() - analytic).abs() < 1e-9);
        let mut prng = Prng::new(21, 0);
        let s = make_schedule(&p, &mut Prng::new(0, 0), ScheduleMode::Sequential);
        let runs = 1000;
        let mut total = 0.0;
        for _ in 0..runs {
            let j = synthesize_jamming(&cfg, &p, &s, &mut prng).unwrap();
            total += j.iter().map(|v| energy(v)).sum::<f64>();
        }
        let mean = total / runs as f64;
        assert!(((mean - analytic) / analytic).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn calibration_scale_and_fixed_point() {
        let p = RadarParams::default();
        let cfg =
            CompoundJammingConfig { jammers: vec![jammer(1.0, p.carrier(4), p.band_bw_hz)], ..Default::default() };
        let c = calibrate_sjr(1.0, &cfg, &p, -30.0).unwrap();
        assert!((c.scale - 1000.0).abs() < 1e-9);
        let sjr = 10.0 * (1.0 / c.jam_power).log10();
        assert!((sjr + 30.0).abs() < 0.01);
        let again = calibrate_sjr(1.0, &c.config, &p, -30.0).unwrap();
        assert!((again.scale - 1.0).abs() < 1e-12);
        let fixed = calibrate_sjr(1.0, &cfg, &p, 0.0).unwrap();
        assert!((fixed.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_preserves_relative_powers() {
        let p = RadarParams::default();
        let cfg = default_scenario(&p);
        let before: Vec<f64> = cfg.jammers.iter().map(|j| jammer_power(j).unwrap()).collect();
        let c = calibrate_sjr(2.5, &cfg, &p, -50.0).unwrap();
        let after: Vec<f64> = c.config.jammers.iter().map(|j| jammer_power(j).unwrap()).collect();
        for i in 1..3 {
            assert!(((after[i] / after[0]) / (before[i] / before[0]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_errors() {
        let p = RadarParams::default();
        let empty = CompoundJammingConfig::default();
        assert!(matches!(calibrate_sjr(1.0, &empty, &p, -30.0), Err(Error::Calibration(_))));
        let cfg = default_scenario(&p);
        assert!(matches!(calibrate_sjr(0.0, &cfg, &p, -30.0), Err(Error::Calibration(_))));
    }

    #[test]
    fn default_scenario_jams_eight_bands_in_three_tiers() {
        let p = RadarParams::default();
        let cfg = default_scenario(&p);
        cfg.validate(&p).unwrap();
        let derived = CompoundJammingConfig { jammed_band_indices: None, ..cfg.clone() };
        assert_eq!(derived.jammed_bands(&p).unwrap(), vec![1, 2, 5, 6, 7, 10, 11, 12]);
        let powers: Vec<f64> = cfg.jammers.iter().map(|j| jammer_power(j).unwrap()).collect();
        assert!((powers[0] / powers[1] - 4.0).abs() < 1e-12);
        assert!((powers[1] / powers[2] - 4.0).abs() < 1e-12);
        let bands = band_psd(&cfg, &p).unwrap();
        assert_eq!(bands.iter().filter(|&&v| v > 0.0).count(), 8);
    }

    #[test]
    fn mismatched_declaration_rejected() {
        let p = RadarParams::default();
        let mut cfg = default_scenario(&p);
        cfg.jammed_band_indices = Some(vec![0, 1]);
        assert!(cfg.validate(&p).is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let p = RadarParams::default();
        let cfg = default_scenario(&p);
        assert_eq!(CompoundJammingConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(CompoundJammingConfig::from_json(r#"{"jammers":[],"bogus":true}"#).is_err());
    }
}
