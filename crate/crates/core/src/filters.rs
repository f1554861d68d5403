//! Wiener filtering of the stitched spectrum, `H(k) = P_s/(P_s + P_j)`.

use std::io::Write;

use num_complex::Complex;

use crate::hrrp::WidebandSpectrum;
use crate::jamming::{wideband_psd, CompoundJammingConfig};
use crate::numerics::{periodogram_psd, spectrum_to_signal, Prng, Real};
use crate::radar_sim::RadarParams;
use crate::{Error, Result, C64};

/// Fewest segments accepted by [`estimated_psds`].
pub const MIN_SEGMENTS: usize = 8;

/// Signal and jamming PSDs (power per Hz) on one frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdPair<T = f64> {
    pub p_s: Vec<T>,
    pub p_j: Vec<T>,
}

impl<T: Real> PsdPair<T> {
    pub fn new(p_s: Vec<T>, p_j: Vec<T>) -> Result<Self> {
        if p_s.len() != p_j.len() {
            return Err(Error::Argument(format!("PSD lengths differ: {} vs {}", p_s.len(), p_j.len())));
        }
        if p_s.iter().chain(&p_j).any(|v| !(*v >= T::zero())) {
            return Err(Error::Domain("PSDs must be non-negative".into()));
        }
        Ok(Self { p_s, p_j })
    }

    pub fn len(&self) -> usize {
        self.p_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_s.is_empty()
    }
}

/// One real gain per bin, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerGains<T = f64> {
    pub h: Vec<T>,
}

/// Per-bin Wiener gain. Bins where both PSDs vanish get gain 0: they carry
/// no signal, so passing anything there can only add interference.
pub fn wiener_gains<T: Real>(psd: &PsdPair<T>) -> WienerGains<T> {
    let h = psd
        .p_s
        .iter()
        .zip(&psd.p_j)
        .map(|(&s, &j)| {
            let total = s + j;
            if total > T::zero() {
                s / total
            } else {
                T::zero()
            }
        })
        .collect();
    WienerGains { h }
}

/// Bin-wise multiply of complex samples by real gains.
pub fn apply_gains_to<T: Real>(bins: &[Complex<T>], gains: &WienerGains<T>) -> Result<Vec<Complex<T>>> {
    if bins.len() != gains.h.len() {
        return Err(Error::Argument(format!("{} bins but {} gains", bins.len(), gains.h.len())));
    }
    Ok(bins.iter().zip(&gains.h).map(|(z, &g)| z * g).collect())
}

pub fn apply_gains(spec: &WidebandSpectrum, gains: &WienerGains) -> Result<WidebandSpectrum> {
    Ok(WidebandSpectrum { bins: apply_gains_to(&spec.bins, gains)?, freq_grid: spec.freq_grid.clone() })
}

/// PSDs from a priori knowledge: `p_s` is the class-agnostic ensemble mean of
/// `|X|²/Δf` over clean spectra, `p_j` the analytic jamming staircase.
pub fn oracle_psds(
    population: &[WidebandSpectrum],
    jam: &CompoundJammingConfig,
    params: &RadarParams,
) -> Result<PsdPair> {
    let p_s = mean_spectral_psd(population, params.n_bins(), params.bin_width())?;
    PsdPair::new(p_s, wideband_psd(jam, params)?)
}

/// PSDs from data alone: `p_j` is the periodogram of jam-only captures and
/// `p_s = max(periodogram(jammed) − p_j, 0)`.
pub fn estimated_psds(jammed: &[WidebandSpectrum], jam_only: &[WidebandSpectrum], bin_width: f64) -> Result<PsdPair> {
    for (what, set) in [("jammed", jammed), ("jam-only", jam_only)] {
        if set.len() < MIN_SEGMENTS {
            return Err(Error::Estimation(format!(
                "{what} set has {} segments, need at least {MIN_SEGMENTS}",
                set.len()
            )));
        }
    }
    let p_x = spectral_periodogram(jammed, bin_width)?;
    let p_j = spectral_periodogram(jam_only, bin_width)?;
    if p_x.len() != p_j.len() {
        return Err(Error::Estimation("jammed and jam-only captures differ in length".into()));
    }
    let p_s = p_x.iter().zip(&p_j).map(|(x, j)| (x - j).max(0.0)).collect();
    PsdPair::new(p_s, p_j)
}

/// Periodogram of the waveforms whose spectral samples are the given spectra.
fn spectral_periodogram(set: &[WidebandSpectrum], bin_width: f64) -> Result<Vec<f64>> {
    let signals = set.iter().map(|s| spectrum_to_signal(&s.bins)).collect::<Result<Vec<_>>>()?;
    periodogram_psd(&signals, bin_width)
}

fn mean_spectral_psd(set: &[WidebandSpectrum], n: usize, bin_width: f64) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::Argument("PSD needs at least one spectrum".into()));
    }
    let mut acc = vec![0.0; n];
    for s in set {
        if s.bins.len() != n {
            return Err(Error::Argument(format!("spectrum has {} bins, expected {n}", s.bins.len())));
        }
        for (a, z) in acc.iter_mut().zip(&s.bins) {
            *a += z.norm_sqr();
        }
    }
    let norm = set.len() as f64 * bin_width;
    Ok(acc.into_iter().map(|a| a / norm).collect())
}

/// One draw of a stationary ensemble: independent circular Gaussian signal
/// and jamming bins with variances `p_s·Δf` and `p_j·Δf`. Returns
/// `(clean, observed)`.
pub fn sample_stationary(psd: &PsdPair, bin_width: f64, prng: &mut Prng) -> (Vec<C64>, Vec<C64>) {
    let draw = |p: f64, prng: &mut Prng| {
        let (a, b) = prng.normal_pair();
        let sigma = (p * bin_width / 2.0).sqrt();
        C64::new(sigma * a, sigma * b)
    };
    let mut clean = Vec::with_capacity(psd.len());
    let mut observed = Vec::with_capacity(psd.len());
    for (&s, &j) in psd.p_s.iter().zip(&psd.p_j) {
        let sig = draw(s, prng);
        clean.push(sig);
        observed.push(sig + draw(j, prng));
    }
    (clean, observed)
}

/// Writes `bin_index,frequency_hz,gain` rows.
pub fn write_gains_csv<W: Write>(mut out: W, gains: &WienerGains, freqs: &[f64]) -> std::io::Result<()> {
    writeln!(out, "bin_index,frequency_hz,gain")?;
    for (k, (g, f)) in gains.h.iter().zip(freqs).enumerate() {
        writeln!(out, "{k},{f},{g}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrrp::stitch;
    use crate::jamming::{calibrate_sjr, default_scenario, synthesize_jamming};
    use crate::radar_sim::PulseEcho;
    use crate::radar_sim::{make_schedule, ScheduleMode};
    use proptest::prelude::*;

    fn pair(p_s: &[f64], p_j: &[f64]) -> PsdPair {
        PsdPair::new(p_s.to_vec(), p_j.to_vec()).unwrap()
    }

    fn spectrum(bins: Vec<C64>) -> WidebandSpectrum {
        let n = bins.len();
        WidebandSpectrum { bins, freq_grid: (0..n).map(|k| k as f64).collect() }
    }

    fn jam_spectra(cfg: &CompoundJammingConfig, p: &RadarParams, count: usize, seed: u64) -> Vec<WidebandSpectrum> {
        let mut prng = Prng::new(seed, 3);
        (0..count)
            .map(|i| {
                let s = make_schedule(p, &mut Prng::new(seed, 100 + i as u64), ScheduleMode::Random);
                let jam = synthesize_jamming(cfg, p, &s, &mut prng).unwrap();
                let echoes: Vec<PulseEcho> = jam
                    .into_iter()
                    .enumerate()
                    .map(|(n, spectrum)| PulseEcho {
                        pulse_index: n,
                        band_index: s.band_of_pulse[n],
                        spectrum,
                        baseband_freqs: p.baseband_offsets(),
                    })
                    .collect();
                stitch(&echoes, &s, p).unwrap()
            })
            .collect()
    }

    #[test]
    fn gain_examples() {
        let g = wiener_gains(&pair(&[1.0, 1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 3.0, 2.0, 0.0]));
        assert_eq!(g.h, vec![0.5, 1.0, 0.25, 0.0, 0.0]);
        let g32 = wiener_gains(&PsdPair::new(vec![1.0f32], vec![3.0f32]).unwrap());
        assert_eq!(g32.h, vec![0.25f32]);
    }

    #[test]
    fn invalid_pairs_rejected() {
        assert!(PsdPair::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PsdPair::new(vec![-1.0], vec![1.0]).is_err());
        assert!(PsdPair::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn apply_examples() {
        let s = spectrum(vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        let ones = WienerGains { h: vec![1.0; 2] };
        assert_eq!(apply_gains(&s, &ones).unwrap(), s);
        let zeros = apply_gains(&s, &WienerGains { h: vec![0.0; 2] }).unwrap();
        assert!(zeros.bins.iter().all(|z| z.norm() == 0.0));
        let half = apply_gains(&s, &WienerGains { h: vec![0.5; 2] }).unwrap();
        for (a, b) in half.bins.iter().zip(&s.bins) {
            assert_eq!(a.norm(), b.norm() / 2.0);
            assert_eq!(a.arg(), b.arg());
        }
        assert!(matches!(apply_gains(&s, &WienerGains { h: vec![1.0] }), Err(Error::Argument(_))));
    }

    #[test]
    fn oracle_examples() {
        let p = RadarParams::default();
        let flat = WidebandSpectrum { bins: vec![C64::new(1.0, 0.0); 1024], freq_grid: p.wideband_grid() };
        let cfg = default_scenario(&p);
        let psd = oracle_psds(&[flat], &cfg, &p).unwrap();
        assert!(psd.p_s.iter().all(|&v| v == 1.0 / p.bin_width()));
        let jammed = cfg.jammed_bands(&p).unwrap();
        for b in 0..16 {
            let band = &psd.p_j[b * 64..(b + 1) * 64];
            assert_eq!(band.iter().all(|&v| v > 0.0), jammed.contains(&b));
            assert_eq!(band.iter().all(|&v| v == 0.0), !jammed.contains(&b));
        }
        assert!(matches!(oracle_psds(&[], &cfg, &p), Err(Error::Argument(_))));
    }

    #[test]
    fn jam_periodogram_tracks_oracle() {
        let p = RadarParams::default();
        let cfg = default_scenario(&p);
        let oracle = wideband_psd(&cfg, &p).unwrap();
        let est = spectral_periodogram(&jam_spectra(&cfg, &p, 256, 7), p.bin_width()).unwrap();
        // Each bin averages 256 exponential draws: relative std 1/16.
        let peak = oracle.iter().cloned().fold(0.0, f64::max);
        let mut band_sums = vec![(0.0, 0.0); 16];
        for k in 0..1024 {
            if oracle[k] == 0.0 {
                assert!(est[k] < 1e-12 * peak);
                continue;
            }
            let r = est[k] / oracle[k];
            assert!((r - 1.0).abs() < 5.0 / 16.0, "bin {k} ratio {r}");
            band_sums[k / 64].0 += est[k];
            band_sums[k / 64].1 += oracle[k];
        }
        for (e, o) in band_sums.into_iter().filter(|b| b.1 > 0.0) {
            assert!((e / o - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn estimation_examples() {
        let p = RadarParams::default();
        let n = p.n_bins();
        let sig: Vec<WidebandSpectrum> = (0..8u64)
            .map(|i| {
                let mut r = Prng::new(i, 0);
                spectrum((0..n).map(|_| C64::new(r.normal(), r.normal())).collect())
            })
            .collect();
        let zeros = vec![spectrum(vec![C64::default(); n]); 8];
        let est = estimated_psds(&sig, &zeros, p.bin_width()).unwrap();
        assert!(est.p_j.iter().all(|&v| v == 0.0));
        let mean = mean_spectral_psd(&sig, n, p.bin_width()).unwrap();
        for (a, b) in est.p_s.iter().zip(&mean) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-30));
        }
        assert!(matches!(estimated_psds(&sig[..7], &zeros, p.bin_width()), Err(Error::Estimation(_))));
        assert!(matches!(estimated_psds(&sig, &zeros[..3], p.bin_width()), Err(Error::Estimation(_))));
    }

    #[test]
    fn estimated_jam_psd_close_to_oracle() {
        let p = RadarParams::default();
        let cfg = default_scenario(&p);
        let oracle = wideband_psd(&cfg, &p).unwrap();
        let jam_only = jam_spectra(&cfg, &p, 256, 11);
        let jammed = jam_spectra(&cfg, &p, 256, 12);
        let est = estimated_psds(&jammed, &jam_only, p.bin_width()).unwrap();
        assert!(est.p_s.iter().all(|&v| v >= 0.0));
        let in_band: Vec<usize> = (0..1024).filter(|&k| oracle[k] > 0.0).collect();
        for &k in &in_band {
            assert!((est.p_j[k] / oracle[k] - 1.0).abs() < 5.0 / 16.0);
        }
        let mean_ratio: f64 = in_band.iter().map(|&k| est.p_j[k] / oracle[k]).sum::<f64>() / in_band.len() as f64;
        assert!((mean_ratio - 1.0).abs() < 0.02);
    }

    fn bin_mse(clean: &[C64], observed: &[C64], gain: f64) -> f64 {
        clean.iter().zip(observed).map(|(s, x)| (s - x * gain).norm_sqr()).sum::<f64>() / clean.len() as f64
    }

    #[test]
    fn wiener_gain_is_locally_mmse() {
        // Per-bin MSE is quadratic in the gain, so only the perturbed bins
        // need simulating. The empirical optimum wanders ~sqrt(P_j/(2M·P_s))
        // around H; 2e5 draws keep ±5% perturbations well outside that.
        let mut prng = Prng::new(99, 0);
        let df = 1.0;
        let realizations = 200_000;
        for _ in 0..10 {
            let s = 0.2 + 2.0 * prng.uniform();
            let j = 0.2 + 2.0 * prng.uniform();
            let psd = pair(&[s], &[j]);
            let h = wiener_gains(&psd).h[0];
            let mut clean = Vec::with_capacity(realizations);
            let mut obs = Vec::with_capacity(realizations);
            for _ in 0..realizations {
                let (c, o) = sample_stationary(&psd, df, &mut prng);
                clean.push(c[0]);
                obs.push(o[0]);
            }
            let base = bin_mse(&clean, &obs, h);
            for f in [0.95, 1.05] {
                assert!(bin_mse(&clean, &obs, h * f) >= base, "s={s} j={j} f={f}");
            }
            // Expected MSE at the optimum is P_s·P_j/(P_s+P_j)·Δf.
            assert!((base / (s * j / (s + j)) - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn estimated_gains_never_beat_oracle_in_expectation() {
        let p = RadarParams::default();
        let df = p.bin_width();
        let cfg = default_scenario(&p);
        let signal_psd = vec![1.0 / df; 1024];
        let signal_power = signal_psd.iter().sum::<f64>() * df;
        let cal = calibrate_sjr(signal_power, &cfg, &p, -10.0).unwrap();
        let oracle = PsdPair::new(signal_psd, wideband_psd(&cal.config, &p).unwrap()).unwrap();
        let jam_only = jam_spectra(&cal.config, &p, 16, 1);
        let mut prng = Prng::new(2, 0);
        let jammed: Vec<WidebandSpectrum> =
            (0..16).map(|_| spectrum(sample_stationary(&oracle, df, &mut prng).1)).collect();
        let est = estimated_psds(&jammed, &jam_only, df).unwrap();
        let (h_o, h_e) = (wiener_gains(&oracle), wiener_gains(&est));
        // Closed-form expected MSE per bin for a fixed real gain g:
        // (1−g)²·P_s + g²·P_j.
        let expected = |g: &WienerGains| -> f64 {
            g.h.iter()
                .zip(oracle.p_s.iter().zip(&oracle.p_j))
                .map(|(g, (s, j))| (1.0 - g).powi(2) * s + g * g * j)
                .sum()
        };
        assert!(expected(&h_e) >= expected(&h_o));
        let mut mse = (0.0, 0.0);
        for _ in 0..200 {
            let (c, o) = sample_stationary(&oracle, df, &mut prng);
            for (k, (c, o)) in c.iter().zip(&o).enumerate() {
                mse.0 += (c - o * h_o.h[k]).norm_sqr();
                mse.1 += (c - o * h_e.h[k]).norm_sqr();
            }
        }
        assert!(mse.1 >= mse.0);
    }

    #[test]
    fn gains_csv_layout() {
        let mut buf = Vec::new();
        write_gains_csv(&mut buf, &WienerGains { h: vec![1.0, 0.25] }, &[2.4e9, 2.5e9]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "bin_index,frequency_hz,gain\n0,2400000000,1\n1,2500000000,0.25\n");
    }

    proptest! {
        #[test]
        fn gains_bounded_and_monotone(s in 1e-6f64..1e3, j in 0.0f64..1e3, dj in 1e-3f64..10.0) {
            let g = wiener_gains(&pair(&[s, s], &[j, j + dj]));
            prop_assert!(g.h.iter().all(|&h| (0.0..=1.0).contains(&h)));
            prop_assert!(g.h[1] < g.h[0]);
        }
    }
}
