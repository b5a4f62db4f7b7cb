//! Ring-down fit of the coincidence peak.
//!
//! Model: `b + A exp(-(t - t0)/τ)` for `t >= t0`, `b` before, integrated
//! over each bin. Detector timing jitter rounds off the onset, so the fit
//! holds the exponential's reference at the low edge of the peak bin and
//! skips a guard band of bins around the rise. Background-only bins before
//! the guard band and the tail after it are fitted by damped Gauss-Newton
//! (Levenberg-Marquardt) with Poisson weights. The onset t0 is then placed
//! where the fitted exponential's area equals the excess counts of the
//! whole peak.

use nalgebra::{Matrix3, Vector3};

use super::histogram::CoincidenceHistogram;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Bins skipped after the peak bin.
    pub guard_after_peak: usize,
    /// Bins skipped before the peak bin.
    pub guard_before_peak: usize,
    pub max_iterations: usize,
    /// Relative parameter change that counts as converged.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            guard_after_peak: 2,
            guard_before_peak: 10,
            max_iterations: 200,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DecayUncertainties {
    pub amplitude: f64,
    pub decay_time: f64,
    pub background: f64,
    pub onset: f64,
    pub bandwidth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Counts per bin at the onset.
    pub amplitude: f64,
    /// s
    pub decay_time: f64,
    /// Counts per bin.
    pub background: f64,
    /// s
    pub onset: f64,
    /// 1 / (2π τ), Hz.
    pub bandwidth: f64,
    pub uncertainties: DecayUncertainties,
    /// Start of the rise region excluded from the fit (s).
    pub rise_start: f64,
    pub chi_squared: f64,
    pub degrees_of_freedom: usize,
    pub iterations: usize,
}

impl DecayFit {
    /// `key = value` report.
    pub fn report(&self) -> String {
        let u = &self.uncertainties;
        let mut s = String::new();
        let mut kv = |k: &str, v: f64| s.push_str(&format!("{k} = {v:e}\n"));
        kv("amplitude_counts_per_bin", self.amplitude);
        kv("amplitude_uncertainty", u.amplitude);
        kv("decay_time_s", self.decay_time);
        kv("decay_time_uncertainty_s", u.decay_time);
        kv("background_counts_per_bin", self.background);
        kv("background_uncertainty", u.background);
        kv("onset_s", self.onset);
        kv("onset_uncertainty_s", u.onset);
        kv("bandwidth_hz", self.bandwidth);
        kv("bandwidth_uncertainty_hz", u.bandwidth);
        kv("chi_squared", self.chi_squared);
        s.push_str(&format!("degrees_of_freedom = {}\n", self.degrees_of_freedom));
        s.push_str(&format!("iterations = {}\n", self.iterations));
        s
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fit bin in units of the bin width relative to the peak-bin edge.
#[derive(Clone, Copy)]
struct FitBin {
    u_lo: f64,
    u_hi: f64,
    tail: bool,
    counts: f64,
}

/// Model value and gradient w.r.t. (b, A, τ'), τ' in bin widths.
fn model(bin: &FitBin, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let (b, a, tau) = (p[0], p[1], p[2]);
    if !bin.tail {
        return (b, Vector3::new(1.0, 0.0, 0.0));
    }
    let e1 = (-bin.u_lo / tau).exp();
    let e2 = (-bin.u_hi / tau).exp();
    let g = tau * (e1 - e2);
    let dg = (e1 - e2) + (bin.u_lo * e1 - bin.u_hi * e2) / tau;
    (b + a * g, Vector3::new(1.0, g, a * dg))
}

struct Normal {
    jtwj: Matrix3<f64>,
    jtwr: Vector3<f64>,
    chi2: f64,
}

fn normal_equations(bins: &[FitBin], weights: &[f64], p: &Vector3<f64>) -> Normal {
    let mut jtwj = Matrix3::zeros();
    let mut jtwr = Vector3::zeros();
    let mut chi2 = 0.0;
    for (bin, w) in bins.iter().zip(weights) {
        let (m, g) = model(bin, p);
        let r = bin.counts - m;
        jtwj += *w * g * g.transpose();
        jtwr += *w * r * g;
        chi2 += w * r * r;
    }
    Normal { jtwj, jtwr, chi2 }
}

fn chi_squared(bins: &[FitBin], weights: &[f64], p: &Vector3<f64>) -> f64 {
    bins.iter()
        .zip(weights)
        .map(|(bin, w)| {
            let r = bin.counts - model(bin, p).0;
            w * r * r
        })
        .sum()
}

fn levenberg_marquardt(
    bins: &[FitBin],
    weights: &[f64],
    mut p: Vector3<f64>,
    opts: &FitOptions,
) -> Result<(Vector3<f64>, usize)> {
    let mut lambda = 1e-3;
    let mut current = normal_equations(bins, weights, &p);
    for iter in 1..=opts.max_iterations {
        let mut damped = current.jtwj;
        for k in 0..3 {
            damped[(k, k)] += lambda * current.jtwj[(k, k)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&current.jtwr) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = p + step;
        trial[0] = trial[0].max(0.0);
        let ok = trial[2] > 0.0 && trial[1].is_finite();
        let chi2 = if ok { chi_squared(bins, weights, &trial) } else { f64::INFINITY };
        if chi2 <= current.chi2 {
            let converged = (0..3).all(|k| {
                (trial[k] - p[k]).abs() <= opts.tolerance * trial[k].abs().max(1e-12)
            });
            p = trial;
            current = normal_equations(bins, weights, &p);
            lambda = (lambda / 10.0).max(1e-12);
            if converged {
                return Ok((p, iter));
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill step left: at the minimum to machine precision.
                return Ok((p, iter));
            }
        }
    }
    Err(Error::Fit {
        reason: format!("no convergence after {} iterations", opts.max_iterations),
        residual_norm: Some(current.chi2.sqrt()),
    })
}

pub fn fit_decay(hist: &CoincidenceHistogram) -> Result<DecayFit> {
    fit_decay_with(hist, &FitOptions::default())
}

pub fn fit_decay_with(hist: &CoincidenceHistogram, opts: &FitOptions) -> Result<DecayFit> {
    let n = hist.counts.len();
    if n < 8 {
        return Err(Error::Fit {
            reason: "histogram too short to fit".into(),
            residual_norm: None,
        });
    }
    let counts: Vec<f64> = hist.counts.iter().map(|c| *c as f64).collect();
    let lead = (n / 10).max(5).min(n);
    let b0 = median(counts[..lead].to_vec());
    let peak = (0..n).fold(0, |best, i| if counts[i] > counts[best] { i } else { best });
    if !(counts[peak] > b0 + 5.0 * b0.max(1.0).sqrt()) {
        return Err(Error::Fit {
            reason: format!("no detectable peak (max {} vs background {b0})", counts[peak]),
            residual_norm: None,
        });
    }
    let bw = hist.bin_width;
    let t_peak = hist.bin_edges(peak).0;
    let first_tail = peak + opts.guard_after_peak;
    let last_pre = peak.checked_sub(opts.guard_before_peak);
    let bins: Vec<FitBin> = (0..n)
        .filter(|i| *i >= first_tail || last_pre.is_some_and(|l| *i < l))
        .map(|i| {
            let (lo, hi) = hist.bin_edges(i);
            FitBin {
                u_lo: (lo - t_peak) / bw,
                u_hi: (hi - t_peak) / bw,
                tail: i >= first_tail,
                counts: counts[i],
            }
        })
        .collect();
    if bins.iter().filter(|b| b.tail).count() < 3 {
        return Err(Error::Fit {
            reason: "peak too close to the end of the window".into(),
            residual_norm: None,
        });
    }

    // Initial decay: first tail bin falling below 1/e of the peak excess.
    let excess0 = counts[peak] - b0;
    let tau0 = (peak..n)
        .find(|i| counts[*i] - b0 < excess0 / std::f64::consts::E)
        .map(|i| (i - peak) as f64)
        .unwrap_or(5.0)
        .max(1.0);
    let mut p = Vector3::new(b0, excess0 / (tau0 * (1.0 - (-1.0 / tau0).exp())), tau0);

    let mut weights: Vec<f64> = bins.iter().map(|b| 1.0 / b.counts.max(1.0)).collect();
    let mut iterations = 0;
    for _ in 0..3 {
        let (next, it) = levenberg_marquardt(&bins, &weights, p, opts)?;
        p = next;
        iterations += it;
        weights = bins.iter().map(|b| 1.0 / model(b, &p).0.max(1.0)).collect();
    }
    let normal = normal_equations(&bins, &weights, &p);
    let cov = normal.jtwj.try_inverse().ok_or_else(|| Error::Fit {
        reason: "singular normal matrix at the solution".into(),
        residual_norm: Some(normal.chi2.sqrt()),
    })?;
    let (b, a_peak, tau_bins) = (p[0], p[1], p[2]);
    let sd = |k: usize| cov[(k, k)].max(0.0).sqrt();

    // Onset from the peak area, including the excluded rise region.
    let rise_first = peak.saturating_sub(opts.guard_before_peak);
    let excess: f64 = counts[rise_first..].iter().map(|c| c - b).sum();
    let raw: f64 = counts[rise_first..].iter().sum();
    let u_end = (hist.window.1 - t_peak) / bw;
    let tail_area = a_peak * tau_bins * (1.0 - (-u_end / tau_bins).exp());
    let ratio = excess / tail_area;
    let shift_bins = if ratio > 0.0 { tau_bins * ratio.ln() } else { 0.0 };
    let onset = t_peak - shift_bins * bw;
    let amplitude = a_peak * (shift_bins / tau_bins).exp();

    let decay_time = tau_bins * bw;
    let bandwidth = 1.0 / (2.0 * std::f64::consts::PI * decay_time);
    let rel_tau = sd(2) / tau_bins;
    let rel_a = sd(1) / a_peak.abs().max(f64::MIN_POSITIVE);
    let rel_e = raw.sqrt() / excess.abs().max(f64::MIN_POSITIVE);
    let uncertainties = DecayUncertainties {
        amplitude: amplitude.abs() * (rel_a * rel_a + rel_e * rel_e).sqrt(),
        decay_time: sd(2) * bw,
        background: sd(0),
        onset: (decay_time * (rel_e * rel_e + rel_a * rel_a).sqrt()).max(bw / 12f64.sqrt()),
        bandwidth: bandwidth * rel_tau,
    };
    Ok(DecayFit {
        amplitude,
        decay_time,
        background: b,
        onset,
        bandwidth,
        uncertainties,
        rise_start: hist.bin_edges(rise_first).0,
        chi_squared: normal.chi2,
        degrees_of_freedom: bins.len().saturating_sub(3),
        iterations,
    })
}

/// Integration span of the peak after the onset, in decay times.
pub const PEAK_INTEGRATION_DECAYS: f64 = 7.0;

/// Detected pair rate (1/s): background-subtracted counts from the start
/// of the rise to t0 + 7τ, over the acquisition time.
pub fn coincidence_rate(hist: &CoincidenceHistogram, fit: &DecayFit) -> f64 {
    if fit.amplitude == 0.0 {
        return 0.0;
    }
    let start = fit.rise_start.min(fit.onset);
    let end = fit.onset + PEAK_INTEGRATION_DECAYS * fit.decay_time;
    let sum: f64 = (0..hist.len())
        .filter(|i| {
            let c = hist.bin_center(*i);
            c >= start && c < end
        })
        .map(|i| hist.counts[i] as f64 - fit.background)
        .sum();
    sum.max(0.0) / hist.acquisition_time
}
