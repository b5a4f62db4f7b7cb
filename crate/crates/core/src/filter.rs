//! SPDC spectral envelope, Fabry-Perot transfer functions and the cascaded
//! filter line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::crystal::{qpm_mismatch, CrystalSpec};
use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// Pair intensity at signal detuning `detuning` (Hz) from half the pump
/// frequency: sinc²(Δk L / 2) with the signal at ν_p/2 + δ and the idler at
/// ν_p/2 - δ. Equals 1 wherever Δk = 0.
pub fn spdc_intensity(
    crystal: &CrystalSpec,
    grating_index: usize,
    pump_frequency: f64,
    detuning: f64,
) -> Result<f64> {
    let half = 0.5 * pump_frequency;
    let nu_s = half + detuning;
    let nu_i = half - detuning;
    if !(nu_s > 0.0 && nu_i > 0.0) {
        return Err(Error::arg(format!("detuning {detuning} Hz exceeds half the pump frequency")));
    }
    let dk = qpm_mismatch(
        crystal,
        grating_index,
        SPEED_OF_LIGHT / pump_frequency,
        SPEED_OF_LIGHT / nu_s,
        SPEED_OF_LIGHT / nu_i,
    )?;
    Ok(sinc2(0.5 * dk * crystal.length))
}

fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// Pump frequency (Hz) that phase-matches degenerate emission for a grating.
pub fn degenerate_pump_frequency(crystal: &CrystalSpec, grating_index: usize) -> Result<f64> {
    let lambda = crate::crystal::degenerate_qpm_wavelength(crystal, grating_index)?;
    Ok(2.0 * SPEED_OF_LIGHT / lambda)
}

const FWHM_SEARCH_LIMIT: f64 = 5e12;

/// Full width at half maximum (Hz) of the pair envelope.
///
/// The half-maximum level is taken relative to the envelope value at zero
/// detuning.
pub fn spdc_fwhm(crystal: &CrystalSpec, grating_index: usize, pump_frequency: f64) -> Result<f64> {
    let f = |d: f64| spdc_intensity(crystal, grating_index, pump_frequency, d);
    let peak = f(0.0)?;
    let (lo, hi) = half_max_edges(&f, peak, 1e9, FWHM_SEARCH_LIMIT)?;
    Ok(hi - lo)
}

/// Bisected half-maximum crossings on either side of zero detuning.
fn half_max_edges(
    f: &dyn Fn(f64) -> Result<f64>,
    peak: f64,
    step: f64,
    limit: f64,
) -> Result<(f64, f64)> {
    let half = 0.5 * peak;
    let mut edges = [0.0; 2];
    for (slot, sign) in edges.iter_mut().zip([-1.0, 1.0]) {
        let mut inner = 0.0;
        let mut outer = step;
        loop {
            if outer > limit {
                return Err(Error::Search(format!(
                    "envelope stays above half maximum within ±{limit:e} Hz"
                )));
            }
            if f(sign * outer)? < half {
                break;
            }
            inner = outer;
            outer += step;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if f(sign * mid)? >= half {
                inner = mid;
            } else {
                outer = mid;
            }
            if outer - inner <= 1e-12 * outer.max(1.0) {
                break;
            }
        }
        *slot = sign * 0.5 * (inner + outer);
    }
    Ok((edges[0], edges[1]))
}

/// Tabulated, peak-normalized pair envelope.
#[derive(Clone, Debug)]
pub struct SpdcSpectrum {
    pub crystal: CrystalSpec,
    pub grating_index: usize,
    pub pump_frequency: f64,
    /// Signal detunings (Hz), strictly increasing.
    pub detunings: Vec<f64>,
    /// Relative intensity, max = 1.
    pub intensity: Vec<f64>,
    pub fwhm: f64,
}

impl SpdcSpectrum {
    /// Tabulate `points` samples over [-half_span, half_span].
    pub fn tabulate(
        crystal: &CrystalSpec,
        grating_index: usize,
        pump_frequency: f64,
        half_span: f64,
        points: usize,
    ) -> Result<Self> {
        if points < 2 || !(half_span > 0.0) {
            return Err(Error::arg("spectrum grid needs >= 2 points and a positive span"));
        }
        let detunings: Vec<f64> = (0..points)
            .map(|i| -half_span + 2.0 * half_span * i as f64 / (points - 1) as f64)
            .collect();
        let mut intensity = detunings
            .iter()
            .map(|d| spdc_intensity(crystal, grating_index, pump_frequency, *d))
            .collect::<Result<Vec<_>>>()?;
        let peak = spdc_intensity(crystal, grating_index, pump_frequency, 0.0)?
            .max(intensity.iter().cloned().fold(0.0, f64::max));
        if !(peak > 0.0) {
            return Err(Error::arg("pair envelope vanishes on the grid"));
        }
        intensity.iter_mut().for_each(|v| *v /= peak);
        let fwhm = spdc_fwhm(crystal, grating_index, pump_frequency)?;
        Ok(SpdcSpectrum {
            crystal: crystal.clone(),
            grating_index,
            pump_frequency,
            detunings,
            intensity,
            fwhm,
        })
    }

    /// Design envelope at the degenerate phase-match pump.
    pub fn degenerate(
        crystal: &CrystalSpec,
        grating_index: usize,
        half_span: f64,
        points: usize,
    ) -> Result<Self> {
        let pump = degenerate_pump_frequency(crystal, grating_index)?;
        Self::tabulate(crystal, grating_index, pump, half_span, points)
    }

    pub fn half_span(&self) -> f64 {
        0.5 * (self.detunings[self.detunings.len() - 1] - self.detunings[0])
    }

    /// Trapezoid integral of the tabulated intensity (Hz).
    pub fn integral(&self) -> f64 {
        trapezoid(&self.detunings, &self.intensity)
    }

    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.detunings.iter().copied().zip(self.intensity.iter().copied()).collect()
    }

    /// Cumulative distribution on the grid, for inverse-CDF sampling.
    pub fn sampler(&self) -> Result<EnvelopeSampler> {
        EnvelopeSampler::new(&self.detunings, &self.intensity)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Inverse-CDF sampler over a piecewise-linear density.
#[derive(Clone, Debug)]
pub struct EnvelopeSampler {
    x: Vec<f64>,
    y: Vec<f64>,
    cdf: Vec<f64>,
}

impl EnvelopeSampler {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::arg("sampler grid mismatch"));
        }
        let mut cdf = Vec::with_capacity(x.len());
        cdf.push(0.0);
        for i in 1..x.len() {
            let seg = 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
            cdf.push(cdf[i - 1] + seg);
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::arg("sampler density integrates to zero"));
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(EnvelopeSampler { x: x.to_vec(), y: y.to_vec(), cdf })
    }

    /// Map a uniform variate in [0, 1) to a detuning.
    pub fn sample(&self, u: f64) -> f64 {
        let i = match self.cdf.partition_point(|c| *c <= u) {
            0 => 1,
            i if i >= self.cdf.len() => self.cdf.len() - 1,
            i => i,
        };
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let (y0, y1) = (self.y[i - 1], self.y[i]);
        let total_seg = self.cdf[i] - self.cdf[i - 1];
        if total_seg <= 0.0 {
            return x0;
        }
        // Solve the quadratic for the linear density inside the segment.
        let w = x1 - x0;
        let area = (u - self.cdf[i - 1]) / total_seg * 0.5 * w * (y0 + y1);
        let slope = (y1 - y0) / w;
        let t = if slope.abs() < 1e-300 || (slope * w).abs() < 1e-12 * y0.abs() {
            area / y0
        } else {
            let disc = (y0 * y0 + 2.0 * slope * area).max(0.0);
            (disc.sqrt() - y0) / slope
        };
        (x0 + t.clamp(0.0, w)).clamp(x0, x1)
    }
}

/// Free spectral range c / (2 L) in Hz.
pub fn cavity_fsr(length: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * length)
}

/// A single Fabry-Perot filter cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    pub length: f64,
    pub finesse: f64,
    pub peak_transmission: f64,
    /// Detuning (Hz) of the nearest resonance from the lock frequency.
    #[serde(default)]
    pub center_offset: f64,
}

impl CavitySpec {
    pub fn new(length: f64, finesse: f64, peak_transmission: f64) -> Result<Self> {
        let c = CavitySpec {
            length,
            finesse,
            peak_transmission,
            center_offset: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::arg(format!("cavity length must be > 0, got {}", self.length)));
        }
        if !(self.finesse > 1.0 && self.finesse.is_finite()) {
            return Err(Error::arg(format!("finesse must be > 1, got {}", self.finesse)));
        }
        if !(self.peak_transmission > 0.0 && self.peak_transmission <= 1.0) {
            return Err(Error::arg(format!(
                "peak_transmission must be in (0, 1], got {}",
                self.peak_transmission
            )));
        }
        if !self.center_offset.is_finite() {
            return Err(Error::arg("center_offset must be finite"));
        }
        Ok(())
    }

    pub fn fsr(&self) -> f64 {
        cavity_fsr(self.length)
    }

    pub fn linewidth(&self) -> f64 {
        cavity_linewidth(self)
    }

    pub fn transmission(&self, detuning: f64) -> f64 {
        airy_transmission(self, detuning)
    }
}

/// Resonance FWHM = FSR / finesse (Hz).
pub fn cavity_linewidth(cavity: &CavitySpec) -> f64 {
    cavity.fsr() / cavity.finesse
}

/// Airy transmission T_peak / (1 + (2F/π)² sin²(π δν / FSR)).
pub fn airy_transmission(cavity: &CavitySpec, detuning: f64) -> f64 {
    let coeff = (2.0 * cavity.finesse / PI).powi(2);
    let s = (PI * (detuning - cavity.center_offset) / cavity.fsr()).sin();
    cavity.peak_transmission / (1.0 + coeff * s * s)
}

/// Cavities in cascade, all referenced to one lock frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterChain {
    pub cavities: Vec<CavitySpec>,
    /// Hz
    pub lock_frequency: f64,
}

/// Wavelength (m) the design chain locks to.
pub const DESIGN_LOCK_WAVELENGTH: f64 = 849.8e-9;

impl FilterChain {
    pub fn new(cavities: Vec<CavitySpec>, lock_frequency: f64) -> Result<Self> {
        let chain = FilterChain { cavities, lock_frequency };
        chain.validate()?;
        Ok(chain)
    }

    /// 77.5 µm + 10 mm cavities, finesse 620, 88 % peak transmission each.
    pub fn design() -> Self {
        Self::design_at(SPEED_OF_LIGHT / DESIGN_LOCK_WAVELENGTH)
    }

    pub fn design_at(lock_frequency: f64) -> Self {
        FilterChain {
            cavities: vec![
                CavitySpec {
                    length: 77.5e-6,
                    finesse: 620.0,
                    peak_transmission: 0.88,
                    center_offset: 0.0,
                },
                CavitySpec {
                    length: 10e-3,
                    finesse: 620.0,
                    peak_transmission: 0.88,
                    center_offset: 0.0,
                },
            ],
            lock_frequency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cavities.is_empty() {
            return Err(Error::arg("filter chain needs at least one cavity"));
        }
        if !(self.lock_frequency > 0.0 && self.lock_frequency.is_finite()) {
            return Err(Error::arg("lock_frequency must be > 0"));
        }
        self.cavities.iter().try_for_each(CavitySpec::validate)
    }

    pub fn peak_product(&self) -> f64 {
        self.cavities.iter().map(|c| c.peak_transmission).product()
    }

    pub fn transmission(&self, detuning: f64) -> f64 {
        cascade_transmission(self, detuning)
    }

    /// Transmission normalized by the product of peak transmissions.
    pub fn relative_transmission(&self, detuning: f64) -> f64 {
        self.transmission(detuning) / self.peak_product()
    }

    fn narrowest(&self) -> &CavitySpec {
        self.cavities
            .iter()
            .min_by(|a, b| a.linewidth().total_cmp(&b.linewidth()))
            .expect("validated chain is non-empty")
    }

    /// Rescale the narrowest cavity's finesse so the composite window has the
    /// requested FWHM (Hz).
    pub fn with_effective_fwhm(&self, target: f64) -> Result<Self> {
        if !(target > 0.0) {
            return Err(Error::arg("target bandwidth must be positive"));
        }
        let idx = self
            .cavities
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.linewidth().total_cmp(&b.1.linewidth()))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::arg("empty chain"))?;
        let mut chain = self.clone();
        let mut lo: f64 = 1.0 + 1e-9;
        let mut hi: f64 = 1e7;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            chain.cavities[idx].finesse = mid;
            if effective_filter_fwhm(&chain)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-12 {
                break;
            }
        }
        chain.cavities[idx].finesse = (lo * hi).sqrt();
        Ok(chain)
    }
}

/// Product of the member Airy functions.
pub fn cascade_transmission(chain: &FilterChain, detuning: f64) -> f64 {
    chain.cavities.iter().map(|c| airy_transmission(c, detuning)).product()
}

/// Scan step used for window counting (Hz).
pub const WINDOW_SCAN_STEP: f64 = 1e6;

/// Number of disjoint transmission windows of the chain, at or above
/// `threshold` relative transmission, inside the FWHM span of `spectrum`.
pub fn count_transmission_windows(
    chain: &FilterChain,
    spectrum: &SpdcSpectrum,
    threshold: f64,
) -> Result<usize> {
    let half = 0.5 * spectrum.fwhm;
    count_windows_in_span(chain, -half, half, threshold)
}

/// Window count over an explicit detuning span [lo, hi] (Hz).
pub fn count_windows_in_span(chain: &FilterChain, lo: f64, hi: f64, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::arg(format!("threshold must be in (0, 1), got {threshold}")));
    }
    if !(hi > lo) {
        return Err(Error::arg("empty detuning span"));
    }
    let n = ((hi - lo) / WINDOW_SCAN_STEP).ceil() as usize;
    let x = |i: usize| (lo + i as f64 * WINDOW_SCAN_STEP).min(hi);
    let rel = |d: f64| chain.relative_transmission(d);
    let values: Vec<f64> = (0..=n).map(|i| rel(x(i))).collect();

    let mut count = 0;
    let mut inside = false;
    for (i, &v) in values.iter().enumerate() {
        if v >= threshold {
            if !inside {
                count += 1;
                inside = true;
            }
            continue;
        }
        inside = false;
        // Refine coarse local maxima that might hide a narrow peak.
        if i > 0 && i < n && v > values[i - 1] && v >= values[i + 1] {
            let peak = golden_max(&rel, x(i - 1), x(i + 1), 60);
            if peak >= threshold {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g: f64 = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

fn golden_argmax(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g: f64 = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// FWHM (Hz) of the composite window nearest the lock frequency.
pub fn effective_filter_fwhm(chain: &FilterChain) -> Result<f64> {
    chain.validate()?;
    let narrow = chain.narrowest();
    let lw = narrow.linewidth();
    let f = |d: f64| chain.transmission(d);
    let center = golden_argmax(&f, narrow.center_offset - lw, narrow.center_offset + lw, 100);
    let peak = f(center);
    let shifted = |d: f64| Ok(f(center + d));
    let (lo, hi) = half_max_edges(&shifted, peak, lw / 50.0, 0.5 * narrow.fsr())?;
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn narrow() -> CavitySpec {
        CavitySpec::new(10e-3, 620.0, 0.88).unwrap()
    }

    fn wide() -> CavitySpec {
        CavitySpec::new(77.5e-6, 620.0, 0.88).unwrap()
    }

    #[test]
    fn fsr_values() {
        // c / (2 L) by hand: 299792458 / 155e-6 and 299792458 / 20e-3.
        assert!((cavity_fsr(77.5e-6) - 1.934e12).abs() < 0.001e12);
        assert!((cavity_fsr(10e-3) - 14.99e9).abs() < 0.01e9);
        assert_eq!(cavity_fsr(20e-3), cavity_fsr(10e-3) / 2.0);
    }

    #[test]
    fn linewidth_values() {
        assert!((narrow().linewidth() - 24.2e6).abs() < 0.1e6);
        assert!((wide().linewidth() - 3.12e9).abs() < 0.01e9);
        let mut c = narrow();
        c.finesse = 1240.0;
        assert_eq!(c.linewidth(), narrow().linewidth() / 2.0);
    }

    #[test]
    fn airy_shape() {
        let c = narrow();
        assert_eq!(c.transmission(0.0), 0.88);
        let floor = 0.88 / (1.0 + (2.0 * 620.0 / PI).powi(2));
        assert!((c.transmission(c.fsr() / 2.0) / floor - 1.0).abs() < 1e-12);
        let half = c.linewidth() / 2.0;
        for d in [half, -half] {
            assert!((c.transmission(d) / 0.44 - 1.0).abs() < 0.005);
        }
    }

    #[test]
    fn airy_is_periodic() {
        let c = wide();
        for d in [0.0, 1.3e9, -7.7e9, 0.9e12] {
            let a = c.transmission(d);
            let b = c.transmission(d + c.fsr());
            assert!((a - b).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn center_offset_shifts_resonance() {
        let mut c = narrow();
        c.center_offset = 5e6;
        assert_eq!(c.transmission(5e6), 0.88);
        assert!(c.transmission(0.0) < 0.88);
    }

    #[test]
    fn cascade_product_and_bounds() {
        let chain = FilterChain::design();
        assert!((chain.transmission(0.0) - 0.7744).abs() < 1e-12);
        let single = FilterChain::new(vec![narrow()], chain.lock_frequency).unwrap();
        assert_eq!(single.transmission(3e6), narrow().transmission(3e6));
        for i in -200..200 {
            let d = i as f64 * 0.37e9;
            let rel = chain.relative_transmission(d);
            let m = chain
                .cavities
                .iter()
                .map(|c| c.transmission(d) / c.peak_transmission)
                .fold(1.0, f64::min);
            assert!(rel <= m + 1e-15);
        }
    }

    #[test]
    fn window_counts() {
        let chain = FilterChain::design();
        assert_eq!(count_windows_in_span(&chain, -143e9, 143e9, 0.5).unwrap(), 1);
        let alone = FilterChain::new(vec![narrow()], chain.lock_frequency).unwrap();
        let n = count_windows_in_span(&alone, -71.5e9, 71.5e9, 0.5).unwrap();
        assert!((9..=10).contains(&n), "{n}");
        assert!(count_windows_in_span(&chain, -1e9, 1e9, 1.5).is_err());
        assert!(count_windows_in_span(&chain, -1e9, 1e9, 0.0).is_err());
    }

    #[test]
    fn refinement_catches_sub_step_peak() {
        // A 5 MHz-wide line placed between two scan samples.
        let mut c = CavitySpec::new(10e-3, 14.99e9 / 0.2e6, 1.0).unwrap();
        c.center_offset = 0.5e6;
        let chain = FilterChain::new(vec![c], 3.5e14).unwrap();
        assert_eq!(count_windows_in_span(&chain, -2e6, 2.01e6, 0.5).unwrap(), 1);
    }

    #[test]
    fn composite_fwhm() {
        let chain = FilterChain::design();
        let w = effective_filter_fwhm(&chain).unwrap();
        assert!(w > 22e6 && w < 24.2e6, "{w}");
        let single = FilterChain::new(vec![narrow()], 3.5e14).unwrap();
        let w1 = effective_filter_fwhm(&single).unwrap();
        assert!((w1 / narrow().linewidth() - 1.0).abs() < 1e-3);
        let pair = FilterChain::new(vec![narrow(), narrow()], 3.5e14).unwrap();
        let w2 = effective_filter_fwhm(&pair).unwrap();
        let expected = narrow().linewidth() * (2f64.sqrt() - 1.0f64).sqrt();
        assert!((w2 / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn tune_to_target_bandwidth() {
        let chain = FilterChain::design().with_effective_fwhm(22.4e6).unwrap();
        let w = effective_filter_fwhm(&chain).unwrap();
        assert!((w / 22.4e6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn envelope_peak_and_bounds() {
        let crystal = CrystalSpec::ppktp_design();
        let pump = degenerate_pump_frequency(&crystal, 0).unwrap();
        let at0 = spdc_intensity(&crystal, 0, pump, 0.0).unwrap();
        assert!((at0 - 1.0).abs() < 1e-6);
        for i in -100..=100 {
            let v = spdc_intensity(&crystal, 0, pump, i as f64 * 1e10).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn fwhm_scales_inverse_with_length() {
        let crystal = CrystalSpec::ppktp_design();
        let pump = degenerate_pump_frequency(&crystal, 0).unwrap();
        let w1 = spdc_fwhm(&crystal, 0, pump).unwrap();
        let w2 = spdc_fwhm(&crystal.with_length(40e-3).unwrap(), 0, pump).unwrap();
        assert!((w2 / (w1 / 2.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn fwhm_edges_are_symmetric() {
        let crystal = CrystalSpec::ppktp_design();
        let pump = degenerate_pump_frequency(&crystal, 0).unwrap();
        let f = |d: f64| spdc_intensity(&crystal, 0, pump, d);
        let (lo, hi) = half_max_edges(&f, 1.0, 1e9, 5e12).unwrap();
        assert!((lo + hi).abs() < 1e-3 * hi);
    }

    #[test]
    fn fwhm_search_fails_for_flat_envelope() {
        let crystal = CrystalSpec::ppktp_design().with_length(1e-9).unwrap();
        let pump = degenerate_pump_frequency(&CrystalSpec::ppktp_design(), 0).unwrap();
        assert!(matches!(spdc_fwhm(&crystal, 0, pump), Err(Error::Search(_))));
    }

    #[test]
    fn envelope_integral_converges() {
        let crystal = CrystalSpec::ppktp_design();
        let coarse = SpdcSpectrum::degenerate(&crystal, 0, 1e12, 2001).unwrap().integral();
        let fine = SpdcSpectrum::degenerate(&crystal, 0, 1e12, 8001).unwrap().integral();
        assert!(coarse > 0.0 && coarse.is_finite());
        assert!((coarse / fine - 1.0).abs() < 1e-3);
    }

    #[test]
    fn sampler_reproduces_uniform_density() {
        let s = EnvelopeSampler::new(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((s.sample(0.25) - 0.5).abs() < 1e-12);
        assert!((s.sample(0.75) - 1.5).abs() < 1e-12);
        let t = EnvelopeSampler::new(&[0.0, 1.0], &[0.0, 2.0]).unwrap();
        // CDF x², inverse sqrt(u)
        assert!((t.sample(0.25) - 0.5).abs() < 1e-12);
    }
}
