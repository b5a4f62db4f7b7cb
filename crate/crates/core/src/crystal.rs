//! Dispersion, quasi-phase-matching and pump focusing for the periodically
//! poled KTP crystal.
//!
//! Propagation is along the crystal x axis. The type-II interaction uses
//! the pump and the signal polarized along y and the idler along z.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal dielectric axis of the crystal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    Y,
    Z,
}

/// Polarization assignment of the type-II process: (pump, signal, idler).
pub const TYPE_II_AXES: (Axis, Axis, Axis) = (Axis::Y, Axis::Y, Axis::Z);

/// Temperature-dependent Sellmeier coefficient sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionModel {
    /// K. Kato and E. Takaoka, Appl. Opt. 41, 5040 (2002), flux-grown KTP,
    /// with the thermo-optic dispersion formulas from the same work
    /// (reference temperature 20 °C).
    #[default]
    KatoTakaoka2002,
}

impl DispersionModel {
    pub fn citation(&self) -> &'static str {
        match self {
            DispersionModel::KatoTakaoka2002 => {
                "K. Kato and E. Takaoka, Appl. Opt. 41, 5040-5044 (2002)"
            }
        }
    }

    /// Accepted wavelength range in meters (vacuum).
    ///
    /// The published fit covers 0.43-3.54 µm; the lower bound is extended to
    /// 0.40 µm so the 425-427 nm pump can be evaluated.
    pub fn wavelength_window(&self) -> (f64, f64) {
        match self {
            DispersionModel::KatoTakaoka2002 => (0.40e-6, 3.54e-6),
        }
    }

    /// Accepted temperature range in °C.
    pub fn temperature_window(&self) -> (f64, f64) {
        match self {
            DispersionModel::KatoTakaoka2002 => (0.0, 150.0),
        }
    }

    pub fn check_temperature(&self, temperature: f64) -> Result<()> {
        let (tmin, tmax) = self.temperature_window();
        if !(temperature >= tmin && temperature <= tmax) {
            return Err(Error::Domain {
                quantity: "temperature [°C]",
                value: temperature,
                min: tmin,
                max: tmax,
            });
        }
        Ok(())
    }

    /// Refractive index along `axis` at vacuum `wavelength` (m) and
    /// `temperature` (°C).
    pub fn index(&self, wavelength: f64, axis: Axis, temperature: f64) -> Result<f64> {
        let (lmin, lmax) = self.wavelength_window();
        if !(wavelength >= lmin && wavelength <= lmax) {
            return Err(Error::Domain {
                quantity: "wavelength [m]",
                value: wavelength,
                min: lmin,
                max: lmax,
            });
        }
        self.check_temperature(temperature)?;
        let l = wavelength * 1e6;
        let l2 = l * l;
        let (n2, dndt) = match (self, axis) {
            (DispersionModel::KatoTakaoka2002, Axis::Y) => (
                3.45018 + 0.04341 / (l2 - 0.04597) + 16.98825 / (l2 - 39.43799),
                (0.1997 / (l2 * l) - 0.4063 / l2 + 0.5154 / l + 0.5425) * 1e-5,
            ),
            (DispersionModel::KatoTakaoka2002, Axis::Z) => (
                4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171),
                (0.9221 / (l2 * l) - 2.9220 / l2 + 3.6677 / l - 0.1897) * 1e-5,
            ),
        };
        Ok(n2.sqrt() + dndt * (temperature - 20.0))
    }
}

/// Refractive index of KTP; see [`DispersionModel::index`].
pub fn refractive_index(
    model: DispersionModel,
    wavelength: f64,
    axis: Axis,
    temperature: f64,
) -> Result<f64> {
    model.index(wavelength, axis, temperature)
}

/// Geometry, poling and operating point of the nonlinear crystal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    /// Length along the propagation axis (m).
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Poling periods (m), one per grating.
    pub gratings: Vec<f64>,
    /// °C
    pub temperature: f64,
    pub dispersion_model: DispersionModel,
}

impl CrystalSpec {
    pub fn new(
        length: f64,
        gratings: Vec<f64>,
        temperature: f64,
        dispersion_model: DispersionModel,
    ) -> Result<Self> {
        let spec = CrystalSpec {
            length,
            width: 6e-3,
            height: 1e-3,
            gratings,
            temperature,
            dispersion_model,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 20 x 6 x 1 mm flux-grown PPKTP with 14.03 µm and 14.63 µm
    /// gratings at 25 °C.
    pub fn ppktp_design() -> Self {
        CrystalSpec {
            length: 20e-3,
            width: 6e-3,
            height: 1e-3,
            gratings: vec![14.03e-6, 14.63e-6],
            temperature: 25.0,
            dispersion_model: DispersionModel::KatoTakaoka2002,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::arg(format!("crystal length must be > 0, got {}", self.length)));
        }
        if self.gratings.is_empty() {
            return Err(Error::arg("crystal needs at least one poling grating"));
        }
        if let Some(p) = self.gratings.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::arg(format!("poling period must be > 0, got {p}")));
        }
        self.dispersion_model.check_temperature(self.temperature)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        let mut out = self.clone();
        out.temperature = temperature;
        out.validate()?;
        Ok(out)
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        let mut out = self.clone();
        out.length = length;
        out.validate()?;
        Ok(out)
    }

    pub fn poling_period(&self, grating_index: usize) -> Result<f64> {
        self.gratings.get(grating_index).copied().ok_or_else(|| {
            Error::arg(format!(
                "grating index {grating_index} out of range ({} gratings)",
                self.gratings.len()
            ))
        })
    }

    /// Wavenumber 2π n / λ (rad/m) inside the crystal.
    pub fn wavenumber(&self, wavelength: f64, axis: Axis) -> Result<f64> {
        let n = self.dispersion_model.index(wavelength, axis, self.temperature)?;
        Ok(2.0 * PI * n / wavelength)
    }
}

/// Pump focusing geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocusSpec {
    /// Focusing parameter L / z_R.
    pub xi: f64,
    pub rayleigh_range: f64,
    pub waist: f64,
    pub pump_wavelength: f64,
    pub pump_index: f64,
}

/// A collinear three-wave mixing point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseMatchPoint {
    pub pump_wavelength: f64,
    pub signal_wavelength: f64,
    pub idler_wavelength: f64,
    pub grating_index: usize,
    /// k_p - k_s - k_i - 2π/Λ (rad/m)
    pub mismatch: f64,
}

impl PhaseMatchPoint {
    /// Relative violation of 1/λp = 1/λs + 1/λi.
    pub fn energy_defect(&self) -> f64 {
        energy_defect(self.pump_wavelength, self.signal_wavelength, self.idler_wavelength)
    }
}

fn energy_defect(lp: f64, ls: f64, li: f64) -> f64 {
    let inv_p = 1.0 / lp;
    ((1.0 / ls + 1.0 / li) - inv_p).abs() / inv_p
}

/// Idler wavelength fixed by energy conservation.
pub fn idler_wavelength(pump_wavelength: f64, signal_wavelength: f64) -> f64 {
    1.0 / (1.0 / pump_wavelength - 1.0 / signal_wavelength)
}

/// Material mismatch k_p - k_s - k_i without the grating momentum.
pub fn material_mismatch(crystal: &CrystalSpec, lp: f64, ls: f64, li: f64) -> Result<f64> {
    if !(lp > 0.0 && ls > 0.0 && li > 0.0) {
        return Err(Error::arg("wavelengths must be positive"));
    }
    let defect = energy_defect(lp, ls, li);
    if !(defect <= 1e-9) {
        return Err(Error::arg(format!(
            "energy conservation violated: relative defect {defect:e}"
        )));
    }
    let (ap, as_, ai) = TYPE_II_AXES;
    Ok(crystal.wavenumber(lp, ap)? - crystal.wavenumber(ls, as_)? - crystal.wavenumber(li, ai)?)
}

/// Quasi-phase-matched mismatch Δk = k_p - k_s - k_i - 2π/Λ (rad/m).
pub fn qpm_mismatch(
    crystal: &CrystalSpec,
    grating_index: usize,
    lp: f64,
    ls: f64,
    li: f64,
) -> Result<f64> {
    let period = crystal.poling_period(grating_index)?;
    Ok(material_mismatch(crystal, lp, ls, li)? - 2.0 * PI / period)
}

/// Evaluate the mismatch for a pump and signal, deriving the idler.
pub fn phase_match_point(
    crystal: &CrystalSpec,
    grating_index: usize,
    pump_wavelength: f64,
    signal_wavelength: f64,
) -> Result<PhaseMatchPoint> {
    let idler = idler_wavelength(pump_wavelength, signal_wavelength);
    if !(idler > 0.0) {
        return Err(Error::arg("signal wavelength must exceed the pump wavelength"));
    }
    let mismatch = qpm_mismatch(crystal, grating_index, pump_wavelength, signal_wavelength, idler)?;
    Ok(PhaseMatchPoint {
        pump_wavelength,
        signal_wavelength,
        idler_wavelength: idler,
        grating_index,
        mismatch,
    })
}

/// Bracket searched for the degenerate phase-matching wavelength (m).
pub const DEGENERATE_BRACKET: (f64, f64) = (800e-9, 900e-9);
/// Bisection stops once the bracket is narrower than this (m).
const BISECTION_RESOLUTION: f64 = 1e-14;

fn degenerate_mismatch(crystal: &CrystalSpec, grating_index: usize, lambda: f64) -> Result<f64> {
    qpm_mismatch(crystal, grating_index, lambda / 2.0, lambda, lambda)
}

/// Degenerate signal/idler wavelength λ (pump at λ/2) where Δk vanishes.
pub fn degenerate_qpm_wavelength(crystal: &CrystalSpec, grating_index: usize) -> Result<f64> {
    crystal.poling_period(grating_index)?;
    let (mut lo, mut hi) = DEGENERATE_BRACKET;
    let mut f_lo = degenerate_mismatch(crystal, grating_index, lo)?;
    let f_hi = degenerate_mismatch(crystal, grating_index, hi)?;
    let no_match = || Error::NoPhaseMatch {
        grating: grating_index,
        lo_nm: DEGENERATE_BRACKET.0 * 1e9,
        hi_nm: DEGENERATE_BRACKET.1 * 1e9,
    };
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(no_match());
    }
    while hi - lo > BISECTION_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = degenerate_mismatch(crystal, grating_index, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Degenerate phase-matching point (signal = idler = 2 λ_pump).
pub fn degenerate_phase_match(crystal: &CrystalSpec, grating_index: usize) -> Result<PhaseMatchPoint> {
    let lambda = degenerate_qpm_wavelength(crystal, grating_index)?;
    Ok(PhaseMatchPoint {
        pump_wavelength: lambda / 2.0,
        signal_wavelength: lambda,
        idler_wavelength: lambda,
        grating_index,
        mismatch: degenerate_mismatch(crystal, grating_index, lambda)?,
    })
}

/// Central-difference slope dλ_deg/dT (m/K) at `temperature` with step `delta` (K).
pub fn temperature_tuning_coefficient(
    crystal: &CrystalSpec,
    grating_index: usize,
    temperature: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::arg("temperature step must be positive"));
    }
    let up = degenerate_qpm_wavelength(&crystal.with_temperature(temperature + delta)?, grating_index)?;
    let down =
        degenerate_qpm_wavelength(&crystal.with_temperature(temperature - delta)?, grating_index)?;
    Ok((up - down) / (2.0 * delta))
}

/// Pump waist giving the focusing parameter `xi` = L / z_R.
pub fn optimal_pump_waist(
    length: f64,
    pump_wavelength: f64,
    pump_index: f64,
    xi: f64,
) -> Result<FocusSpec> {
    for (name, v) in [
        ("length", length),
        ("pump_wavelength", pump_wavelength),
        ("pump_index", pump_index),
        ("xi", xi),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::arg(format!("{name} must be positive, got {v}")));
        }
    }
    let rayleigh_range = length / xi;
    let waist = (rayleigh_range * pump_wavelength / (PI * pump_index)).sqrt();
    Ok(FocusSpec {
        xi,
        rayleigh_range,
        waist,
        pump_wavelength,
        pump_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> CrystalSpec {
        CrystalSpec::ppktp_design()
    }

    // Evaluated independently at 30 significant digits.
    const N_Y_852_25C: f64 = 1.753_667_100_725_579_5;
    const N_Z_852_25C: f64 = 1.840_774_732_630_686_6;
    const N_Y_425_25C: f64 = 1.827_622_517_871_614_2;

    #[test]
    fn index_matches_published_polynomial() {
        let m = DispersionModel::KatoTakaoka2002;
        let ny = m.index(852e-9, Axis::Y, 25.0).unwrap();
        let nz = m.index(852e-9, Axis::Z, 25.0).unwrap();
        let np = m.index(425e-9, Axis::Y, 25.0).unwrap();
        assert!((ny / N_Y_852_25C - 1.0).abs() < 1e-9, "{ny}");
        assert!((nz / N_Z_852_25C - 1.0).abs() < 1e-9, "{nz}");
        assert!((np / N_Y_425_25C - 1.0).abs() < 1e-9, "{np}");
    }

    #[test]
    fn index_rejects_out_of_window() {
        let m = DispersionModel::KatoTakaoka2002;
        match m.index(0.1e-6, Axis::Y, 25.0) {
            Err(Error::Domain { quantity, .. }) => assert!(quantity.contains("wavelength")),
            other => panic!("expected domain error, got {other:?}"),
        }
        match m.index(852e-9, Axis::Z, 400.0) {
            Err(Error::Domain { quantity, .. }) => assert!(quantity.contains("temperature")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn index_decreasing_in_visible_near_ir() {
        let m = DispersionModel::KatoTakaoka2002;
        for axis in [Axis::Y, Axis::Z] {
            let grid: Vec<f64> = (0..50)
                .map(|i| m.index(0.6e-6 + 0.5e-6 * i as f64 / 49.0, axis, 25.0).unwrap())
                .collect();
            assert!(grid.windows(2).all(|w| w[1] < w[0]));
            assert!(grid.iter().all(|n| *n > 1.0));
        }
    }

    #[test]
    fn index_is_deterministic() {
        let m = DispersionModel::KatoTakaoka2002;
        let a = m.index(0.8123e-6, Axis::Z, 31.7).unwrap();
        let b = m.index(0.8123e-6, Axis::Z, 31.7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn degenerate_root_is_tight() {
        let c = design();
        for g in 0..2 {
            let pm = degenerate_phase_match(&c, g).unwrap();
            assert!(pm.mismatch.abs() < 0.1, "{}", pm.mismatch);
            assert!(pm.energy_defect() < 1e-12);
        }
    }

    #[test]
    fn grating_term_is_two_pi_over_period() {
        let c = design();
        let l = 850e-9;
        let with = qpm_mismatch(&c, 0, l / 2.0, l, l).unwrap();
        let without = material_mismatch(&c, l / 2.0, l, l).unwrap();
        let k_g = 2.0 * PI / 14.03e-6;
        assert!(((without - with) - k_g).abs() <= 1e-9 * k_g);
    }

    #[test]
    fn mismatch_changes_sign_across_root() {
        let c = design();
        let root = degenerate_qpm_wavelength(&c, 0).unwrap();
        let below = degenerate_mismatch(&c, 0, root - 2e-9).unwrap();
        let above = degenerate_mismatch(&c, 0, root + 2e-9).unwrap();
        assert!(below * above < 0.0);
    }

    #[test]
    fn energy_violation_rejected() {
        let c = design();
        assert!(matches!(
            qpm_mismatch(&c, 0, 425e-9, 850e-9, 851e-9),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn bad_grating_index() {
        assert!(degenerate_qpm_wavelength(&design(), 5).is_err());
    }

    #[test]
    fn no_bracket_gives_no_phase_match() {
        let c = CrystalSpec::new(20e-3, vec![5e-6], 25.0, DispersionModel::KatoTakaoka2002).unwrap();
        assert!(matches!(
            degenerate_qpm_wavelength(&c, 0),
            Err(Error::NoPhaseMatch { .. })
        ));
    }

    #[test]
    fn degenerate_wavelength_increases_with_period() {
        let mut prev = 0.0;
        for i in 0..10 {
            let period = 13.9e-6 + 0.1e-6 * i as f64;
            let c = CrystalSpec::new(20e-3, vec![period], 25.0, DispersionModel::default()).unwrap();
            let l = degenerate_qpm_wavelength(&c, 0).unwrap();
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn tuning_coefficient_is_smooth() {
        let c = design();
        let a = temperature_tuning_coefficient(&c, 0, 24.0, 1.0).unwrap();
        let b = temperature_tuning_coefficient(&c, 0, 26.0, 1.0).unwrap();
        assert!((a - b).abs() / a.abs() < 0.1);
        let full = temperature_tuning_coefficient(&c, 0, 25.0, 1.0).unwrap();
        let half = temperature_tuning_coefficient(&c, 0, 25.0, 0.5).unwrap();
        assert!((full - half).abs() / full.abs() < 0.01);
    }

    #[test]
    fn tuning_coefficient_predicts_shift() {
        let c = design();
        let slope = temperature_tuning_coefficient(&c, 0, 25.0, 1.0).unwrap();
        let base = degenerate_qpm_wavelength(&c, 0).unwrap();
        for dt in [-5.0, -2.0, 3.0, 5.0] {
            let shifted = degenerate_qpm_wavelength(&c.with_temperature(25.0 + dt).unwrap(), 0).unwrap();
            let predicted = dt * slope;
            assert!(((shifted - base) - predicted).abs() < 0.05 * predicted.abs());
        }
    }

    #[test]
    fn waist_scaling_and_invariants() {
        let f1 = optimal_pump_waist(20e-3, 425e-9, 1.83, 5.68).unwrap();
        let f2 = optimal_pump_waist(40e-3, 425e-9, 1.83, 5.68).unwrap();
        assert!((f2.waist / f1.waist / 2f64.sqrt() - 1.0).abs() < 1e-12);
        assert!((20e-3 / f1.rayleigh_range / f1.xi - 1.0).abs() < 1e-9);
        let zr = PI * f1.waist.powi(2) * f1.pump_index / f1.pump_wavelength;
        assert!((zr / f1.rayleigh_range - 1.0).abs() < 1e-9);
        assert!(optimal_pump_waist(0.0, 425e-9, 1.8, 5.68).is_err());
    }
}
