use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BrightnessReport {
    pub detected_pairs_per_s_per_mw: f64,
    pub pump_power_mw: f64,
    /// pairs/s at `pump_power_mw`.
    pub extrapolated_rate_at_power: f64,
    /// Generated pairs/(s MHz mW), corrected for detector efficiency in both arms.
    pub spectral_brightness_generated: f64,
    pub efficiency_budget: Vec<(String, f64)>,
}

impl BrightnessReport {
    pub fn budget_product(&self) -> f64 {
        budget_product(&self.efficiency_budget)
    }

    /// `key = value` report.
    pub fn report(&self) -> String {
        let mut s = format!(
            "detected_pairs_per_s_per_mw = {:e}\npump_power_mw = {:e}\n\
             extrapolated_rate_at_power = {:e}\nspectral_brightness_generated = {:e}\n",
            self.detected_pairs_per_s_per_mw,
            self.pump_power_mw,
            self.extrapolated_rate_at_power,
            self.spectral_brightness_generated,
        );
        for (label, f) in &self.efficiency_budget {
            s.push_str(&format!("budget.{} = {f:e}\n", label.replace(' ', "_")));
        }
        s.push_str(&format!("budget_product = {:e}\n", self.budget_product()));
        s
    }
}

pub fn brightness_report(
    rate_per_mw: f64,
    pump_power_mw: f64,
    detector_efficiency: f64,
    bandwidth_hz: f64,
) -> Result<BrightnessReport> {
    if !(rate_per_mw >= 0.0 && rate_per_mw.is_finite()) {
        return Err(Error::arg(format!("rate must be >= 0, got {rate_per_mw}")));
    }
    if !(pump_power_mw >= 0.0 && pump_power_mw.is_finite()) {
        return Err(Error::arg(format!("pump power must be >= 0, got {pump_power_mw}")));
    }
    if !(detector_efficiency > 0.0 && detector_efficiency <= 1.0) {
        return Err(Error::arg(format!(
            "detector efficiency must be in (0, 1], got {detector_efficiency}"
        )));
    }
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(Error::arg(format!("bandwidth must be > 0, got {bandwidth_hz}")));
    }
    let budget = vec![
        ("detector a".to_string(), detector_efficiency),
        ("detector b".to_string(), detector_efficiency),
    ];
    Ok(BrightnessReport {
        detected_pairs_per_s_per_mw: rate_per_mw,
        pump_power_mw,
        extrapolated_rate_at_power: rate_per_mw * pump_power_mw,
        spectral_brightness_generated: rate_per_mw
            / (detector_efficiency * detector_efficiency * bandwidth_hz * 1e-6),
        efficiency_budget: budget,
    })
}

/// Product of loss factors, each in (0, 1].
pub fn efficiency_budget(factors: &[(&str, f64)]) -> Result<f64> {
    for (label, f) in factors {
        if !(*f > 0.0 && *f <= 1.0) {
            return Err(Error::arg(format!("budget factor '{label}' = {f} not in (0, 1]")));
        }
    }
    Ok(factors.iter().map(|(_, f)| f).product())
}

fn budget_product(factors: &[(String, f64)]) -> f64 {
    factors.iter().map(|(_, f)| f).product()
}

/// Loss factors of the filtered arm: two cavities, fiber coupling, detector.
pub fn filtered_arm_budget(cavity_peak: f64, fiber: f64, detector: f64) -> Vec<(&'static str, f64)> {
    vec![
        ("cavity 1", cavity_peak),
        ("cavity 2", cavity_peak),
        ("fiber coupling", fiber),
        ("detector", detector),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_numbers() {
        let b = brightness_report(4.8, 70.0, 0.45, 22.4e6).unwrap();
        assert!((b.extrapolated_rate_at_power - 336.0).abs() < 1e-9);
        assert!((b.spectral_brightness_generated - 4.8 / (0.45 * 0.45 * 22.4)).abs() < 1e-12);
        assert!((b.budget_product() - 0.2025).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_and_bandwidth_scaling() {
        let b = brightness_report(0.0, 70.0, 0.45, 22.4e6).unwrap();
        assert_eq!(b.extrapolated_rate_at_power, 0.0);
        assert_eq!(b.spectral_brightness_generated, 0.0);
        let one = brightness_report(3.0, 1.0, 0.5, 10e6).unwrap();
        let two = brightness_report(3.0, 1.0, 0.5, 20e6).unwrap();
        assert_eq!(one.spectral_brightness_generated, 2.0 * two.spectral_brightness_generated);
    }

    #[test]
    fn rejects_zero_efficiency_or_bandwidth() {
        assert!(brightness_report(1.0, 1.0, 0.0, 1e6).is_err());
        assert!(brightness_report(1.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn budget_products() {
        let p = efficiency_budget(&filtered_arm_budget(0.88, 0.42, 0.45)).unwrap();
        assert!((p - 0.88 * 0.88 * 0.42 * 0.45).abs() < 1e-15);
        assert!((p - 0.1464).abs() < 1e-4);
        let mut with_one = filtered_arm_budget(0.88, 0.42, 0.45);
        with_one.push(("mirror", 1.0));
        assert_eq!(efficiency_budget(&with_one).unwrap(), p);
        assert_eq!(efficiency_budget(&[]).unwrap(), 1.0);
        assert!(efficiency_budget(&[("bad", 1.5)]).is_err());
    }
}
