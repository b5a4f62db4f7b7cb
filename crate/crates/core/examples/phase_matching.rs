//! Degenerate phase matching of both gratings, temperature tuning and the
//! focusing waist.

use narrowband_pairs::crystal::{
    degenerate_phase_match, optimal_pump_waist, refractive_index, temperature_tuning_coefficient, Axis,
    CrystalSpec,
};

fn main() -> narrowband_pairs::Result<()> {
    let crystal = CrystalSpec::ppktp_design();
    for g in 0..crystal.gratings.len() {
        let point = degenerate_phase_match(&crystal, g)?;
        let slope = temperature_tuning_coefficient(&crystal, g, crystal.temperature, 1.0)?;
        println!(
            "grating {:.2} um: signal = idler = {:.3} nm, pump {:.3} nm, {:.4} nm/K",
            crystal.gratings[g] * 1e6,
            point.signal_wavelength * 1e9,
            point.pump_wavelength * 1e9,
            slope * 1e9
        );
    }
    for t in [20.0, 30.0, 40.0] {
        let warm = crystal.with_temperature(t)?;
        let point = degenerate_phase_match(&warm, 0)?;
        println!("T = {t} C: {:.3} nm", point.signal_wavelength * 1e9);
    }
    let pump = degenerate_phase_match(&crystal, 0)?.pump_wavelength;
    let n = refractive_index(crystal.dispersion_model, pump, Axis::Y, crystal.temperature)?;
    let focus = optimal_pump_waist(crystal.length, pump, n, 5.68)?;
    println!("n_y(pump) = {n:.5}; waist for xi = 5.68: {:.2} um", focus.waist * 1e6);
    Ok(())
}
