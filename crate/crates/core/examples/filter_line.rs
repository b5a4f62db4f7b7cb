//! SPDC envelope, the two-cavity filter line and its single transmission
//! window.

use narrowband_pairs::crystal::CrystalSpec;
use narrowband_pairs::filter::{
    count_transmission_windows, effective_filter_fwhm, FilterChain, SpdcSpectrum,
};

fn main() -> narrowband_pairs::Result<()> {
    let crystal = CrystalSpec::ppktp_design();
    let spectrum = SpdcSpectrum::degenerate(&crystal, 0, 300e9, 1201)?;
    println!("SPDC FWHM: {:.1} GHz", spectrum.fwhm * 1e-9);

    let chain = FilterChain::design_at(0.5 * spectrum.pump_frequency);
    for c in &chain.cavities {
        println!(
            "cavity L = {:.4} mm: FSR {:.2} GHz, linewidth {:.2} MHz",
            c.length * 1e3,
            c.fsr() * 1e-9,
            c.linewidth() * 1e-6
        );
    }
    println!("composite FWHM: {:.2} MHz", effective_filter_fwhm(&chain)? * 1e-6);
    println!(
        "windows above half maximum inside the SPDC band: {}",
        count_transmission_windows(&chain, &spectrum, 0.5)?
    );

    let tuned = chain.with_effective_fwhm(22.4e6)?;
    println!(
        "tuned to 22.4 MHz: second-cavity finesse {:.1}",
        tuned.cavities[1].finesse
    );
    for d in [0.0, 10e6, 30e6, 100e6, 15e9] {
        println!("  T({:>8.1} MHz) = {:.4}", d * 1e-6, tuned.transmission(d));
    }
    Ok(())
}
