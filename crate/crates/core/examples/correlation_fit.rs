//! Coincidence histogram of a simulated run and the ring-down fit that
//! recovers the filter bandwidth.

use std::sync::Arc;

use narrowband_pairs::correlator::{build_histogram, coincidence_rate, fit_decay};
use narrowband_pairs::crystal::CrystalSpec;
use narrowband_pairs::filter::{FilterChain, SpdcSpectrum};
use narrowband_pairs::pairsim::{calibrate_pair_rate, run_experiment, Detectors, SourceConfig};

fn main() -> narrowband_pairs::Result<()> {
    let spectrum = Arc::new(SpdcSpectrum::degenerate(&CrystalSpec::ppktp_design(), 0, 250e6, 2001)?);
    let chain = FilterChain::design_at(0.5 * spectrum.pump_frequency).with_effective_fwhm(22.4e6)?;
    let detectors = Detectors::default();
    let mut source = SourceConfig::new(spectrum, 70.0, 0.0);
    source.generated_pair_rate_per_mw = calibrate_pair_rate(4.8, &source, &chain, &detectors)?;

    let duration = 100.0;
    let out = run_experiment(&source, &chain, &detectors, duration, 20e-9, 7)?;
    let hist = build_histogram(&out.times_b(), &out.times_a(), 1e-9, (-200e-9, 200e-9), duration)?;
    let fit = fit_decay(&hist)?;
    print!("{}", fit.report());
    println!(
        "tau = {:.3} ns -> bandwidth {:.2} MHz; pairs/s = {:.1}",
        fit.decay_time * 1e9,
        fit.bandwidth * 1e-6,
        coincidence_rate(&hist, &fit)
    );
    Ok(())
}
