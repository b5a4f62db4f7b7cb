//! Monte-Carlo pair emission through the filter line, with the time tags
//! round-tripped through the binary stream format.

use std::sync::Arc;

use narrowband_pairs::crystal::CrystalSpec;
use narrowband_pairs::filter::{FilterChain, SpdcSpectrum};
use narrowband_pairs::pairsim::{
    calibrate_pair_rate, merge_streams, read_binary, run_experiment, write_binary, Detectors, SourceConfig,
};

fn main() -> narrowband_pairs::Result<()> {
    let spectrum = Arc::new(SpdcSpectrum::degenerate(&CrystalSpec::ppktp_design(), 0, 250e6, 2001)?);
    let chain = FilterChain::design_at(0.5 * spectrum.pump_frequency).with_effective_fwhm(22.4e6)?;
    let detectors = Detectors::default();
    let mut source = SourceConfig::new(spectrum, 70.0, 0.0);
    source.generated_pair_rate_per_mw = calibrate_pair_rate(4.8, &source, &chain, &detectors)?;
    println!("generated pairs/(s mW): {:.1}", source.generated_pair_rate_per_mw);

    let out = run_experiment(&source, &chain, &detectors, 5.0, 20e-9, 42)?;
    println!(
        "{} pairs in {} s; clicks: filtered arm {}, open arm {}",
        out.generated_pairs,
        out.duration,
        out.stream_a.len(),
        out.stream_b.len()
    );

    let tags = merge_streams(&out.stream_a, &out.stream_b);
    let mut bytes = Vec::new();
    write_binary(&mut bytes, &tags)?;
    let back = read_binary(bytes.as_slice())?;
    println!("binary stream: {} bytes, round trip exact: {}", bytes.len(), back == tags);
    Ok(())
}
