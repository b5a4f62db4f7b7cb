//! A configured full run written to a temporary directory.

use narrowband_pairs::config::{Experiment, RunConfig};
use narrowband_pairs::pipeline;

fn main() -> narrowband_pairs::Result<()> {
    let dir = std::env::temp_dir().join("nbpairs-full-pipeline-example");
    let mut config = RunConfig::parse("seed = 5\n[simulation]\nduration_s = 60\n")?;
    config.experiment = Experiment::FullPipeline;
    config.output_dir = dir.clone();
    let out = pipeline::run(&config)?;
    for f in &out.files {
        println!("{}", f.display());
    }
    print!("{}", std::fs::read_to_string(dir.join("decay_fit.txt"))?);
    Ok(())
}
