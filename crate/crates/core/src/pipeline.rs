//! Configured runs: each experiment kind chains the modules and writes its
//! outputs plus a manifest into the output directory.
//!
//! | experiment      | files                                                        |
//! |-----------------|--------------------------------------------------------------|
//! | `phasematch`    | `phasematch.txt`                                             |
//! | `spectrum`      | `spectrum.csv`, `filter.csv`, `spectrum.txt`                 |
//! | `simulate`      | `timestamps.bin`, `simulate.txt`                             |
//! | `correlate`     | `histogram.csv`, `histogram_plot.csv`, `decay_fit.txt`, `brightness.txt` |
//! | `tomography`    | `tomography_counts.csv`, `density_matrix.csv`, `density_matrix_linear.csv`, `density_matrix_plot.csv`, `tomography.txt` |
//! | `full-pipeline` | all of the above except `timestamps.bin` and `simulate.txt`  |
//!
//! Every run also writes `config.toml` (the normalized config) and
//! `manifest.txt` (version, seed, config hash and per-file SHA-256). No
//! output depends on wall-clock time or thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::config::{Experiment, RunConfig};
use crate::correlator::{
    brightness_report, build_histogram, coincidence_rate, efficiency_budget, filtered_arm_budget,
    fit_decay, BrightnessReport, CoincidenceHistogram, DecayFit,
};
use crate::crystal::{
    degenerate_phase_match, optimal_pump_waist, refractive_index, temperature_tuning_coefficient,
    Axis, CrystalSpec,
};
use crate::error::{Error, Result};
use crate::filter::{count_transmission_windows, effective_filter_fwhm, FilterChain, SpdcSpectrum};
use crate::pairsim::{
    calibrate_pair_rate, merge_streams, read_binary, read_csv, run_experiment, write_binary,
    Channel, Detectors, ExperimentOutput, SourceConfig,
};
use crate::plot::{density_matrix_blocks, PlotData};
use crate::rng::derive_seed;
use crate::tomography::{
    analyze_record, canonical_16_settings, linear_reconstruction, simulate_counts,
    subtract_accidentals, visibility_calibrated_state, DensityMatrix, EntanglementReport,
    TomographyRecord,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Collects output files and their digests.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key} = {value}").expect("writing to a String");
}

pub struct PhasematchSummary {
    pub crystal: CrystalSpec,
    /// Degenerate signal wavelength per grating (m).
    pub degenerate_wavelengths: Vec<f64>,
    /// dλ/dT per grating (m/K).
    pub tuning_coefficients: Vec<f64>,
    pub pump_wavelength: f64,
    pub pump_index: f64,
    pub waist: f64,
    pub report: String,
}

pub fn phasematch(config: &RunConfig) -> Result<PhasematchSummary> {
    let crystal = config.crystal.spec();
    let mut report = String::new();
    let mut degenerate_wavelengths = Vec::new();
    let mut tuning_coefficients = Vec::new();
    for (g, period) in crystal.gratings.iter().enumerate() {
        let point = degenerate_phase_match(&crystal, g)?;
        let slope = temperature_tuning_coefficient(&crystal, g, crystal.temperature, 1.0)?;
        kv(&mut report, &format!("grating{g}.period_um"), period * 1e6);
        kv(&mut report, &format!("grating{g}.degenerate_wavelength_nm"), point.signal_wavelength * 1e9);
        kv(&mut report, &format!("grating{g}.pump_wavelength_nm"), point.pump_wavelength * 1e9);
        kv(&mut report, &format!("grating{g}.tuning_nm_per_k"), slope * 1e9);
        degenerate_wavelengths.push(point.signal_wavelength);
        tuning_coefficients.push(slope);
    }
    let g = config.crystal.grating_index;
    let pump_wavelength = degenerate_wavelengths[g] / 2.0;
    let pump_index = refractive_index(crystal.dispersion_model, pump_wavelength, Axis::Y, crystal.temperature)?;
    let focus = optimal_pump_waist(crystal.length, pump_wavelength, pump_index, config.crystal.focus_xi)?;
    kv(&mut report, "selected_grating", g);
    kv(&mut report, "temperature_c", crystal.temperature);
    kv(&mut report, "pump_index_y", pump_index);
    kv(&mut report, "focus_xi", focus.xi);
    kv(&mut report, "rayleigh_range_mm", focus.rayleigh_range * 1e3);
    kv(&mut report, "pump_waist_um", focus.waist * 1e6);
    Ok(PhasematchSummary {
        crystal,
        degenerate_wavelengths,
        tuning_coefficients,
        pump_wavelength,
        pump_index,
        waist: focus.waist,
        report,
    })
}

/// Filter chain locked to the degenerate signal frequency, tuned to the
/// target FWHM when one is configured.
pub fn filter_chain(config: &RunConfig, pump_frequency: f64) -> Result<FilterChain> {
    let cavities = config.filter.cavities.iter().map(|c| c.spec()).collect();
    let chain = FilterChain::new(cavities, 0.5 * pump_frequency)?;
    if config.filter.target_fwhm_hz > 0.0 {
        chain.with_effective_fwhm(config.filter.target_fwhm_hz)
    } else {
        Ok(chain)
    }
}

pub struct SpectrumSummary {
    pub spectrum: SpdcSpectrum,
    pub chain: FilterChain,
    pub filter_fwhm: f64,
    pub windows: usize,
    pub report: String,
}

/// Half-width and step of the tabulated filter transmission.
const FILTER_TABLE_HALF_SPAN: f64 = 3e9;
const FILTER_TABLE_STEP: f64 = 1e6;

pub fn spectrum(config: &RunConfig) -> Result<SpectrumSummary> {
    let crystal = config.crystal.spec();
    let g = config.crystal.grating_index;
    let s = &config.spectrum;
    let spectrum = SpdcSpectrum::degenerate(&crystal, g, s.report_half_span_hz, s.report_points)?;
    let chain = filter_chain(config, spectrum.pump_frequency)?;
    let filter_fwhm = effective_filter_fwhm(&chain)?;
    let windows = count_transmission_windows(&chain, &spectrum, config.filter.window_threshold)?;
    let d = &config.detectors;
    let budget = efficiency_budget(&filtered_arm_budget(
        chain.cavities.iter().map(|c| c.peak_transmission).product::<f64>().sqrt(),
        d.arm_coupling,
        d.efficiency,
    ))?;

    let mut report = String::new();
    kv(&mut report, "pump_frequency_hz", format!("{:e}", spectrum.pump_frequency));
    kv(&mut report, "spdc_fwhm_ghz", spectrum.fwhm * 1e-9);
    for (i, c) in chain.cavities.iter().enumerate() {
        kv(&mut report, &format!("cavity{i}.fsr_ghz"), c.fsr() * 1e-9);
        kv(&mut report, &format!("cavity{i}.finesse"), c.finesse);
        kv(&mut report, &format!("cavity{i}.linewidth_mhz"), c.linewidth() * 1e-6);
    }
    kv(&mut report, "filter_fwhm_mhz", filter_fwhm * 1e-6);
    kv(&mut report, "transmission_windows", windows);
    kv(&mut report, "filtered_arm_detection_probability", budget);
    Ok(SpectrumSummary {
        spectrum,
        chain,
        filter_fwhm,
        windows,
        report,
    })
}

fn spectrum_csv(s: &SpdcSpectrum) -> String {
    let mut out = String::from("detuning_hz,relative_intensity\n");
    for (d, v) in s.detunings.iter().zip(&s.intensity) {
        writeln!(out, "{d:e},{v:e}").expect("writing to a String");
    }
    out
}

fn filter_csv(chain: &FilterChain) -> String {
    let mut out = String::from("detuning_hz,transmission\n");
    let n = (FILTER_TABLE_HALF_SPAN / FILTER_TABLE_STEP).round() as i64;
    for i in -n..=n {
        let d = i as f64 * FILTER_TABLE_STEP;
        writeln!(out, "{d:e},{:e}", chain.transmission(d)).expect("writing to a String");
    }
    out
}

pub struct SimulationSummary {
    pub output: ExperimentOutput,
    pub generated_rate_per_mw: f64,
    pub report: String,
}

pub fn simulate(config: &RunConfig, chain: &FilterChain) -> Result<SimulationSummary> {
    let crystal = config.crystal.spec();
    let s = &config.spectrum;
    let sampling = Arc::new(SpdcSpectrum::degenerate(
        &crystal,
        config.crystal.grating_index,
        s.sampling_half_span_hz,
        s.sampling_points,
    )?);
    let src = &config.source;
    let mut source = SourceConfig::new(sampling, src.pump_power_mw, 0.0);
    source.splitter = src.splitter;
    source.pump_frequency_jitter_rms = src.pump_jitter_rms_hz;
    let detectors = Detectors {
        a: config.detectors.spec(),
        b: config.detectors.spec(),
    };
    let rate = if src.generated_rate_per_mw > 0.0 {
        src.generated_rate_per_mw
    } else {
        calibrate_pair_rate(src.detected_rate_per_mw, &source, chain, &detectors)?
    };
    source.generated_pair_rate_per_mw = rate;
    let sim = &config.simulation;
    let output = run_experiment(
        &source,
        chain,
        &detectors,
        sim.duration_s,
        sim.electronic_delay_s,
        derive_seed(config.seed, "simulate", 0),
    )?;
    let mut report = String::new();
    kv(&mut report, "duration_s", sim.duration_s);
    kv(&mut report, "pump_power_mw", src.pump_power_mw);
    kv(&mut report, "generated_rate_per_mw", rate);
    kv(&mut report, "generated_pairs", output.generated_pairs);
    kv(&mut report, "clicks_a", output.stream_a.len());
    kv(&mut report, "clicks_b", output.stream_b.len());
    Ok(SimulationSummary {
        output,
        generated_rate_per_mw: rate,
        report,
    })
}

pub struct CorrelationSummary {
    pub histogram: CoincidenceHistogram,
    pub fit: DecayFit,
    /// Detected pairs/s.
    pub rate: f64,
    pub brightness: BrightnessReport,
}

/// Histogram with the unfiltered arm (B) as start and the filtered arm (A)
/// as stop, ring-down fit and brightness.
pub fn correlate(config: &RunConfig, times_a: &[f64], times_b: &[f64], duration: f64) -> Result<CorrelationSummary> {
    let k = &config.correlator;
    let histogram = build_histogram(times_b, times_a, k.bin_width_s, k.window_s, duration)?;
    let fit = fit_decay(&histogram)?;
    let rate = coincidence_rate(&histogram, &fit);
    let power = config.source.pump_power_mw;
    if !(power > 0.0) {
        return Err(Error::arg("source.pump_power_mw must be > 0 to normalize the pair rate"));
    }
    let brightness = brightness_report(
        rate / power,
        config.source.extrapolate_power_mw,
        config.detectors.efficiency,
        fit.bandwidth,
    )?;
    Ok(CorrelationSummary {
        histogram,
        fit,
        rate,
        brightness,
    })
}

fn load_stream(path: &Path) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let file = std::io::BufReader::new(fs::File::open(path)?);
    let tags = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(file)?
    } else {
        read_binary(file)?
    };
    let secs = |c: Channel| -> Vec<f64> {
        tags.iter().filter(|t| t.channel == c).map(|t| t.time_ps as f64 * 1e-12).collect()
    };
    let (a, b) = (secs(Channel::A), secs(Channel::B));
    let last = tags.iter().map(|t| t.time_ps).max().unwrap_or(0) as f64 * 1e-12;
    if !(last > 0.0) {
        return Err(Error::arg(format!("stream {} holds no clicks after t = 0", path.display())));
    }
    Ok((a, b, last))
}

pub struct TomographySummary {
    pub record: TomographyRecord,
    pub linear: DensityMatrix,
    pub state: DensityMatrix,
    pub report: EntanglementReport,
    pub clamped_settings: usize,
}

pub fn tomography(config: &RunConfig) -> Result<TomographySummary> {
    let t = &config.tomography;
    let record = match &t.input {
        Some(path) => TomographyRecord::read_csv(std::io::BufReader::new(fs::File::open(path)?), 1.0)?,
        None => simulate_counts(
            &visibility_calibrated_state(t.visibility_hv, t.visibility_pm)?,
            &canonical_16_settings(),
            t.counts_per_setting,
            t.accidentals_per_setting,
            derive_seed(config.seed, "tomography", 0),
        )?,
    };
    let clamped_settings = subtract_accidentals(&record).clamped.len();
    let linear = linear_reconstruction(&record)?;
    let (state, report) = analyze_record(&record, t.bootstrap_resamples, derive_seed(config.seed, "bootstrap", 0))?;
    Ok(TomographySummary {
        record,
        linear,
        state,
        report,
        clamped_settings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
}

/// The config as recorded next to its outputs: `output_dir` is replaced by
/// "." so the record and its hash do not depend on where the run was written.
pub fn recorded_config(config: &RunConfig) -> Result<String> {
    RunConfig {
        output_dir: PathBuf::from("."),
        ..config.clone()
    }
    .dump()
}

pub fn config_hash(config: &RunConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(recorded_config(config)?.as_bytes())))
}

/// Execute the configured experiment and write its outputs.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut out = Outputs::new(&config.output_dir)?;
    let kind = config.experiment;
    let full = kind == Experiment::FullPipeline;

    if kind == Experiment::Phasematch || full {
        out.write("phasematch.txt", phasematch(config)?.report.as_bytes())?;
    }
    let mut spec = None;
    if kind == Experiment::Spectrum || full {
        let s = spectrum(config)?;
        out.write("spectrum.csv", spectrum_csv(&s.spectrum).as_bytes())?;
        out.write("filter.csv", filter_csv(&s.chain).as_bytes())?;
        out.write("spectrum.txt", s.report.as_bytes())?;
        spec = Some(s);
    }
    let chain = |spec: &Option<SpectrumSummary>| -> Result<FilterChain> {
        match spec {
            Some(s) => Ok(s.chain.clone()),
            None => {
                let pump = crate::filter::degenerate_pump_frequency(&config.crystal.spec(), config.crystal.grating_index)?;
                filter_chain(config, pump)
            }
        }
    };
    if kind == Experiment::Simulate {
        let sim = simulate(config, &chain(&spec)?)?;
        let mut bytes = Vec::new();
        write_binary(&mut bytes, &merge_streams(&sim.output.stream_a, &sim.output.stream_b))?;
        out.write("timestamps.bin", &bytes)?;
        out.write("simulate.txt", sim.report.as_bytes())?;
    }
    if kind == Experiment::Correlate || full {
        let (a, b, duration, sim_report) = match (&config.correlator.input, full) {
            (Some(path), false) => {
                let (a, b, d) = load_stream(path)?;
                (a, b, d, None)
            }
            _ => {
                let sim = simulate(config, &chain(&spec)?)?;
                let (a, b) = (sim.output.times_a(), sim.output.times_b());
                (a, b, sim.output.duration, Some(sim.report))
            }
        };
        let c = correlate(config, &a, &b, duration)?;
        let mut csv = Vec::new();
        c.histogram.write_csv(&mut csv)?;
        out.write("histogram.csv", &csv)?;
        out.write("histogram_plot.csv", PlotData::from_histogram(&c.histogram).render().as_bytes())?;
        let mut fit = c.fit.report();
        kv(&mut fit, "coincidence_rate_per_s", c.rate);
        kv(&mut fit, "accidental_floor_counts_per_bin", c.histogram.accidental_floor());
        if let Some(r) = sim_report {
            for line in r.lines() {
                fit.push_str(&format!("simulation.{line}\n"));
            }
        }
        out.write("decay_fit.txt", fit.as_bytes())?;
        out.write("brightness.txt", c.brightness.report().as_bytes())?;
    }
    if kind == Experiment::Tomography || full {
        let t = tomography(config)?;
        let mut csv = Vec::new();
        t.record.write_csv(&mut csv)?;
        out.write("tomography_counts.csv", &csv)?;
        out.write("density_matrix.csv", density_matrix_blocks(&t.state).as_bytes())?;
        out.write("density_matrix_linear.csv", density_matrix_blocks(&t.linear).as_bytes())?;
        out.write("density_matrix_plot.csv", PlotData::from_density_matrix(&t.state).render().as_bytes())?;
        let mut rep = t.report.report();
        kv(&mut rep, "linear_estimate_physical", t.linear.is_physical());
        kv(&mut rep, "linear_min_eigenvalue", format!("{:e}", t.linear.eigenvalues()[0]));
        kv(&mut rep, "accidental_clamped_settings", t.clamped_settings);
        out.write("tomography.txt", rep.as_bytes())?;
    }

    out.write("config.toml", recorded_config(config)?.as_bytes())?;
    let mut manifest = String::new();
    kv(&mut manifest, "tool", format!("narrowband-pairs {VERSION}"));
    kv(&mut manifest, "experiment", kind.name());
    kv(&mut manifest, "seed", config.seed);
    kv(&mut manifest, "config_sha256", config_hash(config)?);
    for (name, digest) in &out.files {
        kv(&mut manifest, &format!("sha256.{name}"), digest);
    }
    fs::write(out.dir.join("manifest.txt"), &manifest)?;
    let mut files: Vec<PathBuf> = out.files.iter().map(|(n, _)| out.dir.join(n)).collect();
    files.push(out.dir.join("manifest.txt"));
    Ok(RunOutput { files })
}
