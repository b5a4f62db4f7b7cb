//! Run configuration.
//!
//! A config file is TOML: top-level `experiment`, `seed` and `output_dir`,
//! then one table per module. Every key is optional; missing keys take the
//! design values, so an empty file is a complete config. Unknown keys are
//! rejected. Units are part of the key names.
//!
//! ```toml
//! experiment = "full-pipeline"
//! seed = 1
//! output_dir = "out"
//!
//! [crystal]
//! length_m = 0.02
//! gratings_m = [14.03e-6, 14.63e-6]
//! grating_index = 0
//! temperature_c = 25.0
//!
//! [[filter.cavities]]
//! length_m = 77.5e-6
//! finesse = 620.0
//! peak_transmission = 0.88
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crystal::{CrystalSpec, DispersionModel};
use crate::error::{Error, Result};
use crate::filter::{CavitySpec, FilterChain};
use crate::pairsim::{DetectorSpec, Splitter, DEFAULT_PUMP_JITTER_RMS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Phasematch,
    Spectrum,
    Simulate,
    Correlate,
    Tomography,
    #[default]
    FullPipeline,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Phasematch => "phasematch",
            Experiment::Spectrum => "spectrum",
            Experiment::Simulate => "simulate",
            Experiment::Correlate => "correlate",
            Experiment::Tomography => "tomography",
            Experiment::FullPipeline => "full-pipeline",
        }
    }
}

/// TOML integers are signed 64-bit; larger seeds are written as strings.
mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(|_| serde::de::Error::custom("seed must be >= 0")),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub crystal: CrystalConfig,
    pub spectrum: SpectrumConfig,
    pub filter: FilterConfig,
    pub source: SourceSection,
    pub detectors: DetectorConfig,
    pub simulation: SimulationConfig,
    pub correlator: CorrelatorConfig,
    pub tomography: TomographyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::default(),
            seed: 1,
            output_dir: PathBuf::from("out"),
            crystal: CrystalConfig::default(),
            spectrum: SpectrumConfig::default(),
            filter: FilterConfig::default(),
            source: SourceSection::default(),
            detectors: DetectorConfig::default(),
            simulation: SimulationConfig::default(),
            correlator: CorrelatorConfig::default(),
            tomography: TomographyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalConfig {
    pub length_m: f64,
    pub gratings_m: Vec<f64>,
    /// 0 selects the 850 nm grating, 1 the 854 nm grating.
    pub grating_index: usize,
    pub temperature_c: f64,
    pub dispersion_model: DispersionModel,
    /// Focusing parameter L / z_R.
    pub focus_xi: f64,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        let d = CrystalSpec::ppktp_design();
        CrystalConfig {
            length_m: d.length,
            gratings_m: d.gratings,
            grating_index: 0,
            temperature_c: d.temperature,
            dispersion_model: d.dispersion_model,
            focus_xi: 5.68,
        }
    }
}

impl CrystalConfig {
    pub fn spec(&self) -> CrystalSpec {
        let mut s = CrystalSpec::ppktp_design();
        s.length = self.length_m;
        s.gratings = self.gratings_m.clone();
        s.temperature = self.temperature_c;
        s.dispersion_model = self.dispersion_model;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Half-width of the band pairs are sampled from in the simulation.
    pub sampling_half_span_hz: f64,
    pub sampling_points: usize,
    /// Half-width of the reported envelope.
    pub report_half_span_hz: f64,
    pub report_points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            sampling_half_span_hz: 250e6,
            sampling_points: 2001,
            report_half_span_hz: 300e9,
            report_points: 1201,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub length_m: f64,
    pub finesse: f64,
    pub peak_transmission: f64,
    pub center_offset_hz: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            length_m: 10e-3,
            finesse: 620.0,
            peak_transmission: 0.88,
            center_offset_hz: 0.0,
        }
    }
}

impl CavityConfig {
    pub fn spec(&self) -> CavitySpec {
        CavitySpec {
            length: self.length_m,
            finesse: self.finesse,
            peak_transmission: self.peak_transmission,
            center_offset: self.center_offset_hz,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub cavities: Vec<CavityConfig>,
    /// When > 0, the narrowest cavity's finesse is tuned so the cascade has
    /// this FWHM. 0 keeps the finesse values as given.
    pub target_fwhm_hz: f64,
    pub window_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            cavities: FilterChain::design()
                .cavities
                .iter()
                .map(|c| CavityConfig {
                    length_m: c.length,
                    finesse: c.finesse,
                    peak_transmission: c.peak_transmission,
                    center_offset_hz: c.center_offset,
                })
                .collect(),
            target_fwhm_hz: 22.4e6,
            window_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub pump_power_mw: f64,
    /// Detected coincidence rate the emission rate is calibrated to.
    pub detected_rate_per_mw: f64,
    /// When > 0, used as the emission rate instead of calibrating.
    pub generated_rate_per_mw: f64,
    pub splitter: Splitter,
    pub pump_jitter_rms_hz: f64,
    /// Power the brightness report extrapolates to.
    pub extrapolate_power_mw: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            pump_power_mw: 70.0,
            detected_rate_per_mw: 4.8,
            generated_rate_per_mw: 0.0,
            splitter: Splitter::Pbs,
            pump_jitter_rms_hz: DEFAULT_PUMP_JITTER_RMS,
            extrapolate_power_mw: 70.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub jitter_rms_s: f64,
    pub arm_coupling: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = DetectorSpec::default();
        DetectorConfig {
            efficiency: d.efficiency,
            dark_rate_hz: d.dark_rate,
            jitter_rms_s: d.jitter_rms,
            arm_coupling: d.arm_coupling,
        }
    }
}

impl DetectorConfig {
    pub fn spec(&self) -> DetectorSpec {
        DetectorSpec {
            efficiency: self.efficiency,
            dark_rate: self.dark_rate_hz,
            jitter_rms: self.jitter_rms_s,
            arm_coupling: self.arm_coupling,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub duration_s: f64,
    /// Cable delay added to the filtered arm.
    pub electronic_delay_s: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            duration_s: 400.0,
            electronic_delay_s: 20e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelatorConfig {
    pub bin_width_s: f64,
    pub window_s: (f64, f64),
    /// Time-tag stream to analyze (`.csv` or binary); simulated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        CorrelatorConfig {
            bin_width_s: crate::correlator::DEFAULT_BIN_WIDTH,
            window_s: crate::correlator::DEFAULT_WINDOW,
            input: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub counts_per_setting: f64,
    pub accidentals_per_setting: f64,
    /// Visibilities of the simulated source state.
    pub visibility_hv: f64,
    pub visibility_pm: f64,
    pub bootstrap_resamples: usize,
    /// Counts CSV to reconstruct; simulated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            counts_per_setting: 1e5,
            accidentals_per_setting: 0.0,
            visibility_hv: crate::tomography::DESIGN_VISIBILITY_HV,
            visibility_pm: crate::tomography::DESIGN_VISIBILITY_PM,
            bootstrap_resamples: 50,
            input: None,
        }
    }
}

fn bad(key: &str, constraint: &str, value: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: must be {constraint}, got {value}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, "> 0", v))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, ">= 0", v))
    }
}

fn fraction(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(bad(key, "in [0, 1]", v))
    }
}

impl RunConfig {
    /// Check every parameter against its module's preconditions.
    pub fn validate(&self) -> Result<()> {
        let c = &self.crystal;
        positive("crystal.length_m", c.length_m)?;
        if c.gratings_m.is_empty() {
            return Err(bad("crystal.gratings_m", "non-empty", "[]"));
        }
        for (i, g) in c.gratings_m.iter().enumerate() {
            positive(&format!("crystal.gratings_m[{i}]"), *g)?;
        }
        if c.grating_index >= c.gratings_m.len() {
            return Err(bad(
                "crystal.grating_index",
                &format!("< {}", c.gratings_m.len()),
                c.grating_index,
            ));
        }
        let (tlo, thi) = c.dispersion_model.temperature_window();
        if !(tlo..=thi).contains(&c.temperature_c) {
            return Err(bad("crystal.temperature_c", &format!("in [{tlo}, {thi}]"), c.temperature_c));
        }
        positive("crystal.focus_xi", c.focus_xi)?;

        let s = &self.spectrum;
        positive("spectrum.sampling_half_span_hz", s.sampling_half_span_hz)?;
        positive("spectrum.report_half_span_hz", s.report_half_span_hz)?;
        if s.sampling_points < 2 {
            return Err(bad("spectrum.sampling_points", ">= 2", s.sampling_points));
        }
        if s.report_points < 2 {
            return Err(bad("spectrum.report_points", ">= 2", s.report_points));
        }

        let f = &self.filter;
        if f.cavities.is_empty() {
            return Err(bad("filter.cavities", "non-empty", "[]"));
        }
        for (i, cav) in f.cavities.iter().enumerate() {
            let key = |k: &str| format!("filter.cavities[{i}].{k}");
            positive(&key("length_m"), cav.length_m)?;
            if !(cav.finesse > 1.0 && cav.finesse.is_finite()) {
                return Err(bad(&key("finesse"), "> 1", cav.finesse));
            }
            if !(cav.peak_transmission > 0.0 && cav.peak_transmission <= 1.0) {
                return Err(bad(&key("peak_transmission"), "in (0, 1]", cav.peak_transmission));
            }
            if !cav.center_offset_hz.is_finite() {
                return Err(bad(&key("center_offset_hz"), "finite", cav.center_offset_hz));
            }
        }
        non_negative("filter.target_fwhm_hz", f.target_fwhm_hz)?;
        if !(f.window_threshold > 0.0 && f.window_threshold < 1.0) {
            return Err(bad("filter.window_threshold", "in (0, 1)", f.window_threshold));
        }

        let src = &self.source;
        non_negative("source.pump_power_mw", src.pump_power_mw)?;
        non_negative("source.detected_rate_per_mw", src.detected_rate_per_mw)?;
        non_negative("source.generated_rate_per_mw", src.generated_rate_per_mw)?;
        non_negative("source.pump_jitter_rms_hz", src.pump_jitter_rms_hz)?;
        non_negative("source.extrapolate_power_mw", src.extrapolate_power_mw)?;

        let d = &self.detectors;
        fraction("detectors.efficiency", d.efficiency)?;
        fraction("detectors.arm_coupling", d.arm_coupling)?;
        non_negative("detectors.dark_rate_hz", d.dark_rate_hz)?;
        non_negative("detectors.jitter_rms_s", d.jitter_rms_s)?;

        positive("simulation.duration_s", self.simulation.duration_s)?;
        if !self.simulation.electronic_delay_s.is_finite() {
            return Err(bad("simulation.electronic_delay_s", "finite", self.simulation.electronic_delay_s));
        }

        let k = &self.correlator;
        positive("correlator.bin_width_s", k.bin_width_s)?;
        let span = k.window_s.1 - k.window_s.0;
        if !(span > 0.0 && span.is_finite()) {
            return Err(bad("correlator.window_s", "[t_min, t_max] with t_max > t_min", format!("{:?}", k.window_s)));
        }
        let bins = (span / k.bin_width_s).round();
        if (bins * k.bin_width_s - span).abs() > 1e-9 * span {
            return Err(bad("correlator.window_s", "a whole number of bins wide", format!("{:?}", k.window_s)));
        }

        let t = &self.tomography;
        non_negative("tomography.counts_per_setting", t.counts_per_setting)?;
        non_negative("tomography.accidentals_per_setting", t.accidentals_per_setting)?;
        fraction("tomography.visibility_hv", t.visibility_hv)?;
        fraction("tomography.visibility_pm", t.visibility_pm)?;
        if t.visibility_pm > t.visibility_hv {
            return Err(bad("tomography.visibility_pm", "<= tomography.visibility_hv", t.visibility_pm));
        }
        Ok(())
    }

    /// Normalized TOML text; `parse(dump(c)) == c`.
    pub fn dump(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse and validate TOML text.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((1, 1));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::parse(&std::fs::read_to_string(path)?)
}
