//! Seeded Monte-Carlo of pair emission, splitting, filtering and detection.
//!
//! The run duration is cut into fixed-length chunks. Each chunk draws from
//! its own substream derived from (seed, label, chunk index), so the output
//! does not depend on how many worker threads process the chunks.

mod stream;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{effective_filter_fwhm, EnvelopeSampler, FilterChain, SpdcSpectrum};
use crate::rng::{substream, SimRng};
use crate::tomography::DensityMatrix;

pub use stream::{
    merge_streams, read_binary, read_csv, write_binary, write_csv, TimeTag, RECORD_BYTES,
};

/// Length of one simulation chunk (s).
pub const CHUNK_DURATION: f64 = 0.05;
/// Output timestamp granularity (ps).
pub const TIMESTAMP_QUANTUM_PS: i64 = 4;
/// Default pump frequency jitter (Hz rms): the 125 kHz master-laser
/// stability doubled by frequency conversion.
pub const DEFAULT_PUMP_JITTER_RMS: f64 = 250e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitter {
    /// 50/50 non-polarizing beam splitter.
    Bs50,
    /// Polarizing beam splitter: H to arm A, V to arm B.
    Pbs,
}

/// Pair source driven by the blue pump.
#[derive(Clone, Debug)]
pub struct SourceConfig {
    /// mW
    pub pump_power: f64,
    /// Pairs/(s mW) emitted inside the tabulated spectrum span.
    pub generated_pair_rate_per_mw: f64,
    pub spectrum: Arc<SpdcSpectrum>,
    pub polarization_state: DensityMatrix,
    pub splitter: Splitter,
    /// Hz rms
    pub pump_frequency_jitter_rms: f64,
}

impl SourceConfig {
    /// Singlet source behind a PBS with the default pump jitter.
    pub fn new(spectrum: Arc<SpdcSpectrum>, pump_power: f64, rate_per_mw: f64) -> Self {
        SourceConfig {
            pump_power,
            generated_pair_rate_per_mw: rate_per_mw,
            spectrum,
            polarization_state: DensityMatrix::singlet(),
            splitter: Splitter::Pbs,
            pump_frequency_jitter_rms: DEFAULT_PUMP_JITTER_RMS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pump_power >= 0.0 && self.pump_power.is_finite()) {
            return Err(Error::arg("pump_power must be >= 0"));
        }
        if !(self.generated_pair_rate_per_mw >= 0.0 && self.generated_pair_rate_per_mw.is_finite()) {
            return Err(Error::arg("generated_pair_rate_per_mw must be >= 0"));
        }
        if !(self.pump_frequency_jitter_rms >= 0.0) {
            return Err(Error::arg("pump_frequency_jitter_rms must be >= 0"));
        }
        if !self.polarization_state.is_physical() {
            return Err(Error::arg("polarization state is not physical"));
        }
        Ok(())
    }

    /// Pairs per second.
    pub fn pair_rate(&self) -> f64 {
        self.pump_power * self.generated_pair_rate_per_mw
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// counts/s
    pub dark_rate: f64,
    /// s rms
    pub jitter_rms: f64,
    /// Fiber coupling into the detector arm.
    pub arm_coupling: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            efficiency: 0.45,
            dark_rate: 50.0,
            jitter_rms: 1e-9,
            arm_coupling: 0.42,
        }
    }
}

impl DetectorSpec {
    pub fn ideal() -> Self {
        DetectorSpec {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_rms: 0.0,
            arm_coupling: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::arg("detector efficiency must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.arm_coupling) {
            return Err(Error::arg("arm_coupling must be in [0, 1]"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::arg("dark_rate must be >= 0"));
        }
        if !(self.jitter_rms >= 0.0 && self.jitter_rms.is_finite()) {
            return Err(Error::arg("jitter_rms must be >= 0"));
        }
        Ok(())
    }

    /// Probability that a photon entering the arm produces a click.
    pub fn survival(&self) -> f64 {
        self.arm_coupling * self.efficiency
    }
}

/// The two detector arms; arm A carries the filter line.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Detectors {
    pub a: DetectorSpec,
    pub b: DetectorSpec,
}

/// One down-converted pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEvent {
    /// s
    pub emission_time: f64,
    /// Pump frequency excursion of this pair (Hz).
    pub pump_offset: f64,
    /// Signal frequency minus half the nominal pump frequency (Hz).
    pub signal_detuning: f64,
}

impl PairEvent {
    /// Idler detuning; signal + idler detunings equal the pump offset.
    pub fn idler_detuning(&self) -> f64 {
        self.pump_offset - self.signal_detuning
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    A,
    B,
}

impl Channel {
    pub fn byte(self) -> u8 {
        match self {
            Channel::A => 0,
            Channel::B => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Channel::A),
            1 => Some(Channel::B),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::A => "A",
            Channel::B => "B",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    H,
    V,
}

/// Where each photon of a pair went after the splitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitOutcome {
    pub signal: Channel,
    pub idler: Channel,
    /// Collapsed H/V outcome (signal, idler); PBS only.
    pub polarizations: Option<(Polarization, Polarization)>,
}

impl SplitOutcome {
    /// False when both photons left through the same port.
    pub fn coincidence_possible(&self) -> bool {
        self.signal != self.idler
    }
}

/// Route a pair through the splitter.
pub fn split_pair<R: Rng + ?Sized>(
    splitter: Splitter,
    state: &DensityMatrix,
    rng: &mut R,
) -> SplitOutcome {
    match splitter {
        Splitter::Bs50 => {
            let pick = |r: &mut R| if r.random::<bool>() { Channel::A } else { Channel::B };
            let signal = pick(rng);
            let idler = pick(rng);
            SplitOutcome {
                signal,
                idler,
                polarizations: None,
            }
        }
        Splitter::Pbs => {
            let m = state.matrix();
            let probs = [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re];
            let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = 3;
            for (i, p) in probs.iter().enumerate() {
                acc += p.max(0.0);
                if u < acc {
                    idx = i;
                    break;
                }
            }
            let pol = |bit: usize| if bit == 0 { Polarization::H } else { Polarization::V };
            let (ps, pi) = (pol(idx >> 1), pol(idx & 1));
            let port = |p: Polarization| match p {
                Polarization::H => Channel::A,
                Polarization::V => Channel::B,
            };
            SplitOutcome {
                signal: port(ps),
                idler: port(pi),
                polarizations: Some((ps, pi)),
            }
        }
    }
}

/// Filter chain with its cached single-pole ring-down time.
#[derive(Clone, Debug)]
pub struct FilterLine {
    pub chain: FilterChain,
    /// Composite FWHM (Hz).
    pub bandwidth: f64,
    /// 1 / (2π bandwidth), s.
    pub decay_time: f64,
}

impl FilterLine {
    pub fn new(chain: FilterChain) -> Result<Self> {
        let bandwidth = effective_filter_fwhm(&chain)?;
        Ok(FilterLine {
            chain,
            bandwidth,
            decay_time: 1.0 / (2.0 * std::f64::consts::PI * bandwidth),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterOutcome {
    Blocked,
    Passed { delay: f64 },
}

/// Send one photon, detuned `detuning` Hz from the lock frequency, through
/// the filter line.
pub fn filter_photon<R: Rng + ?Sized>(detuning: f64, line: &FilterLine, rng: &mut R) -> FilterOutcome {
    let p = line.chain.transmission(detuning);
    if rng.random::<f64>() >= p {
        return FilterOutcome::Blocked;
    }
    let exp = Exp::new(1.0 / line.decay_time).expect("decay time is positive");
    FilterOutcome::Passed {
        delay: exp.sample(rng),
    }
}

/// Click time for a photon arriving at `arrival`, if detected.
pub fn detect<R: Rng + ?Sized>(arrival: f64, detector: &DetectorSpec, rng: &mut R) -> Option<f64> {
    if rng.random::<f64>() >= detector.survival() {
        return None;
    }
    if detector.jitter_rms > 0.0 {
        let n = Normal::new(0.0, detector.jitter_rms).expect("finite jitter");
        Some(arrival + n.sample(rng))
    } else {
        Some(arrival)
    }
}

fn chunk_bounds(duration: f64) -> Vec<(f64, f64)> {
    let n = (duration / CHUNK_DURATION).ceil() as usize;
    (0..n)
        .map(|k| {
            let start = k as f64 * CHUNK_DURATION;
            (start, ((k + 1) as f64 * CHUNK_DURATION).min(duration))
        })
        .filter(|(s, e)| e > s)
        .collect()
}

/// Homogeneous Poisson arrivals within [start, end), sorted.
fn poisson_times<R: Rng + ?Sized>(rate: f64, start: f64, end: f64, rng: &mut R) -> Vec<f64> {
    let mean = rate * (end - start);
    if !(mean > 0.0) {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    let mut t: Vec<f64> = (0..n).map(|_| start + rng.random::<f64>() * (end - start)).collect();
    t.sort_by(f64::total_cmp);
    t
}

fn validate_duration(duration: f64) -> Result<()> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::arg(format!("duration must be >= 0, got {duration}")));
    }
    Ok(())
}

fn chunk_events(
    config: &SourceConfig,
    sampler: &EnvelopeSampler,
    start: f64,
    end: f64,
    rng: &mut SimRng,
) -> Vec<PairEvent> {
    let times = poisson_times(config.pair_rate(), start, end, rng);
    let jitter = Normal::new(0.0, config.pump_frequency_jitter_rms.max(0.0)).expect("finite");
    times
        .into_iter()
        .map(|emission_time| {
            let pump_offset = if config.pump_frequency_jitter_rms > 0.0 {
                jitter.sample(rng)
            } else {
                0.0
            };
            let signal_detuning = 0.5 * pump_offset + sampler.sample(rng.random::<f64>());
            PairEvent {
                emission_time,
                pump_offset,
                signal_detuning,
            }
        })
        .collect()
}

/// Emitted pairs over [0, duration).
pub fn generate_pair_events(config: &SourceConfig, duration: f64, seed: u64) -> Result<Vec<PairEvent>> {
    config.validate()?;
    validate_duration(duration)?;
    let sampler = config.spectrum.sampler()?;
    let chunks: Vec<Vec<PairEvent>> = chunk_bounds(duration)
        .into_par_iter()
        .enumerate()
        .map(|(k, (s, e))| chunk_events(config, &sampler, s, e, &mut substream(seed, "pairs", k as u64)))
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

fn chunked_dark(detector: &DetectorSpec, duration: f64, seed: u64, label: &str) -> Vec<f64> {
    let chunks: Vec<Vec<f64>> = chunk_bounds(duration)
        .into_par_iter()
        .enumerate()
        .map(|(k, (s, e))| poisson_times(detector.dark_rate, s, e, &mut substream(seed, label, k as u64)))
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Dark-count timestamps (s), sorted.
pub fn dark_counts(detector: &DetectorSpec, duration: f64, seed: u64) -> Result<Vec<f64>> {
    detector.validate()?;
    validate_duration(duration)?;
    Ok(chunked_dark(detector, duration, seed, "dark"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Pair,
    Dark,
}

/// One detector click. `origin` is kept for diagnostics; analysis code
/// works on timestamps only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectionRecord {
    pub channel: Channel,
    /// Picoseconds, on the 4 ps grid.
    pub time_ps: i64,
    pub origin: Origin,
}

impl DetectionRecord {
    pub fn seconds(&self) -> f64 {
        self.time_ps as f64 * 1e-12
    }
}

/// Round seconds to the nearest timestamp grid point (ps).
pub fn quantize(t: f64) -> i64 {
    let q = TIMESTAMP_QUANTUM_PS as f64;
    ((t * 1e12 / q).round() as i64) * TIMESTAMP_QUANTUM_PS
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    /// Filtered arm.
    pub stream_a: Vec<DetectionRecord>,
    pub stream_b: Vec<DetectionRecord>,
    pub generated_pairs: u64,
    pub duration: f64,
}

impl ExperimentOutput {
    pub fn times_a(&self) -> Vec<f64> {
        self.stream_a.iter().map(DetectionRecord::seconds).collect()
    }

    pub fn times_b(&self) -> Vec<f64> {
        self.stream_b.iter().map(DetectionRecord::seconds).collect()
    }
}

/// Full pipeline: emit, split, filter arm A, detect both arms, add dark
/// counts and the electronic delay (on arm A), quantize and sort.
pub fn run_experiment(
    source: &SourceConfig,
    chain_on_a: &FilterChain,
    detectors: &Detectors,
    duration: f64,
    electronic_delay: f64,
    seed: u64,
) -> Result<ExperimentOutput> {
    source.validate()?;
    detectors.a.validate()?;
    detectors.b.validate()?;
    validate_duration(duration)?;
    if !electronic_delay.is_finite() {
        return Err(Error::arg("electronic_delay must be finite"));
    }
    let line = FilterLine::new(chain_on_a.clone())?;
    let sampler = source.spectrum.sampler()?;
    let lock_offset = 0.5 * source.spectrum.pump_frequency - chain_on_a.lock_frequency;
    let limit = quantize(duration);

    let per_chunk: Vec<(Vec<DetectionRecord>, Vec<DetectionRecord>, u64)> = chunk_bounds(duration)
        .into_par_iter()
        .enumerate()
        .map(|(k, (s, e))| {
            let k = k as u64;
            let mut rng = substream(seed, "pairs", k);
            let events = chunk_events(source, &sampler, s, e, &mut rng);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for ev in &events {
                let split = split_pair(source.splitter, &source.polarization_state, &mut rng);
                for (channel, detuning) in
                    [(split.signal, ev.signal_detuning), (split.idler, ev.idler_detuning())]
                {
                    match channel {
                        Channel::A => {
                            if let FilterOutcome::Passed { delay } =
                                filter_photon(lock_offset + detuning, &line, &mut rng)
                            {
                                if let Some(t) = detect(ev.emission_time + delay, &detectors.a, &mut rng) {
                                    a.push((t + electronic_delay, Origin::Pair));
                                }
                            }
                        }
                        Channel::B => {
                            if let Some(t) = detect(ev.emission_time, &detectors.b, &mut rng) {
                                b.push((t, Origin::Pair));
                            }
                        }
                    }
                }
            }
            let mut rng_a = substream(seed, "dark-a", k);
            a.extend(
                poisson_times(detectors.a.dark_rate, s, e, &mut rng_a)
                    .into_iter()
                    .map(|t| (t, Origin::Dark)),
            );
            let mut rng_b = substream(seed, "dark-b", k);
            b.extend(
                poisson_times(detectors.b.dark_rate, s, e, &mut rng_b)
                    .into_iter()
                    .map(|t| (t, Origin::Dark)),
            );
            let wrap = |v: Vec<(f64, Origin)>, channel| {
                v.into_iter()
                    .map(|(t, origin)| DetectionRecord {
                        channel,
                        time_ps: quantize(t),
                        origin,
                    })
                    .filter(|r| r.time_ps >= 0 && r.time_ps <= limit)
                    .collect::<Vec<_>>()
            };
            (wrap(a, Channel::A), wrap(b, Channel::B), events.len() as u64)
        })
        .collect();

    let mut stream_a = Vec::new();
    let mut stream_b = Vec::new();
    let mut generated = 0;
    for (a, b, n) in per_chunk {
        stream_a.extend(a);
        stream_b.extend(b);
        generated += n;
    }
    stream_a.sort_by_key(|r| r.time_ps);
    stream_b.sort_by_key(|r| r.time_ps);
    Ok(ExperimentOutput {
        stream_a,
        stream_b,
        generated_pairs: generated,
        duration,
    })
}

/// Expected probability that one emitted pair yields a click in both arms
/// (filtered photon in arm A), averaged over the tabulated envelope.
pub fn expected_coincidence_probability(
    source: &SourceConfig,
    line: &FilterLine,
    detectors: &Detectors,
) -> Result<f64> {
    let spectrum = &source.spectrum;
    let lock_offset = 0.5 * spectrum.pump_frequency - line.chain.lock_frequency;
    let (p_signal_a, p_idler_a) = match source.splitter {
        Splitter::Bs50 => (0.25, 0.25),
        Splitter::Pbs => {
            let m = source.polarization_state.matrix();
            (m[(1, 1)].re, m[(2, 2)].re)
        }
    };
    let lo = spectrum.detunings[0];
    let hi = *spectrum.detunings.last().expect("non-empty grid");
    let step = (line.bandwidth / 50.0).min((hi - lo) / 1000.0);
    let n = ((hi - lo) / step).ceil() as usize;
    let env = |d: f64| {
        let i = spectrum.detunings.partition_point(|x| *x <= d).clamp(1, spectrum.detunings.len() - 1);
        let (x0, x1) = (spectrum.detunings[i - 1], spectrum.detunings[i]);
        let (y0, y1) = (spectrum.intensity[i - 1], spectrum.intensity[i]);
        y0 + (y1 - y0) * (d - x0) / (x1 - x0)
    };
    let mut norm = 0.0;
    let mut t_signal = 0.0;
    let mut t_idler = 0.0;
    for i in 0..=n {
        let d = (lo + i as f64 * step).min(hi);
        let w = if i == 0 || i == n { 0.5 } else { 1.0 } * env(d);
        norm += w;
        t_signal += w * line.chain.transmission(lock_offset + d);
        t_idler += w * line.chain.transmission(lock_offset - d);
    }
    if !(norm > 0.0) {
        return Err(Error::arg("empty envelope"));
    }
    let filtered = (p_signal_a * t_signal + p_idler_a * t_idler) / norm;
    Ok(filtered * detectors.a.survival() * detectors.b.survival())
}

/// Generated pair rate per mW that makes the detected coincidence rate
/// equal `detected_per_mw`.
pub fn calibrate_pair_rate(
    detected_per_mw: f64,
    source: &SourceConfig,
    chain: &FilterChain,
    detectors: &Detectors,
) -> Result<f64> {
    let line = FilterLine::new(chain.clone())?;
    let p = expected_coincidence_probability(source, &line, detectors)?;
    if !(p > 0.0) {
        return Err(Error::arg("coincidence probability is zero; cannot calibrate"));
    }
    Ok(detected_per_mw / p)
}
