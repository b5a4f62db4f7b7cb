//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdicts are printed even when `cargo test` captures output.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use narrowband_pairs::config::{Experiment, RunConfig};
use narrowband_pairs::correlator::{brightness_report, build_histogram, coincidence_rate, fit_decay};
use narrowband_pairs::crystal::{
    degenerate_qpm_wavelength, optimal_pump_waist, refractive_index, temperature_tuning_coefficient, Axis,
    CrystalSpec,
};
use narrowband_pairs::filter::{
    cavity_linewidth, count_windows_in_span, degenerate_pump_frequency, spdc_fwhm, CavitySpec, FilterChain,
    SpdcSpectrum,
};
use narrowband_pairs::pairsim::{
    calibrate_pair_rate, detect, filter_photon, run_experiment, DetectorSpec, Detectors, FilterLine,
    FilterOutcome, SourceConfig,
};
use narrowband_pairs::pipeline;
use narrowband_pairs::rng::substream;
use narrowband_pairs::tomography::{
    canonical_16_settings, concurrence, design_state, expected_counts, fidelity_with_singlet,
    linear_from_counts, mle_from_counts, mle_reconstruction, simulate_counts, visibility, DensityMatrix,
    MleOptions, VisibilityBasis,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.3e}")
    }
}

fn within(name: &str, value: f64, lo: f64, hi: f64) -> Result<String, String> {
    let line = format!("{name} = {} in [{}, {}]", num(value), num(lo), num(hi));
    if value >= lo && value <= hi {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Runs every check, joining the details; fails if any check fails.
fn all(checks: Vec<Result<String, String>>) -> Outcome {
    let failed = checks.iter().any(Result::is_err);
    let text = checks
        .into_iter()
        .map(|c| match c {
            Ok(s) => s,
            Err(s) => format!("FAILED {s}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    if failed {
        Err(text)
    } else {
        Ok(text)
    }
}

fn err(e: narrowband_pairs::Error) -> String {
    e.to_string()
}

fn phase_matching() -> Outcome {
    let c = CrystalSpec::ppktp_design();
    let l0 = degenerate_qpm_wavelength(&c, 0).map_err(err)? * 1e9;
    let l1 = degenerate_qpm_wavelength(&c, 1).map_err(err)? * 1e9;
    let slope = temperature_tuning_coefficient(&c, 0, 25.0, 1.0).map_err(err)? * 1e9;
    all(vec![
        within("lambda(14.03 um) nm", l0, 848.3, 851.3),
        within("lambda(14.63 um) nm", l1, 852.7, 855.7),
        within("tuning nm/K", slope, 0.017, 0.051),
    ])
}

fn focusing() -> Outcome {
    let c = CrystalSpec::ppktp_design();
    let n = refractive_index(c.dispersion_model, 425e-9, Axis::Y, 25.0).map_err(err)?;
    let w = optimal_pump_waist(0.02, 425e-9, n, 5.68).map_err(err)?.waist * 1e6;
    within("waist um", w, 15.8, 16.4)
}

fn spectrum() -> Outcome {
    let c = CrystalSpec::ppktp_design();
    let pump = degenerate_pump_frequency(&c, 0).map_err(err)?;
    let fwhm = spdc_fwhm(&c, 0, pump).map_err(err)? * 1e-9;
    let cavity = CavitySpec::new(0.01, 620.0, 0.88).map_err(err)?;
    let lw = cavity_linewidth(&cavity) * 1e-6;
    let windows = count_windows_in_span(&FilterChain::design_at(0.5 * pump), -143e9, 143e9, 0.5).map_err(err)?;
    all(vec![
        within("SPDC FWHM GHz", fwhm, 143.0 * 0.8, 143.0 * 1.2),
        within("linewidth(10 mm, 620) MHz", lw, 24.1, 24.3),
        if windows == 1 {
            Ok("windows in +-143 GHz = 1".into())
        } else {
            Err(format!("windows in +-143 GHz = {windows}"))
        },
    ])
}

fn efficiency_budget() -> Outcome {
    let c = CrystalSpec::ppktp_design();
    let pump = degenerate_pump_frequency(&c, 0).map_err(err)?;
    let line = FilterLine::new(FilterChain::design_at(0.5 * pump)).map_err(err)?;
    let det = DetectorSpec::default();
    let mut rng = substream(2024, "acceptance-budget", 0);
    let trials = 100_000;
    let hits = (0..trials)
        .filter(|_| match filter_photon(0.0, &line, &mut rng) {
            FilterOutcome::Passed { delay } => detect(delay, &det, &mut rng).is_some(),
            FilterOutcome::Blocked => false,
        })
        .count();
    let analytic = 0.88f64.powi(2) * 0.42 * 0.45;
    all(vec![
        within("analytic budget", analytic, 0.14635, 0.14645),
        within("Monte Carlo survival", hits as f64 / trials as f64, analytic - 0.003, analytic + 0.003),
    ])
}

fn correlation_round_trip() -> Outcome {
    let start = Instant::now();
    let spectrum = Arc::new(SpdcSpectrum::degenerate(&CrystalSpec::ppktp_design(), 0, 250e6, 2001).map_err(err)?);
    let chain = FilterChain::design_at(0.5 * spectrum.pump_frequency)
        .with_effective_fwhm(22.4e6)
        .map_err(err)?;
    let detectors = Detectors::default();
    let mut source = SourceConfig::new(spectrum, 70.0, 0.0);
    source.generated_pair_rate_per_mw = calibrate_pair_rate(4.8, &source, &chain, &detectors).map_err(err)?;
    let duration = 400.0;
    let out = run_experiment(&source, &chain, &detectors, duration, 20e-9, 77).map_err(err)?;
    let hist = build_histogram(&out.times_b(), &out.times_a(), 1e-9, (-200e-9, 200e-9), duration).map_err(err)?;
    let fit = fit_decay(&hist).map_err(err)?;
    let pairs = coincidence_rate(&hist, &fit) * duration;
    let elapsed = start.elapsed().as_secs_f64();
    all(vec![
        within("coincidences", pairs, 1e5, f64::INFINITY),
        within("bandwidth MHz", fit.bandwidth * 1e-6, 22.4 * 0.95, 22.4 * 1.05),
        within("tau ns", fit.decay_time * 1e9, 7.10 * 0.95, 7.10 * 1.05),
        within("runtime s", elapsed, 0.0, 300.0),
    ])
}

fn brightness() -> Outcome {
    let r = brightness_report(4.8, 70.0, 0.45, 22.4e6).map_err(err)?;
    all(vec![
        within("pairs/s at 70 mW", r.extrapolated_rate_at_power, 335.999, 336.001),
        within("spectral brightness / 1.0", r.spectral_brightness_generated, 0.95, 1.15),
        within("brightness (1.06 expected)", r.spectral_brightness_generated, 1.055, 1.065),
    ])
}

fn oracle_states() -> Vec<(&'static str, DensityMatrix)> {
    vec![
        ("singlet", DensityMatrix::singlet()),
        ("design", design_state()),
        ("werner(0.7)", DensityMatrix::werner(0.7).expect("valid")),
        ("mixed", DensityMatrix::maximally_mixed()),
    ]
}

fn tomography_oracle() -> Outcome {
    let settings = canonical_16_settings();
    let mut checks = Vec::new();
    for (name, rho) in oracle_states() {
        let counts = expected_counts(&rho, &settings, 1e6);
        let lin = linear_from_counts(&settings, &counts).map_err(err)?;
        let mle = mle_from_counts(&settings, &counts, &MleOptions::default()).map_err(err)?;
        checks.push(within(&format!("{name} linear distance"), lin.trace_distance(&rho), 0.0, 1e-10));
        checks.push(within(&format!("{name} MLE distance"), mle.state.trace_distance(&rho), 0.0, 1e-6));
    }
    all(checks)
}

fn design_metrics_in_range(rho: &DensityMatrix) -> Vec<Result<String, String>> {
    vec![
        within("C", concurrence(rho), 0.918, 0.978),
        within("F", fidelity_with_singlet(rho), 0.956, 0.996),
        within("V_HV", visibility(rho, VisibilityBasis::Rectilinear), 0.986, 0.996),
        within("V_pm", visibility(rho, VisibilityBasis::Diagonal), 0.970, 0.980),
    ]
}

fn tomography_statistics() -> Outcome {
    let settings = canonical_16_settings();
    let singlet = simulate_counts(&DensityMatrix::singlet(), &settings, 1e4, 0.0, 81).map_err(err)?;
    let f = fidelity_with_singlet(&mle_reconstruction(&singlet).map_err(err)?);
    let mut checks = vec![within("singlet N=1e4 F", f, 0.99, 1.0)];

    let record = simulate_counts(&design_state(), &settings, 4e6, 0.0, 82).map_err(err)?;
    let rho = mle_reconstruction(&record).map_err(err)?;
    checks.extend(design_metrics_in_range(&rho).into_iter().map(|c| c.map_err(|e| format!("N=4e6 {e}"))));

    // Informational: at 1e5 per setting the V_pm tolerance is about one
    // standard deviation, so individual seeds can miss it.
    let seeds = 20;
    let mut passing = 0;
    for s in 0..seeds {
        let r = simulate_counts(&design_state(), &settings, 1e5, 0.0, 1000 + s).map_err(err)?;
        let rho = mle_reconstruction(&r).map_err(err)?;
        if design_metrics_in_range(&rho).iter().all(Result::is_ok) {
            passing += 1;
        }
    }
    let mut out = all(checks);
    let note = format!("; all four in range at N=1e5 for {passing}/{seeds} seeds");
    match &mut out {
        Ok(s) | Err(s) => s.push_str(&note),
    }
    out
}

fn metric_analytics() -> Outcome {
    let mut checks = Vec::new();
    for p in [0.0, 1.0 / 3.0, 0.9, 1.0] {
        let w = DensityMatrix::werner(p).map_err(err)?;
        let c_err = (concurrence(&w) - f64::max(0.0, (3.0 * p - 1.0) / 2.0)).abs();
        let f_err = (fidelity_with_singlet(&w) - (p + (1.0 - p) / 4.0)).abs();
        checks.push(within(&format!("p={p:.3} |dC|"), c_err, 0.0, 1e-10));
        checks.push(within(&format!("p={p:.3} |dF|"), f_err, 0.0, 1e-10));
    }
    all(checks)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut manifests = Vec::new();
    for threads in [1, 4] {
        let config = RunConfig {
            experiment: Experiment::FullPipeline,
            seed: 0xDEC0DE,
            output_dir: dir.path().join(format!("threads{threads}")),
            ..RunConfig::default()
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let out = pool.install(|| pipeline::run(&config)).map_err(err)?;
        let mut files = Vec::new();
        for path in &out.files {
            let name = path.file_name().expect("file").to_string_lossy().into_owned();
            files.push((name, std::fs::read(path).map_err(|e| e.to_string())?));
        }
        manifests.push(files);
    }
    let (a, b) = (&manifests[0], &manifests[1]);
    let differing: Vec<&str> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    if a.len() == b.len() && differing.is_empty() {
        Ok(format!("{} files byte-identical with 1 and 4 workers", a.len()))
    } else {
        Err(format!("differing files: {differing:?}"))
    }
}

fn brute_force(start: &[f64], stop: &[f64], bin: i64, lo: i64, hi: i64) -> Vec<u64> {
    let mut counts = vec![0u64; ((hi - lo) / bin) as usize];
    for s in start {
        for t in stop {
            let d = (*t - *s) as i64;
            if d >= lo && d < hi {
                counts[((d - lo) / bin) as usize] += 1;
            }
        }
    }
    counts
}

fn histogram_oracle() -> Outcome {
    let mut rng = substream(11, "acceptance-histogram", 0);
    let mut mismatches = Vec::new();
    for case in 0..20 {
        // Integer picosecond grids keep every delay and bin edge exact.
        let mut stream = || {
            let n = rng.random_range(0..=1000usize);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0..200_000i64) as f64).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (start, stop) = (stream(), stream());
        let bin = rng.random_range(1..=500i64);
        let lo = -bin * rng.random_range(0..=40i64);
        let hi = lo + bin * rng.random_range(1..=80i64);
        let hist =
            build_histogram(&start, &stop, bin as f64, (lo as f64, hi as f64), 1.0).map_err(err)?;
        if hist.counts != brute_force(&start, &stop, bin, lo, hi) {
            mismatches.push(case);
        }
    }
    if mismatches.is_empty() {
        Ok("20/20 random stream pairs match all-pairs counting".into())
    } else {
        Err(format!("mismatching cases {mismatches:?}"))
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("phase matching", phase_matching),
        ("focusing", focusing),
        ("spectrum", spectrum),
        ("efficiency budget", efficiency_budget),
        ("correlation round trip", correlation_round_trip),
        ("brightness arithmetic", brightness),
        ("tomography oracle", tomography_oracle),
        ("tomography statistical round trip", tomography_statistics),
        ("metric analytics", metric_analytics),
        ("determinism", determinism),
        ("histogram oracle equivalence", histogram_oracle),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
