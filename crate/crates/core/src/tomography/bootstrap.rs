use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::counts::{subtract_accidentals, TomographyRecord};
use super::metrics::{metrics, EntanglementReport, MetricUncertainties};
use super::reconstruct::{mle_from_counts, MleOptions};
use crate::error::{Error, Result};
use crate::rng::substream;

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Metric spreads over Poisson resamples of the raw counts. Each resample
/// draws from its own seeded substream and results are reduced in index
/// order, so the output does not depend on the thread count.
pub fn bootstrap_errors(
    record: &TomographyRecord,
    n_resamples: usize,
    seed: u64,
) -> Result<MetricUncertainties> {
    if n_resamples == 0 {
        return Err(Error::arg("n_resamples must be >= 1"));
    }
    let settings = record.settings();
    let samples: Vec<EntanglementReport> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, "bootstrap", i as u64);
            let mut resampled = record.clone();
            for e in &mut resampled.entries {
                e.raw_count = if e.raw_count > 0 {
                    Poisson::new(e.raw_count as f64).expect("positive mean").sample(&mut rng) as u64
                } else {
                    0
                };
            }
            let counts = subtract_accidentals(&resampled).counts;
            let fit = match mle_from_counts(&settings, &counts, &MleOptions::default()) {
                Ok(fit) => fit.state,
                Err(Error::Stagnation { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            Ok(metrics(&fit))
        })
        .collect::<Result<_>>()?;
    let pick = |f: fn(&EntanglementReport) -> f64| sample_std(&samples.iter().map(f).collect::<Vec<_>>());
    Ok(MetricUncertainties {
        concurrence: pick(|r| r.concurrence),
        fidelity: pick(|r| r.fidelity),
        visibility_hv: pick(|r| r.visibility_hv),
        visibility_pm: pick(|r| r.visibility_pm),
    })
}

/// MLE state, its metrics and bootstrap uncertainties.
pub fn analyze_record(
    record: &TomographyRecord,
    n_resamples: usize,
    seed: u64,
) -> Result<(super::state::DensityMatrix, EntanglementReport)> {
    let counts = subtract_accidentals(record).counts;
    let state = mle_from_counts(&record.settings(), &counts, &MleOptions::default())?.state;
    let mut report = metrics(&state);
    if n_resamples > 0 {
        report.uncertainties = bootstrap_errors(record, n_resamples, seed)?;
    }
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::{canonical_16_settings, simulate_counts, DensityMatrix};

    #[test]
    fn single_resample_has_zero_spread() {
        let rec = simulate_counts(&DensityMatrix::singlet(), &canonical_16_settings(), 1e3, 0.0, 2).unwrap();
        assert_eq!(bootstrap_errors(&rec, 1, 4).unwrap(), MetricUncertainties::default());
    }

    fn std_of(v: &[f64]) -> f64 {
        sample_std(v)
    }

    #[test]
    fn deterministic_and_tracks_true_spread() {
        let settings = canonical_16_settings();
        let singlet = DensityMatrix::singlet();
        let rec = simulate_counts(&singlet, &settings, 1e4, 2.0, 0).unwrap();
        let a = bootstrap_errors(&rec, 60, 4).unwrap();
        assert_eq!(a, bootstrap_errors(&rec, 60, 4).unwrap());
        let truth: Vec<f64> = (1..41)
            .map(|seed| {
                let r = simulate_counts(&singlet, &settings, 1e4, 2.0, seed).unwrap();
                crate::tomography::concurrence(&crate::tomography::mle_reconstruction(&r).unwrap())
            })
            .collect();
        let ratio = a.concurrence / std_of(&truth);
        assert!((0.5..2.0).contains(&ratio), "bootstrap/true = {ratio}");
    }

    #[test]
    fn spread_shrinks_as_inverse_sqrt_counts() {
        let settings = canonical_16_settings();
        let w = DensityMatrix::werner(0.5).unwrap();
        let sd: Vec<f64> = [1e3, 1e4, 1e5]
            .iter()
            .map(|n| {
                let rec = simulate_counts(&w, &settings, *n, 0.0, 8).unwrap();
                bootstrap_errors(&rec, 60, 3).unwrap().fidelity
            })
            .collect();
        for pair in sd.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(ratio > 10f64.sqrt() / 1.5 && ratio < 10f64.sqrt() * 1.5, "{sd:?}");
        }
    }
}
