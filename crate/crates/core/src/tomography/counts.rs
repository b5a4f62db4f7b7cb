use std::io::{BufRead, Write};

use rand_distr::{Distribution, Poisson};

use super::state::DensityMatrix;
use super::waveplate::MeasurementSetting;
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyEntry {
    pub setting: MeasurementSetting,
    pub raw_count: u64,
    /// Estimated accidental coincidences in `raw_count`.
    pub accidental_count: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyRecord {
    pub entries: Vec<TomographyEntry>,
    /// Acquisition time per setting (s).
    pub acquisition_time: f64,
}

/// Accidentals expected in one setting: r_A r_B Δt T.
pub fn accidental_estimate(rate_a: f64, rate_b: f64, window: f64, time: f64) -> f64 {
    rate_a * rate_b * window * time
}

fn poisson<R: rand::Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    } else {
        0
    }
}

/// Counts ~ Poisson(N Tr(ρ Π) + accidentals) for each setting.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    n_per_setting: f64,
    accidentals: f64,
    seed: u64,
) -> Result<TomographyRecord> {
    if !(n_per_setting >= 0.0 && n_per_setting.is_finite()) {
        return Err(Error::arg("counts per setting must be >= 0"));
    }
    if !(accidentals >= 0.0 && accidentals.is_finite()) {
        return Err(Error::arg("accidental count must be >= 0"));
    }
    let mut rng = substream(seed, "tomography-counts", 0);
    let entries = settings
        .iter()
        .map(|s| {
            let p = rho.probability(&s.ket()).max(0.0);
            TomographyEntry {
                setting: *s,
                raw_count: poisson(n_per_setting * p + accidentals, &mut rng),
                accidental_count: accidentals,
            }
        })
        .collect();
    Ok(TomographyRecord {
        entries,
        acquisition_time: 1.0,
    })
}

/// Noiseless record with counts equal to their means (used as an oracle).
pub fn expected_counts(rho: &DensityMatrix, settings: &[MeasurementSetting], n: f64) -> Vec<f64> {
    settings.iter().map(|s| n * rho.probability(&s.ket())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedCounts {
    pub counts: Vec<f64>,
    /// Indices where the accidental estimate exceeded the raw count.
    pub clamped: Vec<usize>,
}

impl CorrectedCounts {
    pub fn warning(&self) -> bool {
        !self.clamped.is_empty()
    }
}

/// max(0, raw - accidental) for each setting.
pub fn subtract_accidentals(record: &TomographyRecord) -> CorrectedCounts {
    let mut clamped = Vec::new();
    let counts = record
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let v = e.raw_count as f64 - e.accidental_count;
            if v < 0.0 {
                clamped.push(i);
            }
            v.max(0.0)
        })
        .collect();
    CorrectedCounts { counts, clamped }
}

impl TomographyRecord {
    pub fn settings(&self) -> Vec<MeasurementSetting> {
        self.entries.iter().map(|e| e.setting).collect()
    }

    /// CSV with header `setting_label,raw_count,accidental_count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::from("setting_label,raw_count,accidental_count\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.setting.name(), e.raw_count, e.accidental_count));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R, acquisition_time: f64) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line_no == 1 {
                if line.trim() != "setting_label,raw_count,accidental_count" {
                    return Err(Error::Parse {
                        line: 1,
                        column: 1,
                        message: "expected header setting_label,raw_count,accidental_count".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let column_of = |k: usize| fields[..k].iter().map(|f| f.len() + 1).sum::<usize>() + 1;
            let setting = MeasurementSetting::parse(fields[0]).map_err(|e| Error::Parse {
                line: line_no,
                column: 1,
                message: e.to_string(),
            })?;
            let raw_count = fields[1].trim().parse::<u64>().map_err(|e| Error::Parse {
                line: line_no,
                column: column_of(1),
                message: format!("raw_count: {e}"),
            })?;
            let accidental_count = fields[2]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0 && v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    column: column_of(2),
                    message: "accidental_count must be a non-negative number".into(),
                })?;
            entries.push(TomographyEntry {
                setting,
                raw_count,
                accidental_count,
            });
        }
        Ok(TomographyRecord {
            entries,
            acquisition_time,
        })
    }
}
