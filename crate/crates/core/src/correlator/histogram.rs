use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Start-stop delay histogram between two detector channels.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceHistogram {
    /// s
    pub bin_width: f64,
    /// Delay range [t_min, t_max) in s.
    pub window: (f64, f64),
    pub counts: Vec<u64>,
    /// s
    pub acquisition_time: f64,
    /// Singles rates of the start and stop channels (counts/s).
    pub singles_rates: (f64, f64),
}

/// Default binning mirrors a 1 ns / ±200 ns correlation display.
pub const DEFAULT_BIN_WIDTH: f64 = 1e-9;
pub const DEFAULT_WINDOW: (f64, f64) = (-200e-9, 200e-9);

fn bin_count(bin_width: f64, window: (f64, f64)) -> Result<usize> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::arg(format!("bin_width must be > 0, got {bin_width}")));
    }
    let span = window.1 - window.0;
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::arg("histogram window must have t_max > t_min"));
    }
    let n = (span / bin_width).round();
    if (n * bin_width - span).abs() > 1e-9 * span || n < 1.0 {
        return Err(Error::arg(format!(
            "window span {span:e} s is not a whole number of {bin_width:e} s bins"
        )));
    }
    Ok(n as usize)
}

impl CoincidenceHistogram {
    pub fn empty(bin_width: f64, window: (f64, f64), acquisition_time: f64) -> Result<Self> {
        let n = bin_count(bin_width, window)?;
        if !(acquisition_time > 0.0) {
            return Err(Error::arg("acquisition_time must be > 0"));
        }
        Ok(CoincidenceHistogram {
            bin_width,
            window,
            counts: vec![0; n],
            acquisition_time,
            singles_rates: (0.0, 0.0),
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let lo = self.window.0 + i as f64 * self.bin_width;
        (lo, lo + self.bin_width)
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.window.0 + (i as f64 + 0.5) * self.bin_width
    }

    /// Bin index for a delay, if it falls inside the window.
    pub fn bin_of(&self, delay: f64) -> Option<usize> {
        bin_index(delay, self.window, self.bin_width, self.counts.len())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Expected accidental counts per bin, r_A r_B Δt T.
    pub fn accidental_floor(&self) -> f64 {
        self.singles_rates.0 * self.singles_rates.1 * self.bin_width * self.acquisition_time
    }

    /// Bin-wise sum of histograms from disjoint acquisitions.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.counts.len() != other.counts.len()
            || self.bin_width != other.bin_width
            || self.window != other.window
        {
            return Err(Error::arg("cannot merge histograms with different binning"));
        }
        let t = self.acquisition_time + other.acquisition_time;
        let rate = |a: f64, b: f64| (a * self.acquisition_time + b * other.acquisition_time) / t;
        Ok(CoincidenceHistogram {
            bin_width: self.bin_width,
            window: self.window,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
            acquisition_time: t,
            singles_rates: (
                rate(self.singles_rates.0, other.singles_rates.0),
                rate(self.singles_rates.1, other.singles_rates.1),
            ),
        })
    }

    /// Two-column CSV `delay_s,counts` with bin centers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::from("delay_s,counts\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:e},{}\n", self.bin_center(i), c));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}

pub(crate) fn bin_index(delay: f64, window: (f64, f64), bin_width: f64, n: usize) -> Option<usize> {
    if !(delay >= window.0 && delay < window.1) {
        return None;
    }
    let i = ((delay - window.0) / bin_width).floor() as usize;
    Some(i.min(n - 1))
}

fn ensure_sorted(name: &str, s: &[f64]) -> Result<()> {
    if let Some(i) = s.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(Error::arg(format!("{name} stream not sorted at index {}", i + 1)));
    }
    Ok(())
}

/// Chunk size for parallel sweeps over the start stream.
const SWEEP_CHUNK: usize = 1 << 14;

/// Histogram of delays `stop - start` inside `window`, counting every pair.
///
/// Both streams must be sorted ascending (seconds). The start stream is cut
/// into chunks swept concurrently; each chunk keeps a lower index into the
/// stop stream, so the cost is linear in the stream lengths plus the number
/// of pairs inside the window.
pub fn build_histogram(
    start: &[f64],
    stop: &[f64],
    bin_width: f64,
    window: (f64, f64),
    acquisition_time: f64,
) -> Result<CoincidenceHistogram> {
    sweep(start, stop, bin_width, window, acquisition_time, SWEEP_CHUNK)
}

fn sweep(
    start: &[f64],
    stop: &[f64],
    bin_width: f64,
    window: (f64, f64),
    acquisition_time: f64,
    chunk_len: usize,
) -> Result<CoincidenceHistogram> {
    ensure_sorted("start", start)?;
    ensure_sorted("stop", stop)?;
    let mut hist = CoincidenceHistogram::empty(bin_width, window, acquisition_time)?;
    let n = hist.counts.len();
    let partial: Vec<Vec<u64>> = start
        .par_chunks(chunk_len)
        .map(|chunk| {
            let mut counts = vec![0u64; n];
            let mut lo = stop.partition_point(|b| *b - chunk[0] < window.0);
            for &a in chunk {
                while lo < stop.len() && stop[lo] - a < window.0 {
                    lo += 1;
                }
                let mut j = lo;
                while j < stop.len() {
                    let d = stop[j] - a;
                    if d >= window.1 {
                        break;
                    }
                    if let Some(i) = bin_index(d, window, bin_width, n) {
                        counts[i] += 1;
                    }
                    j += 1;
                }
            }
            counts
        })
        .collect();
    for p in partial {
        hist.counts.iter_mut().zip(p).for_each(|(c, v)| *c += v);
    }
    hist.singles_rates = (
        start.len() as f64 / acquisition_time,
        stop.len() as f64 / acquisition_time,
    );
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_streams() {
        let h = build_histogram(&[], &[], 1e-9, (-5e-9, 5e-9), 1.0).unwrap();
        assert_eq!(h.counts, vec![0; 10]);
    }

    #[test]
    fn single_pair() {
        let h = build_histogram(&[1.0], &[1.0 + 2.5e-9], 1e-9, (-5e-9, 5e-9), 1.0).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[7], 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_histogram(&[2.0, 1.0], &[], 1e-9, (-5e-9, 5e-9), 1.0).is_err());
        assert!(build_histogram(&[], &[], 0.0, (-5e-9, 5e-9), 1.0).is_err());
        assert!(build_histogram(&[], &[], 3e-9, (-5e-9, 5e-9), 1.0).is_err());
    }

    #[test]
    fn merge_requires_matching_bins() {
        let a = CoincidenceHistogram::empty(1e-9, (0.0, 10e-9), 1.0).unwrap();
        let b = CoincidenceHistogram::empty(2e-9, (0.0, 10e-9), 1.0).unwrap();
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn chunked_sweep_matches_serial() {
        let mut rng = SimRng::seed_from_u64(12);
        let mut a: Vec<f64> = (0..3_000).map(|_| rng.random::<f64>() * 1e-5).collect();
        let mut b: Vec<f64> = (0..3_000).map(|_| rng.random::<f64>() * 1e-5).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let h = sweep(&a, &b, 1e-9, (-20e-9, 20e-9), 1e-3, 97).unwrap();
        let mut serial = vec![0u64; 40];
        for x in &a {
            for y in &b {
                if let Some(i) = bin_index(y - x, (-20e-9, 20e-9), 1e-9, 40) {
                    serial[i] += 1;
                }
            }
        }
        assert_eq!(h.counts, serial);
    }
}
