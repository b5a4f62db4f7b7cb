//! Plot-ready CSV with `# ` header comments naming axes and units.

use std::io::Write;
use std::path::Path;

use crate::correlator::CoincidenceHistogram;
use crate::error::Result;
use crate::tomography::DensityMatrix;

const BASIS: [&str; 4] = ["HH", "HV", "VH", "VV"];

#[derive(Clone, Debug, PartialEq)]
pub enum PlotData {
    /// Coincidence counts against delay.
    Histogram { delays_ns: Vec<f64>, counts: Vec<u64> },
    /// Density-matrix elements in the HH, HV, VH, VV basis.
    DensityMatrix { elements: Vec<(usize, usize, f64, f64)> },
}

impl PlotData {
    pub fn from_histogram(h: &CoincidenceHistogram) -> Self {
        PlotData::Histogram {
            delays_ns: (0..h.len()).map(|i| h.bin_center(i) * 1e9).collect(),
            counts: h.counts.clone(),
        }
    }

    pub fn from_density_matrix(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        PlotData::DensityMatrix {
            elements: (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, m[(i, j)].re, m[(i, j)].im))
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        match self {
            PlotData::Histogram { delays_ns, counts } => {
                let mut s = String::from(
                    "# x: delay between filtered and unfiltered clicks (ns), bin centers\n\
                     # y: coincidence counts per bin\n\
                     delay_ns,counts\n",
                );
                for (d, c) in delays_ns.iter().zip(counts) {
                    s.push_str(&format!("{d:.4},{c}\n"));
                }
                s
            }
            PlotData::DensityMatrix { elements } => {
                let mut s = String::from(
                    "# row, col: basis index 0..3 = HH, HV, VH, VV\n\
                     # re, im: real and imaginary part of rho[row, col]\n\
                     row,col,re,im\n",
                );
                for (i, j, re, im) in elements {
                    s.push_str(&format!("{i},{j},{re:e},{im:e}\n"));
                }
                s
            }
        }
    }
}

pub fn emit_plot_data(data: &PlotData, path: &Path) -> Result<()> {
    std::fs::File::create(path)?.write_all(data.render().as_bytes())?;
    Ok(())
}

/// Real and imaginary 4 x 4 blocks with labeled rows and columns.
pub fn density_matrix_blocks(rho: &DensityMatrix) -> String {
    let m = rho.matrix();
    let mut s = String::new();
    for (part, f) in [("re", (|z: crate::tomography::C64| z.re) as fn(_) -> f64), ("im", |z| z.im)] {
        s.push_str(&format!("{part},{}\n", BASIS.join(",")));
        for (i, label) in BASIS.iter().enumerate() {
            let row: Vec<String> = (0..4).map(|j| format!("{:e}", f(m[(i, j)]))).collect();
            s.push_str(&format!("{label},{}\n", row.join(",")));
        }
    }
    s
}
