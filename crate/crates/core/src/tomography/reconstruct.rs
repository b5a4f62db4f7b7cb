//! Density-matrix reconstruction from coincidence counts.

use nalgebra::{DMatrix, DVector, Matrix2, SVector};
use rand_distr::{Distribution, StandardNormal};

use super::counts::{subtract_accidentals, TomographyRecord};
use super::state::{c, hermitian_eigen, hermitian_map, kron_op, r, DensityMatrix, Ket4, Mat4};
use super::waveplate::MeasurementSetting;
use crate::error::{Error, Result};
use crate::rng::substream;

fn pauli(k: usize) -> Matrix2<super::state::C64> {
    match k {
        0 => Matrix2::new(r(1.0), r(0.0), r(0.0), r(1.0)),
        1 => Matrix2::new(r(0.0), r(1.0), r(1.0), r(0.0)),
        2 => Matrix2::new(r(0.0), c(0.0, -1.0), c(0.0, 1.0), r(0.0)),
        _ => Matrix2::new(r(1.0), r(0.0), r(0.0), r(-1.0)),
    }
}

/// Two-qubit Pauli products σ_k ⊗ σ_l, index 4k + l.
fn pauli_basis() -> Vec<Mat4> {
    (0..16).map(|i| kron_op(&pauli(i / 4), &pauli(i % 4))).collect()
}

/// Invert counts → ρ through the Pauli expansion ρ = Σ x_k σ_k / 4.
/// Needs at least 16 informationally complete settings; extra settings are
/// combined by least squares.
pub fn linear_from_counts(settings: &[MeasurementSetting], counts: &[f64]) -> Result<DensityMatrix> {
    if settings.len() != counts.len() {
        return Err(Error::arg("settings and counts differ in length"));
    }
    if settings.len() < 16 {
        return Err(Error::arg(format!("need >= 16 settings, got {}", settings.len())));
    }
    let basis = pauli_basis();
    let projectors: Vec<Mat4> = settings.iter().map(MeasurementSetting::projector).collect();
    let b = DMatrix::from_fn(projectors.len(), 16, |i, k| 0.25 * (basis[k] * projectors[i]).trace().re);
    let svd = b.svd(true, true);
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * svd.singular_values.max()) {
        return Err(Error::arg("measurement settings are not informationally complete"));
    }
    let x = svd
        .solve(&DVector::from_column_slice(counts), 0.0)
        .map_err(|e| Error::arg(e.to_string()))?;
    if !(x[0] > 0.0) {
        return Err(Error::arg("counts sum to zero; nothing to reconstruct"));
    }
    let m = basis.iter().zip(x.iter()).fold(Mat4::zeros(), |acc, (s, v)| acc + s * r(*v / 4.0));
    DensityMatrix::normalized(m)
}

/// Linear inversion of accidental-subtracted counts. May be non-physical.
pub fn linear_reconstruction(record: &TomographyRecord) -> Result<DensityMatrix> {
    linear_from_counts(&record.settings(), &subtract_accidentals(record).counts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Bound on the remaining log-likelihood gain, relative to |log L|,
    /// that counts as converged.
    pub tolerance: f64,
    /// Random starts in addition to the linear estimate.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 2000,
            tolerance: 1e-10,
            restarts: 5,
            seed: 0x6d6c_6573_7461_7274,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleFit {
    pub state: DensityMatrix,
    pub log_likelihood: f64,
    /// Fitted total intensity Tr(L L†), counts per unit-probability setting.
    pub intensity: f64,
    pub iterations: usize,
}

type Params = SVector<f64, 16>;

/// Lower-triangular factor: 4 real diagonal entries, then 6 complex
/// entries below the diagonal in row order.
const OFF_DIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn unpack(p: &Params) -> Mat4 {
    let mut l = Mat4::zeros();
    for i in 0..4 {
        l[(i, i)] = r(p[i]);
    }
    for (k, (i, j)) in OFF_DIAG.iter().enumerate() {
        l[(*i, *j)] = c(p[4 + 2 * k], p[5 + 2 * k]);
    }
    l
}

fn pack(l: &Mat4) -> Params {
    let mut p = Params::zeros();
    for i in 0..4 {
        p[i] = l[(i, i)].re;
    }
    for (k, (i, j)) in OFF_DIAG.iter().enumerate() {
        p[4 + 2 * k] = l[(*i, *j)].re;
        p[5 + 2 * k] = l[(*i, *j)].im;
    }
    p
}

/// Unit change of parameter `j` as a matrix.
fn direction(j: usize) -> Mat4 {
    let mut e = Mat4::zeros();
    if j < 4 {
        e[(j, j)] = r(1.0);
    } else {
        let (row, col) = OFF_DIAG[(j - 4) / 2];
        e[(row, col)] = if (j - 4).is_multiple_of(2) { r(1.0) } else { c(0.0, 1.0) };
    }
    e
}

struct Problem<'a> {
    kets: Vec<Ket4>,
    projectors: Vec<Mat4>,
    counts: &'a [f64],
    directions: Vec<Mat4>,
    /// Upper bound on Tr(M) at the optimum: Σk / λ_min(Σ Πᵢ).
    trace_bound: f64,
}

const MU_FLOOR: f64 = 1e-300;

impl<'a> Problem<'a> {
    fn new(settings: &[MeasurementSetting], counts: &'a [f64]) -> Self {
        let projectors: Vec<Mat4> = settings.iter().map(MeasurementSetting::projector).collect();
        let sum = projectors.iter().fold(Mat4::zeros(), |a, p| a + p);
        let lambda_min = hermitian_eigen(&sum).0[0];
        Problem {
            kets: settings.iter().map(MeasurementSetting::ket).collect(),
            projectors,
            counts,
            directions: (0..16).map(direction).collect(),
            trace_bound: counts.iter().sum::<f64>() / lambda_min,
        }
    }

    /// μᵢ = ‖L† ψᵢ‖².
    fn means(&self, l: &Mat4) -> Vec<f64> {
        let la = l.adjoint();
        self.kets.iter().map(|k| (la * k).norm_squared()).collect()
    }

    fn log_likelihood(&self, p: &Params) -> f64 {
        let mu = self.means(&unpack(p));
        mu.iter()
            .zip(self.counts)
            .map(|(m, k)| if *k > 0.0 { k * m.max(MU_FLOOR).ln() - m } else { -m })
            .sum()
    }

    /// Upper bound on (maximum log-likelihood) - (current log-likelihood).
    ///
    /// The likelihood is concave in M = L L† over the positive cone, with
    /// gradient G = Σ (kᵢ/μᵢ - 1) Πᵢ. Hence
    /// f(M*) - f(M) <= Tr(G M*) - Tr(G M) <= λ_max(G)₊ Tr(M*) - Σ(kᵢ - μᵢ).
    fn duality_gap(&self, p: &Params) -> f64 {
        let mu = self.means(&unpack(p));
        let g = self
            .projectors
            .iter()
            .zip(mu.iter().zip(self.counts))
            .fold(Mat4::zeros(), |acc, (proj, (m, k))| acc + proj * r(k / m.max(MU_FLOOR) - 1.0));
        let top = hermitian_eigen(&g).0[3].max(0.0);
        let inner: f64 = mu.iter().zip(self.counts).map(|(m, k)| k - m).sum();
        (top * self.trace_bound - inner).max(0.0)
    }

    /// Gradient and negated Hessian of the log-likelihood.
    ///
    /// μ is quadratic in the parameters, so ∂²μ is constant. Keeping the
    /// residual term Σ (k/μ - 1) ∂²μ matters at boundary maxima, where the
    /// Fisher part alone loses all curvature along the vanishing eigenvalue.
    fn newton_terms(&self, p: &Params) -> (Params, Hessian) {
        let la = unpack(p).adjoint();
        let mut grad = Params::zeros();
        let mut neg_hess = Hessian::zeros();
        for (ket, k) in self.kets.iter().zip(self.counts) {
            let v = la * ket;
            let mu = v.norm_squared().max(MU_FLOOR);
            let w: Vec<Ket4> = self.directions.iter().map(|e| e.adjoint() * ket).collect();
            let dmu = Params::from_fn(|j, _| 2.0 * v.dotc(&w[j]).re);
            let residual = k / mu - 1.0;
            grad += dmu * residual;
            neg_hess += dmu * dmu.transpose() * (k / (mu * mu));
            for a in 0..16 {
                for b in a..16 {
                    let d2 = 2.0 * w[a].dotc(&w[b]).re * residual;
                    neg_hess[(a, b)] -= d2;
                    if a != b {
                        neg_hess[(b, a)] -= d2;
                    }
                }
            }
        }
        (grad, neg_hess)
    }
}

type Hessian = nalgebra::SMatrix<f64, 16, 16>;

enum Outcome {
    Converged(Params, f64, usize),
    Stalled(Params, f64, usize, f64),
}

/// Damped Newton ascent. Converged once the duality gap, an upper bound on
/// the remaining log-likelihood gain, is below `tolerance * |log L|`.
fn maximize(problem: &Problem, mut p: Params, opts: &MleOptions) -> Outcome {
    let mut ll = problem.log_likelihood(&p);
    let mut lambda = 1e-3;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let (grad, neg_hess) = problem.newton_terms(&p);
        grad_norm = grad.norm();
        let scale = (neg_hess.diagonal().abs().sum() / 16.0).max(1e-12);
        let step = (neg_hess + Hessian::identity() * (lambda * scale))
            .cholesky()
            .map(|ch| ch.solve(&grad));
        let trial = step.map(|s| p + s);
        let trial_ll = trial.map_or(f64::NEG_INFINITY, |t| problem.log_likelihood(&t));
        let accepted = trial_ll >= ll && trial_ll.is_finite();
        if accepted {
            p = trial.expect("finite likelihood implies a step");
            ll = trial_ll;
            lambda = (lambda * 0.1).max(1e-15);
        } else {
            lambda *= 10.0;
        }
        if accepted || lambda > 1e20 {
            if problem.duality_gap(&p) <= opts.tolerance * ll.abs().max(1.0) {
                return Outcome::Converged(p, ll, iter);
            }
            if lambda > 1e20 {
                break;
            }
        }
    }
    Outcome::Stalled(p, ll, iterations, grad_norm)
}

fn state_from(p: &Params) -> Result<DensityMatrix> {
    let l = unpack(p);
    let rho = DensityMatrix::normalized(l * l.adjoint())?;
    // Rounding can leave eigenvalues at -1e-17; clip to stay physical.
    Ok(if rho.is_physical() { rho } else { rho.physicalize() })
}

/// Maximum-likelihood state for Poisson counts with means N Tr(ρ Πᵢ).
pub fn mle_from_counts(
    settings: &[MeasurementSetting],
    counts: &[f64],
    opts: &MleOptions,
) -> Result<MleFit> {
    if counts.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
        return Err(Error::arg("counts must be finite and non-negative"));
    }
    let total: f64 = counts.iter().sum();
    let problem = Problem::new(settings, counts);
    if !(total > 0.0) {
        // Zero likelihood information: the maximally mixed state at zero intensity.
        return Ok(MleFit {
            state: DensityMatrix::maximally_mixed(),
            log_likelihood: 0.0,
            intensity: 0.0,
            iterations: 0,
        });
    }

    let mut starts = Vec::with_capacity(opts.restarts + 1);
    let linear = linear_from_counts(settings, counts)?.physicalize();
    let seeded = hermitian_map(linear.matrix(), |v| 0.999 * v + 0.001 / 4.0);
    let scale = total / settings.iter().map(|s| linear.probability(&s.ket())).sum::<f64>().max(1e-12);
    let chol = (seeded * r(scale))
        .cholesky()
        .ok_or_else(|| Error::arg("linear estimate is not positive definite"))?;
    starts.push(pack(&chol.l()));
    for i in 0..opts.restarts {
        let mut rng = substream(opts.seed, "mle-restart", i as u64);
        let raw = Params::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let l = unpack(&raw);
        let norm = (l * l.adjoint()).trace().re;
        starts.push(raw * (scale / norm).sqrt());
    }

    let mut best: Option<(Params, f64, usize)> = None;
    let mut stalled: Option<(Params, f64, usize, f64)> = None;
    for start in starts {
        match maximize(&problem, start, opts) {
            Outcome::Converged(p, ll, it) => {
                if best.as_ref().is_none_or(|b| ll > b.1) {
                    best = Some((p, ll, it));
                }
            }
            Outcome::Stalled(p, ll, it, g) => {
                if stalled.as_ref().is_none_or(|s| ll > s.1) {
                    stalled = Some((p, ll, it, g));
                }
            }
        }
    }
    match (best, stalled) {
        (Some((p, ll, it)), _) => {
            let l = unpack(&p);
            Ok(MleFit {
                state: state_from(&p)?,
                log_likelihood: ll,
                intensity: (l * l.adjoint()).trace().re,
                iterations: it,
            })
        }
        (None, Some((p, _, it, g))) => Err(Error::Stagnation {
            iterations: it,
            gradient_norm: g,
            best: Box::new(state_from(&p)?),
        }),
        (None, None) => unreachable!("at least one start"),
    }
}

/// Maximum-likelihood reconstruction of accidental-subtracted counts.
pub fn mle_reconstruction(record: &TomographyRecord) -> Result<DensityMatrix> {
    let counts = subtract_accidentals(record).counts;
    Ok(mle_from_counts(&record.settings(), &counts, &MleOptions::default())?.state)
}

/// Poisson log-likelihood of counts under a state at a given intensity.
pub fn log_likelihood(
    rho: &DensityMatrix,
    intensity: f64,
    settings: &[MeasurementSetting],
    counts: &[f64],
) -> f64 {
    settings
        .iter()
        .zip(counts)
        .map(|(s, k)| {
            let mu = intensity * rho.probability(&s.ket()).max(0.0);
            if *k > 0.0 {
                k * mu.max(MU_FLOOR).ln() - mu
            } else {
                -mu
            }
        })
        .sum()
}
