//! Two-qubit polarization states in the |HH>, |HV>, |VH>, |VV> basis.

use nalgebra::{Matrix4, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;
pub type Ket2 = Vector2<C64>;
pub type Ket4 = Vector4<C64>;

/// Tolerance for the Hermiticity, trace and positivity checks.
pub const PHYSICALITY_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// (|HV> - |VH>) / √2
pub fn psi_minus() -> Ket4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ket4::new(r(0.0), r(s), r(-s), r(0.0))
}

/// (|HV> + |VH>) / √2
pub fn psi_plus() -> Ket4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ket4::new(r(0.0), r(s), r(s), r(0.0))
}

/// (|HH> + |VV>) / √2
pub fn phi_plus() -> Ket4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ket4::new(r(s), r(0.0), r(0.0), r(s))
}

/// (|HH> - |VV>) / √2
pub fn phi_minus() -> Ket4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ket4::new(r(s), r(0.0), r(0.0), r(-s))
}

pub fn kron2(a: &Ket2, b: &Ket2) -> Ket4 {
    Ket4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

pub fn projector(psi: &Ket4) -> Mat4 {
    psi * psi.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &Mat4) -> (Vec<f64>, Mat4) {
    let sym = (m + m.adjoint()) * r(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let values = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let vectors = Mat4::from_columns(
        &order.iter().map(|i| eig.eigenvectors.column(*i).into_owned()).collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Apply f to the eigenvalues of a Hermitian matrix.
pub(crate) fn hermitian_map(m: &Mat4, f: impl Fn(f64) -> f64) -> Mat4 {
    let (values, vectors) = hermitian_eigen(m);
    let mut d = Mat4::zeros();
    for (i, v) in values.iter().enumerate() {
        d[(i, i)] = r(f(*v));
    }
    vectors * d * vectors.adjoint()
}

/// A 4 x 4 two-qubit density matrix.
///
/// Hermiticity and unit trace are always enforced. Positivity is recorded
/// in [`DensityMatrix::is_physical`]; linear reconstructions may be
/// non-physical.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Mat4,
    physical: bool,
}

impl DensityMatrix {
    /// Build a physical state; rejects negative eigenvalues.
    pub fn new(m: Mat4) -> Result<Self> {
        let rho = Self::new_allow_negative(m)?;
        if !rho.physical {
            return Err(Error::arg(format!(
                "density matrix has eigenvalue {:e} < 0",
                rho.eigenvalues()[0]
            )));
        }
        Ok(rho)
    }

    /// Build a Hermitian unit-trace matrix that may have negative eigenvalues.
    pub fn new_allow_negative(m: Mat4) -> Result<Self> {
        let herm = (m - m.adjoint()).norm();
        if !(herm <= PHYSICALITY_TOL) {
            return Err(Error::arg(format!("matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if !((tr.re - 1.0).abs() <= PHYSICALITY_TOL && tr.im.abs() <= PHYSICALITY_TOL) {
            return Err(Error::arg(format!("trace {tr} != 1")));
        }
        let m = (m + m.adjoint()) * r(0.5);
        let min = hermitian_eigen(&m).0[0];
        Ok(DensityMatrix {
            m,
            physical: min >= -PHYSICALITY_TOL,
        })
    }

    /// Normalize a Hermitian, non-zero-trace matrix and wrap it.
    pub fn normalized(m: Mat4) -> Result<Self> {
        let tr = m.trace().re;
        if !(tr.abs() > 0.0 && tr.is_finite()) {
            return Err(Error::arg("cannot normalize a zero-trace matrix"));
        }
        Self::new_allow_negative((m + m.adjoint()) * r(0.5) / r(tr))
    }

    pub fn from_pure(psi: &Ket4) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::arg("zero state vector"));
        }
        Self::new(projector(&(psi / r(norm))))
    }

    pub fn singlet() -> Self {
        Self::from_pure(&psi_minus()).expect("singlet is a valid state")
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            m: Mat4::identity() / r(4.0),
            physical: true,
        }
    }

    /// p |Ψ⁻><Ψ⁻| + (1 - p) I / 4
    pub fn werner(p: f64) -> Result<Self> {
        Self::bell_diagonal(&[(psi_minus(), p)], 1.0 - p)
    }

    /// Σ wᵢ |Bᵢ><Bᵢ| + `white` · I / 4 for Bell states Bᵢ.
    pub fn bell_diagonal(components: &[(Ket4, f64)], white: f64) -> Result<Self> {
        let mut m = Mat4::identity() * r(white / 4.0);
        for (psi, w) in components {
            m += projector(psi) * r(*w);
        }
        Self::new(m)
    }

    /// Singlet mixed with white noise: (1 - d) |Ψ⁻><Ψ⁻| + d I / 4.
    pub fn depolarized_singlet(depolarization: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&depolarization) {
            return Err(Error::arg("depolarization must be in [0, 1]"));
        }
        Self::werner(1.0 - depolarization)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.m
    }

    pub fn is_physical(&self) -> bool {
        self.physical
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.m).0
    }

    /// Tr(ρ A), real part.
    pub fn expectation(&self, op: &Mat4) -> f64 {
        (self.m * op).trace().re
    }

    /// <ψ|ρ|ψ>
    pub fn probability(&self, psi: &Ket4) -> f64 {
        (psi.adjoint() * self.m * psi)[(0, 0)].re
    }

    /// Projection onto the physical set: clip negative eigenvalues, renormalize.
    pub fn physicalize(&self) -> Self {
        let clipped = hermitian_map(&self.m, |v| v.max(0.0));
        let tr = clipped.trace().re;
        DensityMatrix {
            m: clipped / r(tr),
            physical: true,
        }
    }

    /// ½ Σ |eigenvalues of (ρ - σ)|
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        0.5 * hermitian_eigen(&(self.m - other.m)).0.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// U ρ U†
    pub fn transformed(&self, u: &Mat4) -> Self {
        let m = u * self.m * u.adjoint();
        DensityMatrix {
            m: (m + m.adjoint()) * r(0.5),
            physical: self.physical,
        }
    }
}

/// Tensor product of two 2 x 2 operators.
pub fn kron_op(a: &nalgebra::Matrix2<C64>, b: &nalgebra::Matrix2<C64>) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singlet_is_pure_and_physical() {
        let s = DensityMatrix::singlet();
        assert!(s.is_physical());
        let ev = s.eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
        assert!(ev[..3].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_matrices() {
        let mut m = Mat4::identity() / r(4.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(Mat4::identity()).is_err());
        let mut neg = Mat4::zeros();
        neg[(0, 0)] = r(1.5);
        neg[(1, 1)] = r(-0.5);
        assert!(DensityMatrix::new(neg).is_err());
        let lin = DensityMatrix::new_allow_negative(neg).unwrap();
        assert!(!lin.is_physical());
        assert!(lin.physicalize().is_physical());
    }

    #[test]
    fn trace_distance_basics() {
        let s = DensityMatrix::singlet();
        let mixed = DensityMatrix::maximally_mixed();
        assert!(s.trace_distance(&s) < 1e-12);
        assert!((s.trace_distance(&mixed) - 0.75).abs() < 1e-12);
    }
}
