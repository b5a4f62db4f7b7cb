//! Waveplate analyzers and the 16 tomography settings.
//!
//! Each arm has a quarter-wave plate, then a half-wave plate, then a PBS
//! whose transmitted port (H) goes to the detector. Fast-axis angles are
//! measured from horizontal. Jones matrices, up to a global phase:
//!
//! ```text
//! HWP(h) = [ cos 2h   sin 2h ]     QWP(q) = [ cos²q + i sin²q   (1-i) sin q cos q ]
//!          [ sin 2h  -cos 2h ]              [ (1-i) sin q cos q   sin²q + i cos²q ]
//! ```
//!
//! The detected projector is |ψ><ψ| with ψ = QWP(q)† HWP(h)† |H>.
//!
//! | state | q    | h      | ket            |
//! |-------|------|--------|----------------|
//! | H     | 0    | 0      | H              |
//! | V     | 0    | 45°    | V              |
//! | D     | 45°  | 22.5°  | (H + V)/√2     |
//! | A     | 45°  | -22.5° | (H - V)/√2     |
//! | R     | 0    | 22.5°  | (H - iV)/√2    |
//! | L     | 0    | -22.5° | (H + iV)/√2    |

use nalgebra::Matrix2;

use super::state::{c, kron2, projector, r, Ket2, Ket4, Mat4, C64};
use crate::error::{Error, Result};

pub fn half_wave_plate(h: f64) -> Matrix2<C64> {
    let (s, co) = (2.0 * h).sin_cos();
    Matrix2::new(r(co), r(s), r(s), r(-co))
}

pub fn quarter_wave_plate(q: f64) -> Matrix2<C64> {
    let (s, co) = q.sin_cos();
    let off = c(s * co, -s * co);
    Matrix2::new(c(co * co, s * s), off, off, c(s * s, co * co))
}

/// Single-photon state transmitted by QWP(q), HWP(h) and the PBS.
pub fn waveplate_projector(q: f64, h: f64) -> Ket2 {
    let horizontal = Ket2::new(r(1.0), r(0.0));
    quarter_wave_plate(q).adjoint() * (half_wave_plate(h).adjoint() * horizontal)
}

/// Analyzer setting names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Analyzer {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Analyzer {
    pub const ALL: [Analyzer; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    /// (quarter, half) waveplate angles in radians.
    pub fn angles(self) -> (f64, f64) {
        let d = f64::to_radians;
        match self {
            Analyzer::H => (0.0, 0.0),
            Analyzer::V => (0.0, d(45.0)),
            Analyzer::D => (d(45.0), d(22.5)),
            Analyzer::A => (d(45.0), d(-22.5)),
            Analyzer::R => (0.0, d(22.5)),
            Analyzer::L => (0.0, d(-22.5)),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Analyzer::H => 'H',
            Analyzer::V => 'V',
            Analyzer::D => 'D',
            Analyzer::A => 'A',
            Analyzer::R => 'R',
            Analyzer::L => 'L',
        }
    }

    pub fn from_letter(ch: char) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.letter() == ch.to_ascii_uppercase())
    }

    /// Ideal ket from the table, for comparison with the Jones computation.
    pub fn ideal_ket(self) -> Ket2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Analyzer::H => Ket2::new(r(1.0), r(0.0)),
            Analyzer::V => Ket2::new(r(0.0), r(1.0)),
            Analyzer::D => Ket2::new(r(s), r(s)),
            Analyzer::A => Ket2::new(r(s), r(-s)),
            Analyzer::R => Ket2::new(r(s), c(0.0, -s)),
            Analyzer::L => Ket2::new(r(s), c(0.0, s)),
        }
    }
}

/// Waveplate angles in both arms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementSetting {
    pub label: [Analyzer; 2],
    /// (quarter, half) in arm A, radians.
    pub arm_a: (f64, f64),
    pub arm_b: (f64, f64),
}

impl MeasurementSetting {
    pub fn new(a: Analyzer, b: Analyzer) -> Self {
        MeasurementSetting {
            label: [a, b],
            arm_a: a.angles(),
            arm_b: b.angles(),
        }
    }

    /// Two-letter label such as "HV".
    pub fn name(&self) -> String {
        self.label.iter().map(|a| a.letter()).collect()
    }

    pub fn parse(label: &str) -> Result<Self> {
        let mut chars = label.trim().chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(x), Some(y), None) => match (Analyzer::from_letter(x), Analyzer::from_letter(y)) {
                (Some(a), Some(b)) => Ok(Self::new(a, b)),
                _ => Err(Error::arg(format!("unknown analyzer in setting '{label}'"))),
            },
            _ => Err(Error::arg(format!("setting label '{label}' must be two letters"))),
        }
    }

    pub fn ket(&self) -> Ket4 {
        let a = waveplate_projector(self.arm_a.0, self.arm_a.1);
        let b = waveplate_projector(self.arm_b.0, self.arm_b.1);
        kron2(&a, &b)
    }

    pub fn projector(&self) -> Mat4 {
        projector(&self.ket())
    }
}

/// The 16 product settings of the standard two-qubit tomography sequence
/// (James, Kwiat, Munro and White, 2001), in measurement order.
pub fn canonical_16_settings() -> Vec<MeasurementSetting> {
    use Analyzer::*;
    [
        (H, H), (H, V), (V, V), (V, H),
        (R, H), (R, V), (D, V), (D, H),
        (D, R), (D, D), (R, D), (H, D),
        (V, D), (V, L), (H, L), (R, L),
    ]
    .into_iter()
    .map(|(a, b)| MeasurementSetting::new(a, b))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn same_up_to_phase(x: &Ket2, y: &Ket2) -> bool {
        (x.dotc(y).norm() - 1.0).abs() < 1e-12
    }

    #[test]
    fn table_matches_jones_matrices() {
        for a in Analyzer::ALL {
            let (q, h) = a.angles();
            assert!(same_up_to_phase(&waveplate_projector(q, h), &a.ideal_ket()), "{a:?}");
        }
    }

    #[test]
    fn settings_span_operator_space() {
        let settings = canonical_16_settings();
        assert_eq!(settings.len(), 16);
        let vecs: Vec<Vec<C64>> = settings
            .iter()
            .map(|s| s.projector().iter().copied().collect())
            .collect();
        let gram = DMatrix::from_fn(16, 16, |i, j| {
            vecs[i].iter().zip(&vecs[j]).map(|(x, y)| x.conj() * y).sum::<C64>().re
        });
        let sv = gram.singular_values();
        let cond = sv.max() / sv.min();
        assert!(cond.is_finite() && cond < 1e4, "condition number {cond}");
    }

    #[test]
    fn labels_round_trip() {
        for s in canonical_16_settings() {
            assert_eq!(MeasurementSetting::parse(&s.name()).unwrap(), s);
        }
        assert!(MeasurementSetting::parse("HX").is_err());
        assert!(MeasurementSetting::parse("HVH").is_err());
    }

    proptest! {
        #[test]
        fn projector_is_normalized(q in -3.2f64..3.2, h in -3.2f64..3.2) {
            prop_assert!((waveplate_projector(q, h).norm() - 1.0).abs() < 1e-12);
        }
    }
}
