//! Planar rotation primitives in the stationary αβ-frame.
//!
//! The 90° rotation `j = R(π/2)` plays the role of the imaginary unit: a
//! quantity rotating at constant frequency `ω₀` obeys `ẋ = ω₀ j x`. Block
//! versions (`I_n ⊗ j` and `I_n ⊗ diag(j, 0₃ₓ₃)`) act on stacked bus, line and
//! machine vectors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix5, Vector2};

use crate::error::{Error, Result};

/// A pair of αβ components (volts or amperes depending on context).
pub type PlanarVec = Vector2<f64>;

/// An angle in radians, stored unwrapped.
///
/// Values are only wrapped to `(−π, π]` when reported; arithmetic and
/// integration work on the raw value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn new(radians: f64) -> Result<Self> {
        if radians.is_finite() {
            Ok(Angle(radians))
        } else {
            Err(Error::InvalidArgument(format!(
                "angle must be finite, got {radians}"
            )))
        }
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        Self::new(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// The representative in `(−π, π]`.
    pub fn wrapped(self) -> f64 {
        wrap_to_pi(self.0)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Angle::new(value)
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_to_pi(theta: f64) -> f64 {
    let mut w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// `R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn rot(theta: Angle) -> Matrix2<f64> {
    rotation(theta.0)
}

/// `r(θ) = (cos θ, sin θ)`.
pub fn rvec(theta: Angle) -> PlanarVec {
    unit(theta.0)
}

pub(crate) fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub(crate) fn unit(theta: f64) -> PlanarVec {
    let (s, c) = theta.sin_cos();
    Vector2::new(c, s)
}

/// The 90° rotation `j`.
pub fn j() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// `j v` without forming the matrix.
#[inline]
pub fn apply_j(v: &PlanarVec) -> PlanarVec {
    Vector2::new(-v.y, v.x)
}

/// The machine-level generator `diag(j, 0₃ₓ₃)`: rotates the stator pair and
/// annihilates the three rotor currents.
pub fn machine_j() -> Matrix5<f64> {
    let mut m = Matrix5::zeros();
    m[(0, 1)] = -1.0;
    m[(1, 0)] = 1.0;
    m
}

/// `I_n ⊗ j`, used for `J_v` (buses) and `J_T` (lines).
pub fn block_rotation_generator(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "block rotation generator needs n >= 1".into(),
        ));
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        m[(2 * k, 2 * k + 1)] = -1.0;
        m[(2 * k + 1, 2 * k)] = 1.0;
    }
    Ok(m)
}

/// `I_{n_g} ⊗ diag(j, 0₃ₓ₃)`.
pub fn machine_rotation_generator(n_g: usize) -> Result<DMatrix<f64>> {
    if n_g == 0 {
        return Err(Error::InvalidArgument(
            "machine rotation generator needs n_g >= 1".into(),
        ));
    }
    let mut m = DMatrix::zeros(5 * n_g, 5 * n_g);
    let jm = machine_j();
    for k in 0..n_g {
        m.view_mut((5 * k, 5 * k), (5, 5)).copy_from(&jm);
    }
    Ok(m)
}

/// Applies `I_n ⊗ R(φ)` to a stacked vector of planar pairs.
pub fn rotate_blocks(x: &[f64], phi: f64) -> Vec<f64> {
    let (s, c) = phi.sin_cos();
    x.chunks_exact(2)
        .flat_map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn a(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    #[test]
    fn rot_special_values() {
        assert_relative_eq!(rot(a(0.0)), Matrix2::identity());
        assert_relative_eq!(rot(a(PI / 2.0)), j(), epsilon = 1e-15);
        assert_relative_eq!(
            rot(a(0.7)) * rot(a(-0.7)),
            Matrix2::identity(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn non_finite_angles_are_rejected() {
        assert!(matches!(Angle::new(f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(Angle::new(f64::INFINITY).is_err());
        assert!(Angle::try_from(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn rvec_values() {
        assert_relative_eq!(rvec(a(0.0)), Vector2::new(1.0, 0.0));
        assert_relative_eq!(rvec(a(PI)), Vector2::new(-1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(rvec(a(1.234)).norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_orthogonal_on_grid() {
        for k in 0..100 {
            let th = -PI + 2.0 * PI * k as f64 / 100.0;
            let r = rot(a(th));
            assert!((r.transpose() * r - Matrix2::identity()).amax() <= 1e-14);
            assert!((r.determinant() - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn rotation_derivative_is_j_rot() {
        let th = 0.37;
        let mut prev = f64::INFINITY;
        for h in [1e-2, 1e-3, 1e-4] {
            let fd = (rotation(th + h) - rotation(th)) / h;
            let err = (fd - j() * rotation(th)).amax();
            assert!(err < 2.0 * h);
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn block_generators() {
        assert_eq!(block_rotation_generator(1).unwrap().view((0, 0), (2, 2)), j());
        let b2 = block_rotation_generator(2).unwrap();
        assert_eq!(b2.view((0, 0), (2, 2)), j());
        assert_eq!(b2.view((2, 2), (2, 2)), j());
        assert_eq!(b2.view((0, 2), (2, 2)).amax(), 0.0);
        let b3 = block_rotation_generator(3).unwrap();
        assert_eq!((&b3 * &b3 + DMatrix::identity(6, 6)).amax(), 0.0);
        assert!(block_rotation_generator(0).is_err());
    }

    #[test]
    fn machine_generator_structure() {
        let g1 = machine_rotation_generator(1).unwrap();
        assert_eq!(g1.view((0, 0), (2, 2)), j());
        assert_eq!(g1.rank(1e-12), 2);
        let g2 = machine_rotation_generator(2).unwrap();
        assert_eq!((&g2 + g2.transpose()).amax(), 0.0);
        assert_eq!(g2.rank(1e-12), 4);
        let x = nalgebra::DVector::from_row_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = &g1 * x;
        assert_eq!(y.as_slice(), &[-2.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(machine_rotation_generator(0).is_err());
        assert_eq!(machine_j() + machine_j().transpose(), Matrix5::zeros());
    }

    #[test]
    fn block_generator_commutes_with_diagonal_kron_identity() {
        let d = [0.3, -1.7, 2.5];
        let mut dk = DMatrix::zeros(6, 6);
        for (k, v) in d.iter().enumerate() {
            dk[(2 * k, 2 * k)] = *v;
            dk[(2 * k + 1, 2 * k + 1)] = *v;
        }
        let jb = block_rotation_generator(3).unwrap();
        assert!((&jb * &dk - &dk * &jb).amax() <= 1e-15);
    }

    #[test]
    fn wrapping() {
        assert_relative_eq!(wrap_to_pi(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_to_pi(-PI / 2.0), -PI / 2.0);
        assert_relative_eq!(a(2.0 * PI + 0.1).wrapped(), 0.1, epsilon = 1e-12);
        let r = rotate_blocks(&[1.0, 0.0, 0.0, 2.0], PI / 2.0);
        assert_relative_eq!(r[1], 1.0);
        assert_relative_eq!(r[2], -2.0);
    }
}
