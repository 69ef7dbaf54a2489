//! Static loads of the form `i_l = (g(‖v‖) I₂ + b(‖v‖) j) v`.
//!
//! Loads whose conductance and susceptance depend on the voltage only through
//! its magnitude commute with every rotation `R(φ)`, which is what keeps a
//! synchronously rotating voltage paired with a synchronously rotating load
//! current. [`LoadModel::Diagonal`] deliberately breaks that symmetry and is
//! only useful for demonstrating what goes wrong without it.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::frame::{rotation, PlanarVec};

/// Default voltage floor for the current and power variants (V).
pub const DEFAULT_V_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LoadModel {
    #[default]
    None,
    /// Constant admittance `g + jb` (S).
    Impedance { g: f64, b: f64 },
    /// Constant current magnitude: `g = c_g/‖v‖`, `b = c_b/‖v‖`.
    Current { c_g: f64, c_b: f64, v_min: f64 },
    /// Constant power: `g = P/‖v‖²`, `b = −Q/‖v‖²`.
    Power { p: f64, q: f64, v_min: f64 },
    /// `i_l = diag(g_alpha, g_beta) v`. Not rotation-equivariant unless
    /// `g_alpha == g_beta`.
    Diagonal { g_alpha: f64, g_beta: f64 },
}

impl LoadModel {
    /// Conductance and susceptance at voltage magnitude `norm`. `None` for
    /// [`LoadModel::Diagonal`], which has no such representation.
    pub fn conductance_susceptance(&self, norm: f64) -> Result<Option<(f64, f64)>> {
        Ok(match *self {
            LoadModel::None => Some((0.0, 0.0)),
            LoadModel::Impedance { g, b } => Some((g, b)),
            LoadModel::Current { c_g, c_b, v_min } => {
                check_floor(norm, v_min)?;
                Some((c_g / norm, c_b / norm))
            }
            LoadModel::Power { p, q, v_min } => {
                check_floor(norm, v_min)?;
                let n2 = norm * norm;
                Some((p / n2, -q / n2))
            }
            LoadModel::Diagonal { .. } => None,
        })
    }

    /// The 2×2 admittance block `Y_l(v)` such that `i_l = Y_l(v) v`.
    pub fn admittance_block(&self, v: &PlanarVec) -> Result<Matrix2<f64>> {
        if let LoadModel::Diagonal { g_alpha, g_beta } = *self {
            return Ok(Matrix2::new(g_alpha, 0.0, 0.0, g_beta));
        }
        let (g, b) = self
            .conductance_susceptance(v.norm())?
            .expect("only the diagonal model lacks a (g, b) form");
        Ok(Matrix2::new(g, -b, b, g))
    }

    /// Checks the declared parameter domains (dissipation and floors).
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("load {self:?}: {what}")));
        match *self {
            LoadModel::None => Ok(()),
            LoadModel::Impedance { g, b } => {
                if !(g.is_finite() && b.is_finite()) {
                    bad("non-finite parameter")
                } else if g < 0.0 {
                    bad("conductance must be non-negative")
                } else {
                    Ok(())
                }
            }
            LoadModel::Current { c_g, c_b, v_min } => {
                if !(c_g.is_finite() && c_b.is_finite() && v_min.is_finite()) {
                    bad("non-finite parameter")
                } else if c_g < 0.0 {
                    bad("c_g must be non-negative")
                } else if v_min <= 0.0 {
                    bad("v_min must be positive")
                } else {
                    Ok(())
                }
            }
            LoadModel::Power { p, q, v_min } => {
                if !(p.is_finite() && q.is_finite() && v_min.is_finite()) {
                    bad("non-finite parameter")
                } else if p < 0.0 {
                    bad("active power must be non-negative")
                } else if v_min <= 0.0 {
                    bad("v_min must be positive")
                } else {
                    Ok(())
                }
            }
            LoadModel::Diagonal { g_alpha, g_beta } => {
                if g_alpha < 0.0 || g_beta < 0.0 || !(g_alpha.is_finite() && g_beta.is_finite()) {
                    bad("diagonal conductances must be finite and non-negative")
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_rotation_equivariant(&self) -> bool {
        match *self {
            LoadModel::Diagonal { g_alpha, g_beta } => g_alpha == g_beta,
            _ => true,
        }
    }
}

fn check_floor(norm: f64, v_min: f64) -> Result<()> {
    if norm < v_min {
        Err(Error::LoadDomain {
            bus: None,
            norm,
            v_min,
        })
    } else {
        Ok(())
    }
}

/// Load current `i_l(v)`.
pub fn load_current(m: &LoadModel, v: &PlanarVec) -> Result<PlanarVec> {
    Ok(m.admittance_block(v)? * v)
}

/// Active and reactive power drawn, `P = g‖v‖²`, `Q = −b‖v‖²`.
///
/// The diagonal model has no `(g, b)` form; its pair is computed from the
/// current as `P = i_lᵀv`, `Q = −(j v)ᵀi_l`, which reduces to the formula
/// above for equivariant models.
pub fn load_power(m: &LoadModel, v: &PlanarVec) -> Result<(f64, f64)> {
    let vv = v.norm_squared();
    match m.conductance_susceptance(v.norm())? {
        Some((g, b)) => Ok((g * vv, -b * vv)),
        None => {
            let i = load_current(m, v)?;
            Ok((i.dot(v), v.y * i.x - v.x * i.y))
        }
    }
}

/// Largest `‖i_l(R(φ)v) − R(φ) i_l(v)‖` over `n_samples` uniformly spaced `φ`.
pub fn equivariance_defect(m: &LoadModel, v: &PlanarVec, n_samples: usize) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let base = load_current(m, v)?;
    let mut worst = 0.0_f64;
    for k in 0..n_samples {
        let r = rotation(2.0 * PI * k as f64 / n_samples as f64);
        let d = (load_current(m, &(r * v))? - r * base).norm();
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn none_draws_nothing() {
        let v = PlanarVec::new(3.0, -4.0);
        assert_eq!(load_current(&LoadModel::None, &v).unwrap(), PlanarVec::zeros());
    }

    #[test]
    fn resistive_load() {
        let m = LoadModel::Impedance { g: 1.0, b: 0.0 };
        let v = PlanarVec::new(2.0, 0.0);
        let i = load_current(&m, &v).unwrap();
        assert_eq!(i, PlanarVec::new(2.0, 0.0));
        assert_eq!(i.dot(&v), 4.0);
        assert_eq!(load_power(&m, &PlanarVec::new(1.0, 0.0)).unwrap(), (1.0, 0.0));
        assert_eq!(load_current(&m, &PlanarVec::zeros()).unwrap(), PlanarVec::zeros());
    }

    #[test]
    fn constant_power_load() {
        let m = LoadModel::Power { p: 1.0, q: 0.0, v_min: DEFAULT_V_MIN };
        let v = PlanarVec::new(2.0, 0.0);
        let i = load_current(&m, &v).unwrap();
        assert_relative_eq!(i, PlanarVec::new(0.5, 0.0));
        assert_relative_eq!(i.dot(&v), 1.0);

        let m = LoadModel::Power { p: 3.0, q: -1.0, v_min: DEFAULT_V_MIN };
        for v in [PlanarVec::new(0.7, 0.2), PlanarVec::new(-230.0, 12.0)] {
            let (p, q) = load_power(&m, &v).unwrap();
            assert_relative_eq!(p, 3.0, max_relative = 1e-14);
            assert_relative_eq!(q, -1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn reactive_sign_convention() {
        // b > 0 is capacitive: the current leads the voltage and Q < 0.
        let m = LoadModel::Impedance { g: 0.0, b: 2.0 };
        let v = PlanarVec::new(1.0, 0.0);
        assert_eq!(load_current(&m, &v).unwrap(), PlanarVec::new(0.0, 2.0));
        assert_eq!(load_power(&m, &v).unwrap(), (0.0, -2.0));
    }

    #[test]
    fn floor_violations() {
        let m = LoadModel::Current { c_g: 1.0, c_b: 0.0, v_min: 0.1 };
        assert!(matches!(
            load_current(&m, &PlanarVec::new(0.05, 0.0)),
            Err(Error::LoadDomain { bus: None, .. })
        ));
        let e = load_power(&m, &PlanarVec::zeros()).unwrap_err().at_bus(4);
        assert!(matches!(e, Error::LoadDomain { bus: Some(4), .. }));
        assert!(e.to_string().contains("bus 4"));
    }

    #[test]
    fn validation() {
        assert!(LoadModel::Impedance { g: -0.1, b: 0.0 }.validate().is_err());
        assert!(LoadModel::Impedance { g: 0.1, b: -3.0 }.validate().is_ok());
        assert!(LoadModel::Power { p: 1.0, q: 1.0, v_min: 0.0 }.validate().is_err());
        assert!(LoadModel::Current { c_g: -1.0, c_b: 1.0, v_min: 1.0 }.validate().is_err());
    }

    #[test]
    fn equivariance_of_shipped_variants() {
        let v = PlanarVec::new(1.0, 0.0);
        for m in [
            LoadModel::Impedance { g: 0.4, b: -0.3 },
            LoadModel::Power { p: 2.0, q: 0.7, v_min: DEFAULT_V_MIN },
            LoadModel::Current { c_g: 1.3, c_b: 0.2, v_min: DEFAULT_V_MIN },
        ] {
            assert!(equivariance_defect(&m, &v, 360).unwrap() <= 1e-12);
            assert!(m.is_rotation_equivariant());
        }
    }

    #[test]
    fn diagonal_model_is_not_equivariant() {
        let m = LoadModel::Diagonal { g_alpha: 1.0, g_beta: 2.0 };
        let v = PlanarVec::new(1.0, 0.0);
        // independent oracle: direct grid evaluation of ‖(D R(φ) − R(φ) D) v‖
        let d = Matrix2::new(1.0, 0.0, 0.0, 2.0);
        let n = 360;
        let expected = (0..n)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n as f64;
                let (s, c) = phi.sin_cos();
                let r = Matrix2::new(c, -s, s, c);
                ((d * r - r * d) * v).norm()
            })
            .fold(0.0, f64::max);
        let got = equivariance_defect(&m, &v, n).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!(got > 0.4);
        assert!(!m.is_rotation_equivariant());
    }

    fn any_equivariant() -> impl Strategy<Value = LoadModel> {
        prop_oneof![
            (0.0..10.0f64, -10.0..10.0f64).prop_map(|(g, b)| LoadModel::Impedance { g, b }),
            (0.0..10.0f64, -10.0..10.0f64).prop_map(|(c_g, c_b)| LoadModel::Current { c_g, c_b, v_min: 1e-3 }),
            (0.0..10.0f64, -10.0..10.0f64).prop_map(|(p, q)| LoadModel::Power { p, q, v_min: 1e-3 }),
        ]
    }

    proptest! {
        #[test]
        fn equivariant_dissipative_and_radial(m in any_equivariant(), r in 0.01..100.0f64, a in 0.0..6.3f64, phi in 0.0..6.3f64) {
            let v = PlanarVec::new(r * a.cos(), r * a.sin());
            let i = load_current(&m, &v).unwrap();
            let rot = rotation(phi);
            let ir = load_current(&m, &(rot * v)).unwrap();
            prop_assert!((ir - rot * i).norm() <= 1e-12 * (1.0 + i.norm()));
            prop_assert!(i.dot(&v) >= -1e-12 * (1.0 + i.norm() * r));
            prop_assert!((ir.norm() - i.norm()).abs() <= 1e-12 * (1.0 + i.norm()));
            let (p, _) = load_power(&m, &v).unwrap();
            prop_assert!((p - i.dot(&v)).abs() <= 1e-10 * (1.0 + p.abs()));
        }
    }
}
