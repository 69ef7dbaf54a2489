//! Synchronous machine with a field winding and one damper winding per axis.
//!
//! The five winding currents are ordered `(i_α, i_β, i_f, i_d, i_q)`. The
//! inductance matrix couples the stator pair to the rotor through the rotor
//! angle `θ`; the stator self-inductance carries a `2θ` saliency term.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix5, SVector, Vector2, Vector5};

use crate::error::{Error, ParamViolation, Result};
use crate::frame::{machine_j, rotation, Angle, PlanarVec};

/// Number of rotor angles sampled by [`validate_params`].
pub const PD_GRID_POINTS: usize = 64;

/// Electrical and mechanical constants of one machine, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    /// Rotor inertia (kg·m²).
    pub inertia: f64,
    /// Mechanical damping (N·m·s).
    pub damping: f64,
    pub r_s: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub r_q: f64,
    pub l_s: f64,
    /// Saliency inductance; zero for a round rotor.
    pub l_sa: f64,
    pub l_f: f64,
    pub l_d: f64,
    pub l_q: f64,
    /// Field–damper mutual inductance.
    pub l_fd: f64,
    /// Stator–field mutual inductance.
    pub l_sf: f64,
    pub l_sd: f64,
    pub l_sq: f64,
}

/// Rotor angle, speed and winding currents of one machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineState {
    pub theta: Angle,
    pub omega: f64,
    pub i_s: PlanarVec,
    pub i_f: f64,
    pub i_d: f64,
    pub i_q: f64,
}

impl MachineState {
    pub fn currents(&self) -> Vector5<f64> {
        Vector5::new(self.i_s.x, self.i_s.y, self.i_f, self.i_d, self.i_q)
    }
}

impl MachineParams {
    pub fn resistance(&self) -> Vector5<f64> {
        Vector5::new(self.r_s, self.r_s, self.r_f, self.r_d, self.r_q)
    }

    /// `L_s(θ) = l_s I₂ + R(2θ) diag(l_sa, −l_sa)`.
    pub fn stator_inductance(&self, theta: f64) -> Matrix2<f64> {
        Matrix2::identity() * self.l_s
            + rotation(2.0 * theta) * Matrix2::new(self.l_sa, 0.0, 0.0, -self.l_sa)
    }

    /// `L_m(θ) = R(θ) [[l_sf, l_sd, 0], [0, 0, −l_sq]]`.
    pub fn mutual_inductance(&self, theta: f64) -> Matrix2x3<f64> {
        rotation(theta) * Matrix2x3::new(self.l_sf, self.l_sd, 0.0, 0.0, 0.0, -self.l_sq)
    }

    pub fn rotor_inductance(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.l_f, self.l_fd, 0.0, //
            self.l_fd, self.l_d, 0.0, //
            0.0, 0.0, self.l_q,
        )
    }
}

/// The 5×5 winding inductance matrix `L(θ)`.
pub fn inductance_matrix(p: &MachineParams, theta: f64) -> Matrix5<f64> {
    let mut l = Matrix5::zeros();
    let lm = p.mutual_inductance(theta);
    l.fixed_view_mut::<2, 2>(0, 0)
        .copy_from(&p.stator_inductance(theta));
    l.fixed_view_mut::<2, 3>(0, 2).copy_from(&lm);
    l.fixed_view_mut::<3, 2>(2, 0).copy_from(&lm.transpose());
    l.fixed_view_mut::<3, 3>(2, 2)
        .copy_from(&p.rotor_inductance());
    l
}

/// Electrical torque `½ iᵀ (L(θ)𝓳 + 𝓳ᵀL(θ)) i`.
pub fn electrical_torque(p: &MachineParams, theta: f64, i: &Vector5<f64>) -> f64 {
    let l = inductance_matrix(p, theta);
    let jm = machine_j();
    0.5 * (i.transpose() * (l * jm + jm.transpose() * l) * i)[(0, 0)]
}

/// Rotation-induced winding voltage `ω (L(θ)𝓳ᵀ + 𝓳L(θ)) i`.
pub fn induced_voltage(p: &MachineParams, theta: f64, omega: f64, i: &Vector5<f64>) -> Vector5<f64> {
    let l = inductance_matrix(p, theta);
    let jm = machine_j();
    (l * jm.transpose() + jm * l) * i * omega
}

/// Right-hand side `(θ̇, ω̇, i̇)` of one machine driven by its terminal
/// voltage, mechanical torque and field voltage.
pub fn machine_rhs(
    p: &MachineParams,
    s: &MachineState,
    v_term: &PlanarVec,
    tau_m: f64,
    v_f: f64,
) -> Result<SVector<f64, 7>> {
    let theta = s.theta.radians();
    let i = s.currents();
    let tau_e = electrical_torque(p, theta, &i);
    let forcing = Vector5::new(v_term.x, v_term.y, v_f, 0.0, 0.0);
    let rhs = -p.resistance().component_mul(&i) + forcing - induced_voltage(p, theta, s.omega, &i);
    let chol = inductance_matrix(p, theta)
        .cholesky()
        .ok_or(Error::Singular("machine inductance matrix"))?;
    let di = chol.solve(&rhs);

    let mut out = SVector::<f64, 7>::zeros();
    out[0] = s.omega;
    out[1] = (-p.damping * s.omega - tau_e + tau_m) / p.inertia;
    out.fixed_rows_mut::<5>(2).copy_from(&di);
    Ok(out)
}

/// Magnetic plus kinetic energy `½ iᵀL(θ)i + ½ m ω²`.
pub fn stored_energy(p: &MachineParams, theta: f64, omega: f64, i: &Vector5<f64>) -> f64 {
    0.5 * (i.transpose() * inductance_matrix(p, theta) * i)[(0, 0)] + 0.5 * p.inertia * omega * omega
}

/// Checks sign domains and positive definiteness of `L(θ)` on a
/// [`PD_GRID_POINTS`]-point rotor-angle grid. Reports the first violation.
pub fn validate_params(p: &MachineParams) -> std::result::Result<(), ParamViolation> {
    let strictly_positive = [
        ("inertia", p.inertia),
        ("damping", p.damping),
        ("r_s", p.r_s),
        ("r_f", p.r_f),
        ("r_d", p.r_d),
        ("r_q", p.r_q),
        ("l_s", p.l_s),
        ("l_f", p.l_f),
        ("l_d", p.l_d),
        ("l_q", p.l_q),
        ("l_fd", p.l_fd),
        ("l_sf", p.l_sf),
        ("l_sd", p.l_sd),
        ("l_sq", p.l_sq),
    ];
    for (name, value) in strictly_positive {
        if !(value.is_finite() && value > 0.0) {
            return Err(ParamViolation::SignDomain {
                name,
                value,
                domain: "> 0",
            });
        }
    }
    if !(p.l_sa.is_finite() && p.l_sa >= 0.0) {
        return Err(ParamViolation::SignDomain {
            name: "l_sa",
            value: p.l_sa,
            domain: ">= 0",
        });
    }

    for k in 0..PD_GRID_POINTS {
        let theta = 2.0 * PI * k as f64 / PD_GRID_POINTS as f64;
        let l = inductance_matrix(p, theta);
        let eigenvalue = l.symmetric_eigenvalues().min();
        if l.cholesky().is_none() || eigenvalue <= 0.0 {
            return Err(ParamViolation::NotPositiveDefinite { theta, eigenvalue });
        }
    }
    Ok(())
}

/// Stator voltage behind the stator impedance, `ν(θ) = v − (R_s + ω₀ j L_s(θ)) i_s`.
pub fn internal_voltage(
    p: &MachineParams,
    theta: f64,
    omega0: f64,
    v: &PlanarVec,
    i_s: &PlanarVec,
) -> PlanarVec {
    let ls_is = p.stator_inductance(theta) * i_s;
    v - i_s * p.r_s - Vector2::new(-ls_is.y, ls_is.x) * omega0
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_params() -> MachineParams {
        MachineParams {
            inertia: 1.0,
            damping: 1.0,
            r_s: 1.0,
            r_f: 1.0,
            r_d: 1.0,
            r_q: 1.0,
            l_s: 1.0,
            l_sa: 0.0,
            l_f: 2.0,
            l_d: 2.0,
            l_q: 2.0,
            l_fd: 0.5,
            l_sf: 1.0,
            l_sd: 0.5,
            l_sq: 0.4,
        }
    }

    #[test]
    fn zero_saliency_stator_inductance_is_isotropic() {
        let p = round();
        for th in [0.0, 0.3, 1.9, -4.0] {
            assert_relative_eq!(
                inductance_matrix(&p, th).fixed_view::<2, 2>(0, 0).into_owned(),
                Matrix2::identity() * p.l_s,
                epsilon = 1e-18
            );
        }
    }

    #[test]
    fn mutual_block_at_zero_angle() {
        let p = MachineParams {
            l_sf: 1.0,
            l_sd: 0.5,
            l_sq: 0.4,
            ..unit_params()
        };
        let l = inductance_matrix(&p, 0.0);
        let lm = l.fixed_view::<2, 3>(0, 2).into_owned();
        assert_eq!(lm, Matrix2x3::new(1.0, 0.5, 0.0, 0.0, 0.0, -0.4));
    }

    #[test]
    fn inductance_is_symmetric_and_pd_on_grid() {
        let p = salient();
        for k in 0..360 {
            let th = k as f64 * PI / 180.0;
            let l = inductance_matrix(&p, th);
            assert!((l - l.transpose()).amax() <= 1e-14);
            // eigenvalue solve as independent oracle
            assert!(l.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn torque_examples() {
        let p = unit_params();
        assert_eq!(electrical_torque(&p, 0.3, &Vector5::zeros()), 0.0);
        // hand evaluation: L𝓳i = −(first column of L(0)) = −(1, 0, 1, 0.5, 0); iᵀ(·) = −1
        let i = Vector5::new(0.0, 1.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(electrical_torque(&p, 0.0, &i), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn induced_voltage_zero_speed_and_homogeneity() {
        let p = salient();
        let i = Vector5::new(3.0, -1.0, 2.0, 0.4, -0.2);
        assert_eq!(induced_voltage(&p, 0.8, 0.0, &i), Vector5::zeros());
        assert_relative_eq!(
            induced_voltage(&p, 0.8, 2.0 * 314.0, &i),
            induced_voltage(&p, 0.8, 314.0, &i) * 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn induced_voltage_matches_entrywise_assembly() {
        // Second assembly path: build L(θ) entry by entry from cos/sin and
        // apply 𝓳 as a row/column shuffle.
        let p = salient();
        let (th, w): (f64, f64) = (0.913, 250.0);
        let i = Vector5::new(1.5, -0.5, 4.0, 0.3, -0.7);
        let (c, s) = (th.cos(), th.sin());
        let (c2, s2) = ((2.0 * th).cos(), (2.0 * th).sin());
        let mut l = [[0.0; 5]; 5];
        l[0][0] = p.l_s + p.l_sa * c2;
        l[0][1] = p.l_sa * s2;
        l[1][0] = l[0][1];
        l[1][1] = p.l_s - p.l_sa * c2;
        let lm = [
            [c * p.l_sf, c * p.l_sd, s * p.l_sq],
            [s * p.l_sf, s * p.l_sd, -c * p.l_sq],
        ];
        for r in 0..2 {
            for q in 0..3 {
                l[r][2 + q] = lm[r][q];
                l[2 + q][r] = lm[r][q];
            }
        }
        l[2][2] = p.l_f;
        l[2][3] = p.l_fd;
        l[3][2] = p.l_fd;
        l[3][3] = p.l_d;
        l[4][4] = p.l_q;
        // 𝓳ᵀ x = (x₁, −x₀, 0, 0, 0) ; 𝓳 y = (−y₁, y₀, 0, 0, 0)
        let jt_i = [i[1], -i[0], 0.0, 0.0, 0.0];
        let li: Vec<f64> = (0..5).map(|r| (0..5).map(|q| l[r][q] * i[q]).sum()).collect();
        let mut expected = [0.0; 5];
        for r in 0..5 {
            expected[r] = (0..5).map(|q| l[r][q] * jt_i[q]).sum::<f64>();
        }
        expected[0] += -li[1];
        expected[1] += li[0];
        let got = induced_voltage(&p, th, w, &i);
        for r in 0..5 {
            assert_relative_eq!(got[r], w * expected[r], max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn rhs_at_rest_is_zero() {
        let p = salient();
        let s = MachineState {
            theta: Angle::new(0.4).unwrap(),
            omega: 0.0,
            i_s: PlanarVec::zeros(),
            i_f: 0.0,
            i_d: 0.0,
            i_q: 0.0,
        };
        let d = machine_rhs(&p, &s, &PlanarVec::zeros(), 0.0, 0.0).unwrap();
        assert_eq!(d, SVector::<f64, 7>::zeros());
    }

    #[test]
    fn rhs_speed_equation_and_consistency() {
        let p = salient();
        let s = MachineState {
            theta: Angle::new(1.1).unwrap(),
            omega: 310.0,
            i_s: PlanarVec::new(20.0, -35.0),
            i_f: 9.0,
            i_d: 0.3,
            i_q: -0.2,
        };
        let v = PlanarVec::new(120.0, 40.0);
        let (tau_m, v_f) = (13.0, 4.5);
        let d = machine_rhs(&p, &s, &v, tau_m, v_f).unwrap();
        let tau_e = electrical_torque(&p, 1.1, &s.currents());
        assert_relative_eq!(d[0], 310.0);
        assert_relative_eq!(d[1], (tau_m - p.damping * s.omega - tau_e) / p.inertia, max_relative = 1e-14);

        // L(θ) di/dt reproduces the right-hand side of the winding equation
        let di = d.fixed_rows::<5>(2).into_owned();
        let lhs = inductance_matrix(&p, 1.1) * di;
        let rhs = -p.resistance().component_mul(&s.currents()) + Vector5::new(v.x, v.y, v_f, 0.0, 0.0)
            - induced_voltage(&p, 1.1, s.omega, &s.currents());
        assert!((lhs - rhs).amax() <= 1e-10 * rhs.amax());
    }

    #[test]
    fn validation_accepts_and_rejects() {
        assert_eq!(validate_params(&salient()), Ok(()));
        assert_eq!(validate_params(&round()), Ok(()));
        let p = round();
        // l_s·l_f > l_sf² and analogues, zero saliency
        assert!(p.l_s * p.l_f > p.l_sf * p.l_sf && p.l_s * p.l_d > p.l_sd * p.l_sd);

        let singular = MachineParams { l_sa: p.l_s, ..p };
        assert!(matches!(
            validate_params(&singular),
            Err(ParamViolation::NotPositiveDefinite { eigenvalue, .. }) if eigenvalue <= 0.0
        ));
        let massless = MachineParams { inertia: 0.0, ..p };
        assert!(matches!(
            validate_params(&massless),
            Err(ParamViolation::SignDomain { name: "inertia", .. })
        ));
        let negative_saliency = MachineParams { l_sa: -1e-3, ..p };
        assert!(matches!(
            validate_params(&negative_saliency),
            Err(ParamViolation::SignDomain { name: "l_sa", .. })
        ));
        let nan = MachineParams { r_q: f64::NAN, ..p };
        assert!(validate_params(&nan).is_err());
    }

    #[test]
    fn singular_inductance_is_reported_by_rhs() {
        let p = MachineParams { l_sa: 0.01, ..salient() };
        let s = MachineState {
            theta: Angle::new(0.0).unwrap(),
            omega: 0.0,
            i_s: PlanarVec::zeros(),
            i_f: 0.0,
            i_d: 0.0,
            i_q: 0.0,
        };
        assert_eq!(
            machine_rhs(&p, &s, &PlanarVec::zeros(), 0.0, 0.0),
            Err(Error::Singular("machine inductance matrix"))
        );
    }

    proptest! {
        #[test]
        fn torque_is_two_pi_periodic(th in -10.0..10.0f64, a in -5.0..5.0f64, b in -5.0..5.0f64, f in -5.0..5.0f64, d in -1.0..1.0f64, q in -1.0..1.0f64) {
            let p = salient();
            let i = Vector5::new(a, b, f, d, q);
            let t0 = electrical_torque(&p, th, &i);
            let t1 = electrical_torque(&p, th + 2.0 * PI, &i);
            prop_assert!((t0 - t1).abs() <= 1e-12 * (1.0 + t0.abs()));
        }

        #[test]
        fn inductance_symmetric(th in -20.0..20.0f64) {
            let l = inductance_matrix(&salient(), th);
            prop_assert!((l - l.transpose()).amax() <= 1e-14);
        }
    }
}
