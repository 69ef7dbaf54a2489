//! Constructive synchronous steady states.
//!
//! Three stages: solve the nodal current balance for the load-bus voltages
//! with the generator-bus voltages prescribed ([`solve_network`]), recover
//! rotor angle, field current and inputs of every machine from its terminal
//! voltage and stator current ([`recover_machine`]), then assemble and
//! certify the full state ([`assemble_steady_state`],
//! [`verify_steady_state`]).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector5};

use crate::error::{Error, Result};
use crate::frame::{apply_j, unit, Angle, PlanarVec};
use crate::loads;
use crate::machine::{self, MachineParams};
use crate::network::{self, pair};
use crate::system::{self, InputVector, PowerSystem, ResidualBlocks};

/// Certification threshold on `‖ρ‖_∞ / scale`.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Step used for the forward-difference invariance probe.
pub const INVARIANCE_STEP: f64 = 1e-7;
/// Threshold on the extrapolated invariance defect over `scale`.
pub const INVARIANCE_TOL: f64 = 1e-5;
/// Threshold on a load's rotation-equivariance defect relative to
/// `max(1, ‖i_l‖)`.
pub const EQUIVARIANCE_TOL: f64 = 1e-9;
/// Rotation samples used by the load-equivariance check.
pub const EQUIVARIANCE_SAMPLES: usize = 64;

const DEGENERACY_BAND: f64 = 1e-9;

/// Rotor polarization `σ = ±1`: the sign of `ω₀ i_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarization {
    #[default]
    Positive,
    Negative,
}

impl Polarization {
    pub fn sign(self) -> f64 {
        match self {
            Polarization::Positive => 1.0,
            Polarization::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarization::Positive => Polarization::Negative,
            Polarization::Negative => Polarization::Positive,
        }
    }
}

impl TryFrom<i64> for Polarization {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        match value {
            1 => Ok(Polarization::Positive),
            -1 => Ok(Polarization::Negative),
            other => Err(Error::InvalidArgument(format!("polarization must be +1 or -1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when `‖F‖_∞ / max(1, ‖v‖_∞)` falls to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative forward-difference step; scaled by `max(1, ‖v‖_∞)`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            fd_step: 1e-6,
        }
    }
}

/// Operating point: synchronous frequency, prescribed generator-bus voltage
/// phasors (one per machine, machine order) and rotor polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingSpec {
    pub omega0: f64,
    pub generator_voltages: Vec<PlanarVec>,
    pub polarization: Vec<Polarization>,
    pub newton: NewtonOptions,
}

impl OperatingSpec {
    /// Builds the voltages from `(magnitude, angle)` pairs.
    pub fn from_polar(omega0: f64, voltages: &[(f64, Angle)], polarization: Vec<Polarization>) -> Self {
        OperatingSpec {
            omega0,
            generator_voltages: voltages.iter().map(|(m, a)| unit(a.radians()) * *m).collect(),
            polarization,
            newton: NewtonOptions::default(),
        }
    }

    pub fn validate(&self, sys: &PowerSystem) -> Result<()> {
        let mut problems = Vec::new();
        if !self.omega0.is_finite() {
            problems.push(format!("omega0 = {} is not finite", self.omega0));
        }
        if self.generator_voltages.len() != sys.n_g() {
            problems.push(format!(
                "{} generator voltages given for {} machines",
                self.generator_voltages.len(),
                sys.n_g()
            ));
        }
        if self.polarization.len() != sys.n_g() {
            problems.push(format!(
                "{} polarizations given for {} machines",
                self.polarization.len(),
                sys.n_g()
            ));
        }
        if self.generator_voltages.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            problems.push("generator voltages must be finite".into());
        }
        let n = &self.newton;
        if !(n.tol.is_finite() && n.tol > 0.0) || n.max_iter == 0 || !(n.fd_step.is_finite() && n.fd_step > 0.0) {
            problems.push(format!("invalid Newton options {n:?}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// A point of the network solution set: stator injections, bus voltages
/// and line currents satisfying the steady-state network equations.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub omega0: f64,
    pub i_s: DVector<f64>,
    pub v: DVector<f64>,
    pub i_t: DVector<f64>,
    /// Final `‖F‖_∞ / max(1, ‖v‖_∞)` over the load-bus equations.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Relative residual before every Newton update and after the last.
    pub history: Vec<f64>,
}

fn load_bus_residual(sys: &PowerSystem, v: &DVector<f64>, omega0: f64) -> Result<DVector<f64>> {
    let none = DVector::zeros(0);
    let full = network::nodal_balance_residual(sys.network(), sys.topology(), sys.loads(), &none, v, omega0)?;
    Ok(full.rows(2 * sys.n_g(), 2 * sys.n_l()).into_owned())
}

/// Newton solve of the load-bus rows of `Y_N(v) v = 0` with the generator
/// voltages held at their prescribed values; the generator rows then give
/// `i_s` and the line law gives `i_T`.
pub fn solve_network(sys: &PowerSystem, spec: &OperatingSpec) -> Result<NetworkSolution> {
    spec.validate(sys)?;
    let (n_g, n_l) = (sys.n_g(), sys.n_l());
    let omega0 = spec.omega0;
    let opts = spec.newton;

    let mut v = DVector::zeros(2 * sys.n_v());
    for (k, vg) in spec.generator_voltages.iter().enumerate() {
        v[2 * k] = vg.x;
        v[2 * k + 1] = vg.y;
    }
    let nominal = spec.generator_voltages.iter().map(|g| g.norm()).sum::<f64>() / n_g as f64;
    for k in n_g..sys.n_v() {
        v[2 * k] = nominal;
    }

    let rel = |f: &DVector<f64>, v: &DVector<f64>| f.amax() / v.amax().max(1.0);
    let eval = |v: &DVector<f64>| load_bus_residual(sys, v, omega0).map_err(|e| sys.user_bus_error(e));

    let mut history = Vec::new();
    let mut iterations = 0;
    if n_l > 0 {
        let lo = 2 * n_g;
        let mut f = eval(&v)?;
        history.push(rel(&f, &v));
        while history[history.len() - 1] > opts.tol {
            if iterations == opts.max_iter {
                return Err(Error::NewtonDiverged {
                    iterations,
                    residual: history[history.len() - 1],
                });
            }
            let h = opts.fd_step * v.amax().max(1.0);
            let mut jac = DMatrix::zeros(2 * n_l, 2 * n_l);
            for c in 0..2 * n_l {
                let mut vp = v.clone();
                vp[lo + c] += h;
                jac.set_column(c, &((eval(&vp)? - &f) / h));
            }
            let step = jac.lu().solve(&f).ok_or(Error::Singular("Newton Jacobian"))?;
            if !step.iter().all(|s| s.is_finite()) {
                return Err(Error::Singular("Newton Jacobian"));
            }
            let mut tail = v.rows_mut(lo, 2 * n_l);
            tail -= step;
            iterations += 1;
            f = eval(&v)?;
            history.push(rel(&f, &v));
        }
    }

    let full = network::nodal_balance_residual(sys.network(), sys.topology(), sys.loads(), &DVector::zeros(0), &v, omega0)
        .map_err(|e| sys.user_bus_error(e))?;
    let i_s = -full.rows(0, 2 * n_g).into_owned();
    let i_t = network::steady_line_currents(sys.network(), sys.topology(), &v, omega0);
    Ok(NetworkSolution {
        omega0,
        i_s,
        v,
        i_t,
        residual_norm: history.last().copied().unwrap_or(0.0),
        iterations,
        history,
    })
}

/// Polar decomposition of the stator equation for one machine:
/// `i_f (ω₀ l_sf, 0) = ε(θ) = α_c r(δ_c − θ) + α_sa r(δ_sa + θ)` with
/// `η_c = jᵀ(v − (r_s + ω₀ j l_s) i_s)` and `η_sa = −ω₀ l_sa diag(1, −1) i_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub eta_c: PlanarVec,
    pub eta_sa: PlanarVec,
    pub alpha_c: f64,
    pub delta_c: f64,
    pub alpha_sa: f64,
    pub delta_sa: f64,
}

impl Ellipse {
    pub fn new(p: &MachineParams, v: &PlanarVec, i_s: &PlanarVec, omega0: f64) -> Self {
        let w = v - i_s * p.r_s - apply_j(i_s) * (omega0 * p.l_s);
        // jᵀ w
        let eta_c = PlanarVec::new(w.y, -w.x);
        let eta_sa = PlanarVec::new(-i_s.x, i_s.y) * (omega0 * p.l_sa);
        Ellipse {
            eta_c,
            eta_sa,
            alpha_c: eta_c.norm(),
            delta_c: eta_c.y.atan2(eta_c.x),
            alpha_sa: eta_sa.norm(),
            delta_sa: eta_sa.y.atan2(eta_sa.x),
        }
    }

    pub fn epsilon(&self, theta: f64) -> PlanarVec {
        unit(self.delta_c - theta) * self.alpha_c + unit(self.delta_sa + theta) * self.alpha_sa
    }

    /// The two angles, `π` apart, where the second component of `ε`
    /// vanishes: `A cos θ + B sin θ = 0` with `A = η_c,β + η_sa,β`,
    /// `B = η_sa,α − η_c,α`. `None` when both coefficients vanish.
    pub fn roots(&self) -> Option<[f64; 2]> {
        let a = self.eta_c.y + self.eta_sa.y;
        let b = self.eta_sa.x - self.eta_c.x;
        if a == 0.0 && b == 0.0 {
            return None;
        }
        let t = (-a).atan2(b);
        Some([t, t + PI])
    }

    fn alpha_equal(&self) -> bool {
        (self.alpha_c - self.alpha_sa).abs() <= DEGENERACY_BAND * (self.alpha_c + self.alpha_sa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryCase {
    Regular,
    /// `ν(θ) = 0`: the field is unexcited and the rotor angle is not
    /// determined by the stator equation.
    NuZero,
    /// `ω₀ = 0` with `v = R_s i_s`.
    OmegaZero,
    /// `α_c = α_sa`: the ellipse collapses to a segment.
    AlphaEqual,
}

impl RecoveryCase {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryCase::Regular => "regular",
            RecoveryCase::NuZero => "nu_zero",
            RecoveryCase::OmegaZero => "omega_zero",
            RecoveryCase::AlphaEqual => "alpha_equal",
        }
    }

    pub fn is_degenerate(self) -> bool {
        self != RecoveryCase::Regular
    }
}

impl std::str::FromStr for RecoveryCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(RecoveryCase::Regular),
            "nu_zero" => Ok(RecoveryCase::NuZero),
            "omega_zero" => Ok(RecoveryCase::OmegaZero),
            "alpha_equal" => Ok(RecoveryCase::AlphaEqual),
            other => Err(Error::InvalidArgument(format!("unknown recovery case {other:?}"))),
        }
    }
}

/// Rotor state and inputs of one machine in synchronous operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineRecovery {
    pub theta: Angle,
    pub i_f: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub tau_m: f64,
    pub v_f: f64,
    /// `ν(θ) = v − Z_s(θ) i_s` at the recovered angle.
    pub nu: PlanarVec,
    pub case: RecoveryCase,
    pub sigma: Polarization,
}

impl MachineRecovery {
    pub fn currents(&self, i_s: &PlanarVec) -> Vector5<f64> {
        Vector5::new(i_s.x, i_s.y, self.i_f, self.i_d, self.i_q)
    }
}

/// Relative residuals of `ω₀ l_sf i_f = σ‖ν(θ)‖` and
/// `j r(θ) ‖ν(θ)‖ = σ ν(θ)` at a recovered point.
pub fn recovery_equation_residuals(
    p: &MachineParams,
    v: &PlanarVec,
    i_s: &PlanarVec,
    omega0: f64,
    rec: &MachineRecovery,
) -> (f64, f64) {
    let theta = rec.theta.radians();
    let nu = machine::internal_voltage(p, theta, omega0, v, i_s);
    let s = rec.sigma.sign();
    let n = nu.norm();
    let denom = v.norm().max((v - nu).norm()).max(f64::MIN_POSITIVE);
    let a = (omega0 * p.l_sf * rec.i_f - s * n).abs() / denom;
    let b = (apply_j(&unit(theta)) * n - nu * s).norm() / denom;
    (a, b)
}

/// Recovers `(θ, i_f, τ_m, v_f)` for a machine with terminal voltage `v`
/// and stator current `i_s` at frequency `ω₀`. The root with
/// `sign(ω₀ i_f) = σ` is selected; the other polarization gives `θ + π`
/// and `−i_f`.
pub fn recover_machine(
    p: &MachineParams,
    v: &PlanarVec,
    i_s: &PlanarVec,
    omega0: f64,
    sigma: Polarization,
) -> Result<MachineRecovery> {
    let finish = |theta: f64, i_f: f64, case: RecoveryCase| -> Result<MachineRecovery> {
        let i = Vector5::new(i_s.x, i_s.y, i_f, 0.0, 0.0);
        Ok(MachineRecovery {
            theta: Angle::new(theta)?,
            i_f,
            i_d: 0.0,
            i_q: 0.0,
            tau_m: p.damping * omega0 + machine::electrical_torque(p, theta, &i),
            v_f: p.r_f * i_f,
            nu: machine::internal_voltage(p, theta, omega0, v, i_s),
            case,
            sigma,
        })
    };
    let flip = if sigma == Polarization::Negative { PI } else { 0.0 };

    if omega0 == 0.0 {
        let nu_norm = (v - i_s * p.r_s).norm();
        if nu_norm > DEGENERACY_BAND * v.norm().max(1.0) {
            return Err(Error::OmegaZeroInfeasible { machine: 0, nu_norm });
        }
        return finish(flip, 0.0, RecoveryCase::OmegaZero);
    }

    let el = Ellipse::new(p, v, i_s, omega0);
    if el.alpha_equal() {
        // ν(θ) vanishes at θ* below; with both radii zero it vanishes for
        // every θ (round rotor, v = Z_s i_s)
        let theta = 0.5 * (el.delta_c - el.delta_sa + PI) + flip;
        if el.alpha_c <= DEGENERACY_BAND * v.norm() {
            return finish(theta, 0.0, RecoveryCase::NuZero);
        }
        let i_f = el.epsilon(theta).x / (omega0 * p.l_sf);
        return finish(theta, i_f, RecoveryCase::AlphaEqual);
    }
    let [t0, t1] = el.roots().ok_or(Error::Singular("rotor-angle equation"))?;
    let e0 = el.epsilon(t0).x;
    let (mut theta, eps) = if e0 * sigma.sign() >= 0.0 { (t0, e0) } else { (t1, el.epsilon(t1).x) };
    if theta > PI {
        theta -= 2.0 * PI;
    }

    let nu = machine::internal_voltage(p, theta, omega0, v, i_s);
    if nu.norm() <= DEGENERACY_BAND * v.norm() {
        return finish(theta, 0.0, RecoveryCase::NuZero);
    }
    let rec = finish(theta, eps / (omega0 * p.l_sf), RecoveryCase::Regular)?;
    let (a, b) = recovery_equation_residuals(p, v, i_s, omega0, &rec);
    if a > DEGENERACY_BAND || b > DEGENERACY_BAND {
        return Err(Error::Verification(format!(
            "recovered rotor state violates the stator equation (field residual {a:.3e}, angle residual {b:.3e})"
        )));
    }
    Ok(rec)
}

/// Full state and inputs on the steady-state set.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSteadyState {
    pub x: DVector<f64>,
    pub u: InputVector,
    pub omega0: f64,
    pub recoveries: Vec<MachineRecovery>,
    pub blocks: ResidualBlocks,
    /// `‖ρ‖_∞`.
    pub residual_norm: f64,
    /// `max(1, ‖x‖_∞, ‖u‖_∞)`.
    pub scale: f64,
}

/// Stacks the network solution and machine recoveries into `(x, u)` and
/// checks `‖ρ‖_∞ ≤ RESIDUAL_TOL · scale`.
pub fn assemble_steady_state(
    sys: &PowerSystem,
    net: &NetworkSolution,
    recoveries: &[MachineRecovery],
) -> Result<FullSteadyState> {
    let layout = sys.layout();
    if recoveries.len() != sys.n_g() {
        return Err(Error::Dimension {
            context: "machine recoveries",
            expected: sys.n_g(),
            actual: recoveries.len(),
        });
    }
    let mut x = DVector::zeros(layout.n_x());
    let mut u = InputVector::zeros(sys.n_g());
    for (k, rec) in recoveries.iter().enumerate() {
        x[k] = rec.theta.radians();
        x[layout.n_g + k] = net.omega0;
        let i = rec.currents(&pair(&net.i_s, k));
        x.rows_range_mut(layout.machine_currents(k)).copy_from(&i);
        u.tau_m[k] = rec.tau_m;
        u.v_f[k] = rec.v_f;
    }
    x.rows_range_mut(layout.voltages()).copy_from(&net.v);
    x.rows_range_mut(layout.line_currents()).copy_from(&net.i_t);

    let rho = system::residual(sys, &x, &u, net.omega0).map_err(|e| sys.user_bus_error(e))?;
    let blocks = ResidualBlocks::from_residual(&layout, &rho);
    let scale = system::scale(&x, &u);
    let residual_norm = rho.amax();
    if residual_norm > RESIDUAL_TOL * scale {
        return Err(Error::Verification(format!(
            "assembled residual {residual_norm:.3e} exceeds {:.3e} (blocks: {blocks:?})",
            RESIDUAL_TOL * scale
        )));
    }
    Ok(FullSteadyState {
        x,
        u,
        omega0: net.omega0,
        recoveries: recoveries.to_vec(),
        blocks,
        residual_norm,
        scale,
    })
}

/// Outcome of checking the three steady-state conditions: equivariant
/// loads, constant inputs (always the case here), and `ρ = 0`; plus the
/// invariance probe along the steady-state field.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub blocks: ResidualBlocks,
    pub residual_norm: f64,
    pub scale: f64,
    /// First-order probe `‖(ρ(x + h f_d) − ρ(x)) / h‖_∞`.
    pub invariance_defect: f64,
    /// Second-order probe; the certificate threshold applies to this one.
    pub invariance_defect_extrapolated: f64,
    /// Per internal bus, relative to `max(1, ‖i_l‖)`.
    pub load_defects: Vec<f64>,
    pub residual_ok: bool,
    pub invariance_ok: bool,
    pub loads_ok: bool,
    pub certificate: bool,
    pub failures: Vec<String>,
}

/// Evaluates the report for any `(x, u, ω₀)`; never fails, problems are
/// recorded in `failures`.
pub fn verify_state(sys: &PowerSystem, x: &DVector<f64>, u: &InputVector, omega0: f64) -> VerificationReport {
    let layout = sys.layout();
    let scale = system::scale(x, u);
    let mut failures = Vec::new();

    let (blocks, residual_norm) = match system::residual(sys, x, u, omega0) {
        Ok(rho) => (ResidualBlocks::from_residual(&layout, &rho), rho.amax()),
        Err(e) => {
            failures.push(format!("residual: {}", sys.user_bus_error(e)));
            (ResidualBlocks::default(), f64::INFINITY)
        }
    };
    let lim = RESIDUAL_TOL * scale;
    let residual_ok = residual_norm <= lim;
    if !residual_ok && residual_norm.is_finite() {
        for (name, val) in [
            ("frequency", blocks.frequency),
            ("torque", blocks.torque),
            ("windings", blocks.windings),
            ("buses", blocks.buses),
            ("lines", blocks.lines),
        ] {
            if val > lim {
                failures.push(format!("{name} residual block {val:.3e} exceeds {lim:.3e}"));
            }
        }
    }

    let probe = |f: fn(&PowerSystem, &DVector<f64>, &InputVector, f64, f64) -> Result<f64>, failures: &mut Vec<String>| {
        f(sys, x, u, omega0, INVARIANCE_STEP).unwrap_or_else(|e| {
            failures.push(format!("invariance probe: {}", sys.user_bus_error(e)));
            f64::INFINITY
        })
    };
    let invariance_defect = probe(system::invariance_defect, &mut failures);
    let invariance_defect_extrapolated = probe(system::invariance_defect_extrapolated, &mut failures);
    let invariance_ok = invariance_defect_extrapolated <= INVARIANCE_TOL * scale;
    if !invariance_ok && invariance_defect_extrapolated.is_finite() {
        failures.push(format!(
            "invariance defect {invariance_defect_extrapolated:.3e} exceeds {:.3e}",
            INVARIANCE_TOL * scale
        ));
    }

    let mut load_defects = Vec::with_capacity(sys.n_v());
    for (k, m) in sys.loads().iter().enumerate() {
        let vk = system::bus_voltage(&layout, x, k);
        let d = loads::equivariance_defect(m, &vk, EQUIVARIANCE_SAMPLES)
            .and_then(|d| Ok(d / loads::load_current(m, &vk)?.norm().max(1.0)));
        match d {
            Ok(d) => {
                if d > EQUIVARIANCE_TOL {
                    failures.push(format!(
                        "load at bus {} is not rotation-equivariant (defect {d:.3e})",
                        sys.bus_order()[k]
                    ));
                }
                load_defects.push(d);
            }
            Err(e) => {
                failures.push(format!("load at bus {}: {e}", sys.bus_order()[k]));
                load_defects.push(f64::INFINITY);
            }
        }
    }
    let loads_ok = load_defects.iter().all(|d| *d <= EQUIVARIANCE_TOL);

    VerificationReport {
        blocks,
        residual_norm,
        scale,
        invariance_defect,
        invariance_defect_extrapolated,
        load_defects,
        residual_ok,
        invariance_ok,
        loads_ok,
        certificate: residual_ok && invariance_ok && loads_ok,
        failures,
    }
}

pub fn verify_steady_state(sys: &PowerSystem, ss: &FullSteadyState) -> VerificationReport {
    verify_state(sys, &ss.x, &ss.u, ss.omega0)
}

/// Network solve, per-machine recovery, assembly and verification.
pub fn compute_steady_state(
    sys: &PowerSystem,
    spec: &OperatingSpec,
) -> Result<(NetworkSolution, FullSteadyState, VerificationReport)> {
    let net = solve_network(sys, spec)?;
    let mut recoveries = Vec::with_capacity(sys.n_g());
    for (k, p) in sys.machines().iter().enumerate() {
        let rec = recover_machine(p, &pair(&net.v, k), &pair(&net.i_s, k), spec.omega0, spec.polarization[k])
            .map_err(|e| match e {
                Error::OmegaZeroInfeasible { nu_norm, .. } => Error::OmegaZeroInfeasible { machine: k, nu_norm },
                other => other,
            })?;
        recoveries.push(rec);
    }
    let ss = assemble_steady_state(sys, &net, &recoveries)?;
    let report = verify_steady_state(sys, &ss);
    Ok((net, ss, report))
}
