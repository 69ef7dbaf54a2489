//! Seeded numeric checks of the algebraic identities that make the
//! steady-state set invariant, plus generators for random valid instances.

use nalgebra::{DMatrix, DVector, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frame::{block_rotation_generator, machine_j, machine_rotation_generator, PlanarVec};
use crate::machine::{self, MachineParams};
use crate::network::{incidence_expand, Topology};
use crate::steady_state::Ellipse;
use crate::system::{field_indicator, voltage_indicator, PowerSystem};

/// Central-difference step for the directional-derivative identities.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance for the directional-derivative identities.
pub const FD_TOL: f64 = 1e-6;
/// Absolute tolerance for the exact matrix identities.
pub const MATRIX_TOL: f64 = 1e-15;
/// Points on the rotor-angle grid for the ellipse bound.
pub const ELLIPSE_GRID: usize = 360;

/// Random machine parameters that pass [`machine::validate_params`].
/// `salient` selects `l_sa > 0`; otherwise the rotor is round.
pub fn random_machine<R: Rng>(rng: &mut R, salient: bool) -> MachineParams {
    loop {
        let l_s = rng.random_range(0.003..0.01);
        let l_f = rng.random_range(0.5..2.0);
        let l_d = rng.random_range(0.3..1.0);
        let p = MachineParams {
            inertia: rng.random_range(0.01..1.0),
            damping: rng.random_range(0.001..0.1),
            r_s: rng.random_range(0.005..0.05),
            r_f: rng.random_range(0.1..1.0),
            r_d: rng.random_range(0.1..1.0),
            r_q: rng.random_range(0.1..1.0),
            l_s,
            l_sa: if salient { rng.random_range(0.05..0.4) * l_s } else { 0.0 },
            l_f,
            l_d,
            l_q: rng.random_range(0.3..1.0),
            l_fd: rng.random_range(0.1..0.6) * (l_f * l_d).sqrt(),
            l_sf: rng.random_range(0.2..0.6) * (l_s * l_f).sqrt(),
            l_sd: rng.random_range(0.1..0.4) * (l_s * l_d).sqrt(),
            l_sq: rng.random_range(0.1..0.4) * l_s.sqrt(),
        };
        if machine::validate_params(&p).is_ok() {
            return p;
        }
    }
}

/// Random connected topology: a random spanning tree plus `extra` chords,
/// with random orientation.
pub fn random_topology<R: Rng>(rng: &mut R, n_v: usize, extra: usize) -> Topology {
    let mut lines = Vec::new();
    for k in 1..n_v {
        let j = rng.random_range(0..k);
        lines.push(if rng.random_bool(0.5) { (j, k) } else { (k, j) });
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n_v);
        let b = rng.random_range(0..n_v);
        if a != b {
            lines.push((a, b));
        }
    }
    Topology::new(n_v, lines).expect("spanning tree is connected")
}

/// Worst observed value of one identity over all instances.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub instances: usize,
    /// Largest relative (or absolute, for matrix identities) defect.
    pub worst: f64,
    pub tol: f64,
}

impl IdentityCheck {
    fn new(name: &'static str, tol: f64) -> Self {
        IdentityCheck {
            name,
            instances: 0,
            worst: 0.0,
            tol,
        }
    }

    fn record(&mut self, defect: f64) {
        self.instances += 1;
        if defect > self.worst || defect.is_nan() {
            self.worst = defect;
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.worst <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }
}

/// `τ_e` directional derivative along `(ω₀, ω₀𝓳i)`; zero by the identity.
/// Returns `|∂τ_e/∂θ ω₀ + ∂τ_e/∂i ω₀𝓳i|` over `ω₀‖L(θ)‖‖i‖²`.
pub fn torque_identity_defect(p: &MachineParams, theta: f64, i: &Vector5<f64>, omega0: f64) -> f64 {
    let h = FD_STEP;
    let ji = machine_j() * i;
    let tau = |s: f64| machine::electrical_torque(p, theta + s, &(i + ji * s));
    let d = omega0 * (tau(h) - tau(-h)) / (2.0 * h);
    let norm_l = machine::inductance_matrix(p, theta).norm();
    d.abs() / (omega0.abs() * norm_l * i.norm_squared()).max(f64::MIN_POSITIVE)
}

/// `v_ind` directional derivative along `(ω₀, ω₀𝓳i)` against `ω₀𝓳v_ind`,
/// relative to `ω₀|ω|‖L(θ)‖‖i‖`.
pub fn induced_voltage_identity_defect(
    p: &MachineParams,
    theta: f64,
    omega: f64,
    i: &Vector5<f64>,
    omega0: f64,
) -> f64 {
    let h = FD_STEP;
    let jm = machine_j();
    let ji = jm * i;
    let vind = |s: f64| machine::induced_voltage(p, theta + s, omega, &(i + ji * s));
    let d = (vind(h) - vind(-h)) * (omega0 / (2.0 * h));
    let rhs = jm * vind(0.0) * omega0;
    let norm_l = machine::inductance_matrix(p, theta).norm();
    (d - rhs).norm() / (omega0.abs() * omega.abs() * norm_l * i.norm()).max(f64::MIN_POSITIVE)
}

/// `max_θ ((α_c − α_sa)² − εᵀε)⁺` over the grid, relative to `(α_c + α_sa)²`.
pub fn ellipse_bound_defect(el: &Ellipse, grid: usize) -> f64 {
    let floor = (el.alpha_c - el.alpha_sa).powi(2);
    let norm = (el.alpha_c + el.alpha_sa).powi(2).max(f64::MIN_POSITIVE);
    (0..grid)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
            let e = el.epsilon(th);
            ((floor - e.norm_squared()) / norm).max(0.0)
        })
        .fold(0.0, f64::max)
}

fn random_currents<R: Rng>(rng: &mut R, amp: f64) -> Vector5<f64> {
    Vector5::from_fn(|_, _| rng.random_range(-amp..amp))
}

fn matrix_defect(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Runs every identity over `n_instances` seeded random instances. When a
/// system is supplied its machines and topology are mixed into the sweep
/// (every other instance) and `omega0` is used for those instances.
pub fn run_identity_suite(sys: Option<(&PowerSystem, f64)>, seed: u64, n_instances: usize) -> IdentityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut torque = IdentityCheck::new("torque directional derivative", FD_TOL);
    let mut vind = IdentityCheck::new("induced-voltage directional derivative", FD_TOL);
    let mut iv = IdentityCheck::new("I_v^T J_v = J_g I_v^T", MATRIX_TOL);
    let mut ej = IdentityCheck::new("E J_T = J_v E", MATRIX_TOL);
    let mut jf = IdentityCheck::new("J_g I_f = 0", MATRIX_TOL);
    let mut ellipse = IdentityCheck::new("ellipse bound eps^T eps >= (alpha_c - alpha_sa)^2", 1e-12);

    for k in 0..n_instances {
        let own = sys.filter(|_| k % 2 == 0);
        let (p, omega0) = match own {
            Some((s, w)) => (s.machines()[(k / 2) % s.n_g()], w),
            None => (random_machine(&mut rng, k % 4 < 2), rng.random_range(10.0..1000.0)),
        };
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let i = random_currents(&mut rng, 100.0);
        let omega = omega0 * rng.random_range(0.5..1.5);
        torque.record(torque_identity_defect(&p, theta, &i, omega0));
        vind.record(induced_voltage_identity_defect(&p, theta, omega, &i, omega0));

        let v = PlanarVec::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
        let i_s = PlanarVec::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        ellipse.record(ellipse_bound_defect(&Ellipse::new(&p, &v, &i_s, omega0), ELLIPSE_GRID));

        let topo = match own {
            Some((s, _)) => s.topology().clone(),
            None => {
                let n_v = rng.random_range(2..9);
                let extra = rng.random_range(0..n_v);
                random_topology(&mut rng, n_v, extra)
            }
        };
        let n_v = topo.n_v();
        let n_g = match own {
            Some((s, _)) => s.n_g(),
            None => rng.random_range(1..=n_v),
        };
        let jv = block_rotation_generator(n_v).expect("n_v >= 1");
        let jt = block_rotation_generator(topo.n_t()).expect("connected topology has a line");
        let jg = machine_rotation_generator(n_g).expect("n_g >= 1");
        let ivt = voltage_indicator(n_g, n_v).transpose();
        iv.record(matrix_defect(&(&ivt * &jv), &(&jg * &ivt)));
        let e = incidence_expand(&topo);
        ej.record(matrix_defect(&(&e * jt), &(&jv * &e)));
        jf.record((jg * field_indicator(n_g)).amax());
    }

    IdentityReport {
        seed,
        checks: vec![torque, vind, iv, ej, jf, ellipse],
    }
}

/// Central-difference derivative of `f` at `x` along `dir`.
pub fn directional_derivative<F>(f: F, x: &DVector<f64>, dir: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    (f(&(x + dir * h)) - f(&(x - dir * h))) / (2.0 * h)
}
