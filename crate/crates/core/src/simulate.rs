//! Fixed-step RK4 integration of the full model, the closed-form flow of the
//! steady-state field, and drift metrics comparing the two.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::frame::rotation;
use crate::system::{self, InputVector, PowerSystem, StateLayout};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `record_every`-th step (and `t = 0`).
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimConfig {
            dt,
            t_end,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// `⌊t_end / dt⌋`, tolerant to the rounding of an exact quotient.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub inputs: InputVector,
}

/// One classical Runge–Kutta step of `ẋ = f(t, x)`. Stage failures are
/// wrapped with the stage index (1–4) and the step start time.
pub fn rk4_step_fn<F>(mut f: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let wrap = |stage: usize| {
        move |e: Error| Error::Step {
            time: t,
            stage,
            source: Box::new(e),
        }
    };
    let k1 = f(t, x).map_err(wrap(1))?;
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt))).map_err(wrap(2))?;
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt))).map_err(wrap(3))?;
    let k4 = f(t + dt, &(x + &k3 * dt)).map_err(wrap(4))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

pub fn rk4_step(sys: &PowerSystem, x: &DVector<f64>, u: &InputVector, dt: f64) -> Result<DVector<f64>> {
    rk4_step_fn(|_, y| system::vector_field(sys, y, u), 0.0, x, dt)
}

/// Integrates with constant inputs.
pub fn simulate(sys: &PowerSystem, x0: &DVector<f64>, u: &InputVector, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_with_input(sys, x0, |_| u.clone(), cfg).map(|mut tr| {
        tr.inputs = u.clone();
        tr
    })
}

/// Integrates with a time-varying input `u(t)`. The returned trajectory
/// records `u(0)` as its inputs.
pub fn simulate_with_input<U>(sys: &PowerSystem, x0: &DVector<f64>, u: U, cfg: &SimConfig) -> Result<Trajectory>
where
    U: Fn(f64) -> InputVector,
{
    cfg.validate()?;
    if x0.len() != sys.n_x() {
        return Err(Error::Dimension {
            context: "initial state",
            expected: sys.n_x(),
            actual: x0.len(),
        });
    }
    let n = cfg.n_steps();
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut x = x0.clone();
    for k in 0..n {
        let t = k as f64 * cfg.dt;
        x = rk4_step_fn(|s, y| system::vector_field(sys, y, &u(s)), t, &x, cfg.dt)
            .map_err(|e| match e {
                Error::Step { time, stage, source } => Error::Step {
                    time,
                    stage,
                    source: Box::new(sys.user_bus_error(*source)),
                },
                other => other,
            })?;
        if (k + 1) % cfg.record_every == 0 {
            times.push((k + 1) as f64 * cfg.dt);
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        inputs: u(0.0),
    })
}

/// Closed-form flow of the steady-state field from `x0`: rotor angles
/// advance by `ω₀t`, stator currents, bus voltages and line currents rotate
/// by `R(ω₀t)`, speeds and rotor currents stay put.
pub fn reference_trajectory(layout: &StateLayout, x0: &DVector<f64>, omega0: f64, t: f64) -> Result<DVector<f64>> {
    if x0.len() != layout.n_x() {
        return Err(Error::Dimension {
            context: "reference initial state",
            expected: layout.n_x(),
            actual: x0.len(),
        });
    }
    let phi = omega0 * t;
    let r = rotation(phi);
    let mut x = x0.clone();
    let mut rotate = |k: usize| {
        let p = r * nalgebra::Vector2::new(x0[k], x0[k + 1]);
        x[k] = p.x;
        x[k + 1] = p.y;
    };
    for m in 0..layout.n_g {
        rotate(layout.machine_currents(m).start);
    }
    let s = layout.voltages().start;
    for k in 0..(layout.n_v + layout.n_t) {
        rotate(s + 2 * k);
    }
    for k in layout.theta() {
        x[k] = x0[k] + phi;
    }
    Ok(x)
}

/// Maxima over a trajectory and the sample index where each occurs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftMetrics {
    /// `‖x(t) − x_ref(t)‖_∞ / scale`.
    pub state_deviation: f64,
    /// `|‖v_k(t)‖ − ‖v_k(0)‖| / ‖v_k(0)‖` over buses (absolute for a dead bus).
    pub voltage_variation: f64,
    /// `|ω_k(t) − ω₀|` in rad/s.
    pub frequency_deviation: f64,
    /// `‖ρ(x(t), u, ω₀)‖_∞ / scale`.
    pub residual: f64,
    pub worst_state_sample: usize,
    pub worst_voltage_sample: usize,
    pub worst_frequency_sample: usize,
    pub worst_residual_sample: usize,
    /// `max(1, ‖x0‖_∞, ‖u‖_∞)`.
    pub scale: f64,
}

/// Compares `traj` with the reference flow started at `x0`.
pub fn drift_metrics(sys: &PowerSystem, traj: &Trajectory, x0: &DVector<f64>, omega0: f64) -> Result<DriftMetrics> {
    if traj.states.is_empty() || traj.states.len() != traj.times.len() {
        return Err(Error::InvalidArgument("trajectory is empty or malformed".into()));
    }
    let layout = sys.layout();
    let scale = system::scale(x0, &traj.inputs);
    let v0: Vec<f64> = (0..layout.n_v)
        .map(|k| system::bus_voltage(&layout, x0, k).norm())
        .collect();
    let mut m = DriftMetrics {
        scale,
        ..DriftMetrics::default()
    };
    let bump = |val: f64, idx: usize, best: &mut f64, at: &mut usize| {
        if val > *best || val.is_nan() {
            *best = val;
            *at = idx;
        }
    };
    for (idx, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let xr = reference_trajectory(&layout, x0, omega0, *t)?;
        bump((x - xr).amax() / scale, idx, &mut m.state_deviation, &mut m.worst_state_sample);
        for (k, n0) in v0.iter().enumerate() {
            let n = system::bus_voltage(&layout, x, k).norm();
            let d = if *n0 > 0.0 { (n - n0).abs() / n0 } else { n };
            bump(d, idx, &mut m.voltage_variation, &mut m.worst_voltage_sample);
        }
        for k in layout.omega() {
            bump((x[k] - omega0).abs(), idx, &mut m.frequency_deviation, &mut m.worst_frequency_sample);
        }
        let rho = system::residual(sys, x, &traj.inputs, omega0).map_err(|e| sys.user_bus_error(e))?;
        bump(rho.amax() / scale, idx, &mut m.residual, &mut m.worst_residual_sample);
    }
    Ok(m)
}

/// Total stored energy at every recorded sample.
pub fn energy_profile(sys: &PowerSystem, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.states.iter().map(|x| system::stored_energy(sys, x)).collect()
}
