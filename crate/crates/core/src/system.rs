//! Whole-system assembly: machines attached to generator buses, the network,
//! and the static loads, with the full vector field, the synchronous
//! steady-state field and the residual between them.
//!
//! Flat state layout (`n_x = 7n_g + 2n_v + 2n_t`):
//!
//! ```text
//! x = [ θ (n_g) | ω (n_g) | i (5 n_g) | v (2 n_v) | i_T (2 n_t) ]
//! ```
//!
//! Generator buses always occupy internal bus indices `0..n_g`, machine `k`
//! sitting on bus `k`. [`assemble`] permutes user bus numbering into that
//! order and keeps the permutation for reporting.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Vector5};

use crate::error::{Error, Result};
use crate::frame::{Angle, PlanarVec};
use crate::loads::LoadModel;
use crate::machine::{self, MachineParams, MachineState};
use crate::network::{self, pair, NetworkParams, NetworkState, Topology};

/// A machine and the (user-numbered) bus it is connected to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineAttachment {
    pub bus: usize,
    pub params: MachineParams,
}

/// Index ranges of the flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_g: usize,
    pub n_v: usize,
    pub n_t: usize,
}

impl StateLayout {
    pub fn n_x(&self) -> usize {
        7 * self.n_g + 2 * self.n_v + 2 * self.n_t
    }
    pub fn theta(&self) -> Range<usize> {
        0..self.n_g
    }
    pub fn omega(&self) -> Range<usize> {
        self.n_g..2 * self.n_g
    }
    pub fn currents(&self) -> Range<usize> {
        2 * self.n_g..7 * self.n_g
    }
    pub fn machine_currents(&self, k: usize) -> Range<usize> {
        2 * self.n_g + 5 * k..2 * self.n_g + 5 * k + 5
    }
    pub fn voltages(&self) -> Range<usize> {
        7 * self.n_g..7 * self.n_g + 2 * self.n_v
    }
    pub fn line_currents(&self) -> Range<usize> {
        let s = 7 * self.n_g + 2 * self.n_v;
        s..s + 2 * self.n_t
    }
}

/// Structured view of the flat state `(θ, ω, i, v, i_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    /// Five currents per machine `(i_α, i_β, i_f, i_d, i_q)`.
    pub i: Vec<f64>,
    pub v: Vec<f64>,
    pub i_t: Vec<f64>,
}

impl StateVector {
    pub fn zeros(layout: &StateLayout) -> Self {
        StateVector {
            theta: vec![0.0; layout.n_g],
            omega: vec![0.0; layout.n_g],
            i: vec![0.0; 5 * layout.n_g],
            v: vec![0.0; 2 * layout.n_v],
            i_t: vec![0.0; 2 * layout.n_t],
        }
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            n_g: self.theta.len(),
            n_v: self.v.len() / 2,
            n_t: self.i_t.len() / 2,
        }
    }

    pub fn pack(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.layout().n_x(),
            self.theta
                .iter()
                .chain(&self.omega)
                .chain(&self.i)
                .chain(&self.v)
                .chain(&self.i_t)
                .copied(),
        )
    }

    pub fn unpack(layout: &StateLayout, x: &DVector<f64>) -> Result<Self> {
        check_state(layout, x)?;
        let take = |r: Range<usize>| x.as_slice()[r].to_vec();
        Ok(StateVector {
            theta: take(layout.theta()),
            omega: take(layout.omega()),
            i: take(layout.currents()),
            v: take(layout.voltages()),
            i_t: take(layout.line_currents()),
        })
    }
}

/// Mechanical torques and field voltages, one each per machine.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector {
    pub tau_m: Vec<f64>,
    pub v_f: Vec<f64>,
}

impl InputVector {
    pub fn zeros(n_g: usize) -> Self {
        InputVector {
            tau_m: vec![0.0; n_g],
            v_f: vec![0.0; n_g],
        }
    }

    pub fn amax(&self) -> f64 {
        self.tau_m
            .iter()
            .chain(&self.v_f)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    machines: Vec<MachineParams>,
    topology: Topology,
    network: NetworkParams,
    loads: Vec<LoadModel>,
    /// `bus_order[internal] = user bus index`.
    bus_order: Vec<usize>,
}

/// Validates every component and reorders buses so that machine `k` sits on
/// internal bus `k`. All violations are collected into one report.
pub fn assemble(
    machines: &[MachineAttachment],
    topology: &Topology,
    network: &NetworkParams,
    loads: &[LoadModel],
) -> Result<PowerSystem> {
    let n_v = topology.n_v();
    let mut problems = Vec::new();
    if machines.is_empty() {
        problems.push("at least one machine is required".to_string());
    }
    let mut owner = vec![None; n_v];
    for (k, m) in machines.iter().enumerate() {
        if m.bus >= n_v {
            problems.push(format!("machine {k} attached to nonexistent bus {}", m.bus));
            continue;
        }
        if let Some(other) = owner[m.bus] {
            problems.push(format!(
                "machines {other} and {k} share bus {}; one machine per generator bus",
                m.bus
            ));
        }
        owner[m.bus] = Some(k);
        if let Err(v) = machine::validate_params(&m.params) {
            problems.push(format!("machine {k}: {v}"));
        }
    }
    if let Err(e) = network.validate(topology) {
        problems.push(e.to_string());
    }
    if loads.len() != n_v {
        problems.push(format!("expected {n_v} load entries, got {}", loads.len()));
    } else {
        for (k, l) in loads.iter().enumerate() {
            if let Err(e) = l.validate() {
                problems.push(format!("bus {k}: {e}"));
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let mut bus_order: Vec<usize> = machines.iter().map(|m| m.bus).collect();
    bus_order.extend((0..n_v).filter(|b| owner[*b].is_none()));
    let mut new_of_old = vec![0; n_v];
    for (new, &old) in bus_order.iter().enumerate() {
        new_of_old[old] = new;
    }
    Ok(PowerSystem {
        machines: machines.iter().map(|m| m.params).collect(),
        topology: topology.relabel(&new_of_old)?,
        network: network.relabel(&new_of_old),
        loads: bus_order.iter().map(|&old| loads[old]).collect(),
        bus_order,
    })
}

impl PowerSystem {
    pub fn n_g(&self) -> usize {
        self.machines.len()
    }
    pub fn n_v(&self) -> usize {
        self.topology.n_v()
    }
    pub fn n_l(&self) -> usize {
        self.n_v() - self.n_g()
    }
    pub fn n_t(&self) -> usize {
        self.topology.n_t()
    }
    pub fn layout(&self) -> StateLayout {
        StateLayout {
            n_g: self.n_g(),
            n_v: self.n_v(),
            n_t: self.n_t(),
        }
    }
    pub fn n_x(&self) -> usize {
        self.layout().n_x()
    }
    pub fn machines(&self) -> &[MachineParams] {
        &self.machines
    }
    pub fn topology(&self) -> &Topology {
        &self.topology
    }
    pub fn network(&self) -> &NetworkParams {
        &self.network
    }
    /// Loads in internal bus order.
    pub fn loads(&self) -> &[LoadModel] {
        &self.loads
    }
    /// `bus_order()[internal]` is the caller's bus index.
    pub fn bus_order(&self) -> &[usize] {
        &self.bus_order
    }
    pub fn internal_bus(&self, user_bus: usize) -> Option<usize> {
        self.bus_order.iter().position(|&b| b == user_bus)
    }

    /// Rewrites the bus index of a load-domain error from internal to user
    /// numbering.
    pub fn user_bus_error(&self, e: Error) -> Error {
        match e {
            Error::LoadDomain { bus: Some(k), norm, v_min } if k < self.bus_order.len() => Error::LoadDomain {
                bus: Some(self.bus_order[k]),
                norm,
                v_min,
            },
            other => other,
        }
    }

    /// Copy of the system with the load at internal bus `k` replaced.
    pub fn with_load(&self, k: usize, model: LoadModel) -> Self {
        let mut s = self.clone();
        s.loads[k] = model;
        s
    }
}

fn check_state(layout: &StateLayout, x: &DVector<f64>) -> Result<()> {
    if x.len() != layout.n_x() {
        return Err(Error::Dimension {
            context: "state vector",
            expected: layout.n_x(),
            actual: x.len(),
        });
    }
    Ok(())
}

fn check_input(n_g: usize, u: &InputVector) -> Result<()> {
    for (what, len) in [("tau_m", u.tau_m.len()), ("v_f", u.v_f.len())] {
        if len != n_g {
            return Err(Error::Dimension {
                context: if what == "tau_m" { "mechanical torques" } else { "field voltages" },
                expected: n_g,
                actual: len,
            });
        }
    }
    Ok(())
}

/// Tolerance gauge `max(1, ‖x‖_∞, ‖u‖_∞)`.
pub fn scale(x: &DVector<f64>, u: &InputVector) -> f64 {
    1.0_f64.max(x.amax()).max(u.amax())
}

fn machine_currents(x: &DVector<f64>, layout: &StateLayout, k: usize) -> Vector5<f64> {
    Vector5::from_column_slice(&x.as_slice()[layout.machine_currents(k)])
}

fn stator_currents(x: &DVector<f64>, layout: &StateLayout) -> DVector<f64> {
    let mut i_s = DVector::zeros(2 * layout.n_g);
    for k in 0..layout.n_g {
        let r = layout.machine_currents(k);
        i_s[2 * k] = x[r.start];
        i_s[2 * k + 1] = x[r.start + 1];
    }
    i_s
}

fn load_currents(sys: &PowerSystem, v: &DVector<f64>) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(v.len());
    for (k, m) in sys.loads.iter().enumerate() {
        let il = crate::loads::load_current(m, &pair(v, k)).map_err(|e| e.at_bus(k))?;
        out[2 * k] = il.x;
        out[2 * k + 1] = il.y;
    }
    Ok(out)
}

/// Full model vector field `ẋ = f(x, u)`, evaluated block by block.
pub fn vector_field(sys: &PowerSystem, x: &DVector<f64>, u: &InputVector) -> Result<DVector<f64>> {
    let layout = sys.layout();
    check_state(&layout, x)?;
    check_input(sys.n_g(), u)?;
    let v = x.rows_range(layout.voltages()).into_owned();
    let i_t = x.rows_range(layout.line_currents()).into_owned();
    let mut dx = DVector::zeros(layout.n_x());

    for (k, p) in sys.machines.iter().enumerate() {
        let i = machine_currents(x, &layout, k);
        let s = MachineState {
            theta: Angle::new(x[k])?,
            omega: x[layout.n_g + k],
            i_s: PlanarVec::new(i[0], i[1]),
            i_f: i[2],
            i_d: i[3],
            i_q: i[4],
        };
        let d = machine::machine_rhs(p, &s, &pair(&v, k), u.tau_m[k], u.v_f[k])?;
        dx[k] = d[0];
        dx[layout.n_g + k] = d[1];
        dx.rows_range_mut(layout.machine_currents(k))
            .copy_from(&d.fixed_rows::<5>(2));
    }

    let mut i_in = load_currents(sys, &v)?;
    {
        let mut head = i_in.rows_mut(0, 2 * layout.n_g);
        head += stator_currents(x, &layout);
    }
    let (dv, di) = network::network_rhs(&sys.network, &sys.topology, &NetworkState { v, i_t }, &i_in)?;
    dx.rows_range_mut(layout.voltages()).copy_from(&dv);
    dx.rows_range_mut(layout.line_currents()).copy_from(&di);
    Ok(dx)
}

/// Synchronous steady-state field `f_d(x, ω₀) = (1ω₀, 0, ω₀𝓙_g i, ω₀J_v v, ω₀J_T i_T)`.
pub fn steady_field(sys: &PowerSystem, x: &DVector<f64>, omega0: f64) -> Result<DVector<f64>> {
    let layout = sys.layout();
    check_state(&layout, x)?;
    let mut f = DVector::zeros(layout.n_x());
    for k in 0..layout.n_g {
        f[k] = omega0;
        let r = layout.machine_currents(k);
        f[r.start] = -omega0 * x[r.start + 1];
        f[r.start + 1] = omega0 * x[r.start];
    }
    let s = layout.voltages().start;
    for k in 0..(layout.n_v + layout.n_t) {
        f[s + 2 * k] = -omega0 * x[s + 2 * k + 1];
        f[s + 2 * k + 1] = omega0 * x[s + 2 * k];
    }
    Ok(f)
}

/// Residual `ρ = ℳ(x)(f_d − f)` in expanded block form:
///
/// ```text
/// [ 1ω₀ − ω
///   Dω + τ_e − τ_m
///   (R + ω₀L(θ)𝓙_g) i − 𝓘_vᵀv − 𝓘_f v_f + v_ind
///   ω₀CJ_v v + 𝓘_v i + ℰi_T + i_l
///   (R_T + ω₀L_TJ_T) i_T − ℰᵀv ]
/// ```
pub fn residual(sys: &PowerSystem, x: &DVector<f64>, u: &InputVector, omega0: f64) -> Result<DVector<f64>> {
    let layout = sys.layout();
    check_state(&layout, x)?;
    check_input(sys.n_g(), u)?;
    let v = x.rows_range(layout.voltages()).into_owned();
    let i_t = x.rows_range(layout.line_currents()).into_owned();
    let mut rho = DVector::zeros(layout.n_x());
    let jm = crate::frame::machine_j();

    for (k, p) in sys.machines.iter().enumerate() {
        let theta = x[k];
        let omega = x[layout.n_g + k];
        let i = machine_currents(x, &layout, k);
        rho[k] = omega0 - omega;
        rho[layout.n_g + k] = p.damping * omega + machine::electrical_torque(p, theta, &i) - u.tau_m[k];
        let l = machine::inductance_matrix(p, theta);
        let vk = pair(&v, k);
        let mut e = p.resistance().component_mul(&i) + l * jm * i * omega0
            + machine::induced_voltage(p, theta, omega, &i);
        e[0] -= vk.x;
        e[1] -= vk.y;
        e[2] -= u.v_f[k];
        rho.rows_range_mut(layout.machine_currents(k)).copy_from(&e);
    }

    // the bus and line blocks coincide with the steady-state network equations
    let i_s = stator_currents(x, &layout);
    let net = network::network_residual(&sys.network, &sys.topology, &sys.loads, &i_s, &v, &i_t, omega0)?;
    let s = layout.voltages().start;
    rho.rows_mut(s, net.len()).copy_from(&net);
    Ok(rho)
}

/// Infinity norms of the five residual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualBlocks {
    pub frequency: f64,
    pub torque: f64,
    pub windings: f64,
    pub buses: f64,
    pub lines: f64,
}

impl ResidualBlocks {
    pub fn from_residual(layout: &StateLayout, rho: &DVector<f64>) -> Self {
        let amax = |r: Range<usize>| rho.rows_range(r).amax();
        ResidualBlocks {
            frequency: amax(layout.theta()),
            torque: amax(layout.omega()),
            windings: amax(layout.currents()),
            buses: amax(layout.voltages()),
            lines: amax(layout.line_currents()),
        }
    }

    pub fn max(&self) -> f64 {
        [self.frequency, self.torque, self.windings, self.buses, self.lines]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Forward-difference derivative of `ρ` along the steady-state field with
/// constant inputs: `‖(ρ(x + h f_d) − ρ(x)) / h‖_∞`.
pub fn invariance_defect(sys: &PowerSystem, x: &DVector<f64>, u: &InputVector, omega0: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
    }
    let r0 = residual(sys, x, u, omega0)?;
    let xp = x + steady_field(sys, x, omega0)? * h;
    let r1 = residual(sys, &xp, u, omega0)?;
    Ok(((r1 - r0) / h).amax())
}

/// Second-order one-sided version of [`invariance_defect`],
/// `‖(4ρ(x + ½h f_d) − ρ(x + h f_d) − 3ρ(x)) / h‖_∞`.
///
/// The straight line `x + s f_d` leaves the circular orbit of the
/// steady-state flow at second order, so the first-order probe carries a
/// truncation term `½h‖∂ρ/∂x · ω₀²J²x‖` even where the derivative along the
/// flow is exactly zero. Richardson extrapolation removes it.
pub fn invariance_defect_extrapolated(
    sys: &PowerSystem,
    x: &DVector<f64>,
    u: &InputVector,
    omega0: f64,
    h: f64,
) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
    }
    let fd = steady_field(sys, x, omega0)?;
    let r0 = residual(sys, x, u, omega0)?;
    let r_half = residual(sys, &(x + &fd * (0.5 * h)), u, omega0)?;
    let r_full = residual(sys, &(x + &fd * h), u, omega0)?;
    Ok(((r_half * 4.0 - r_full - r0 * 3.0) / h).amax())
}

/// `ℳ(x) = diag(I, M, L(θ), C, L_T)` as a dense matrix.
pub fn mass_matrix(sys: &PowerSystem, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let layout = sys.layout();
    check_state(&layout, x)?;
    let mut m = DMatrix::zeros(layout.n_x(), layout.n_x());
    for (k, p) in sys.machines.iter().enumerate() {
        m[(k, k)] = 1.0;
        m[(layout.n_g + k, layout.n_g + k)] = p.inertia;
        let r = layout.machine_currents(k).start;
        m.fixed_view_mut::<5, 5>(r, r)
            .copy_from(&machine::inductance_matrix(p, x[k]));
    }
    let s = layout.voltages().start;
    for (k, c) in sys.network.c.iter().enumerate() {
        m[(s + 2 * k, s + 2 * k)] = *c;
        m[(s + 2 * k + 1, s + 2 * k + 1)] = *c;
    }
    let s = layout.line_currents().start;
    for (k, l) in sys.network.l_t.iter().enumerate() {
        m[(s + 2 * k, s + 2 * k)] = *l;
        m[(s + 2 * k + 1, s + 2 * k + 1)] = *l;
    }
    Ok(m)
}

/// `𝓘_f = I_{n_g} ⊗ (0, 0, 1, 0, 0)` (5n_g × n_g).
pub fn field_indicator(n_g: usize) -> DMatrix<f64> {
    DMatrix::from_fn(5 * n_g, n_g, |r, c| if r == 5 * c + 2 { 1.0 } else { 0.0 })
}

/// `𝓘_s = I_{n_g} ⊗ (I₂; 0₃ₓ₂)` (5n_g × 2n_g).
pub fn stator_indicator(n_g: usize) -> DMatrix<f64> {
    DMatrix::from_fn(5 * n_g, 2 * n_g, |r, c| {
        if r / 5 == c / 2 && r % 5 == c % 2 {
            1.0
        } else {
            0.0
        }
    })
}

/// `𝓘_v` (2n_v × 5n_g), defined through `𝓘_vᵀ = [𝓘_s 0]`.
pub fn voltage_indicator(n_g: usize, n_v: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(5 * n_g, 2 * n_v);
    t.view_mut((0, 0), (5 * n_g, 2 * n_g))
        .copy_from(&stator_indicator(n_g));
    t.transpose()
}

/// The bracketed right-hand side of `ℳ(x) ẋ = [...]`, assembled with the
/// dense interconnection matrices.
pub fn interconnection_rhs(sys: &PowerSystem, x: &DVector<f64>, u: &InputVector) -> Result<DVector<f64>> {
    let layout = sys.layout();
    check_state(&layout, x)?;
    check_input(sys.n_g(), u)?;
    let (n_g, n_v) = (layout.n_g, layout.n_v);
    let i = x.rows_range(layout.currents()).into_owned();
    let v = x.rows_range(layout.voltages()).into_owned();
    let i_t = x.rows_range(layout.line_currents()).into_owned();
    let e = network::incidence_expand(&sys.topology);
    let iv = voltage_indicator(n_g, n_v);
    let i_f = field_indicator(n_g);

    let mut r_diag = DVector::zeros(5 * n_g);
    let mut tau_e = DVector::zeros(n_g);
    let mut v_ind = DVector::zeros(5 * n_g);
    for (k, p) in sys.machines.iter().enumerate() {
        let ik = machine_currents(x, &layout, k);
        r_diag.rows_mut(5 * k, 5).copy_from(&p.resistance());
        tau_e[k] = machine::electrical_torque(p, x[k], &ik);
        v_ind
            .rows_mut(5 * k, 5)
            .copy_from(&machine::induced_voltage(p, x[k], x[n_g + k], &ik));
    }
    let omega = x.rows_range(layout.omega()).into_owned();
    let d = DVector::from_iterator(n_g, sys.machines.iter().map(|p| p.damping));
    let tau_m = DVector::from_column_slice(&u.tau_m);
    let v_f = DVector::from_column_slice(&u.v_f);
    let r_t = DVector::from_iterator(2 * layout.n_t, sys.network.r_t.iter().flat_map(|r| [*r, *r]));

    let mut out = DVector::zeros(layout.n_x());
    out.rows_range_mut(layout.theta()).copy_from(&omega);
    out.rows_range_mut(layout.omega())
        .copy_from(&(-d.component_mul(&omega) - tau_e + tau_m));
    out.rows_range_mut(layout.currents())
        .copy_from(&(-r_diag.component_mul(&i) + iv.transpose() * &v + i_f * v_f - v_ind));
    out.rows_range_mut(layout.voltages())
        .copy_from(&(-(&iv * &i) - &e * &i_t - load_currents(sys, &v)?));
    out.rows_range_mut(layout.line_currents())
        .copy_from(&(-r_t.component_mul(&i_t) + e.transpose() * v));
    Ok(out)
}

/// Total stored energy `Σ(½iᵀL(θ)i + ½mω²) + ½vᵀCv + ½i_TᵀL_Ti_T`.
pub fn stored_energy(sys: &PowerSystem, x: &DVector<f64>) -> Result<f64> {
    let layout = sys.layout();
    check_state(&layout, x)?;
    let mut e = 0.0;
    for (k, p) in sys.machines.iter().enumerate() {
        e += machine::stored_energy(p, x[k], x[layout.n_g + k], &machine_currents(x, &layout, k));
    }
    let s = layout.voltages().start;
    for (k, c) in sys.network.c.iter().enumerate() {
        e += 0.5 * c * (x[s + 2 * k].powi(2) + x[s + 2 * k + 1].powi(2));
    }
    let s = layout.line_currents().start;
    for (k, l) in sys.network.l_t.iter().enumerate() {
        e += 0.5 * l * (x[s + 2 * k].powi(2) + x[s + 2 * k + 1].powi(2));
    }
    Ok(e)
}

/// Planar pair `k` of the bus-voltage block of `x`.
pub fn bus_voltage(layout: &StateLayout, x: &DVector<f64>, k: usize) -> PlanarVec {
    let s = layout.voltages().start;
    PlanarVec::new(x[s + 2 * k], x[s + 2 * k + 1])
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::machine::test_support::{round, salient};

    fn one_machine(load: LoadModel) -> Result<PowerSystem> {
        let topo = Topology::new(2, vec![(0, 1)]).unwrap();
        let net = NetworkParams {
            c: vec![1e-5, 1e-5],
            l_t: vec![1e-3],
            r_t: vec![0.1],
        };
        assemble(
            &[MachineAttachment { bus: 0, params: round() }],
            &topo,
            &net,
            &[LoadModel::None, load],
        )
    }

    #[test]
    fn state_dimension_counts() {
        let sys = one_machine(LoadModel::Impedance { g: 1.0, b: 0.0 }).unwrap();
        assert_eq!(sys.n_x(), 13);
        assert_eq!(two_machine_system().n_x(), 26);
    }

    #[test]
    fn assembly_rejects_bad_attachment() {
        let topo = Topology::new(2, vec![(0, 1)]).unwrap();
        let net = NetworkParams {
            c: vec![1e-5, 1e-5],
            l_t: vec![1e-3],
            r_t: vec![0.1],
        };
        let err = assemble(
            &[
                MachineAttachment { bus: 5, params: round() },
                MachineAttachment { bus: 1, params: MachineParams { inertia: -1.0, ..round() } },
            ],
            &topo,
            &net,
            &[LoadModel::None; 2],
        )
        .unwrap_err();
        match err {
            Error::Validation(list) => {
                assert_eq!(list.len(), 2);
                assert!(list[0].contains("nonexistent bus 5"));
                assert!(list[1].contains("inertia"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn assembly_puts_generator_buses_first() {
        let sys = two_machine_system();
        assert_eq!(sys.bus_order(), &[2, 0, 1]);
        assert_eq!(sys.internal_bus(1), Some(2));
        assert_eq!(sys.machines()[0], salient());
        assert_eq!(sys.loads()[2], LoadModel::Impedance { g: 0.5, b: -0.1 });
        assert_eq!(sys.network().c, vec![1.5e-5, 1e-5, 2e-5]);
        // user line (0,1) becomes internal (1,2)
        assert_eq!(sys.topology().lines()[0], (1, 2));
    }

    #[test]
    fn layout_round_trip() {
        let sys = two_machine_system();
        let x = sample_state(&sys, 7);
        let s = StateVector::unpack(&sys.layout(), &x).unwrap();
        assert_eq!(s.pack(), x);
        assert_eq!(s.layout(), sys.layout());
        assert!(StateVector::unpack(&sys.layout(), &DVector::zeros(3)).is_err());
    }

    #[test]
    fn origin_is_an_equilibrium() {
        let sys = two_machine_system();
        let f = vector_field(&sys, &DVector::zeros(sys.n_x()), &InputVector::zeros(2)).unwrap();
        assert_eq!(f.amax(), 0.0);
    }

    #[test]
    fn block_field_matches_monolithic_evaluation() {
        let sys = two_machine_system();
        for seed in 0..10 {
            let x = sample_state(&sys, seed);
            let u = InputVector { tau_m: vec![12.0, -3.0], v_f: vec![4.0, 2.5] };
            let f = vector_field(&sys, &x, &u).unwrap();
            let m = mass_matrix(&sys, &x).unwrap();
            let b = interconnection_rhs(&sys, &x, &u).unwrap();
            let mono = m.lu().solve(&b).unwrap();
            assert!((&f - &mono).amax() <= 1e-12 * mono.amax());
        }
    }

    #[test]
    fn residual_is_mass_times_field_difference() {
        let sys = two_machine_system();
        for seed in 0..20 {
            let x = sample_state(&sys, 100 + seed);
            let u = InputVector { tau_m: vec![5.0, 7.0], v_f: vec![-1.0, 3.0] };
            let w0 = 314.159;
            let rho = residual(&sys, &x, &u, w0).unwrap();
            let m = mass_matrix(&sys, &x).unwrap();
            let fd = steady_field(&sys, &x, w0).unwrap();
            let f = vector_field(&sys, &x, &u).unwrap();
            let other = m * (fd - f);
            assert!((&rho - &other).amax() <= 1e-10 * other.amax().max(1.0));
        }
    }

    #[test]
    fn steady_field_examples() {
        let sys = one_machine(LoadModel::None).unwrap();
        let layout = sys.layout();
        let mut x = DVector::zeros(sys.n_x());
        let f = steady_field(&sys, &x, 0.0).unwrap();
        assert_eq!(f.amax(), 0.0);
        let r = layout.machine_currents(0);
        x[r.start + 2] = 1.0;
        let f = steady_field(&sys, &x, 314.0).unwrap();
        assert_eq!(f.rows_range(r.clone()).amax(), 0.0);
        assert_eq!(f[0], 314.0);
        let s = layout.voltages().start;
        x[s] = 1.0;
        let f = steady_field(&sys, &x, 1.0).unwrap();
        assert_eq!((f[s], f[s + 1]), (0.0, 1.0));
    }

    #[test]
    fn frequency_block_of_residual() {
        let sys = two_machine_system();
        let x = sample_state(&sys, 3);
        let u = InputVector::zeros(2);
        let rho = residual(&sys, &x, &u, 314.0).unwrap();
        for k in 0..2 {
            assert_eq!(rho[k], 314.0 - x[2 + k]);
        }
    }

    #[test]
    fn interconnection_identities() {
        let (n_g, n_v) = (2, 3);
        let iv_t = voltage_indicator(n_g, n_v).transpose();
        let jv = crate::frame::block_rotation_generator(n_v).unwrap();
        let jg = crate::frame::machine_rotation_generator(n_g).unwrap();
        assert_eq!((&iv_t * jv - &jg * &iv_t).amax(), 0.0);
        assert_eq!((jg * field_indicator(n_g)).amax(), 0.0);
        let is = stator_indicator(n_g);
        assert_eq!(is.sum(), 4.0);
        assert_eq!(is[(6, 3)], 1.0);
    }

    #[test]
    fn energy_of_zero_state() {
        let sys = two_machine_system();
        assert_eq!(stored_energy(&sys, &DVector::zeros(sys.n_x())).unwrap(), 0.0);
        let x = sample_state(&sys, 1);
        assert!(stored_energy(&sys, &x).unwrap() > 0.0);
    }

    #[test]
    fn load_domain_errors_name_the_bus() {
        let sys = one_machine(LoadModel::Power { p: 1.0, q: 0.0, v_min: 1.0 }).unwrap();
        let err = vector_field(&sys, &DVector::zeros(sys.n_x()), &InputVector::zeros(1)).unwrap_err();
        assert!(matches!(err, Error::LoadDomain { bus: Some(1), .. }));
    }
}
