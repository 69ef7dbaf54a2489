//! Transmission network: bus capacitances, Π-model lines and the nodal
//! admittance matrix at a fixed synchronous frequency.
//!
//! Line `k` runs from bus `from` to bus `to`; its current is positive in that
//! direction, so the oriented incidence matrix carries `+1` at `from` and `−1`
//! at `to`.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::frame::PlanarVec;
use crate::loads::LoadModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n_v: usize,
    lines: Vec<(usize, usize)>,
}

impl Topology {
    /// Builds a topology from `(from, to)` bus pairs (0-based). The graph
    /// must be connected and free of self-loops.
    pub fn new(n_v: usize, lines: Vec<(usize, usize)>) -> Result<Self> {
        if n_v == 0 {
            return Err(Error::Topology("network needs at least one bus".into()));
        }
        for (k, &(a, b)) in lines.iter().enumerate() {
            if a >= n_v || b >= n_v {
                return Err(Error::Topology(format!(
                    "line {k} references bus outside 0..{n_v}"
                )));
            }
            if a == b {
                return Err(Error::Topology(format!("line {k} is a self-loop at bus {a}")));
            }
        }
        let t = Topology { n_v, lines };
        if !t.is_connected() {
            return Err(Error::Topology("network graph is not connected".into()));
        }
        Ok(t)
    }

    /// Builds a topology from an oriented incidence matrix `E` (`n_v × n_t`).
    pub fn from_incidence(e: &DMatrix<f64>) -> Result<Self> {
        let mut lines = Vec::with_capacity(e.ncols());
        for (k, col) in e.column_iter().enumerate() {
            let mut from = None;
            let mut to = None;
            for (r, &x) in col.iter().enumerate() {
                match x {
                    x if x == 1.0 && from.is_none() => from = Some(r),
                    x if x == -1.0 && to.is_none() => to = Some(r),
                    0.0 => {}
                    _ => {
                        return Err(Error::Topology(format!(
                            "incidence column {k} is not a single +1/-1 pair"
                        )))
                    }
                }
            }
            match (from, to) {
                (Some(a), Some(b)) => lines.push((a, b)),
                _ => {
                    return Err(Error::Topology(format!(
                        "incidence column {k} is not a single +1/-1 pair"
                    )))
                }
            }
        }
        Topology::new(e.nrows(), lines)
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_t(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self) -> &[(usize, usize)] {
        &self.lines
    }

    /// The oriented incidence matrix `E`.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.n_v, self.n_t());
        for (k, &(a, b)) in self.lines.iter().enumerate() {
            e[(a, k)] = 1.0;
            e[(b, k)] = -1.0;
        }
        e
    }

    /// Relabels buses: bus `old` becomes `new_of_old[old]`.
    pub fn relabel(&self, new_of_old: &[usize]) -> Result<Self> {
        Topology::new(
            self.n_v,
            self.lines
                .iter()
                .map(|&(a, b)| (new_of_old[a], new_of_old[b]))
                .collect(),
        )
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n_v];
        for &(a, b) in &self.lines {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n_v];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            for &n in &adj[k] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Per-bus capacitances and per-line series inductance/resistance.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub c: Vec<f64>,
    pub l_t: Vec<f64>,
    pub r_t: Vec<f64>,
}

impl NetworkParams {
    pub fn validate(&self, t: &Topology) -> Result<()> {
        if self.c.len() != t.n_v() {
            return Err(dim("bus capacitances", t.n_v(), self.c.len()));
        }
        if self.l_t.len() != t.n_t() {
            return Err(dim("line inductances", t.n_t(), self.l_t.len()));
        }
        if self.r_t.len() != t.n_t() {
            return Err(dim("line resistances", t.n_t(), self.r_t.len()));
        }
        let named = [("c", &self.c), ("l_t", &self.l_t), ("r_t", &self.r_t)];
        for (name, values) in named {
            if let Some((k, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v > 0.0))
            {
                return Err(Error::InvalidArgument(format!(
                    "{name}[{k}] = {v} must be finite and > 0"
                )));
            }
        }
        Ok(())
    }

    /// Relabels bus capacitances with the same convention as [`Topology::relabel`].
    pub fn relabel(&self, new_of_old: &[usize]) -> Self {
        let mut c = vec![0.0; self.c.len()];
        for (old, &new) in new_of_old.iter().enumerate() {
            c[new] = self.c[old];
        }
        NetworkParams {
            c,
            ..self.clone()
        }
    }
}

/// Bus voltages (2n_v) and line currents (2n_t).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub v: DVector<f64>,
    pub i_t: DVector<f64>,
}

fn dim(context: &'static str, expected: usize, actual: usize) -> Error {
    Error::Dimension {
        context,
        expected,
        actual,
    }
}

pub(crate) fn pair(x: &DVector<f64>, k: usize) -> PlanarVec {
    PlanarVec::new(x[2 * k], x[2 * k + 1])
}

/// `ℰ = E ⊗ I₂`.
pub fn incidence_expand(t: &Topology) -> DMatrix<f64> {
    t.incidence().kronecker(&DMatrix::identity(2, 2))
}

/// `ℰ i_T` without forming `ℰ`.
pub(crate) fn incidence_apply(t: &Topology, i_t: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(2 * t.n_v());
    for (k, &(a, b)) in t.lines().iter().enumerate() {
        for c in 0..2 {
            out[2 * a + c] += i_t[2 * k + c];
            out[2 * b + c] -= i_t[2 * k + c];
        }
    }
    out
}

/// `ℰᵀ v`: the voltage across each line.
pub(crate) fn incidence_transpose_apply(t: &Topology, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(2 * t.n_t());
    for (k, &(a, b)) in t.lines().iter().enumerate() {
        for c in 0..2 {
            out[2 * k + c] = v[2 * a + c] - v[2 * b + c];
        }
    }
    out
}

/// Bus and line dynamics: `C v̇ = −ℰ i_T − i_in`, `L_T i̇_T = −R_T i_T + ℰᵀ v`.
pub fn network_rhs(
    p: &NetworkParams,
    t: &Topology,
    s: &NetworkState,
    i_in: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("bus voltages", 2 * t.n_v(), s.v.len())?;
    check_len("line currents", 2 * t.n_t(), s.i_t.len())?;
    check_len("bus injections", 2 * t.n_v(), i_in.len())?;
    let mut dv = -incidence_apply(t, &s.i_t) - i_in;
    for k in 0..t.n_v() {
        dv[2 * k] /= p.c[k];
        dv[2 * k + 1] /= p.c[k];
    }
    let mut di = incidence_transpose_apply(t, &s.v);
    for k in 0..t.n_t() {
        for c in 0..2 {
            di[2 * k + c] = (di[2 * k + c] - p.r_t[k] * s.i_t[2 * k + c]) / p.l_t[k];
        }
    }
    Ok((dv, di))
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(dim(context, expected, actual))
    }
}

/// 2×2 block `r I₂ + ω₀ l j` of one line.
pub fn line_impedance(r: f64, l: f64, omega0: f64) -> Matrix2<f64> {
    Matrix2::new(r, -omega0 * l, omega0 * l, r)
}

/// Inverse of [`line_impedance`]: `(r I₂ − ω₀ l j) / (r² + ω₀² l²)`.
pub fn line_admittance(r: f64, l: f64, omega0: f64) -> Matrix2<f64> {
    let x = omega0 * l;
    Matrix2::new(r, x, -x, r) / (r * r + x * x)
}

/// Branch impedance matrix `Z_T = R_T + ω₀ J_T L_T` (block diagonal).
pub fn branch_impedance(p: &NetworkParams, omega0: f64) -> DMatrix<f64> {
    let n_t = p.r_t.len();
    let mut z = DMatrix::zeros(2 * n_t, 2 * n_t);
    for k in 0..n_t {
        z.fixed_view_mut::<2, 2>(2 * k, 2 * k)
            .copy_from(&line_impedance(p.r_t[k], p.l_t[k], omega0));
    }
    z
}

/// `Z_T⁻¹ ℰᵀ v`: steady-state line currents for given bus voltages.
pub fn steady_line_currents(p: &NetworkParams, t: &Topology, v: &DVector<f64>, omega0: f64) -> DVector<f64> {
    let dv = incidence_transpose_apply(t, v);
    let mut out = DVector::zeros(2 * t.n_t());
    for k in 0..t.n_t() {
        let y = line_admittance(p.r_t[k], p.l_t[k], omega0) * pair(&dv, k);
        out[2 * k] = y.x;
        out[2 * k + 1] = y.y;
    }
    out
}

/// Load admittance blocks `Y_l(v)` stacked block-diagonally.
fn add_load_blocks(y: &mut DMatrix<f64>, loads: &[LoadModel], v: &DVector<f64>) -> Result<()> {
    for (k, m) in loads.iter().enumerate() {
        let block = m.admittance_block(&pair(v, k)).map_err(|e| e.at_bus(k))?;
        let mut view = y.fixed_view_mut::<2, 2>(2 * k, 2 * k);
        view += block;
    }
    Ok(())
}

/// Network admittance `Y_N(v) = Y_l(v) + ω₀ J_v C + ℰ Z_T⁻¹ ℰᵀ`.
pub fn admittance(
    p: &NetworkParams,
    t: &Topology,
    loads: &[LoadModel],
    v: &DVector<f64>,
    omega0: f64,
) -> Result<DMatrix<f64>> {
    check_len("bus voltages", 2 * t.n_v(), v.len())?;
    check_len("loads", t.n_v(), loads.len())?;
    let mut y = DMatrix::zeros(2 * t.n_v(), 2 * t.n_v());
    add_load_blocks(&mut y, loads, v)?;
    for k in 0..t.n_v() {
        let x = omega0 * p.c[k];
        y[(2 * k, 2 * k + 1)] -= x;
        y[(2 * k + 1, 2 * k)] += x;
    }
    for (k, &(a, b)) in t.lines().iter().enumerate() {
        let ya = line_admittance(p.r_t[k], p.l_t[k], omega0);
        for (r, c, sign) in [(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)] {
            let mut view = y.fixed_view_mut::<2, 2>(2 * r, 2 * c);
            view += ya * sign;
        }
    }
    Ok(y)
}

/// Shunt current `(Y_l(v) + ω₀ J_v C) v` drawn at every bus.
fn shunt_current(
    p: &NetworkParams,
    loads: &[LoadModel],
    v: &DVector<f64>,
    omega0: f64,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(v.len());
    for (k, m) in loads.iter().enumerate() {
        let vk = pair(v, k);
        let il = m.admittance_block(&vk).map_err(|e| e.at_bus(k))? * vk;
        let x = omega0 * p.c[k];
        out[2 * k] = il.x - x * vk.y;
        out[2 * k + 1] = il.y + x * vk.x;
    }
    Ok(out)
}

fn check_injection(t: &Topology, i_s: &DVector<f64>) -> Result<()> {
    if !i_s.len().is_multiple_of(2) || i_s.len() > 2 * t.n_v() {
        return Err(dim("generator currents", 2 * t.n_v(), i_s.len()));
    }
    Ok(())
}

/// Steady-state network equations: Kirchhoff's current law at every bus
/// followed by the voltage law across every line,
/// `((Y_l(v) + ω₀J_vC) v + (i_s, 0) + ℰ i_T ; Z_T i_T − ℰᵀ v)`.
#[allow(clippy::too_many_arguments)]
pub fn network_residual(
    p: &NetworkParams,
    t: &Topology,
    loads: &[LoadModel],
    i_s: &DVector<f64>,
    v: &DVector<f64>,
    i_t: &DVector<f64>,
    omega0: f64,
) -> Result<DVector<f64>> {
    check_len("bus voltages", 2 * t.n_v(), v.len())?;
    check_len("line currents", 2 * t.n_t(), i_t.len())?;
    check_len("loads", t.n_v(), loads.len())?;
    check_injection(t, i_s)?;
    let mut bus = shunt_current(p, loads, v, omega0)? + incidence_apply(t, i_t);
    let mut head = bus.rows_mut(0, i_s.len());
    head += i_s;
    let dv = incidence_transpose_apply(t, v);
    let mut line = DVector::zeros(2 * t.n_t());
    for k in 0..t.n_t() {
        let z = line_impedance(p.r_t[k], p.l_t[k], omega0) * pair(i_t, k) - pair(&dv, k);
        line[2 * k] = z.x;
        line[2 * k + 1] = z.y;
    }
    let mut out = DVector::zeros(bus.len() + line.len());
    out.rows_mut(0, bus.len()).copy_from(&bus);
    out.rows_mut(bus.len(), line.len()).copy_from(&line);
    Ok(out)
}

/// Nodal current balance `Y_N(v) v + (i_s, 0)`; zero exactly on solutions.
pub fn nodal_balance_residual(
    p: &NetworkParams,
    t: &Topology,
    loads: &[LoadModel],
    i_s: &DVector<f64>,
    v: &DVector<f64>,
    omega0: f64,
) -> Result<DVector<f64>> {
    check_injection(t, i_s)?;
    let mut r = admittance(p, t, loads, v, omega0)? * v;
    let mut head = r.rows_mut(0, i_s.len());
    head += i_s;
    Ok(r)
}
