//! Steady-state result document.

use std::path::Path;

use gridstate_core::steady_state::{FullSteadyState, NetworkSolution, VerificationReport};
use gridstate_core::system::InputVector;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::numfmt;
use crate::schema::ParsedSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub omega0: f64,
    pub machines: Vec<MachineResult>,
    pub buses: Vec<BusResult>,
    pub lines: Vec<LineResult>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineResult {
    pub bus: u64,
    /// Rotor angle in radians; `theta_deg` repeats it in degrees.
    pub theta: f64,
    pub theta_deg: f64,
    pub i_s: [f64; 2],
    pub i_f: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub tau_m: f64,
    pub v_f: f64,
    pub sigma: i64,
    pub case: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusResult {
    pub id: u64,
    pub v: [f64; 2],
    pub magnitude: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineResult {
    pub from: u64,
    pub to: u64,
    #[serde(rename = "i_T")]
    pub i_t: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlocksDoc {
    pub frequency: f64,
    pub torque: f64,
    pub windings: f64,
    pub buses: f64,
    pub lines: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDefect {
    pub bus: u64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub residual_blocks: ResidualBlocksDoc,
    pub residual_norm: f64,
    pub scale: f64,
    /// Second-order one-sided probe; the certified quantity.
    pub invariance_defect: f64,
    /// Plain forward difference at the same step.
    pub invariance_defect_first_order: f64,
    pub load_defects: Vec<LoadDefect>,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub certificate: bool,
    pub failures: Vec<String>,
}

fn pair(v: &DVector<f64>, k: usize) -> [f64; 2] {
    [v[2 * k], v[2 * k + 1]]
}

pub fn build_result(
    parsed: &ParsedSystem,
    net: &NetworkSolution,
    ss: &FullSteadyState,
    report: &VerificationReport,
) -> ResultFile {
    let sys = &parsed.system;
    let machines = ss
        .recoveries
        .iter()
        .enumerate()
        .map(|(k, r)| MachineResult {
            bus: parsed.bus_id(k),
            theta: r.theta.radians(),
            theta_deg: r.theta.radians().to_degrees(),
            i_s: pair(&net.i_s, k),
            i_f: r.i_f,
            i_d: r.i_d,
            i_q: r.i_q,
            tau_m: r.tau_m,
            v_f: r.v_f,
            sigma: r.sigma.sign() as i64,
            case: r.case.as_str().to_string(),
        })
        .collect();
    let internal = parsed.internal_of_file();
    let buses = parsed
        .bus_ids
        .iter()
        .zip(&internal)
        .map(|(&id, &k)| {
            let v = pair(&net.v, k);
            BusResult {
                id,
                v,
                magnitude: v[0].hypot(v[1]),
                angle_deg: v[1].atan2(v[0]).to_degrees(),
            }
        })
        .collect();
    let lines = parsed
        .line_ids
        .iter()
        .enumerate()
        .map(|(l, &(from, to))| LineResult { from, to, i_t: pair(&net.i_t, l) })
        .collect();
    let b = &report.blocks;
    let diagnostics = Diagnostics {
        residual_blocks: ResidualBlocksDoc {
            frequency: b.frequency,
            torque: b.torque,
            windings: b.windings,
            buses: b.buses,
            lines: b.lines,
        },
        residual_norm: report.residual_norm,
        scale: report.scale,
        invariance_defect: report.invariance_defect_extrapolated,
        invariance_defect_first_order: report.invariance_defect,
        load_defects: parsed
            .bus_ids
            .iter()
            .zip(&internal)
            .map(|(&bus, &k)| LoadDefect { bus, defect: report.load_defects[k] })
            .collect(),
        newton_iterations: net.iterations,
        newton_residual: net.residual_norm,
        certificate: report.certificate,
        failures: report.failures.clone(),
    };
    debug_assert_eq!(sys.n_v(), internal.len());
    ResultFile {
        omega0: ss.omega0,
        machines,
        buses,
        lines,
        diagnostics,
    }
}

impl ResultFile {
    pub fn to_json(&self) -> String {
        numfmt::to_string(self).expect("result documents contain only finite numbers")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    /// Rebuilds the state and input vectors for `parsed`, checking that the
    /// document describes the same machines, buses and lines.
    pub fn state(&self, parsed: &ParsedSystem) -> CliResult<(DVector<f64>, InputVector)> {
        let sys = &parsed.system;
        let layout = sys.layout();
        let mismatch = |what: &str| CliError::Parse(format!("result document does not match the system file: {what}"));
        if self.machines.len() != sys.n_g() {
            return Err(mismatch("machine count"));
        }
        if self.buses.iter().map(|b| b.id).ne(parsed.bus_ids.iter().copied()) {
            return Err(mismatch("bus ids"));
        }
        if self.lines.iter().map(|l| (l.from, l.to)).ne(parsed.line_ids.iter().copied()) {
            return Err(mismatch("lines"));
        }
        if self.omega0 != parsed.omega0() {
            return Err(mismatch("omega0"));
        }
        let mut x = DVector::zeros(layout.n_x());
        let mut u = InputVector::zeros(sys.n_g());
        for (k, m) in self.machines.iter().enumerate() {
            if m.bus != parsed.bus_id(k) {
                return Err(mismatch("machine buses"));
            }
            x[layout.theta().start + k] = m.theta;
            x[layout.omega().start + k] = self.omega0;
            let c = layout.machine_currents(k).start;
            for (j, val) in [m.i_s[0], m.i_s[1], m.i_f, m.i_d, m.i_q].into_iter().enumerate() {
                x[c + j] = val;
            }
            u.tau_m[k] = m.tau_m;
            u.v_f[k] = m.v_f;
        }
        let v0 = layout.voltages().start;
        for (b, k) in self.buses.iter().zip(parsed.internal_of_file()) {
            x[v0 + 2 * k] = b.v[0];
            x[v0 + 2 * k + 1] = b.v[1];
        }
        let t0 = layout.line_currents().start;
        for (l, line) in self.lines.iter().enumerate() {
            x[t0 + 2 * l] = line.i_t[0];
            x[t0 + 2 * l + 1] = line.i_t[1];
        }
        Ok((x, u))
    }
}
