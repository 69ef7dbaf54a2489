//! System file: JSON description of buses, lines, machines and the
//! operating point. Angles are in degrees, everything else in SI units.

use std::collections::HashMap;
use std::path::Path;

use gridstate_core::frame::Angle;
use gridstate_core::loads::{LoadModel, DEFAULT_V_MIN};
use gridstate_core::machine::{validate_params, MachineParams};
use gridstate_core::network::{NetworkParams, Topology};
use gridstate_core::steady_state::{NewtonOptions, OperatingSpec, Polarization};
use gridstate_core::system::{assemble, MachineAttachment, PowerSystem};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub omega0: f64,
    pub buses: Vec<BusEntry>,
    pub lines: Vec<LineEntry>,
    pub machines: Vec<MachineEntry>,
    pub operating_point: OperatingPointEntry,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: u64,
    pub capacitance: f64,
    #[serde(default)]
    pub load: Option<LoadEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase", deny_unknown_fields)]
pub enum LoadEntry {
    Impedance {
        g: f64,
        b: f64,
    },
    Current {
        c_g: f64,
        c_b: f64,
        #[serde(default = "default_v_min")]
        v_min: f64,
    },
    Power {
        p: f64,
        q: f64,
        #[serde(default = "default_v_min")]
        v_min: f64,
    },
}

fn default_v_min() -> f64 {
    DEFAULT_V_MIN
}

impl LoadEntry {
    pub fn model(&self) -> LoadModel {
        match *self {
            LoadEntry::Impedance { g, b } => LoadModel::Impedance { g, b },
            LoadEntry::Current { c_g, c_b, v_min } => LoadModel::Current { c_g, c_b, v_min },
            LoadEntry::Power { p, q, v_min } => LoadModel::Power { p, q, v_min },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub from: u64,
    pub to: u64,
    pub resistance: f64,
    pub inductance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineEntry {
    pub bus: u64,
    pub inertia: f64,
    pub damping: f64,
    pub r_s: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub r_q: f64,
    pub l_s: f64,
    pub l_sa: f64,
    pub l_f: f64,
    pub l_d: f64,
    pub l_q: f64,
    pub l_fd: f64,
    pub l_sf: f64,
    pub l_sd: f64,
    pub l_sq: f64,
}

impl MachineEntry {
    pub fn params(&self) -> MachineParams {
        MachineParams {
            inertia: self.inertia,
            damping: self.damping,
            r_s: self.r_s,
            r_f: self.r_f,
            r_d: self.r_d,
            r_q: self.r_q,
            l_s: self.l_s,
            l_sa: self.l_sa,
            l_f: self.l_f,
            l_d: self.l_d,
            l_q: self.l_q,
            l_fd: self.l_fd,
            l_sf: self.l_sf,
            l_sd: self.l_sd,
            l_sq: self.l_sq,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPointEntry {
    pub generator_voltages: Vec<VoltageEntry>,
    pub polarization: Vec<i64>,
    #[serde(default)]
    pub newton: Option<NewtonEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageEntry {
    pub bus: u64,
    pub magnitude: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonEntry {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub fd_step: Option<f64>,
}

/// A validated system together with the identifiers from its file.
#[derive(Debug, Clone)]
pub struct ParsedSystem {
    pub system: PowerSystem,
    pub spec: OperatingSpec,
    /// Bus ids in file order.
    pub bus_ids: Vec<u64>,
    /// `(from, to)` ids of every line, in file order.
    pub line_ids: Vec<(u64, u64)>,
}

impl ParsedSystem {
    pub fn omega0(&self) -> f64 {
        self.spec.omega0
    }

    /// Id of the bus at internal (generator-first) index `k`.
    pub fn bus_id(&self, k: usize) -> u64 {
        self.bus_ids[self.system.bus_order()[k]]
    }

    /// Internal index of every bus, in file order.
    pub fn internal_of_file(&self) -> Vec<usize> {
        (0..self.bus_ids.len())
            .map(|f| self.system.internal_bus(f).expect("every file bus is assembled"))
            .collect()
    }

    /// Classifies a core error, naming buses by their file id.
    pub fn core_error(&self, context: &str, e: gridstate_core::Error) -> CliError {
        let e = self.system.user_bus_error(e);
        match e {
            gridstate_core::Error::Step { time, stage, source } => match *source {
                gridstate_core::Error::LoadDomain { bus: Some(f), norm, v_min } => CliError::Solver(format!(
                    "{context}: integration step failed at t = {time} (stage {stage}): load at bus {}: |v| = {norm:.6e} below domain floor {v_min:.3e}",
                    self.bus_ids[f]
                )),
                inner => CliError::from_core(context, gridstate_core::Error::Step { time, stage, source: Box::new(inner) }),
            },
            gridstate_core::Error::LoadDomain { bus: Some(f), norm, v_min } => CliError::Solver(format!(
                "{context}: load at bus {}: |v| = {norm:.6e} below domain floor {v_min:.3e}",
                self.bus_ids[f]
            )),
            gridstate_core::Error::OmegaZeroInfeasible { machine, nu_norm } => CliError::Solver(format!(
                "{context}: omega_zero infeasible for machine {} (bus {}): |v - R_s i_s| = {nu_norm:.3e} must vanish when omega0 = 0",
                machine + 1,
                self.bus_id(machine)
            )),
            other => CliError::from_core(context, other),
        }
    }
}

pub fn parse_system_file(path: &Path) -> CliResult<ParsedSystem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_system_str(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        CliError::Physics(m) => CliError::Physics(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_system_str(text: &str) -> CliResult<ParsedSystem> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| {
        let kind = match e.classify() {
            serde_json::error::Category::Data => "schema error",
            _ => "syntax error",
        };
        CliError::Parse(format!("{kind}: {e}"))
    })?;
    build(&file)
}

fn joined(problems: &[String]) -> String {
    problems.join("\n  ")
}

pub fn build(file: &SystemFile) -> CliResult<ParsedSystem> {
    let mut schema = Vec::new();
    let mut index = HashMap::new();
    if file.buses.is_empty() {
        schema.push("at least one bus is required".to_string());
    }
    for (k, b) in file.buses.iter().enumerate() {
        if index.insert(b.id, k).is_some() {
            schema.push(format!("duplicate bus id {}", b.id));
        }
    }
    let lookup = |id: u64, what: String, schema: &mut Vec<String>| -> Option<usize> {
        let found = index.get(&id).copied();
        if found.is_none() {
            schema.push(format!("{what} references unknown bus id {id}"));
        }
        found
    };
    let mut lines = Vec::new();
    for (k, l) in file.lines.iter().enumerate() {
        let a = lookup(l.from, format!("line {}", k + 1), &mut schema);
        let b = lookup(l.to, format!("line {}", k + 1), &mut schema);
        if let (Some(a), Some(b)) = (a, b) {
            if a == b {
                schema.push(format!("line {} connects bus {} to itself", k + 1, l.from));
            }
            lines.push((a, b));
        }
    }
    let mut machine_bus = Vec::new();
    let mut owner: HashMap<u64, usize> = HashMap::new();
    for (k, m) in file.machines.iter().enumerate() {
        if let Some(b) = lookup(m.bus, format!("machine {}", k + 1), &mut schema) {
            machine_bus.push(b);
        }
        if let Some(other) = owner.insert(m.bus, k) {
            schema.push(format!("machines {} and {} share bus {}", other + 1, k + 1, m.bus));
        }
    }
    if file.machines.is_empty() {
        schema.push("at least one machine is required".to_string());
    }
    let op = &file.operating_point;
    let mut voltages = vec![None; file.machines.len()];
    for v in &op.generator_voltages {
        match owner.get(&v.bus) {
            Some(&k) if voltages[k].is_some() => schema.push(format!("duplicate generator voltage for bus {}", v.bus)),
            Some(&k) => voltages[k] = Some(v),
            None => schema.push(format!("generator voltage given for bus {}, which has no machine", v.bus)),
        }
    }
    for (k, v) in voltages.iter().enumerate() {
        if v.is_none() {
            schema.push(format!("no generator voltage for machine {} (bus {})", k + 1, file.machines[k].bus));
        }
    }
    if op.polarization.len() != file.machines.len() {
        schema.push(format!(
            "{} polarization entries for {} machines",
            op.polarization.len(),
            file.machines.len()
        ));
    }
    let polarization: Vec<Polarization> = op
        .polarization
        .iter()
        .enumerate()
        .filter_map(|(k, &s)| match Polarization::try_from(s) {
            Ok(p) => Some(p),
            Err(_) => {
                schema.push(format!("polarization of machine {} must be 1 or -1, got {s}", k + 1));
                None
            }
        })
        .collect();
    if !schema.is_empty() {
        return Err(CliError::Parse(format!("schema error:\n  {}", joined(&schema))));
    }

    let mut physics = Vec::new();
    if !file.omega0.is_finite() {
        physics.push(format!("omega0 = {} is not finite", file.omega0));
    }
    for b in &file.buses {
        if !(b.capacitance.is_finite() && b.capacitance > 0.0) {
            physics.push(format!("bus {}: capacitance {} must be > 0", b.id, b.capacitance));
        }
        if let Some(l) = &b.load {
            if let Err(e) = l.model().validate() {
                physics.push(format!("bus {}: {e}", b.id));
            }
        }
    }
    for (k, l) in file.lines.iter().enumerate() {
        if !(l.resistance.is_finite() && l.resistance > 0.0) || !(l.inductance.is_finite() && l.inductance > 0.0) {
            physics.push(format!(
                "line {} ({} -> {}): resistance and inductance must be > 0",
                k + 1,
                l.from,
                l.to
            ));
        }
    }
    for (k, m) in file.machines.iter().enumerate() {
        if let Err(e) = validate_params(&m.params()) {
            physics.push(format!("machine {} (bus {}): {e}", k + 1, m.bus));
        }
    }
    for v in voltages.iter().flatten() {
        if !(v.magnitude.is_finite() && v.magnitude >= 0.0 && v.angle_deg.is_finite()) {
            physics.push(format!(
                "generator voltage at bus {}: magnitude must be finite and >= 0, angle finite",
                v.bus
            ));
        }
    }
    let topology = match Topology::new(file.buses.len(), lines) {
        Ok(t) => Some(t),
        Err(e) => {
            physics.push(e.to_string());
            None
        }
    };
    if !physics.is_empty() {
        return Err(CliError::Physics(format!("physics validation failed:\n  {}", joined(&physics))));
    }
    let topology = topology.expect("checked above");

    let network = NetworkParams {
        c: file.buses.iter().map(|b| b.capacitance).collect(),
        l_t: file.lines.iter().map(|l| l.inductance).collect(),
        r_t: file.lines.iter().map(|l| l.resistance).collect(),
    };
    let loads: Vec<LoadModel> = file
        .buses
        .iter()
        .map(|b| b.load.as_ref().map_or(LoadModel::None, LoadEntry::model))
        .collect();
    let machines: Vec<MachineAttachment> = file
        .machines
        .iter()
        .zip(&machine_bus)
        .map(|(m, &bus)| MachineAttachment { bus, params: m.params() })
        .collect();
    let system = assemble(&machines, &topology, &network, &loads)
        .map_err(|e| CliError::from_core("system assembly", e))?;

    let polar: Vec<(f64, Angle)> = voltages
        .iter()
        .flatten()
        .map(|v| Ok((v.magnitude, Angle::from_degrees(v.angle_deg)?)))
        .collect::<gridstate_core::Result<_>>()
        .map_err(|e| CliError::from_core("operating point", e))?;
    let mut spec = OperatingSpec::from_polar(file.omega0, &polar, polarization);
    if let Some(n) = &op.newton {
        let d = NewtonOptions::default();
        spec.newton = NewtonOptions {
            tol: n.tol.unwrap_or(d.tol),
            max_iter: n.max_iter.unwrap_or(d.max_iter),
            fd_step: n.fd_step.unwrap_or(d.fd_step),
        };
    }
    spec.validate(&system).map_err(|e| CliError::Physics(format!("operating point: {e}")))?;
    Ok(ParsedSystem {
        system,
        spec,
        bus_ids: file.buses.iter().map(|b| b.id).collect(),
        line_ids: file.lines.iter().map(|l| (l.from, l.to)).collect(),
    })
}
