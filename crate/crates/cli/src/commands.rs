use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use gridstate_core::identities::{run_identity_suite, IdentityReport};
use gridstate_core::simulate::{drift_metrics, simulate, DriftMetrics, SimConfig, Trajectory};
use gridstate_core::steady_state::{compute_steady_state, Polarization};
use gridstate_core::system::{self, InputVector, PowerSystem};
use log::{debug, info, warn};
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::numfmt;
use crate::report::{build_result, ResultFile};
use crate::schema::{parse_system_file, ParsedSystem};
use crate::trajectory;

/// Random instances per identity sweep.
pub const IDENTITY_INSTANCES: usize = 100;

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `k=+1` / `k=-1` with a 1-based machine index.
pub fn parse_sigma(arg: &str, n_g: usize) -> CliResult<(usize, Polarization)> {
    let bad = || CliError::Usage(format!("--sigma expects k=+1 or k=-1 with 1 <= k <= {n_g}, got {arg:?}"));
    let (k, s) = arg.split_once('=').ok_or_else(bad)?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    if k == 0 || k > n_g {
        return Err(bad());
    }
    let s: i64 = s.trim().trim_start_matches('+').parse().map_err(|_| bad())?;
    let p = Polarization::try_from(s).map_err(|_| bad())?;
    Ok((k - 1, p))
}

/// Solves, recovers and certifies; the document is produced even when the
/// certificate fails.
pub fn steady_state_document(parsed: &ParsedSystem, sigma: &[String]) -> CliResult<ResultFile> {
    let mut spec = parsed.spec.clone();
    for arg in sigma {
        let (k, p) = parse_sigma(arg, parsed.system.n_g())?;
        spec.polarization[k] = p;
    }
    let (net, ss, report) =
        compute_steady_state(&parsed.system, &spec).map_err(|e| parsed.core_error("steady state", e))?;
    info!(
        "network solve: {} Newton iterations, relative residual {:.3e}",
        net.iterations, net.residual_norm
    );
    for (k, r) in ss.recoveries.iter().enumerate() {
        debug!(
            "machine {}: theta = {:.6} rad, i_f = {:.6e}, case {}",
            k + 1,
            r.theta.radians(),
            r.i_f,
            r.case.as_str()
        );
    }
    info!(
        "residual {:.3e} (scale {:.3e}), invariance defect {:.3e}",
        report.residual_norm, report.scale, report.invariance_defect_extrapolated
    );
    Ok(build_result(parsed, &net, &ss, &report))
}

pub fn cmd_steady_state(file: &Path, out: Option<&Path>, sigma: &[String]) -> CliResult<ResultFile> {
    let parsed = parse_system_file(file)?;
    let doc = steady_state_document(&parsed, sigma)?;
    write_output(out, &doc.to_json())?;
    if !doc.diagnostics.certificate {
        return Err(CliError::Certification(format!(
            "steady state not certified:\n  {}",
            doc.diagnostics.failures.join("\n  ")
        )));
    }
    Ok(doc)
}

/// Drift metrics in serializable form; `frequency_deviation` is in rad/s.
#[derive(Debug, Clone, Serialize)]
pub struct DriftSummary {
    pub samples: usize,
    pub state_deviation: f64,
    pub voltage_variation: f64,
    pub frequency_deviation: f64,
    pub residual: f64,
    pub worst_state_sample: usize,
    pub worst_voltage_sample: usize,
    pub worst_frequency_sample: usize,
    pub worst_residual_sample: usize,
    pub scale: f64,
}

impl DriftSummary {
    fn new(m: &DriftMetrics, samples: usize) -> Self {
        DriftSummary {
            samples,
            state_deviation: m.state_deviation,
            voltage_variation: m.voltage_variation,
            frequency_deviation: m.frequency_deviation,
            residual: m.residual,
            worst_state_sample: m.worst_state_sample,
            worst_voltage_sample: m.worst_voltage_sample,
            worst_frequency_sample: m.worst_frequency_sample,
            worst_residual_sample: m.worst_residual_sample,
            scale: m.scale,
        }
    }

    pub fn to_json(&self) -> String {
        numfmt::to_string(self).expect("finite metrics")
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs<'a> {
    pub file: &'a Path,
    pub from: &'a Path,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub perturb_v: Option<f64>,
    pub out: Option<&'a Path>,
    pub summary: Option<&'a Path>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<DriftSummary> {
    let parsed = parse_system_file(args.file)?;
    let (mut x0, u) = ResultFile::load(args.from)?.state(&parsed)?;
    let sys = &parsed.system;
    if let Some(p) = args.perturb_v {
        if !p.is_finite() {
            return Err(CliError::Usage(format!("--perturb-v {p} is not finite")));
        }
        for k in sys.layout().voltages() {
            x0[k] *= 1.0 + p;
        }
    }
    let cfg = SimConfig {
        dt: args.dt,
        t_end: args.t_end,
        record_every: args.record_every,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    info!("simulating {} RK4 steps of {} s", cfg.n_steps(), cfg.dt);
    let traj = simulate(sys, &x0, &u, &cfg).map_err(|e| parsed.core_error("simulation", e))?;
    let m = drift_metrics(sys, &traj, &x0, parsed.omega0()).map_err(|e| parsed.core_error("drift metrics", e))?;
    let summary = DriftSummary::new(&m, traj.states.len());

    match args.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
            trajectory::write_csv(BufWriter::new(f), &parsed, &traj)?;
        }
        None => trajectory::write_csv(std::io::stdout().lock(), &parsed, &traj)?,
    }
    if let Some(p) = args.summary {
        write_output(Some(p), &summary.to_json())?;
    }
    eprintln!(
        "drift over {} samples: state {:.3e}, voltage {:.3e}, frequency {:.3e} rad/s, residual {:.3e}",
        summary.samples, m.state_deviation, m.voltage_variation, m.frequency_deviation, m.residual
    );
    Ok(summary)
}

/// Inputs that make the torque and field-winding residuals vanish at `x`.
pub fn infer_inputs(sys: &PowerSystem, x: &DVector<f64>, omega0: f64) -> gridstate_core::Result<InputVector> {
    let layout = sys.layout();
    let rho = system::residual(sys, x, &InputVector::zeros(sys.n_g()), omega0)?;
    let mut u = InputVector::zeros(sys.n_g());
    for k in 0..sys.n_g() {
        u.tau_m[k] = rho[layout.omega().start + k];
        u.v_f[k] = rho[layout.machine_currents(k).start + 2];
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub summary: DriftSummary,
    /// `(metric, worst sample, value, tolerance)` for every exceeded bound.
    pub flagged: Vec<(&'static str, usize, f64, f64)>,
}

pub fn verify_trajectory(
    parsed: &ParsedSystem,
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    u: Option<InputVector>,
    tol: f64,
) -> CliResult<VerifyOutcome> {
    let sys = &parsed.system;
    let w0 = parsed.omega0();
    let x0 = states[0].clone();
    let inputs = match u {
        Some(u) => u,
        None => infer_inputs(sys, &x0, w0).map_err(|e| parsed.core_error("input inference", e))?,
    };
    let n = states.len();
    let traj = Trajectory { times, states, inputs };
    let m = drift_metrics(sys, &traj, &x0, w0).map_err(|e| parsed.core_error("verification", e))?;
    let freq_tol = tol * w0.abs().max(1.0);
    let mut flagged = Vec::new();
    for (name, sample, value, bound) in [
        ("residual", m.worst_residual_sample, m.residual, tol),
        ("state deviation", m.worst_state_sample, m.state_deviation, tol),
        ("voltage variation", m.worst_voltage_sample, m.voltage_variation, tol),
        ("frequency deviation", m.worst_frequency_sample, m.frequency_deviation, freq_tol),
    ] {
        if value.is_nan() || value > bound {
            flagged.push((name, sample, value, bound));
        }
    }
    Ok(VerifyOutcome {
        summary: DriftSummary::new(&m, n),
        flagged,
    })
}

pub fn cmd_verify(file: &Path, traj: &Path, tol: f64, from: Option<&Path>) -> CliResult<VerifyOutcome> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Usage(format!("--tol {tol} must be positive")));
    }
    let parsed = parse_system_file(file)?;
    let f = File::open(traj).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", traj.display())))?;
    let (times, states) = trajectory::read_csv(f, &parsed)?;
    let u = match from {
        Some(p) => Some(ResultFile::load(p)?.state(&parsed)?.1),
        None => None,
    };
    let outcome = verify_trajectory(&parsed, times.clone(), states, u, tol)?;
    let s = &outcome.summary;
    println!("samples             {}", s.samples);
    println!("residual            {:.3e}  (sample {})", s.residual, s.worst_residual_sample);
    println!("state deviation     {:.3e}  (sample {})", s.state_deviation, s.worst_state_sample);
    println!("voltage variation   {:.3e}  (sample {})", s.voltage_variation, s.worst_voltage_sample);
    println!("frequency deviation {:.3e}  (sample {})", s.frequency_deviation, s.worst_frequency_sample);
    if outcome.flagged.is_empty() {
        println!("PASS");
        return Ok(outcome);
    }
    let lines: Vec<String> = outcome
        .flagged
        .iter()
        .map(|(name, k, v, b)| format!("{name} {v:.3e} exceeds {b:.3e} at sample {k} (t = {})", times[*k]))
        .collect();
    for l in &lines {
        warn!("{l}");
    }
    Err(CliError::Certification(format!("trajectory rejected:\n  {}", lines.join("\n  "))))
}

pub fn identity_table(report: &IdentityReport) -> String {
    let mut s = format!("identity suite, seed {}\n", report.seed);
    for c in &report.checks {
        s.push_str(&format!(
            "{:<4} {:<52} n={:<4} worst={:.3e} tol={:.1e}\n",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.instances,
            c.worst,
            c.tol
        ));
    }
    s
}

pub fn cmd_identities(file: &Path, seed: u64) -> CliResult<IdentityReport> {
    let parsed = parse_system_file(file)?;
    let report = run_identity_suite(Some((&parsed.system, parsed.omega0())), seed, IDENTITY_INSTANCES);
    let mut out = std::io::stdout().lock();
    out.write_all(identity_table(&report).as_bytes())
        .map_err(|e| CliError::Usage(format!("cannot write report: {e}")))?;
    if report.all_passed() {
        Ok(report)
    } else {
        Err(CliError::Certification("identity suite failed".into()))
    }
}
