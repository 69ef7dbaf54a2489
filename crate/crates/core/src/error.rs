use thiserror::Error;

/// Errors produced by the model, solvers and integrators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{}", load_domain_message(*.bus, *.norm, *.v_min))]
    LoadDomain {
        bus: Option<usize>,
        norm: f64,
        v_min: f64,
    },

    #[error("machine parameter violation: {0}")]
    Params(#[from] ParamViolation),

    #[error("topology: {0}")]
    Topology(String),

    #[error("system validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("numerically singular {0}")]
    Singular(&'static str),

    #[error("Newton iteration did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("no steady state at omega0 = 0 for machine {machine}: |v - R_s i_s| = {nu_norm:.3e} is not zero")]
    OmegaZeroInfeasible { machine: usize, nu_norm: f64 },

    #[error("steady-state verification failed: {0}")]
    Verification(String),

    #[error("integration step failed at t = {time} (stage {stage}): {source}")]
    Step {
        time: f64,
        stage: usize,
        source: Box<Error>,
    },
}

fn load_domain_message(bus: Option<usize>, norm: f64, v_min: f64) -> String {
    match bus {
        Some(k) => format!("load at bus {k}: |v| = {norm:.6e} below domain floor {v_min:.3e}"),
        None => format!("load: |v| = {norm:.6e} below domain floor {v_min:.3e}"),
    }
}

impl Error {
    /// Attaches a bus index to a load-domain error; other errors pass through.
    pub fn at_bus(self, k: usize) -> Self {
        match self {
            Error::LoadDomain { norm, v_min, .. } => Error::LoadDomain {
                bus: Some(k),
                norm,
                v_min,
            },
            other => other,
        }
    }
}

/// First violated condition found by [`crate::machine::validate_params`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamViolation {
    #[error("{name} = {value} outside its domain ({domain})")]
    SignDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("inductance matrix not positive definite at theta = {theta:.6} rad (smallest eigenvalue {eigenvalue:.6e})")]
    NotPositiveDefinite { theta: f64, eigenvalue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
