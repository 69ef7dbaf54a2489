//! Nonlinear multi-machine power system model in the stationary αβ-frame,
//! with constructive computation and certification of synchronous steady
//! states.

pub mod error;
pub mod frame;
pub mod identities;
pub mod loads;
pub mod machine;
pub mod network;
pub mod simulate;
pub mod steady_state;
pub mod system;

pub use error::{Error, ParamViolation, Result};
