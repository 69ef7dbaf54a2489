#![allow(dead_code)]

use std::f64::consts::PI;

use gridstate_core::frame::Angle;
use gridstate_core::loads::LoadModel;
use gridstate_core::machine::MachineParams;
use gridstate_core::network::{NetworkParams, Topology};
use gridstate_core::steady_state::{OperatingSpec, Polarization};
use gridstate_core::system::{assemble, MachineAttachment, PowerSystem};

pub const OMEGA0: f64 = 2.0 * PI * 50.0;

pub fn salient() -> MachineParams {
    MachineParams {
        inertia: 0.05,
        damping: 0.01,
        r_s: 0.02,
        r_f: 0.5,
        r_d: 0.8,
        r_q: 0.8,
        l_s: 0.005,
        l_sa: 0.001,
        l_f: 1.0,
        l_d: 0.5,
        l_q: 0.5,
        l_fd: 0.3,
        l_sf: 0.05,
        l_sd: 0.03,
        l_sq: 0.03,
    }
}

pub fn round() -> MachineParams {
    MachineParams { l_sa: 0.0, ..salient() }
}

/// Three buses in a ring: salient machine at bus 0, impedance load at
/// bus 1, round machine at bus 2.
pub fn canonical() -> (PowerSystem, OperatingSpec) {
    let topo = Topology::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
    let net = NetworkParams {
        c: vec![5e-5; 3],
        l_t: vec![1e-3, 1.2e-3, 1.5e-3],
        r_t: vec![0.05, 0.05, 0.08],
    };
    let loads = [LoadModel::None, LoadModel::Impedance { g: 2.0, b: -0.5 }, LoadModel::None];
    let sys = assemble(
        &[
            MachineAttachment { bus: 0, params: salient() },
            MachineAttachment { bus: 2, params: round() },
        ],
        &topo,
        &net,
        &loads,
    )
    .unwrap();
    let spec = OperatingSpec::from_polar(
        OMEGA0,
        &[
            (100.0, Angle::from_degrees(0.0).unwrap()),
            (100.0, Angle::from_degrees(-5.0).unwrap()),
        ],
        vec![Polarization::Positive; 2],
    );
    (sys, spec)
}
