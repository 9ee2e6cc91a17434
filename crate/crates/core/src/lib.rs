//! Simulation and design toolkit for non-adiabatic holonomic single-qubit
//! gates in planar three-waveguide couplers.
//!
//! A gate is fixed by a weight pair (θ, φ) and an envelope function Ω(z)
//! whose integral meets the cyclicity budget π. The crate synthesizes
//! coupling profiles from those parameters, propagates them numerically,
//! checks the purely geometric evolution against closed-form holonomies,
//! predicts single- and two-photon measurement statistics under a simple
//! count-noise model, and compiles profiles into physical waveguide layouts
//! through the exponential coupling-distance law.
//!
//! Start with the runnable examples (`cargo run --example hadamard_gate`)
//! or the `holonomy-sim` binary for the batch CLI.

pub mod analysis;
pub mod cli;
pub mod core;
pub mod envelopes;
pub mod error;
pub mod holonomy;
pub mod jsonfmt;
pub mod layout;
pub mod propagate;
pub mod sequence;

pub use crate::core::{
    CouplingProfile, EnvelopeProfile, GateSpec, Holonomy2, Mode, QubitState, Unitary3,
};
pub use crate::error::{Error, Result};
