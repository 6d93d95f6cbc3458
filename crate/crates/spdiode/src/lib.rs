//! Deterministic, seedable simulator and estimation toolkit for an
//! electrically injected, electromechanically tuneable photonic-crystal
//! single-photon diode.

pub mod actuator;
pub mod config;
pub mod emitter;
pub mod fit;
pub mod optics;
pub mod photostats;
pub mod spectra;
pub mod textio;

pub use config::{load_config, save_config, DeviceParams, DriveState};
