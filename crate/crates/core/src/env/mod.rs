//! Discrete-time downlink simulator for a single sliced O-RAN cell.
//!
//! One control step spans `ttis_per_step` transmission intervals. Each TTI
//! redraws block Rayleigh fading and URLLC head-of-line packets, evaluates the
//! Shannon rate of every allocated resource block and scores each slice
//! against its service-level target.

mod allocation;
mod channel;
mod config;
mod qos;
mod sim;

pub use allocation::Allocation;
pub use channel::{
    dbm_to_watts, interference_at, interference_with_gains, noise_power_watts, per_rb_rate,
    sample_channel, sample_ue_channel, FrequencyResponse,
};
pub use config::{CellConfig, EnvConfig, Interferer, QosModel, SliceKind, SliceSpec};
pub use qos::{slice_qos, ue_throughputs, violates_sla};
pub use sim::{EnvState, QosReport, SliceEnv, UeState};
