//! Uplink OFDMA scheduling for 802.11ax-style WLANs.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: station placement, Rayleigh block fading and MCS-based
//!   link adaptation, producing per-epoch rate tables.
//! - [`assignment`]: exact maximum-weight station/RU assignment.
//! - [`scheduler`]: virtual queues, the drift-plus-penalty policy family and
//!   the full-power baselines.
//! - [`harness`]: seeded experiments, summaries and sample-path diagnostics.

pub mod assignment;
pub mod channel;
pub mod error;
pub mod harness;
pub mod scheduler;

pub use assignment::{brute_force_assignment, solve_max_assignment, Assignment, WeightMatrix};
pub use channel::{
    dbm_to_mw, generate_topology, mw_to_dbm, rate_bits, rate_table, sample_channel, select_mcs,
    snr_per_subcarrier, ChannelState, McsEntry, McsTable, Modulation, PhyConfig, RateTable,
    Topology, TopologyParams,
};
pub use error::{Error, Result};
pub use harness::{
    moving_average, run_cdf_study, run_k_sweep, run_single, stability_report, CdfStudy,
    EpochMetrics, ExperimentConfig, RunOptions, RunOutput, RunSummary, SweepPoint,
};
pub use scheduler::{
    PolicyConfig, PolicyKind, QueueState, ResourceAction, Scheduler, Utility,
};
