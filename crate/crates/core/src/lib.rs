//! Energy-efficient resource allocation games for the multiuser MIMO uplink.
//!
//! Each user of a single-cell uplink maximizes the bits it delivers per joule
//! of transmit energy, `R·(L/M)·f(γ)/p`, by choosing its power and, depending
//! on the game, its receive filter and transmit beamformer. The crate finds
//! the Nash equilibria of four such games by best-response dynamics and runs
//! seeded Monte Carlo sweeps over user count and receive-antenna count.
//!
//! - [`numerics`]: dense SPD solves, log-determinants and dominant eigenpairs.
//! - [`model`]: system parameters and random scenarios.
//! - [`efficiency`]: the packet-success function, target SINR and utility.
//! - [`receivers`]: matched, MMSE and SIC-MMSE filters and SINR.
//! - [`games`]: best-response dynamics and Nash checks.
//! - [`montecarlo`]: paired-trial sweeps and summary statistics.
//! - [`cli`]: config parsing and CSV/JSON output behind the `mimo-ee` binary.

pub mod cli;
pub mod efficiency;
pub mod games;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod receivers;

pub use efficiency::{solve_target_sinr, utility, EfficiencyFn};
pub use games::{solve_game, verify_nash, EquilibriumReport, GameKind, SolverOptions};
pub use model::{
    default_params, sample_scenario, ChannelModel, Placement, RngHandle, Scenario, SystemParams,
};
pub use receivers::{AllocationState, ReceiverKind};
