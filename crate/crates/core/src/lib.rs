//! Finite-volume simulation of scalar conservation laws on directed networks
//! with a single junction.
//!
//! The crate implements the central scheme whose junction closure comes from
//! linear trace systems (no Riemann solver at the node), the relaxation
//! scheme it is the limit of, and a classical flow-maximization closure built
//! from demand and supply functions. Supported junction shapes are 1-to-1 and
//! 1-to-2 with a flux distribution rate for the second outgoing edge.
//!
//! The usual entry points are [`NetworkTopology`] to describe the problem,
//! [`RunConfig`] to pick scheme order, Courant number and (optionally) the
//! relaxation parameter, and [`scheme::run`] to advance it. [`analysis`]
//! holds the L1/EOC tooling used by the convergence experiments.

pub mod analysis;
pub mod coupling;
pub mod flux;
pub mod network;
pub mod relaxation;
pub mod scheme;

pub use analysis::{
    eoc, l1_error, l1_error_v, mass_balance_audit, AnalysisError, ErrorRow, ErrorTable, MassAudit,
};
pub use coupling::{
    node_fluxes_central, node_fluxes_flowmax, solve_coupling, solve_coupling_1to1,
    solve_coupling_1to2, CouplingData, CouplingError, NodeFluxes, NodeInput, UvPair,
};
pub use flux::{golden_section_max, FluxError, FluxModel};
pub use network::{
    validate_subcharacteristic, Coupling, Edge, EdgeState, NetworkError, NetworkState,
    NetworkTopology, Orientation, SubcharacteristicReport,
};
pub use relaxation::{g_flux, init_auxiliary, relaxation_step};
pub use scheme::{
    compute_dt, interior_flux, left_boundary_flux, minmod, right_boundary_flux, run, run_periodic,
    second_order_correction, step_network, step_periodic, RunConfig, SchemeError, SchemeOrder,
    StepReport, Trajectory,
};
