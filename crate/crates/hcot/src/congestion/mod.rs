//! Horizontal lattice discretization and congested optimal transport.

pub mod graph;
pub mod lattice;
pub mod wardrop;

pub use graph::{Edge, FlowNetwork, ShortestPathTree, TieBreak};
pub use lattice::{
    build_lattice, c_phi, intensity_to_field, snap_discrete, snap_discrete_connected,
    snap_grid, snap_grid_connected, weighted_length,
    HorizontalLattice, WeightField,
};
pub use wardrop::{
    equilibrium_certificate, solve_wardrop, CertificateReport, CongestionFunction, Demand, FwLog,
    PathFlow, TrafficAssignment,
};
