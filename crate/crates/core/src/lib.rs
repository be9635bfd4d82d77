//! Simulation of two-particle NOON-state interference through a lossy
//! plasmonic beamsplitter, with photon-counting detection and spectral
//! analysis of the resulting coincidence traces.

pub mod analysis;
pub mod config;
pub mod detection;
pub mod elements;
pub mod experiment;
pub mod fock;
pub mod io;

pub use elements::{BeamsplitterSpec, Classification, Dilation, PhaseRelation, PropagationSpec};
pub use experiment::{InterferometerSpec, OutcomeDistribution, SourceModel};
pub use fock::{OccupationVector, StateVector};
