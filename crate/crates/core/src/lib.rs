//! Packing type-`ell` Hamilton cycles into pseudo-random k-uniform
//! hypergraphs by reduction to digraph Hamilton-cycle packing.
//!
//! The pipeline: [`kgraph`] holds the hypergraph, [`regularity`] audits it,
//! [`reduction`] turns a vertex permutation into the shift digraph and lifts
//! digraph cycles back, [`procedure`] runs one labelled round of random
//! digraphs, [`packer`] packs Hamilton cycles in digraphs, and [`peel`]
//! iterates rounds on the schedule from [`schedule`].

pub mod combinatorics;
pub mod digraph;
pub mod error;
pub mod kgraph;
pub mod montecarlo;
pub mod packer;
pub mod params;
pub mod peel;
pub mod procedure;
pub mod reduction;
pub mod regularity;
pub mod rng;
pub mod schedule;

pub use digraph::{audit_digraph_regularity, Digraph, DigraphAuditConfig, DigraphRegularityReport};
pub use error::{Error, Result};
pub use kgraph::{Edge, KGraph, Vertex};
pub use montecarlo::{lemma_montecarlo, GraphSpec, LemmaConfig, LemmaReport, LemmaTarget};
pub use packer::{
    exact_max_packing, hamilton_cycles, pack_hamilton_cycles, DiPacking, PackerConfig,
};
pub use params::Params;
pub use peel::{run_peeling, PackingResult, PeelConfig, RoundStats};
pub use procedure::{
    compute_procedure_params, coverage_histogram, run_procedure1, run_procedure1_with, Overrides,
    ProcedureConfig, ProcedureOutput, ProcedureParams,
};
pub use reduction::{
    build_digraph, check_ownership_partition, lift_cycle, precedes, validate_type_l_cycle,
    window_edges, CycleViolation, Permutation, QTuple, ShiftDigraph, TypeLCycle,
};
pub use regularity::{
    audit_definition1, audit_l_property, AuditConfig, AuditMode, LProperty, RegularityReport,
};
pub use schedule::{compute_schedule, verify_schedule_inequality, PeelSchedule};
