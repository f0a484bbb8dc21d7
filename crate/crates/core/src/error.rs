use thiserror::Error;

use crate::kgraph::Edge;
use crate::reduction::CycleViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("k = {k} is too small; uniformity must be at least 3")]
    UniformityTooSmall { k: usize },

    #[error("ell = {ell} must be at least 1")]
    EllTooSmall { ell: usize },

    #[error("type not in the supported regime: ell = {ell} must satisfy ell < k/2 (k = {k})")]
    TypeOutOfRegime { k: usize, ell: usize },

    #[error("n = {n} is smaller than k = {k}")]
    TooFewVertices { n: usize, k: usize },

    #[error("n = {n} is not divisible by q = {q} (multiples of 2q = {two_q} are preferred)")]
    Divisibility { n: usize, q: usize, two_q: usize },

    #[error("probability {value} is outside [0, 1]")]
    InvalidProbability { value: f64 },

    #[error("epsilon must be positive, got {value}")]
    InvalidEpsilon { value: f64 },

    #[error("kappa must be positive, got {value}")]
    InvalidKappa { value: f64 },

    #[error("vertex {vertex} is outside [1, {n}]")]
    VertexOutOfRange { vertex: u32, n: usize },

    #[error("vertex {vertex} repeated in {context}")]
    RepeatedVertex { vertex: u32, context: &'static str },

    #[error("set has {got} vertices, expected {expected}")]
    WrongSetSize { expected: usize, got: usize },

    #[error("set listed twice: {set:?}")]
    DuplicateSet { set: Vec<u32> },

    #[error("extension size d = {d} must lie in [1, {max}]")]
    ExtensionSize { d: usize, max: usize },

    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),

    #[error("edge {0} is not in the hypergraph")]
    MissingEdge(Edge),

    #[error("graph uniformity mismatch: graph has k = {graph}, parameters have k = {params}")]
    UniformityMismatch { graph: usize, params: usize },

    #[error("vertex count mismatch: graph has n = {graph}, parameters have n = {params}")]
    VertexCountMismatch { graph: usize, params: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("exhaustive mode needs {count} configurations for {cell}, cap is {cap}")]
    ExhaustiveCap {
        cell: String,
        count: u128,
        cap: u128,
    },

    #[error("target density p = 0 with a nonempty graph makes every ratio undefined")]
    ZeroDensity,

    #[error("{property} requires ell not dividing k (q - k + ell = 0 otherwise)")]
    RequiresNonDivisible { property: &'static str },

    #[error("{property} requires ell dividing k (windows past a_(k-2ell) would not be k-sets)")]
    RequiresDivisible { property: &'static str },

    #[error("could not draw a valid family for cell (d={d}, s={s}) after {attempts} attempts")]
    SamplingFailed { d: usize, s: usize, attempts: usize },

    #[error("q-tuples overlap at vertex {vertex}")]
    OverlappingTuples { vertex: u32 },

    #[error("not a permutation of [{n}]: {reason}")]
    InvalidPermutation { n: usize, reason: String },

    #[error("digraph cycle is not Hamiltonian: {reason}")]
    NotHamiltonian { reason: String },

    #[error("arc ({from}, {to}) is invalid in a digraph on {nu} vertices")]
    InvalidArc { from: usize, to: usize, nu: usize },

    #[error("formula r = {r_raw:.3e} exceeds the budget {budget}; pass an explicit r")]
    RBudgetExceeded { r_raw: f64, budget: f64 },

    #[error("exact packing oracle limited to nu <= {max_nu} and arcs <= {max_arcs} (got nu = {nu}, arcs = {arcs})")]
    OracleCap {
        nu: usize,
        arcs: usize,
        max_nu: usize,
        max_arcs: usize,
    },

    #[error("{trials} trials requested, at least {floor} required")]
    TooFewTrials { trials: usize, floor: usize },

    #[error("round {round}, digraph {digraph}: lifted cycle failed validation: {violation}")]
    CycleValidation {
        round: usize,
        digraph: usize,
        violation: CycleViolation,
    },

    #[error("bookkeeping invariant broken: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the caller's parameters, as opposed to a
    /// validation failure of a produced object.
    pub fn is_parameter_rejection(&self) -> bool {
        !matches!(
            self,
            Error::CycleValidation { .. }
                | Error::Invariant(_)
                | Error::NotHamiltonian { .. }
                | Error::MissingEdge(_)
                | Error::Io(_)
        )
    }
}
