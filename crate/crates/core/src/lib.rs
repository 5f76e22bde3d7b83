//! Simulation of classical communication over finite-dimensional quantum
//! channels with memory.
//!
//! A channel with quantum memory, together with a fixed input ensemble and
//! output measurement, reduces to a family of completely positive maps on the
//! memory space indexed by the classical input/output pair (a quantum-state
//! channel). This crate provides:
//!
//! - dense complex-matrix kernels ([`numerics`]): Hermitian eigendecomposition,
//!   unitary exponentials, partial traces, trace distance, PSD projection;
//! - quantum-state channel construction, validation, simulation, exact small-n
//!   laws, and symbol-wise posterior decoding ([`channels`]);
//! - classical finite-state-machine channels as oracle and baseline ([`fsmc`]);
//! - Monte-Carlo information-rate estimation via normalized state metrics
//!   ([`rate`]);
//! - auxiliary-channel upper/lower rate bounds, their stochastic gradients in
//!   Choi coordinates, and a projected-gradient optimizer ([`bounds`]);
//! - quantum Gilbert–Elliott channel constructions and sweep presets
//!   ([`qgec`]);
//! - JSON channel files and plain-text trace files ([`io`]).
//!
//! All randomized routines take explicit 64-bit seeds and are deterministic
//! for a fixed seed.

pub mod bounds;
pub mod channels;
pub mod fsmc;
pub mod io;
pub mod numerics;
pub mod qgec;
pub mod rate;

pub use bounds::{
    depolarizing_choi, estimate_bounds, estimate_delta, estimate_lower, estimate_upper,
    gradient_delta, gradient_lower, gradient_upper, messages, optimize_delta, project_feasible,
    project_tangent, random_aux, BoundsEstimate, DykstraConfig, FeasibleProjection,
    GradientEstimate, MessageMode, MessageTrack, OptimizeRecord, OptimizerConfig,
};
pub use channels::{
    bcjr_posteriors, bsc_channel, channel_law_exact, embed_fsmc, from_choi, from_config,
    from_kraus, kraus_from_choi, sample_trajectory, step, to_choi, validate, Alphabet, CcQsc,
    ChannelConfig, ChoiMatrix, DensityOperator, KrausFamily, Trajectory, TransferMatrix,
    ValidationReport,
};
pub use fsmc::{
    algorithm1_estimate, algorithm1_on_trajectory, gilbert_elliott, sample_fsmc,
    sample_fsmc_with_states, Fsmc, StateMetric,
};
pub use numerics::{
    herm_eig, partial_trace, psd_project, trace_distance, unitary_exp, von_neumann_entropy,
    Complex64, ComplexMatrix, HermitianEig, Subsystem,
};
pub use qgec::{
    build_qgec, build_qgec_variant, cbf_kraus, stinespring_unitaries, sweep_presets, QgecParams,
    SweepPreset, SweptParameter,
};
pub use rate::{
    algorithm2_estimate, algorithm2_on_trajectory, indecomposability_probe, source_entropy,
    QuantumMetric, RateEstimate,
};

/// Errors reported by channel constructions, recursions, and solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal {offdiag:.3e})")]
    EigNonConvergence { sweeps: usize, offdiag: f64 },

    #[error("Kraus completeness violated for input '{input}': residual {residual:.3e}")]
    Completeness { input: String, residual: f64 },

    #[error("Choi matrix is not positive semidefinite (minimum eigenvalue {min_eig:.3e})")]
    ChoiNotPsd { min_eig: f64 },

    #[error("POVM does not sum to identity: residual {residual:.3e}")]
    PovmIncomplete { residual: f64 },

    #[error("not a valid density operator: {reason}")]
    InvalidDensity { reason: String },

    #[error("not a valid pmf: {reason}")]
    InvalidPmf { reason: String },

    #[error("symbol '{symbol}' not in alphabet")]
    UnknownSymbol { symbol: String },

    #[error("observation has probability {value:.3e} at step {step} (impossible under this channel)")]
    ZeroProbability { step: usize, value: f64 },

    #[error("sequence length {n} exceeds exhaustive-enumeration guard {limit}")]
    EnumerationGuard { n: usize, limit: usize },

    #[error("channel law tensor is not stochastic for (x={x}, s={s}): row sum {sum}")]
    NotStochastic { x: usize, s: usize, sum: f64 },

    #[error("parameter out of range: {name} = {value}")]
    ParameterRange { name: &'static str, value: f64 },

    #[error("trajectory alphabets do not match the channel ({context})")]
    TrajectoryMismatch { context: String },

    #[error("optimizer failed: {reason}")]
    Optimizer { reason: String },

    #[error("malformed channel file: {reason}")]
    Format { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
