//! Triggering model of crowdsourced knowledge building.
//!
//! Users are split over `m` expertise categories. Each knowledge unit of type
//! `j` triggers `τ_ij` new units of type `i` per user of category `i` one step
//! later, on top of every user's own internal contribution. This crate
//! simulates that process, computes its closed-form total, separates internal
//! from triggered knowledge, and searches for the user distribution that
//! maximizes total output.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the file formats use.

pub mod error;
pub mod format;
pub mod io;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod scalar;

pub use error::{Error, Result};
pub use linalg::{
    mat_vec_mul, neumann_cumulative, solve_linear, spectral_radius, DenseMatrix, DenseVector,
};
pub use model::{
    feasibility, interaction_matrix, simulate, steady_state_total, step, total_objective,
    triggered_decomposition, Decomposition, Feasibility, KnowledgeVector, ModelInstance,
    ReleaseSchedule, SimulationResult, UserDistribution,
};
pub use optimizer::{
    brute_force, brute_force_parallel, composition_count, compositions, evaluate, hill_climb,
    is_local_optimum, multi_start, neighbors, random_distribution, sweep_surface,
    BruteForceResult, ClimbOutcome, ClimbResult, Evaluation, MultiStartResult,
    OptimizationTrace, SurfaceRecord, TraceStep,
};
pub use scalar::Scalar;

pub type Matrix = DenseMatrix<f64>;
pub type Vector = DenseVector<f64>;
pub type Instance = ModelInstance<f64>;
pub type Knowledge = KnowledgeVector<f64>;
pub type Simulation = SimulationResult<f64>;
pub type Trace = OptimizationTrace<f64>;
pub type Surface = Vec<SurfaceRecord<f64>>;
