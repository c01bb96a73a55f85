//! Locally D-optimal approximate crossover designs for generalized linear
//! models with correlated within-subject responses.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common double-precision case. Simulation is `f64` only.

// `!(a > b)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod design;
pub mod error;
pub mod family;
pub mod fixtures;
pub mod gee;
pub mod linalg;
pub mod optimizer;
pub mod problem;
pub mod scalar;
pub mod simulation;

pub use correlation::{
    build_correlation, default_rho_tables, CorrelationKind, CorrelationMatrix, CorrelationSpec, DefaultRhos, RhoTable,
    Scenario, StructureId,
};
pub use design::{
    build_design_matrix, build_full_indicator_matrix, enumerate_permutation_sequences, parameter_count, parse_sequence,
    parse_sequences, tau_selector, Design, ParamVector, Sequence,
};
pub use error::{Error, Result};
pub use family::Family;
pub use gee::{assemble, mean_vector, GeeAssembly, SequenceBlock, VarianceReport};
pub use linalg::Matrix;
pub use optimizer::{
    grid_oracle_2seq, kkt_satisfied, misspec_table, optimize, optimize_assembly, project_to_simplex,
    relative_d_efficiency, sensitivity, MisspecRow, MisspecTable, OptimizationResult, OptimizerConfig,
};
pub use problem::DesignProblem;
pub use scalar::Real;

pub type MatrixF64 = Matrix<f64>;
pub type DesignF64 = Design<f64>;
pub type DesignProblemF64 = DesignProblem<f64>;
pub type CorrelationSpecF64 = CorrelationSpec<f64>;
pub type GeeAssemblyF64 = GeeAssembly<f64>;
pub type OptimizationResultF64 = OptimizationResult<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type DesignProblemF32 = DesignProblem<f32>;
