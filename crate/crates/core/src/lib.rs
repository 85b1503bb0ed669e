//! Mean dimension and entropy of finitely generated semigroup actions on
//! compact metric spaces, estimated from finite models.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod fit;
pub mod harness;
pub mod mdim;
pub mod measure;
pub mod packing;
pub mod screen;
pub mod semigroup;
pub mod space;

pub use entropy::{
    CountCache, CurveEntry, CurveMode, CurvePoint, Discretization, EntropyCurve, GlwParams,
    MeasureRef, MeasureSample, WalkParams,
};
pub use error::{Error, Result};
pub use fit::{fit_line, LineFit};
pub use harness::{
    emit_report, parse_config, run_experiment, run_with_workers, ConfigError, ConfigErrors,
    ExperimentConfig, RunReport,
};
pub use mdim::{ComparatorReport, ComparatorRow, MdimEstimate, ScaledSystem, Tolerances, Verdict};
pub use packing::{
    exact_small_oracle, greedy_spanning, maximal_separated, min_subcover, min_subcover_mass,
    CoverSpec, FinModel, MatrixProximity, OracleInstance, OracleMode, Proximity, SetSystem,
    SpanRule,
};
pub use semigroup::{GeneratorMap, RandomWalk, SemigroupSystem, Word};
pub use space::{Point, SpaceDescriptor};
