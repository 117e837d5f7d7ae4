//! Normalized minimizers of the two-dimensional Kirchhoff energy with a
//! trapping potential, and their concentration as the Kirchhoff coefficient
//! vanishes.

pub mod asymptotics;
pub mod error;
pub mod field;
pub mod ground_state;
pub mod io;
pub mod limit_oracle;
pub mod minimizer;
pub mod potential;

pub use asymptotics::{DiagnosticsReport, FitMode, FitResult, SweepResult, SweepRow};
pub use error::{Error, Result};
pub use field::{EnergyBreakdown, Field2D, FieldIntegrals, GridSpec, SampledPotential, Stencil};
pub use ground_state::{
    GroundState, GroundStateConstants, RadialProfile, ShootingOutcome, ShootingTrace,
};
pub use minimizer::{Init, MinimizeConfig, MinimizerResult, Problem};
pub use potential::{LocalModel, PotentialSpec, WellAnalysis, WellSpec};
