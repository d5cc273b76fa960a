//! Pathwise Stieltjes-type and rough integrals computed through
//! Weyl–Marchaud fractional derivatives of sampled paths.
//!
//! Every routine is generic over the scalar type (see [`Real`]); the
//! `*64` aliases at the crate root fix it to `f64`.

pub mod bv;
pub mod error;
pub mod frac_calc;
pub mod gaussian;
pub mod lift;
pub mod oracle;
pub mod path;
pub mod potentials;
pub mod quadrature;
pub mod rough;
pub mod scalar;
pub mod young;

pub use bv::{BVCoefficient, JumpConvention, RadonMeasure, BV1D};
pub use error::{Error, Result};
pub use gaussian::{sample_path, Family, GaussianModel, GaussianSampler};
pub use frac_calc::{compensated_frac_derivative, frac_derivative, BaseCorrection, FracDerivSpec, JumpPath, Side, Sites};
pub use path::{uniform_grid, HolderMode, SampledPath, SeminormKind, SeminormReport};
pub use lift::{Construction, MultiplicativeFunctional};
pub use oracle::{dyadic_ladder, midpoint_compensated_oracle, riemann_stieltjes_oracle, OracleKind, OracleResult};
pub use scalar::Real;
pub use potentials::{riesz_potential, segment_functional, sup_occupation_functional, truncated_maximal, variability_norm, SegmentOptions};
pub use rough::{rough_integrate, AlphaWindow, BoundReport, RoughIntegralResult};
pub use young::{YoungIntegralResult, zahle_integral, composition_integral};

pub type Path64 = SampledPath<f64>;
pub type Path32 = SampledPath<f32>;
