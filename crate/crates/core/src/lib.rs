//! Bayesian analysis of specular neutron and X-ray reflectometry.
//!
//! A slab model is evaluated with the Abelès/Parratt recursion, compared to
//! data through a Gaussian or Poisson likelihood, and sampled with an
//! affine-invariant ensemble sampler. Chains are diagnosed (autocorrelation,
//! R̂, normality) and summarised into a reproducible report.
//!
//! Scattering length densities are in units of 1e-6 Å⁻² throughout.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain_io;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod kernel;
pub mod likelihood;
pub mod pipeline;
pub mod plot;
pub mod priors;
pub mod report;
pub mod sampler;
pub mod summary;

pub const NAME: &str = "reflbayes";
pub const PKG_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Software identifier stamped into chain metadata.
pub const VERSION: &str = concat!("reflbayes ", env!("CARGO_PKG_VERSION"));

pub use data::{BoundModel, Layer, LayerField, ModelField, Parameter, ReflectivityCurve, SlabModel};
pub use kernel::{compute_reflectivity, profile_depths, sld_profile, QGrid};
pub use likelihood::{LikelihoodSpec, Posterior, Transform};
pub use priors::Prior;
pub use sampler::{run_sampler, Chain, SamplerSettings};
