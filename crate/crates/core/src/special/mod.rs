//! Special functions, fractional integrals and quadrature.

pub mod abel;
pub mod bessel;
pub mod fractional;
pub mod gamma;
pub mod quad;
pub mod riesz;
pub mod sampled;

pub use abel::{abel_quadrature, abel_quadrature_supported};
pub use bessel::bessel_i_scaled;
pub use fractional::{
    rl_asymptotics_report, rl_fractional_integral, rl_fractional_integral_split, AsymptoticsReport,
};
pub use gamma::{ball_volume, gamma, ln_gamma, sphere_area};
pub use quad::{Estimate, QuadratureSpec};
pub use riesz::riesz_potential;
pub use sampled::{Extrapolation, SampledFunction1D};
