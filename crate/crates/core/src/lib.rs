//! Likelihoods of quantized observations under logconcave noise.
//!
//! Observations follow `z = Q(Ψ^{-1}(S x + w))` with `w` drawn from a
//! logconcave product density and `Q` a quantizer whose inverse images are
//! convex. For such quantizers the likelihood `P_w[W_z(x, Ψ)]` is
//! logconcave in `x` (any fixed `Ψ`), jointly in `(x, ψ)` for `Ψ = ψ I`, and
//! jointly in `(x, Λ)` for diagonal `Ψ = Λ` when `Q` is a bank of
//! independent ADCs. The [`estimate`] solvers rely on that, and the
//! [`geometry`] and [`suite`] modules check the underlying set identities by
//! brute force.

// `!(a < b)` rejects NaN along with the ordered failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod geometry;
pub mod likelihood;
pub mod noise;
pub mod quantizer;
pub mod suite;

pub use error::{Error, Result};
pub use likelihood::{
    continuous_loglik, continuous_loglik_without_jacobian, dataset_loglik, grad_quantized_loglik,
    quantized_loglik, simulate_codes, LikelihoodValue, LocationScaleModel, McSettings, Method,
    Scale,
};
pub use noise::{Family, NoiseModel};
pub use quantizer::{BoxRegion, Code, Halfspace, Polytope, Quantizer, Region};
