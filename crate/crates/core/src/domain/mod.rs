//! Convex domains, sampled paths and the Skorohod reflection map.
//!
//! One-dimensional domains have exact reflection formulas; every other kind
//! is handled by projecting each fine-grid increment back onto the closure.

mod config;
mod path;
mod shape;
mod skorohod;

pub use config::DomainSpec;
pub use path::{total_variation, NodePosition, SampledPath, TimeGrid};
pub use shape::{DomainShape, Polytope, MAX_ITER, TAU_CONE, TAU_INT_REL, TAU_PROJ};
pub use skorohod::{skorohod_halfline, skorohod_interval, skorohod_projected, ReflectedPair};

pub(crate) use path::distance;
