//! Certificates and counterexamples for planar sets whose distance function
//! is a difference of convex functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`plcalc`]: exact piecewise-linear calculus (convexity, DC splits, controls)
//! * [`planar`]: points, rotations, cones and tangent fans
//! * [`arrangement`]: exact segment arrangements and face location
//! * [`sets`]: finite presentations of closed planar sets
//! * [`field`]: distance functions and their line restrictions
//! * [`certify`]: the cone-potential construction and the cone-emptiness witness search
//! * [`analyze`]: components, isolated points, tangent singularities, paths
//! * [`render`]: SVG figures of scenes with Ψ and witness overlays
//!
//! Geometry and calculus are generic over [`Scalar`]; the aliases below fix
//! the exact rational instance used by the pipelines.

pub mod analyze;
pub mod arrangement;
pub mod certify;
pub mod error;
pub mod field;
pub mod planar;
pub mod plcalc;
pub mod render;
pub mod scalar;
pub mod scenes;
pub mod sets;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;
pub type PlFunction = plcalc::PiecewiseLinear<Rational>;
pub type PlFunctionF64 = plcalc::PiecewiseLinear<f64>;
pub type Point = planar::Point<Rational>;
pub type PointF64 = planar::Point<f64>;
pub type Rotation = planar::Rotation<Rational>;
pub type Similarity = planar::Similarity<Rational>;
pub type Cone = planar::Cone<Rational>;
