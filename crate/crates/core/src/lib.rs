//! Newton and gradient methods for density shape functionals `J(Ω) = ∫_Ω f`
//! on polygonal domains, with Wendland-kernel approximate-normal basis fields.

pub mod error;
pub mod fields;
pub mod geometry;
pub mod quadrature;
pub mod optimize;
pub mod shape_calculus;
pub mod verify;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

pub use error::{Error, Result};
pub use fields::{builtin_field, BasisCombination, BasisField, BuiltinField, DensityField, ScalarField, VectorField, WendlandKernel};
pub use geometry::{build_frame, resample_uniform, shoelace_area, BoundaryFrame, PolygonalShape};
