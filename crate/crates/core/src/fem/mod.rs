//! SIMP-interpolated 2D linear elasticity on structured quadrilateral meshes.

pub mod element;
pub mod skyline;
pub mod stress;
pub mod system;

pub use element::{element_stiffness, square_element_stiffness, Matrix8};
pub use stress::{max_solid_von_mises, von_mises, ElementStress};
pub use system::{
    DofConstraints, FactoredStiffness, FeSystem, LoadCase, LoadKind, MaterialParams, SolveResult,
    StiffnessMatrix,
};
