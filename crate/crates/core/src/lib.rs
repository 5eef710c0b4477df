//! Mixed finite elements for Biot consolidation with weakly imposed stress
//! symmetry: stress, displacement, rotation, Darcy flux and pressure.

pub mod assembly;
pub mod element;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod verification;

pub use element::{ElementKind, FeError};
pub use mesh::{BoundaryPartition, Diagonal, Mesh, MeshError, Side};
pub use space::{FieldRole, FunctionSpace};
pub use sparse::{CsrMatrix, DirectSolver, SolverError, TripletBuilder};
pub use assembly::{ElementPair, MixedSpaces};
pub use problem::{BiotProblem, ExactSolution, FieldValues, MaterialParams};
pub use solver::{BiotError, BiotSolver, DiscreteState, TimeGrid, TimeScheme};
