//! Local-to-nonlocal (LtN) optimization-based coupling in one dimension.
//!
//! A nonlocal diffusion model on `[−ε, 1+ε]` is coupled to a local Poisson
//! model on `[0.75, 1.75]` by minimizing the L² mismatch of the two states
//! on their overlap, with the virtual volume constraint on the right
//! nonlocal collar and the virtual Dirichlet value at the left end of the
//! local domain as controls.

pub mod banded;
pub mod bfgs;
pub mod cases;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod kernels;
pub mod optimizer;
pub mod quadrature;
pub mod reference;
pub mod state;

pub use bfgs::{BfgsOptions, Termination};
pub use cases::{Case, Cubic};
pub use diagnostics::{ConvergenceRecord, ConvergenceTable, ModelingStudy, PropertyReport, SolveSettings};
pub use error::{LtnError, Result};
pub use fem::{CgField, DgField, LoadSpec, PiecewiseLinear};
pub use geometry::{standard_layout, DomainLayout, Interval, Mesh1D};
pub use kernels::{KernelFamily, KernelSpec};
pub use optimizer::{LtnSolution, Solver, SolverReport};
pub use state::{ControlPair, CoupledProblem, Discretization, ProblemData, StatePair};
