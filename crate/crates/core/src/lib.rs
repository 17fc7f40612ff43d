//! Finite element laboratory for linear parabolic equations with Robin
//! boundary conditions.
//!
//! The crate discretizes `u_t = Au + f` in a bounded domain with the flux
//! condition `(a grad u + b u) . nu + beta u = g` on the boundary, using P1
//! elements on the unit interval or on polygons, and provides numerical
//! checks of the qualitative and quantitative properties of the solutions:
//! conservation, decay, convergence to equilibrium, frequency transfer for
//! almost periodic forcing, and sup-norm bounds of De Giorgi type.
//!
//! ```
//! use robin_lab::{assemble, build_interval_mesh, CoefficientSet};
//!
//! let mesh = build_interval_mesh(16).unwrap();
//! let system = assemble(mesh, &CoefficientSet::laplacian(), 4).unwrap();
//! let one = vec![1.0; system.ndof()];
//! assert!((system.integral(&one) - 1.0).abs() < 1e-12);
//! ```

pub mod almost_periodic;
pub mod coefficients;
pub mod degiorgi;
pub mod error;
pub mod expr;
pub mod extended;
pub mod forms;
pub mod linalg;
pub mod mean_spaces;
pub mod mesh;
pub mod parabolic;
pub mod quadrature;
pub mod signal;

pub use coefficients::{BoundaryField, CoefficientSet, Field};
pub use error::{LabError, Result};
pub use forms::{
    assemble, check_conservation_condition, check_ellipticity, check_fixedpoint_condition,
    estimate_garding, AssembledSystem, Garding,
};
pub use mesh::{build_interval_mesh, build_polygon_mesh, Mesh, Point};
pub use parabolic::{solve_parabolic, solve_resolvent, TimeStepping, Trajectory};
pub use signal::{Signal, Target, Temporal};
