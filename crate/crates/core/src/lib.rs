//! Movable intelligent surface (MIS) model and max-min SNR design.
//!
//! A MIS stacks a small movable metasurface (MS 2) on a larger fixed one
//! (MS 1). Both carry static phases; sliding MS 2 over the grid of MS 1
//! changes which elements superimpose and so synthesizes a different beam
//! pattern per shift position. This crate models the shift combinatorics and
//! the line-of-sight channel, and jointly designs both phase profiles and the
//! per-user shift schedule to maximize the worst user SNR, using Riemannian
//! conjugate gradient over the product of two complex circle manifolds and a
//! multinomial manifold, with log-sum-exp smoothing of the min.
//!
//! ```
//! use mis_core::{experiments, solver::SolverConfig};
//!
//! let spec = experiments::case_study_spec(6).unwrap();
//! let config = SolverConfig { restarts: 2, ..Default::default() };
//! let study = experiments::case_study(6, &spec, &config).unwrap();
//! assert!(study.mis.worst_snr >= study.sms.worst_snr);
//! ```

pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod manifolds;
pub mod objective;
pub mod oracle;
pub mod solver;

pub use channel::{ArrayAngles, CascadedChannel, Scenario, User};
pub use error::{Error, Result};
pub use geometry::{MisGeometry, PatternGrid, SelectionOperator, ShiftPosition};
pub use manifolds::TangentTriple;
pub use objective::{Problem, ProductPoint, SmoothingState};
pub use solver::{solve, SolveReport, SolverConfig};
