//! Deterministic solver for mixed-integer programs with bilinear equality
//! terms (`w = x * y`) over bounded variables.
//!
//! The pieces, bottom up:
//!
//! * [`program`]: the problem container. Linear rows with two-sided
//!   bounds, binary markers, and explicit product terms.
//! * [`lp`]: a bounded-variable primal simplex over the row-activity
//!   formulation, warm-startable across related solves.
//! * [`mccormick`]: envelope rows that relax each product over a factor
//!   box; exact whenever a factor is fixed.
//! * [`tighten`]: interval propagation through rows and products, used at
//!   every search node and to prune empty boxes early.
//! * [`bnb`]: best-first branch and bound with spatial bisection for the
//!   products and a rounding heuristic for incumbents.
//! * [`oracle`]: a slow exhaustive reference for small instances, kept
//!   free of the envelope machinery so the two paths check each other.
//! * [`io`]: flat-text dump/load for replaying instances.
//!
//! Everything is f64 and single-threaded; identical inputs produce
//! identical outputs, bit for bit.

pub mod bnb;
pub mod io;
pub mod lp;
pub mod mccormick;
pub mod oracle;
pub mod program;
pub mod tighten;

pub use bnb::{branch, solve, BnbNode, MiblSolution, SolveError, SolveOptions, SolveStatus};
pub use lp::{solve_lp, Lp, LpError, LpSolution, LpStatus};
pub use mccormick::{envelope_rows, mccormick_relax, product_interval};
pub use oracle::{brute_force_reference, OracleError, OracleResult};
pub use program::{MiblProgram, Product, ProgramError, Row, INF};
pub use tighten::{propagate, EmptyBox};
