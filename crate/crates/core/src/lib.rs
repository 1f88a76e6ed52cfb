//! Numerical verification and falsification of Hadamard-type inequalities
//! for convex, P- and Godunova-Levin functions, in one dimension and on
//! the co-ordinates of a rectangle.
//!
//! The pieces, bottom up:
//!
//! * [`expr`]: the expression language candidate functions are written in.
//! * [`quadrature`]: adaptive Gauss-Legendre integration on intervals and
//!   rectangles, with two-grid error estimates.
//! * [`classes`]: sampled membership checks with violation witnesses.
//! * [`chains`]: term-by-term evaluation of each inequality chain.
//! * [`probe`]: seeded generation of certified class members, chain fuzzing,
//!   falsification search and tightness reporting.
//! * [`report`] and [`cli`]: serialization and the command-line front end.

pub mod chains;
pub mod classes;
pub mod cli;
pub mod domain;
pub mod expr;
pub mod func;
pub mod probe;
pub mod quadrature;
pub mod report;

pub use domain::{Domain, Interval, Rect};
pub use expr::{parse, Expr};
