//! Radial blow-up analysis for `-u'' - u'/r = lambda h(r) f(u)` on the unit
//! disc with `f = e^g` of (super)exponential growth.
//!
//! The crate is organised bottom-up:
//!
//! * [`growth`]: the nonlinearity families, evaluated in log form;
//! * [`recurrence`]: the energy recurrence tables `(a_k, delta_k, eta_k)`;
//! * [`profiles`]: the Liouville profiles the bubbles converge to;
//! * [`solver`]: shooting in `t = log(1/r)` with an adaptive RK pair;
//! * [`analysis`]: scaling/energy functions and bubble detection;
//! * [`bifurcation`]: sweeps over `mu` and turning points.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod analysis;
pub mod bifurcation;
pub mod growth;
pub mod numeric;
pub mod profiles;
pub mod recurrence;
pub mod solver;

pub use error::{Error, Result};
pub use growth::{Exponent, Family, GrowthModel, Weight};
