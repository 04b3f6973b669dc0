//! Strictly monotone mean-variance (SMMV) preferences and portfolio selection.
//!
//! The crate is organised bottom-up:
//!
//! * [`probspace`]: finite probability spaces, random-variable algebra and
//!   lognormal quadrature.
//! * [`preference`]: MV and SMMV evaluation, the λ-equation, Gâteaux
//!   derivatives and a QP oracle for the dual representation.
//! * [`static_portfolio`]: the single-period SMMV portfolio problem.
//! * [`ct_market`]: deterministic-coefficient Black-Scholes market and ζ models.
//! * [`ct_game`]: closed-form saddle points and the embedding-duality solver.
//! * [`sim`]: Monte-Carlo engine for the controlled state equations.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ct_game;
pub mod ct_market;
pub mod error;
pub mod preference;
pub mod probspace;
pub mod qp;
pub mod roots;
pub mod sim;
pub mod static_portfolio;

pub use error::{Error, Result};
