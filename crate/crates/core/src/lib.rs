//! Analytic Newton's cradles: mass-spring chains whose normal-mode
//! spectrum is engineered from special persymmetric q-Racah polynomials
//! so that a momentum kick on the first mass arrives undispersed at the
//! last one.
//!
//! Pipeline: [`spectrum`] integers → [`jacobi`] matrix → [`synthesis`]
//! of masses and springs → optional [`transforms`] → [`dynamics`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bidiag;
pub mod dynamics;
pub mod error;
pub mod jacobi;
pub mod par;
pub mod pipeline;
pub mod qkernel;
pub mod spectrum;
pub mod synthesis;
pub mod transforms;

pub use error::{CradleError, Result};

use serde::{Deserialize, Serialize};

/// End conditions of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Both end masses tied to walls by springs `K_0` and `K_{N+1}`.
    FixedFixed,
    /// Free ends; the spectrum contains the translation mode `ω_0 = 0`.
    FreeFree,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::FixedFixed => "fixed-fixed",
            Boundary::FreeFree => "free-free",
        })
    }
}
