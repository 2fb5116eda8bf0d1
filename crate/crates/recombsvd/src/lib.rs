//! Recombination hot spot detection for aligned sequence populations.
//!
//! The pipeline: build the smoothed Hamming distance matrix over all
//! sequence pairs ([`distmat`]), take its top singular triplets ([`svd`]),
//! test the second and later right singular vectors for the smooth
//! sign-transition structure that recombination induces, and locate the
//! transition by slope maximization ([`detector`]). A population simulator
//! ([`simgen`]) and an evaluation harness ([`harness`]) reproduce the
//! synthetic study the method was validated on.

pub mod detector;
pub mod distmat;
pub mod error;
pub mod harness;
pub mod seqio;
pub mod simgen;
pub mod svd;

pub use error::{Error, Result};
