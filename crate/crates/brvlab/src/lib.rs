//! Closed-form tail asymptotics for randomly weighted heavy-tailed sums, with
//! the Monte-Carlo machinery to check them.
//!
//! The library builds bivariate models `(X_i, Y_i, Theta_i, Delta_i)` whose
//! conditional tails have known limit factors, evaluates the resulting limit
//! objects exactly (weighted tail moments, product and sum measures, ruin
//! coefficients), and estimates the same quantities by seeded, reproducible
//! simulation so the two can be compared on a grid of tail levels.

pub mod asymptotics;
pub mod cli;
pub mod dep_families;
pub mod error;
pub mod limit_measure;
pub mod mc_engine;
pub mod quadrature;
pub mod risk_sim;
pub mod rv_core;

pub use error::{Error, Result};
