//! Additive regression estimation under random right-censoring.
//!
//! The pipeline couples an inverse-probability-of-censoring-weighted (IPCW)
//! kernel regression estimator of the full regression surface with the
//! marginal integration method, yielding one estimated additive component per
//! covariate axis together with plug-in asymptotic-normal confidence bands.
//!
//! Modules follow the stages of the pipeline:
//!
//! * [`kernels`] — compactly supported kernels, including higher-order
//!   constructions with verified vanishing moments;
//! * [`survival`] — Kaplan–Meier estimation of the censoring survival
//!   function and IPCW response transforms;
//! * [`density`] — multivariate kernel density estimation for the covariates;
//! * [`regression`] — the IPCW regression surface and its known-density /
//!   known-censoring oracle variants;
//! * [`additive`] — marginal integration into per-axis components;
//! * [`inference`] — bias and variance plug-ins, standardized statistics,
//!   and confidence intervals;
//! * [`simulate`] — seeded data generation and Monte Carlo study harness;
//! * [`config`], [`io`], [`cli`] — JSON configuration, CSV/JSON input and
//!   output, and the command-line front end.

pub mod additive;
pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod inference;
pub mod io;
pub mod kernels;
pub mod quad;
pub mod regression;
pub mod simulate;
pub mod survival;

pub use error::{Error, Result};
