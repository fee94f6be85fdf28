//! Monte Carlo integration with a growing family of control variates.
//!
//! The central estimator regresses integrand values on a set of zero-mean
//! basis functions and reads the integral estimate off the fitted intercept.
//! With a well-chosen basis whose size grows with the sample size, the
//! residual standard deviation, and with it the error of the estimate, can
//! shrink much faster than the 1/sqrt(n) of plain Monte Carlo.
//!
//! The crate is organized around that workflow:
//!
//! * [`domain`]: box domains, uniform sampling, seed derivation,
//! * [`quadrature`]: Gauss-Legendre oracles for ground-truth integrals,
//! * [`basis`]: indicator, Legendre, tensor-Legendre, and custom families,
//! * [`estimator`]: naive Monte Carlo, the regression estimator in two
//!   algebraic forms, sample weights, and oracle-coefficient variants,
//! * [`diagnostics`]: leverage functions and basis-growth checks,
//! * [`experiments`]: replicated studies (error rates, normality, coverage,
//!   cost-matched comparisons) with deterministic seeding,
//! * [`stats`]: quantiles, an exact Kolmogorov-Smirnov distribution, slopes,
//! * [`cli`]: the command-line front end.

pub mod basis;
pub mod cli;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod integrand;
pub mod quadrature;
pub mod stats;

pub use error::{CvmcError, Result};
