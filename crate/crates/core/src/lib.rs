//! Multi-observation empirical risk minimization.
//!
//! Losses that score one prediction against several labels drawn at the same
//! `x` (variance, UCB, MINVAR) cannot be fitted from ordinary `(x, y)` data
//! directly. This crate builds *metasamples* `(x, y₁, …, y_m)` from such data,
//! fits generalized-linear hypotheses to them, and benchmarks the result
//! against single-observation baselines on synthetic scenarios.
//!
//! - [`losses`]: multi-observation losses and the UCB identification function
//! - [`metasample`]: metasample constructors, ε-matching and sample budgets
//! - [`erm`]: feature bases, least-squares and gradient ERM
//! - [`synthetic`]: benchmark scenarios and their closed-form targets
//! - [`baselines`]: two-moment and empirical single-observation methods
//! - [`evaluation`]: MSE against the target, trials and experiment summaries
//! - [`rng`]: the seeded stream and samplers everything draws from
//!
//! ```
//! use multiobs::erm::{fit_least_squares, FeatureBasis};
//! use multiobs::losses::variance_loss;
//! use multiobs::metasample::sliding_window;
//! use multiobs::rng::Stream;
//! use multiobs::synthetic::{sample, scenario_variance_line};
//!
//! let scenario = scenario_variance_line();
//! let mut rng = Stream::from_seed(1);
//! let data = sample(&scenario, &mut rng, 4000);
//! let metasamples = sliding_window(&data, 2)?;
//! let fit = fit_least_squares(&metasamples, &variance_loss(), FeatureBasis::affine(1))?;
//! // The true conditional variance is 1 everywhere.
//! assert!((fit.hypothesis.w[0] - 1.0).abs() < 0.2 && fit.hypothesis.w[1].abs() < 0.4);
//! # Ok::<(), multiobs::Error>(())
//! ```

pub mod baselines;
pub mod erm;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod metasample;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
