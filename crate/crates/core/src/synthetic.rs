//! Synthetic conditional distributions over `X ~ Unif(0, 1)` with
//! closed-form target statistics.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::metasample::{LabeledPoint, SamplingOracle};
use crate::rng::Stream;

pub const SCENARIO_IDS: &[&str] = &["variance-sine", "variance-line", "ucb", "minvar"];

/// Polynomial in `x` with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }
}

/// Mean curves used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    /// `2 + sin(4πx)`.
    Sine,
    /// `slope · x + intercept`.
    Line { slope: f64, intercept: f64 },
}

impl Curve {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Curve::Sine => 2.0 + (4.0 * PI * x).sin(),
            Curve::Line { slope, intercept } => slope * x + intercept,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `Y | x ~ Normal(mean(x), 1)`.
    Gaussian { mean: Curve },
    /// `Y | x ~ Gamma` with mean `mean(x)` and `E[Y] + λ·sd[Y] = ucb(x)`.
    Gamma { mean: Curve, ucb: Curve, lambda: f64 },
    /// `Y | x ~ Exponential` with mean `mean(x)`.
    Exponential { mean: Curve },
}

/// The conditional statistic a scenario targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Variance,
    Ucb {
        lambda: f64,
    },
    /// Expected minimum of `k + 1` i.i.d. draws.
    MinVar {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub d: usize,
    pub family: Family,
    pub statistic: Statistic,
    /// Closed-form target `θ*(x)`; every built-in scenario's target is polynomial.
    pub truth_poly: Polynomial,
}

impl Scenario {
    pub fn truth(&self, x: f64) -> f64 {
        self.truth_poly.eval(x)
    }

    /// Conditional mean `E[Y | x]`.
    pub fn mean(&self, x: f64) -> f64 {
        match self.family {
            Family::Gaussian { mean } | Family::Gamma { mean, .. } | Family::Exponential { mean } => mean.eval(x),
        }
    }

    pub fn draw_label(&self, rng: &mut Stream, x: f64) -> f64 {
        match self.family {
            Family::Gaussian { mean } => rng.normal(mean.eval(x), 1.0),
            Family::Gamma { mean, ucb, lambda } => {
                let (shape, scale) =
                    gamma_params(mean.eval(x), ucb.eval(x), lambda).expect("scenario keeps ucb above the mean");
                rng.gamma(shape, scale)
            }
            Family::Exponential { mean } => rng.exponential(mean.eval(x)),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance-sine" => Ok(scenario_variance_sine()),
            "variance-line" => Ok(scenario_variance_line()),
            "ucb" => Ok(scenario_ucb()),
            "minvar" => Ok(scenario_minvar()),
            _ => Err(Error::UnknownId {
                kind: "scenario",
                id: s.to_string(),
                valid: SCENARIO_IDS.join(", "),
            }),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

/// `Y | x ~ Normal(2 + sin(4πx), 1)`; target variance ≡ 1.
pub fn scenario_variance_sine() -> Scenario {
    Scenario {
        name: "variance-sine",
        d: 1,
        family: Family::Gaussian { mean: Curve::Sine },
        statistic: Statistic::Variance,
        truth_poly: Polynomial(vec![1.0]),
    }
}

/// `Y | x ~ Normal(2x − 1, 1)`; target variance ≡ 1.
pub fn scenario_variance_line() -> Scenario {
    Scenario {
        name: "variance-line",
        d: 1,
        family: Family::Gaussian {
            mean: Curve::Line {
                slope: 2.0,
                intercept: -1.0,
            },
        },
        statistic: Statistic::Variance,
        truth_poly: Polynomial(vec![1.0]),
    }
}

/// Gamma labels with mean `2 + sin(4πx)` and `ucb₈ = x + 10`.
pub fn scenario_ucb() -> Scenario {
    let lambda = 8.0;
    Scenario {
        name: "ucb",
        d: 1,
        family: Family::Gamma {
            mean: Curve::Sine,
            ucb: Curve::Line {
                slope: 1.0,
                intercept: 10.0,
            },
            lambda,
        },
        statistic: Statistic::Ucb { lambda },
        truth_poly: Polynomial(vec![10.0, 1.0]),
    }
}

/// Exponential labels with mean `5(x + 2)`; the expected minimum of 5 draws is `x + 2`.
pub fn scenario_minvar() -> Scenario {
    Scenario {
        name: "minvar",
        d: 1,
        family: Family::Exponential {
            mean: Curve::Line {
                slope: 5.0,
                intercept: 10.0,
            },
        },
        statistic: Statistic::MinVar { k: 4 },
        truth_poly: Polynomial(vec![2.0, 1.0]),
    }
}

/// Gamma `(shape, scale)` with mean `mu` and `mu + λσ = u`.
pub fn gamma_params(mu: f64, u: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("gamma mean must be positive, got {mu}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if u.partial_cmp(&mu) != Some(std::cmp::Ordering::Greater) {
        return Err(invalid(format!("ucb {u} must exceed the mean {mu}")));
    }
    let sigma = (u - mu) / lambda;
    Ok(((mu / sigma).powi(2), sigma * sigma / mu))
}

/// `count` i.i.d. pairs with `x ~ Unif(0, 1)` and `y ~ D_x`, drawn as
/// `x₁, y₁, x₂, y₂, …`.
pub fn sample(scenario: &Scenario, rng: &mut Stream, count: usize) -> Vec<LabeledPoint> {
    (0..count)
        .map(|_| {
            let x = rng.uniform();
            let y = scenario.draw_label(rng, x);
            LabeledPoint::scalar(x, y)
        })
        .collect()
}

/// `count` i.i.d. labels from `D_x`.
pub fn sample_at(scenario: &Scenario, rng: &mut Stream, x: f64, count: usize) -> Vec<f64> {
    (0..count).map(|_| scenario.draw_label(rng, x)).collect()
}

/// A scenario bound to a random stream, usable wherever a [`SamplingOracle`] is expected.
pub struct ScenarioOracle<'a> {
    pub scenario: &'a Scenario,
    pub rng: &'a mut Stream,
}

impl<'a> ScenarioOracle<'a> {
    pub fn new(scenario: &'a Scenario, rng: &'a mut Stream) -> Self {
        ScenarioOracle { scenario, rng }
    }
}

impl SamplingOracle for ScenarioOracle<'_> {
    fn dim(&self) -> usize {
        self.scenario.d
    }

    fn draw_x(&mut self) -> Vec<f64> {
        vec![self.rng.uniform()]
    }

    fn draw_label(&mut self, x: &[f64]) -> f64 {
        self.scenario.draw_label(self.rng, x[0])
    }
}
