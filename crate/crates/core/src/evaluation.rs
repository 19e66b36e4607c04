//! Mean-squared error against the true statistic, single trials and
//! experiment summaries over many seeded trials.
//!
//! Trial `i` of an experiment seeded with `s` draws everything from
//! `Stream::for_trial(s, i)`, so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_empirical, fit_two_moment, TwoMomentFit};
use crate::erm::{fit_gradient, fit_least_squares, least_squares, FeatureBasis, GradientOptions, Hypothesis};
use crate::error::{invalid, Error, Result};
use crate::losses::{minvar_loss, ucb_cubic_loss, variance_loss, MultiObsLoss};
use crate::metasample::{
    epsilon_nearby, improved_sampling_fixed, naive_sampling, sliding_window, Constructor, LabeledPoint, Metasample,
    DEFAULT_NEARBY_CAP,
};
use crate::rng::Stream;
use crate::synthetic::{sample, Scenario, ScenarioOracle, Statistic};

pub const DEFAULT_MC_SAMPLES: usize = 1000;
/// Grid on which two-moment variance fits are checked for clamping.
const CLAMP_GRID: usize = 1001;

pub const METHOD_IDS: &[&str] = &[
    "naive",
    "improved",
    "sliding",
    "nearby",
    "nearby:<epsilon>",
    "2mom-linear",
    "2mom-quad",
    "empirical",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Build metasamples, then fit by ERM under the scenario's multi-observation loss.
    Metasample(Constructor),
    /// Two-moment approach with affine fits of both moments.
    TwoMomentLinear,
    /// Two-moment approach with quadratic fits of both moments.
    TwoMomentQuad,
    Empirical,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2mom-linear" => Ok(Method::TwoMomentLinear),
            "2mom-quad" => Ok(Method::TwoMomentQuad),
            "empirical" => Ok(Method::Empirical),
            _ => s.parse().map(Method::Metasample).map_err(|_| Error::UnknownId {
                kind: "method",
                id: s.to_string(),
                valid: METHOD_IDS.join(", "),
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Metasample(c) => c.fmt(f),
            Method::TwoMomentLinear => f.write_str("2mom-linear"),
            Method::TwoMomentQuad => f.write_str("2mom-quad"),
            Method::Empirical => f.write_str("empirical"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MseMethod {
    /// Closed form whenever prediction and truth are polynomials.
    #[default]
    Auto,
    MonteCarlo,
}

/// Per-method knobs. Absent fields take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    /// ε for `improved` and `nearby`; default `1/(2√n)`.
    pub epsilon: Option<f64>,
    /// `naive` uses `⌊C·√n⌋` representatives; default 1.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    /// Hypothesis basis for multi-observation and empirical fits; default `affine`.
    pub basis: Option<String>,
    /// Multi-observation loss; default follows the scenario's statistic.
    pub loss: Option<String>,
    pub step: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    /// Labels per point for `empirical`; default `round(√n)`, or `k + 1` for MINVAR.
    pub k: Option<usize>,
    pub mc_samples: Option<usize>,
    pub nearby_cap: Option<usize>,
    pub mse: Option<MseMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: String,
    pub method: String,
    /// Labeled samples drawn per trial.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub method_params: MethodParams,
}

/// A validated [`ExperimentSpec`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub method: Method,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub loss: MultiObsLoss,
    pub basis: FeatureBasis,
    pub solver: GradientOptions,
    pub epsilon: f64,
    pub naive_c: f64,
    pub empirical_k: usize,
    pub mc_samples: usize,
    pub nearby_cap: usize,
    pub mse: MseMethod,
}

impl ExperimentSpec {
    /// Parses identifiers and fills defaults; fails before any sampling.
    pub fn resolve(&self) -> Result<Experiment> {
        let scenario: Scenario = self.scenario.parse()?;
        let method: Method = self.method.parse()?;
        let p = &self.method_params;
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be positive"));
        }
        let loss = match &p.loss {
            Some(id) => id.parse()?,
            None => default_loss(scenario.statistic)?,
        };
        let basis = match &p.basis {
            Some(id) => id.parse::<FeatureBasis>()?,
            None => FeatureBasis::affine(1),
        }
        .with_input_dim(scenario.d)?;
        let defaults = GradientOptions::default();
        let solver = GradientOptions {
            init: None,
            step: p.step.unwrap_or(defaults.step),
            max_iter: p.max_iter.unwrap_or(defaults.max_iter),
            tol: p.tol.unwrap_or(defaults.tol),
            lower_clamp: None,
        };
        let epsilon = match (method, p.epsilon) {
            (Method::Metasample(Constructor::Nearby { epsilon: Some(e) }), _) => e,
            (_, Some(e)) => e,
            _ => 1.0 / (2.0 * (self.n as f64).sqrt()),
        };
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        let naive_c = p.c.unwrap_or(1.0);
        if !(naive_c > 0.0 && naive_c.is_finite()) {
            return Err(invalid(format!("C must be positive, got {naive_c}")));
        }
        let empirical_k = match (p.k, scenario.statistic) {
            (Some(k), _) => k,
            (None, Statistic::MinVar { k }) => k + 1,
            (None, _) => ((self.n as f64).sqrt().round() as usize).max(2),
        };
        match (method, scenario.statistic) {
            (Method::TwoMomentLinear | Method::TwoMomentQuad, Statistic::MinVar { .. }) => {
                return Err(invalid("the two-moment approach has no MINVAR variant"))
            }
            (Method::Metasample(_), _) if loss.m() < 1 => unreachable!(),
            _ => {}
        }
        let mc_samples = p.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
        if mc_samples == 0 {
            return Err(invalid("mc_samples must be positive"));
        }
        Ok(Experiment {
            scenario,
            method,
            n: self.n,
            trials: self.trials,
            seed: self.seed,
            loss,
            basis,
            solver,
            epsilon,
            naive_c,
            empirical_k,
            mc_samples,
            nearby_cap: p.nearby_cap.unwrap_or(DEFAULT_NEARBY_CAP),
            mse: p.mse.unwrap_or_default(),
        })
    }
}

/// The multi-observation loss that elicits `statistic`: squared forms for
/// variance and MINVAR, the cubic UCB loss otherwise.
pub fn default_loss(statistic: Statistic) -> Result<MultiObsLoss> {
    match statistic {
        Statistic::Variance => Ok(variance_loss()),
        Statistic::MinVar { k } => minvar_loss(k),
        Statistic::Ucb { lambda } => ucb_cubic_loss(lambda),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial_index: u64,
    /// Absent when the trial failed.
    pub mse: Option<f64>,
    pub error: Option<String>,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub failures: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Experiment {
    pub fn run_trial(&self, trial_index: u64) -> TrialResult {
        let mut diagnostics = BTreeMap::new();
        let mut rng = Stream::for_trial(self.seed, trial_index);
        match self.trial_mse(&mut rng, &mut diagnostics) {
            Ok(mse) if mse.is_finite() => TrialResult {
                trial_index,
                mse: Some(mse),
                error: None,
                diagnostics,
            },
            Ok(mse) => TrialResult {
                trial_index,
                mse: None,
                error: Some(Error::NonFinite(format!("mse {mse}")).to_string()),
                diagnostics,
            },
            Err(e) => TrialResult {
                trial_index,
                mse: None,
                error: Some(e.to_string()),
                diagnostics,
            },
        }
    }

    /// Every trial, in index order.
    pub fn run_trials(&self, parallel: bool) -> Vec<TrialResult> {
        let indices = 0..self.trials as u64;
        if parallel {
            indices.into_par_iter().map(|i| self.run_trial(i)).collect()
        } else {
            indices.map(|i| self.run_trial(i)).collect()
        }
    }

    pub fn run(&self, parallel: bool) -> Result<Summary> {
        summarize(&self.run_trials(parallel))
    }

    fn trial_mse(&self, rng: &mut Stream, diag: &mut BTreeMap<String, f64>) -> Result<f64> {
        let scenario = &self.scenario;
        match self.method {
            Method::Metasample(constructor) => {
                let metasamples = self.construct(constructor, rng, diag)?;
                diag.insert("metasamples".into(), metasamples.len() as f64);
                let h = self.fit_metasamples(&metasamples, diag)?;
                self.hypothesis_mse(&h, rng, diag)
            }
            Method::TwoMomentLinear | Method::TwoMomentQuad => {
                let basis = match self.method {
                    Method::TwoMomentLinear => FeatureBasis::affine(scenario.d),
                    _ => FeatureBasis::polynomial(2),
                };
                let data = sample(scenario, rng, self.n);
                let fit = fit_two_moment(&data, basis, scenario.statistic)?;
                self.two_moment_mse(&fit, rng, diag)
            }
            Method::Empirical => {
                let mut oracle = ScenarioOracle::new(scenario, rng);
                let fit = fit_empirical(&mut oracle, self.n, self.empirical_k, scenario.statistic, self.basis)?;
                diag.insert("points".into(), fit.points as f64);
                self.hypothesis_mse(&fit.hypothesis, rng, diag)
            }
        }
    }

    fn construct(
        &self,
        constructor: Constructor,
        rng: &mut Stream,
        diag: &mut BTreeMap<String, f64>,
    ) -> Result<Vec<Metasample>> {
        let m = self.loss.m();
        match constructor {
            Constructor::Naive => {
                let reps = ((self.naive_c * (self.n as f64).sqrt()).floor() as usize).clamp(1, self.n);
                let mut oracle = ScenarioOracle::new(&self.scenario, rng);
                let out = naive_sampling(&mut oracle, reps, m, self.n - reps)?;
                diag.insert("near_fraction".into(), out.near_fraction);
                Ok(out.metasamples)
            }
            Constructor::Improved => {
                let data = sample(&self.scenario, rng, self.n);
                let out = improved_sampling_fixed(&data, m, self.epsilon)?;
                diag.insert("representatives".into(), out.n as f64);
                Ok(out.metasamples)
            }
            Constructor::Sliding => sliding_window(&sample(&self.scenario, rng, self.n), m),
            Constructor::Nearby { .. } => {
                epsilon_nearby(&sample(&self.scenario, rng, self.n), m, self.epsilon, self.nearby_cap)
            }
        }
    }

    fn fit_metasamples(&self, metasamples: &[Metasample], diag: &mut BTreeMap<String, f64>) -> Result<Hypothesis> {
        if self.loss.has_psi() {
            let fit = fit_least_squares(metasamples, &self.loss, self.basis)?;
            diag.insert("ridge".into(), if fit.ridge.is_some() { 1.0 } else { 0.0 });
            return Ok(fit.hypothesis);
        }
        let init = match self.scenario.statistic {
            Statistic::Ucb { lambda } => Some(two_moment_init(metasamples, self.basis, lambda)?),
            _ => None,
        };
        let opts = GradientOptions {
            init,
            ..self.solver.clone()
        };
        let fit = fit_gradient(metasamples, &self.loss, self.basis, &opts)?;
        diag.insert("converged".into(), if fit.converged { 1.0 } else { 0.0 });
        diag.insert("iterations".into(), fit.iterations as f64);
        Ok(fit.hypothesis)
    }

    fn hypothesis_mse(&self, h: &Hypothesis, rng: &mut Stream, diag: &mut BTreeMap<String, f64>) -> Result<f64> {
        if self.mse == MseMethod::Auto {
            if let Ok(poly) = h.as_polynomial() {
                return Ok(mse_closed_form(&poly, self.scenario.truth_poly.coefficients()));
            }
        }
        diag.insert("monte_carlo".into(), 1.0);
        let truth = |x: f64| self.scenario.truth(x);
        let predict = |x: f64| h.predict(&[x]).unwrap_or(f64::NAN);
        Ok(mse_monte_carlo(predict, truth, self.mc_samples, rng))
    }

    fn two_moment_mse(&self, fit: &TwoMomentFit, rng: &mut Stream, diag: &mut BTreeMap<String, f64>) -> Result<f64> {
        if self.mse == MseMethod::Auto && fit.statistic == Statistic::Variance {
            let unclamped = (0..CLAMP_GRID).all(|i| {
                let x = i as f64 / (CLAMP_GRID - 1) as f64;
                fit.raw_variance(&[x]).is_ok_and(|v| v >= 0.0)
            });
            if unclamped {
                let poly = fit.raw_variance_polynomial()?;
                return Ok(mse_closed_form(&poly, self.scenario.truth_poly.coefficients()));
            }
        }
        diag.insert("monte_carlo".into(), 1.0);
        let truth = |x: f64| self.scenario.truth(x);
        let predict = |x: f64| fit.predict(&[x]).unwrap_or(f64::NAN);
        Ok(mse_monte_carlo(predict, truth, self.mc_samples, rng))
    }
}

/// Starting point for UCB gradient fits: the two-moment ucb estimate
/// (quadratic moments over every `(x_rep, label)` pair) projected onto `basis`.
/// It lies near `μ + λσ` rather than the spurious stationary point `μ − λσ`.
pub fn two_moment_init(metasamples: &[Metasample], basis: FeatureBasis, lambda: f64) -> Result<Vec<f64>> {
    let pairs: Vec<LabeledPoint> = metasamples
        .iter()
        .flat_map(|ms| ms.labels.iter().map(|&y| LabeledPoint { x: ms.x_rep.clone(), y }))
        .collect();
    let moment_basis = if basis.input_dim() == 1 {
        FeatureBasis::polynomial(2)
    } else {
        FeatureBasis::affine(basis.input_dim())
    };
    let tm = fit_two_moment(&pairs, moment_basis, Statistic::Ucb { lambda })?;
    let targets = metasamples
        .iter()
        .map(|ms| tm.predict(&ms.x_rep))
        .collect::<Result<Vec<f64>>>()?;
    let fit = least_squares(
        metasamples
            .iter()
            .map(|ms| ms.x_rep.as_slice())
            .zip(targets.iter().copied()),
        basis,
    )?;
    Ok(fit.hypothesis.w)
}

/// `∫₀¹ (p(x) − q(x))² dx` for polynomials with ascending coefficients.
pub fn mse_closed_form(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let diff: Vec<f64> = (0..len)
        .map(|i| p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0))
        .collect();
    let mut total = 0.0;
    for (i, a) in diff.iter().enumerate() {
        for (j, b) in diff.iter().enumerate() {
            total += a * b / (i + j + 1) as f64;
        }
    }
    total.max(0.0)
}

/// `(1/S) Σ (predict(xₛ) − truth(xₛ))²` over `S` uniform draws of `x`.
pub fn mse_monte_carlo<P, T>(predict: P, truth: T, samples: usize, rng: &mut Stream) -> f64
where
    P: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let total: f64 = (0..samples)
        .map(|_| {
            let x = rng.uniform();
            (predict(x) - truth(x)).powi(2)
        })
        .sum();
    total / samples as f64
}

/// Nearest-rank percentile of an ascending slice: element `⌈p·N/100⌉` (1-based).
pub fn percentile(sorted: &[f64], percent: u32) -> f64 {
    assert!(!sorted.is_empty() && percent <= 100);
    let n = sorted.len();
    let rank = (percent as usize * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Median and quartiles of the successful trials.
pub fn summarize(results: &[TrialResult]) -> Result<Summary> {
    let mut mses: Vec<f64> = results.iter().filter_map(|r| r.mse).collect();
    if mses.is_empty() {
        return Err(Error::AllTrialsFailed(results.len()));
    }
    mses.sort_by(f64::total_cmp);
    Ok(Summary {
        trials: results.len(),
        failures: results.len() - mses.len(),
        median: percentile(&mses, 50),
        q25: percentile(&mses, 25),
        q75: percentile(&mses, 75),
    })
}

/// Resolves `spec` and runs all of its trials in parallel.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Summary> {
    spec.resolve()?.run(true)
}

/// Single trial of `spec`; `Err` only for configuration problems.
pub fn run_trial(spec: &ExperimentSpec, trial_index: u64) -> Result<TrialResult> {
    Ok(spec.resolve()?.run_trial(trial_index))
}

/// Least-squares slope of `ln(value)` against `ln(n)`.
pub fn log_log_slope(ns: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
