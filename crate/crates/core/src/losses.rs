//! Multi-observation losses `ℓ(r, y₁, …, y_m)`.
//!
//! A loss scores one report `r` against `m` labels drawn from the same
//! conditional distribution. Squared-form losses `(r − ψ(y⃗))²` reduce ERM to
//! least squares on transformed labels; the UCB losses have no such form and
//! are fitted by gradient descent.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Identifiers accepted by [`MultiObsLoss::from_str`].
pub const LOSS_IDS: &[&str] = &[
    "variance",
    "minvar:<k>",
    "ucb-cubic:<lambda>",
    "ucb-quartic:<lambda>",
    "moment:1",
    "moment:2",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiObsLoss {
    /// `(r − ½(y₁ − y₂)²)²`, elicits the variance.
    Variance,
    /// `(r − min{y₁, …, y_{k+1}})²`, elicits the expected minimum of `k + 1` draws.
    MinVar { k: usize },
    /// Antiderivative of `−V` in `r`; stationary at `μ ± λσ`.
    UcbCubic { lambda: f64 },
    /// Antiderivative of `−rV` in `r`; bounded below.
    UcbQuartic { lambda: f64 },
    /// Single-observation `(r − y^power)²`.
    Moment { power: u32 },
}

pub fn variance_loss() -> MultiObsLoss {
    MultiObsLoss::Variance
}

pub fn minvar_loss(k: usize) -> Result<MultiObsLoss> {
    if k == 0 {
        return Err(invalid("minvar requires k >= 1"));
    }
    Ok(MultiObsLoss::MinVar { k })
}

pub fn ucb_cubic_loss(lambda: f64) -> Result<MultiObsLoss> {
    check_lambda(lambda)?;
    Ok(MultiObsLoss::UcbCubic { lambda })
}

pub fn ucb_quartic_loss(lambda: f64) -> Result<MultiObsLoss> {
    check_lambda(lambda)?;
    Ok(MultiObsLoss::UcbQuartic { lambda })
}

pub fn moment_loss(power: u32) -> Result<MultiObsLoss> {
    match power {
        1 | 2 => Ok(MultiObsLoss::Moment { power }),
        _ => Err(invalid(format!("moment power must be 1 or 2, got {power}"))),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// `V(r, y₁, y₂) = (λ²/2)(y₁ − y₂)² − y₁y₂ + (y₁ + y₂)r − r²`.
///
/// `E[V(r, Y₁, Y₂)] = λ²Var[Y] − (r − E[Y])²`, which vanishes at `r = μ ± λσ`.
pub fn ucb_identification(lambda: f64, r: f64, y1: f64, y2: f64) -> f64 {
    ucb_constant(lambda, y1, y2) + (y1 + y2) * r - r * r
}

#[inline]
fn ucb_constant(lambda: f64, y1: f64, y2: f64) -> f64 {
    let diff = y1 - y2;
    0.5 * lambda * lambda * diff * diff - y1 * y2
}

impl MultiObsLoss {
    /// Number of labels per evaluation.
    pub fn m(&self) -> usize {
        match *self {
            MultiObsLoss::Variance | MultiObsLoss::UcbCubic { .. } | MultiObsLoss::UcbQuartic { .. } => 2,
            MultiObsLoss::MinVar { k } => k + 1,
            MultiObsLoss::Moment { .. } => 1,
        }
    }

    pub fn has_psi(&self) -> bool {
        !matches!(self, MultiObsLoss::UcbCubic { .. } | MultiObsLoss::UcbQuartic { .. })
    }

    /// Label transform `ψ` of a squared-form loss.
    pub fn psi(&self, labels: &[f64]) -> Result<f64> {
        self.check_labels(labels)?;
        self.psi_unchecked(labels)
            .ok_or_else(|| invalid(format!("loss `{self}` has no squared form")))
    }

    pub fn eval(&self, r: f64, labels: &[f64]) -> Result<f64> {
        self.check_labels(labels)?;
        Ok(self.value_and_deriv(r, labels).0)
    }

    /// `∂ℓ/∂r`.
    pub fn deriv(&self, r: f64, labels: &[f64]) -> Result<f64> {
        self.check_labels(labels)?;
        Ok(self.value_and_deriv(r, labels).1)
    }

    fn check_labels(&self, labels: &[f64]) -> Result<()> {
        if labels.len() != self.m() {
            return Err(Error::LabelCount {
                expected: self.m(),
                got: labels.len(),
            });
        }
        Ok(())
    }

    fn psi_unchecked(&self, labels: &[f64]) -> Option<f64> {
        match *self {
            MultiObsLoss::Variance => {
                let d = labels[0] - labels[1];
                Some(0.5 * d * d)
            }
            MultiObsLoss::MinVar { .. } => Some(labels.iter().copied().fold(f64::INFINITY, f64::min)),
            MultiObsLoss::Moment { power } => Some(labels[0].powi(power as i32)),
            MultiObsLoss::UcbCubic { .. } | MultiObsLoss::UcbQuartic { .. } => None,
        }
    }

    /// Loss value and derivative in `r`. `labels` must hold exactly `m` entries.
    pub(crate) fn value_and_deriv(&self, r: f64, labels: &[f64]) -> (f64, f64) {
        match *self {
            MultiObsLoss::UcbCubic { lambda } => {
                let (y1, y2) = (labels[0], labels[1]);
                let a = ucb_constant(lambda, y1, y2);
                let s = y1 + y2;
                let value = -a * r - 0.5 * s * r * r + r * r * r / 3.0;
                (value, -a - s * r + r * r)
            }
            MultiObsLoss::UcbQuartic { lambda } => {
                let (y1, y2) = (labels[0], labels[1]);
                let a = ucb_constant(lambda, y1, y2);
                let s = y1 + y2;
                let r2 = r * r;
                let value = -0.5 * a * r2 - s * r2 * r / 3.0 + 0.25 * r2 * r2;
                (value, -a * r - s * r2 + r2 * r)
            }
            _ => {
                let psi = self.psi_unchecked(labels).expect("squared-form loss");
                let resid = r - psi;
                (resid * resid, 2.0 * resid)
            }
        }
    }
}

impl fmt::Display for MultiObsLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiObsLoss::Variance => write!(f, "variance"),
            MultiObsLoss::MinVar { k } => write!(f, "minvar:{k}"),
            MultiObsLoss::UcbCubic { lambda } => write!(f, "ucb-cubic:{lambda}"),
            MultiObsLoss::UcbQuartic { lambda } => write!(f, "ucb-quartic:{lambda}"),
            MultiObsLoss::Moment { power } => write!(f, "moment:{power}"),
        }
    }
}

impl FromStr for MultiObsLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownId {
            kind: "loss",
            id: s.to_string(),
            valid: LOSS_IDS.join(", "),
        };
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        match (name, arg) {
            ("variance", None) => Ok(variance_loss()),
            ("minvar", Some(k)) => minvar_loss(k.parse().map_err(|_| unknown())?),
            ("ucb-cubic", Some(l)) => ucb_cubic_loss(l.parse().map_err(|_| unknown())?),
            ("ucb-quartic", Some(l)) => ucb_quartic_loss(l.parse().map_err(|_| unknown())?),
            ("moment", Some(p)) => moment_loss(p.parse().map_err(|_| unknown())?),
            _ => Err(unknown()),
        }
    }
}
