//! Sample-budget calculators: how many points to draw so that the
//! metasample constructors succeed with probability at least `1 − δ`.
//!
//! All logarithms are natural. `C` is the unspecified universal constant of
//! the bounds and defaults to 1.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetParams {
    /// Number of metasamples.
    pub n: u64,
    /// Labels per metasample.
    pub m: u64,
    /// Feature dimension.
    pub d: u32,
    pub delta: f64,
    pub epsilon: f64,
    pub c: f64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        BudgetParams {
            n: 1,
            m: 1,
            d: 1,
            delta: 0.1,
            epsilon: 0.1,
            c: 1.0,
        }
    }
}

impl BudgetParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d == 0 {
            return Err(invalid("n, m and d must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid(format!("C must be positive, got {}", self.c)));
        }
        Ok(())
    }

    fn validate_epsilon(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Ceiling that treats values within a few ulps of an integer as that integer,
/// so `ln(e)`-style round-off does not add a spurious unit.
pub(crate) fn ceil_count(value: f64) -> Result<u64> {
    if !value.is_finite() || value >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("{value}")));
    }
    let nearest = value.round();
    let out = if (value - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        value.ceil()
    };
    Ok(out.max(0.0) as u64)
}

/// `m · n^{(d+3)/2} · d^{d/2} · ln(2mn/δ)` draws for naive nearest-neighbour sampling.
pub fn budget_naive(p: &BudgetParams) -> Result<u64> {
    p.validate()?;
    let (n, m, d) = (p.n as f64, p.m as f64, p.d as f64);
    ceil_count(m * n.powf((d + 3.0) / 2.0) * d.powf(d / 2.0) * (2.0 * m * n / p.delta).ln())
}

/// `C·m·(n + (√d/ε)^d·(ln(m/δ) + d·ln(d/ε)))` draws for improved sampling
/// under a uniform marginal.
pub fn budget_improved_uniform(p: &BudgetParams) -> Result<u64> {
    p.validate()?;
    p.validate_epsilon()?;
    let (n, m, d, eps) = (p.n as f64, p.m as f64, p.d as f64, p.epsilon);
    let cells = (d.sqrt() / eps).powf(d);
    ceil_count(p.c * m * (n + cells * ((m / p.delta).ln() + d * (d / eps).ln())))
}

/// `C·m·n^{(d+1)/2}·d^{d/2}·(ln(m/δ) + d·ln(nd))` draws for improved sampling
/// under an arbitrary marginal, with ε fixed at `1/√n` (so `p.epsilon` is ignored).
pub fn budget_improved_nonuniform(p: &BudgetParams) -> Result<u64> {
    p.validate()?;
    let (n, m, d) = (p.n as f64, p.m as f64, p.d as f64);
    ceil_count(p.c * m * n.powf((d + 1.0) / 2.0) * d.powf(d / 2.0) * ((m / p.delta).ln() + d * (n * d).ln()))
}

/// Draws for the corrupted-sample excess-risk bound:
/// `C·m·n^{(d+1)/2}·d^{d/2}·ln(m(nd)^d/δ)`.
pub fn budget_theorem4(p: &BudgetParams) -> Result<u64> {
    p.validate()?;
    let (n, m, d) = (p.n as f64, p.m as f64, p.d as f64);
    let log_term = m.ln() + d * (n * d).ln() - p.delta.ln();
    ceil_count(p.c * m * n.powf((d + 1.0) / 2.0) * d.powf(d / 2.0) * log_term)
}

/// Fast-rate setting: `ε = 1/(mKn)` and
/// `C·m·(n + (√d/ε)^d·ln(3m·d^d/(δ·ε^d)))` draws. Returns `(budget, ε)`;
/// `p.epsilon` is ignored.
pub fn budget_theorem5(p: &BudgetParams, lipschitz: f64) -> Result<(u64, f64)> {
    p.validate()?;
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(invalid(format!("K must be positive, got {lipschitz}")));
    }
    let (n, m, d) = (p.n as f64, p.m as f64, p.d as f64);
    let eps = 1.0 / (m * lipschitz * n);
    let cells = (d.sqrt() / eps).powf(d);
    let log_term = (3.0 * m).ln() + d * d.ln() - p.delta.ln() - d * eps.ln();
    Ok((ceil_count(p.c * m * (n + cells * log_term))?, eps))
}
