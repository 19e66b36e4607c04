//! Single-observation competitors: the two-moment approach and the
//! "empirical" approach that pools several labels drawn at each `x`.

use crate::erm::{least_squares, FeatureBasis, Hypothesis};
use crate::error::{invalid, Error, Result};
use crate::metasample::{LabeledPoint, SamplingOracle};
use crate::synthetic::Statistic;

/// Separate least-squares fits of `E[Y | x]` and `E[Y² | x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMomentFit {
    pub m1: Hypothesis,
    pub m2: Hypothesis,
    pub statistic: Statistic,
}

pub fn fit_two_moment(data: &[LabeledPoint], basis: FeatureBasis, statistic: Statistic) -> Result<TwoMomentFit> {
    if let Statistic::MinVar { .. } = statistic {
        return Err(invalid("the two-moment approach only combines into variance or ucb"));
    }
    let m1 = least_squares(data.iter().map(|p| (p.x.as_slice(), p.y)), basis)?;
    let m2 = least_squares(data.iter().map(|p| (p.x.as_slice(), p.y * p.y)), basis)?;
    Ok(TwoMomentFit {
        m1: m1.hypothesis,
        m2: m2.hypothesis,
        statistic,
    })
}

impl TwoMomentFit {
    /// `m2(x) − m1(x)²` before clamping.
    pub fn raw_variance(&self, x: &[f64]) -> Result<f64> {
        let mean = self.m1.predict(x)?;
        Ok(self.m2.predict(x)? - mean * mean)
    }

    /// Variance `max(0, m2 − m1²)`, or `m1 + λ·√variance` for ucb.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let variance = self.raw_variance(x)?.max(0.0);
        match self.statistic {
            Statistic::Variance => Ok(variance),
            Statistic::Ucb { lambda } => Ok(self.m1.predict(x)? + lambda * variance.sqrt()),
            Statistic::MinVar { .. } => unreachable!("rejected at fit time"),
        }
    }

    /// Coefficients of the unclamped variance `m2 − m1²` as a polynomial in scalar `x`.
    pub fn raw_variance_polynomial(&self) -> Result<Vec<f64>> {
        let p1 = self.m1.as_polynomial()?;
        let p2 = self.m2.as_polynomial()?;
        let len = p2.len().max(2 * p1.len() - 1);
        let mut out = vec![0.0; len];
        for (i, c) in p2.iter().enumerate() {
            out[i] += c;
        }
        for (i, a) in p1.iter().enumerate() {
            for (j, b) in p1.iter().enumerate() {
                out[i + j] -= a * b;
            }
        }
        Ok(out)
    }
}

/// Plug-in estimate of `statistic` from i.i.d. labels at one `x`.
///
/// Standard deviations use the unbiased (`k − 1`) variance.
pub fn empirical_statistic(statistic: Statistic, labels: &[f64]) -> f64 {
    let k = labels.len() as f64;
    let sample_variance = || {
        let mean = labels.iter().sum::<f64>() / k;
        let ss = labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
        (mean, ss / (k - 1.0))
    };
    match statistic {
        Statistic::Variance => sample_variance().1,
        Statistic::Ucb { lambda } => {
            let (mean, var) = sample_variance();
            mean + lambda * var.sqrt()
        }
        Statistic::MinVar { .. } => labels.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalFit {
    pub hypothesis: Hypothesis,
    /// Distinct `x` points queried.
    pub points: usize,
    pub labels_drawn: usize,
}

/// Draws `⌊n_labels/k⌋` points, `k` labels at each, and fits the basis by
/// least squares to the per-point empirical statistic.
///
/// For MINVAR `k` must equal `k_stat + 1`; variance and ucb need `k ≥ 2`.
/// Draw order: `x₁`, its `k` labels, `x₂`, ….
pub fn fit_empirical<O: SamplingOracle>(
    oracle: &mut O,
    n_labels: usize,
    k: usize,
    statistic: Statistic,
    basis: FeatureBasis,
) -> Result<EmpiricalFit> {
    match statistic {
        Statistic::MinVar { k: order } if k != order + 1 => {
            return Err(invalid(format!(
                "minvar of order {order} needs {} labels per point, got {k}",
                order + 1
            )))
        }
        Statistic::Variance | Statistic::Ucb { .. } if k < 2 => {
            return Err(invalid("a spread estimate needs at least 2 labels per point"))
        }
        _ => {}
    }
    let points = n_labels / k;
    if points < basis.dim() {
        return Err(Error::InsufficientData(format!(
            "{points} points for a basis of dimension {}",
            basis.dim()
        )));
    }
    let mut xs = Vec::with_capacity(points);
    let mut stats = Vec::with_capacity(points);
    let mut labels = vec![0.0; k];
    for _ in 0..points {
        let x = oracle.draw_x();
        for y in labels.iter_mut() {
            *y = oracle.draw_label(&x);
        }
        stats.push(empirical_statistic(statistic, &labels));
        xs.push(x);
    }
    let fit = least_squares(xs.iter().map(Vec::as_slice).zip(stats.iter().copied()), basis)?;
    Ok(EmpiricalFit {
        hypothesis: fit.hypothesis,
        points,
        labels_drawn: points * k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct PointMass {
        value: f64,
        next_x: f64,
        labels: usize,
    }

    impl SamplingOracle for PointMass {
        fn dim(&self) -> usize {
            1
        }
        fn draw_x(&mut self) -> Vec<f64> {
            self.next_x = (self.next_x + 0.37) % 1.0;
            vec![self.next_x]
        }
        fn draw_label(&mut self, _x: &[f64]) -> f64 {
            self.labels += 1;
            self.value
        }
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn noiseless_moments_are_recovered() {
        let data: Vec<LabeledPoint> = grid(11).into_iter().map(|x| LabeledPoint::scalar(x, x)).collect();
        let tm = fit_two_moment(&data, FeatureBasis::polynomial(2), Statistic::Variance).unwrap();
        let expect = |h: &Hypothesis, w: [f64; 3]| {
            for (a, b) in h.w.iter().zip(w) {
                assert!((a - b).abs() < 1e-9, "{:?}", h.w);
            }
        };
        expect(&tm.m1, [0.0, 1.0, 0.0]);
        expect(&tm.m2, [0.0, 0.0, 1.0]);
        let lin = fit_two_moment(&data, FeatureBasis::affine(1), Statistic::Variance).unwrap();
        assert!((lin.m1.w[0]).abs() < 1e-9 && (lin.m1.w[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_moments_give_exact_variance() {
        // Variance-line moments: E[Y|x] = 2x − 1, E[Y²|x] = (2x − 1)² + 1.
        let xs = grid(21);
        let m1 = least_squares(
            xs.iter().map(|x| (std::slice::from_ref(x), 2.0 * x - 1.0)),
            FeatureBasis::affine(1),
        )
        .unwrap()
        .hypothesis;
        let m2 = least_squares(
            xs.iter()
                .map(|x| (std::slice::from_ref(x), (2.0 * x - 1.0).powi(2) + 1.0)),
            FeatureBasis::polynomial(2),
        )
        .unwrap()
        .hypothesis;
        let tm = TwoMomentFit {
            m1,
            m2,
            statistic: Statistic::Variance,
        };
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((tm.predict(&[x]).unwrap() - 1.0).abs() < 1e-9);
        }
        let poly = tm.raw_variance_polynomial().unwrap();
        assert!((poly[0] - 1.0).abs() < 1e-9 && poly[1..].iter().all(|c| c.abs() < 1e-9));
    }

    fn constant_fit(m1: f64, m2: f64, statistic: Statistic) -> TwoMomentFit {
        let basis = FeatureBasis::polynomial(0);
        TwoMomentFit {
            m1: Hypothesis::new(basis, vec![m1]).unwrap(),
            m2: Hypothesis::new(basis, vec![m2]).unwrap(),
            statistic,
        }
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(
            constant_fit(0.0, 1.0, Statistic::Variance).predict(&[0.3]).unwrap(),
            1.0
        );
        let clamped = constant_fit(2.0, 3.0, Statistic::Variance);
        assert_eq!(clamped.raw_variance(&[0.3]).unwrap(), -1.0);
        assert_eq!(clamped.predict(&[0.3]).unwrap(), 0.0);
        assert_eq!(
            constant_fit(2.0, 3.0, Statistic::Ucb { lambda: 8.0 })
                .predict(&[0.3])
                .unwrap(),
            2.0
        );
        assert_eq!(
            constant_fit(2.0, 5.0, Statistic::Ucb { lambda: 8.0 })
                .predict(&[0.3])
                .unwrap(),
            10.0
        );
    }

    #[test]
    fn variance_prediction_is_nonnegative() {
        let mut s = crate::rng::Stream::from_seed(8);
        let data: Vec<LabeledPoint> = (0..30)
            .map(|_| {
                let x = s.uniform();
                LabeledPoint::scalar(x, 3.0 * x + 0.01 * s.standard_normal())
            })
            .collect();
        let tm = fit_two_moment(&data, FeatureBasis::affine(1), Statistic::Variance).unwrap();
        for i in 0..=200 {
            assert!(tm.predict(&[i as f64 / 200.0]).unwrap() >= 0.0);
        }
    }

    #[test]
    fn two_moment_is_permutation_invariant() {
        let mut s = crate::rng::Stream::from_seed(81);
        let data: Vec<LabeledPoint> = (0..40)
            .map(|_| LabeledPoint::scalar(s.uniform(), s.standard_normal()))
            .collect();
        let mut rev = data.clone();
        rev.reverse();
        let a = fit_two_moment(&data, FeatureBasis::polynomial(2), Statistic::Variance).unwrap();
        let b = fit_two_moment(&rev, FeatureBasis::polynomial(2), Statistic::Variance).unwrap();
        for (p, q) in a.m2.w.iter().zip(&b.m2.w) {
            assert!((p - q).abs() < 1e-9);
        }
        assert!(fit_two_moment(&data, FeatureBasis::affine(1), Statistic::MinVar { k: 4 }).is_err());
    }

    #[test]
    fn empirical_point_mass() {
        let mut o = PointMass {
            value: 4.5,
            next_x: 0.0,
            labels: 0,
        };
        let fit = fit_empirical(&mut o, 103, 5, Statistic::Ucb { lambda: 8.0 }, FeatureBasis::affine(1)).unwrap();
        assert!((fit.hypothesis.w[0] - 4.5).abs() < 1e-9 && fit.hypothesis.w[1].abs() < 1e-9);
        assert_eq!(fit.points, 20);
        assert_eq!(fit.labels_drawn, 100);
        assert_eq!(o.labels, 100);

        let mut o = PointMass {
            value: -2.0,
            next_x: 0.0,
            labels: 0,
        };
        let fit = fit_empirical(&mut o, 50, 5, Statistic::MinVar { k: 4 }, FeatureBasis::affine(1)).unwrap();
        assert!((fit.hypothesis.predict(&[0.4]).unwrap() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_statistics() {
        assert_eq!(empirical_statistic(Statistic::MinVar { k: 4 }, &[3.0; 5]), 3.0);
        assert_eq!(empirical_statistic(Statistic::MinVar { k: 2 }, &[3.0, -1.0, 2.0]), -1.0);
        // mean 2, unbiased variance 4/3·... : labels 1, 3 → var 2
        assert!((empirical_statistic(Statistic::Variance, &[1.0, 3.0]) - 2.0).abs() < 1e-15);
        let ucb = empirical_statistic(Statistic::Ucb { lambda: 2.0 }, &[1.0, 3.0]);
        assert!((ucb - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn empirical_errors() {
        let mut o = PointMass {
            value: 1.0,
            next_x: 0.0,
            labels: 0,
        };
        // All labels at a single x cannot support an affine fit.
        assert!(matches!(
            fit_empirical(&mut o, 10, 10, Statistic::Ucb { lambda: 8.0 }, FeatureBasis::affine(1)),
            Err(Error::InsufficientData(_))
        ));
        assert_eq!(o.labels, 0);
        assert!(fit_empirical(&mut o, 100, 1, Statistic::Ucb { lambda: 8.0 }, FeatureBasis::affine(1)).is_err());
        assert!(fit_empirical(&mut o, 100, 4, Statistic::MinVar { k: 4 }, FeatureBasis::affine(1)).is_err());
    }
}
