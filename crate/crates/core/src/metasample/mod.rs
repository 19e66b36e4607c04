//! Metasample construction: turning ordinary `(x, y)` data into tuples
//! `(x*, y₁, …, y_m)` of one representative feature and `m` labels.
//!
//! Two constructors draw their own data through a [`SamplingOracle`] and
//! never reuse a label (`naive_sampling`, `improved_sampling_oracle`); one
//! adapts improved sampling to a fixed dataset (`improved_sampling_fixed`);
//! two operate on sorted one-dimensional data and deliberately share labels
//! between overlapping metasamples (`sliding_window`, `epsilon_nearby`).

pub mod budget;
pub mod matching;

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

pub use budget::{
    budget_improved_nonuniform, budget_improved_uniform, budget_naive, budget_theorem4, budget_theorem5, BudgetParams,
};
use matching::euclidean;
pub use matching::max_matching;

/// Default cap on the number of metasamples ε-Nearby may emit.
pub const DEFAULT_NEARBY_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid("feature vector must have at least one coordinate"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature coordinate".into()));
        }
        Ok(LabeledPoint { x, y })
    }

    /// One-dimensional point.
    pub fn scalar(x: f64, y: f64) -> Self {
        LabeledPoint { x: vec![x], y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metasample {
    pub x_rep: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Metasample {
    pub fn new(x_rep: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("a metasample needs at least one label"));
        }
        Ok(Metasample { x_rep, labels })
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }
}

/// Source of i.i.d. feature draws and of labels `y ~ D_x` on demand.
///
/// Labels are requested sequentially, in the order each constructor documents.
pub trait SamplingOracle {
    fn dim(&self) -> usize;
    fn draw_x(&mut self) -> Vec<f64>;
    fn draw_label(&mut self, x: &[f64]) -> f64;
}

/// Constructor identifiers: `naive`, `improved`, `sliding`, `nearby[:ε]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constructor {
    Naive,
    Improved,
    Sliding,
    Nearby { epsilon: Option<f64> },
}

pub const CONSTRUCTOR_IDS: &[&str] = &["naive", "improved", "sliding", "nearby", "nearby:<epsilon>"];

impl FromStr for Constructor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownId {
            kind: "constructor",
            id: s.to_string(),
            valid: CONSTRUCTOR_IDS.join(", "),
        };
        match s.split_once(':') {
            None => match s {
                "naive" => Ok(Constructor::Naive),
                "improved" => Ok(Constructor::Improved),
                "sliding" => Ok(Constructor::Sliding),
                "nearby" => Ok(Constructor::Nearby { epsilon: None }),
                _ => Err(unknown()),
            },
            Some(("nearby", eps)) => {
                let eps: f64 = eps.parse().map_err(|_| unknown())?;
                check_epsilon(eps)?;
                Ok(Constructor::Nearby { epsilon: Some(eps) })
            }
            Some(_) => Err(unknown()),
        }
    }
}

impl fmt::Display for Constructor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constructor::Naive => write!(f, "naive"),
            Constructor::Improved => write!(f, "improved"),
            Constructor::Sliding => write!(f, "sliding"),
            Constructor::Nearby { epsilon: None } => write!(f, "nearby"),
            Constructor::Nearby { epsilon: Some(e) } => write!(f, "nearby:{e}"),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    // ε = 1 is accepted: it makes every pair in [0,1] admissible.
    if epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")))
    }
}

fn check_one_dimensional(data: &[LabeledPoint]) -> Result<()> {
    match data.iter().find(|p| p.dim() != 1) {
        Some(p) => Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim(),
        }),
        None => Ok(()),
    }
}

/// Indices of the `count` nearest points of `pool` to `center`, nearest first,
/// ties broken by ascending pool index.
pub fn nearest_indices(center: &[f64], pool: &[Vec<f64>], count: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, p)| (euclidean(center, p), i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(count).map(|(_, i)| i).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveOutput {
    pub metasamples: Vec<Metasample>,
    /// Fraction of representatives whose `m` neighbours all lie within `1/√n`.
    pub near_fraction: f64,
}

/// Naive sampling: `n` representatives, each with a fresh pool of
/// `⌊N/n⌋` points whose `m` nearest neighbours are labelled.
///
/// Draw order: the `n` representatives, then for each representative its pool
/// followed by the `m` label queries (nearest neighbour first).
pub fn naive_sampling<O: SamplingOracle>(oracle: &mut O, n: usize, m: usize, total: usize) -> Result<NaiveOutput> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be positive"));
    }
    let pool_size = total / n;
    if pool_size < m {
        return Err(Error::InsufficientData(format!(
            "pool of {pool_size} points per representative cannot supply {m} neighbours"
        )));
    }
    let radius = 1.0 / (n as f64).sqrt();
    let reps: Vec<Vec<f64>> = (0..n).map(|_| oracle.draw_x()).collect();
    let mut metasamples = Vec::with_capacity(n);
    let mut near = 0usize;
    for rep in reps {
        let pool: Vec<Vec<f64>> = (0..pool_size).map(|_| oracle.draw_x()).collect();
        let neighbours = nearest_indices(&rep, &pool, m);
        if neighbours.iter().all(|&j| euclidean(&rep, &pool[j]) <= radius) {
            near += 1;
        }
        let labels = neighbours.iter().map(|&j| oracle.draw_label(&pool[j])).collect();
        metasamples.push(Metasample { x_rep: rep, labels });
    }
    Ok(NaiveOutput {
        metasamples,
        near_fraction: near as f64 / n as f64,
    })
}

/// A representative matched outside its ε-ball because the maximum matching
/// did not cover it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackPair {
    pub round: usize,
    pub representative: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovedOutput {
    pub metasamples: Vec<Metasample>,
    pub fallbacks: Vec<FallbackPair>,
}

impl ImprovedOutput {
    /// Whether every round matched every representative within ε.
    pub fn is_perfect(&self) -> bool {
        self.fallbacks.is_empty()
    }
}

/// Improved sampling with a sampling oracle: `m` rounds, each drawing a fresh
/// pool of `⌊N/m⌋` points and taking a maximum ε-matching against the
/// representatives.
///
/// Representatives left unmatched are paired with their nearest unused pool
/// point and reported in [`ImprovedOutput::fallbacks`]. Labels of a round are
/// queried in representative order once its matching is complete.
pub fn improved_sampling_oracle<O: SamplingOracle>(
    oracle: &mut O,
    n: usize,
    m: usize,
    total: usize,
    epsilon: f64,
) -> Result<ImprovedOutput> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be positive"));
    }
    check_epsilon(epsilon)?;
    let pool_size = total / m;
    if pool_size < n {
        return Err(Error::InsufficientData(format!(
            "pool of {pool_size} points cannot cover {n} representatives"
        )));
    }
    let reps: Vec<Vec<f64>> = (0..n).map(|_| oracle.draw_x()).collect();
    let mut labels: Vec<Vec<f64>> = vec![Vec::with_capacity(m); n];
    let mut fallbacks = Vec::new();

    for round in 0..m {
        let pool: Vec<Vec<f64>> = (0..pool_size).map(|_| oracle.draw_x()).collect();
        let mut partner = vec![usize::MAX; n];
        let mut used = vec![false; pool_size];
        for (i, j) in max_matching(&reps, &pool, epsilon) {
            partner[i] = j;
            used[j] = true;
        }
        for i in 0..n {
            if partner[i] != usize::MAX {
                continue;
            }
            let (j, distance) = pool
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, p)| (j, euclidean(&reps[i], p)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("pool has at least n points");
            partner[i] = j;
            used[j] = true;
            fallbacks.push(FallbackPair {
                round,
                representative: i,
                distance,
            });
        }
        for i in 0..n {
            labels[i].push(oracle.draw_label(&pool[partner[i]]));
        }
    }

    let metasamples = reps
        .into_iter()
        .zip(labels)
        .map(|(x_rep, labels)| Metasample { x_rep, labels })
        .collect();
    Ok(ImprovedOutput { metasamples, fallbacks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedImprovedOutput {
    pub metasamples: Vec<Metasample>,
    /// Number of representatives (the first `n` points of the dataset).
    pub n: usize,
    /// For each metasample, the dataset indices its labels came from, by round.
    pub label_sources: Vec<Vec<usize>>,
}

/// Improved sampling adapted to a fixed dataset.
///
/// The first `n` points are representatives and the rest form the pool. Each
/// of the `m` rounds takes a maximum ε-matching between the representatives
/// and the pool points not yet used, so every label index is distinct. `n` is
/// the largest value, found by binary search over `1..=⌊n̂/(m+1)⌋`, for which
/// every round matches all representatives.
pub fn improved_sampling_fixed(data: &[LabeledPoint], m: usize, epsilon: f64) -> Result<FixedImprovedOutput> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    check_epsilon(epsilon)?;
    let upper = data.len() / (m + 1);
    let fail = || Error::NoPerfectMatching(format!("even a single representative cannot be matched {m} times"));
    if upper == 0 {
        return Err(fail());
    }
    let mut best = match match_prefix(data, 1, m, epsilon) {
        Some(sources) => (1, sources),
        None => return Err(fail()),
    };
    let (mut lo, mut hi) = (2, upper);
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        match match_prefix(data, mid, m, epsilon) {
            Some(sources) => {
                best = (mid, sources);
                lo = mid + 1;
            }
            None => hi = mid - 1,
        }
    }

    let (n, label_sources) = best;
    let metasamples = label_sources
        .iter()
        .enumerate()
        .map(|(i, sources)| Metasample {
            x_rep: data[i].x.clone(),
            labels: sources.iter().map(|&j| data[j].y).collect(),
        })
        .collect();
    Ok(FixedImprovedOutput {
        metasamples,
        n,
        label_sources,
    })
}

/// Label sources for `n` representatives, or `None` if some round is imperfect.
fn match_prefix(data: &[LabeledPoint], n: usize, m: usize, epsilon: f64) -> Option<Vec<Vec<usize>>> {
    let reps: Vec<&[f64]> = data[..n].iter().map(|p| p.x.as_slice()).collect();
    let mut available: Vec<usize> = (n..data.len()).collect();
    let mut sources = vec![Vec::with_capacity(m); n];
    for _ in 0..m {
        if available.len() < n {
            return None;
        }
        let pool: Vec<&[f64]> = available.iter().map(|&j| data[j].x.as_slice()).collect();
        let pairs = max_matching(&reps, &pool, epsilon);
        if pairs.len() < n {
            return None;
        }
        let mut used = vec![false; available.len()];
        for (i, j) in pairs {
            sources[i].push(available[j]);
            used[j] = true;
        }
        let mut k = 0;
        available.retain(|_| {
            let keep = !used[k];
            k += 1;
            keep
        });
    }
    Some(sources)
}

/// Data indices in ascending order of `x` (stable in the original index).
fn sorted_order(data: &[LabeledPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].x[0].total_cmp(&data[b].x[0]));
    order
}

/// Sliding window: after sorting by `x`, one metasample per run of `m`
/// consecutive points, `n − m + 1` in total.
pub fn sliding_window(data: &[LabeledPoint], m: usize) -> Result<Vec<Metasample>> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    check_one_dimensional(data)?;
    if data.len() < m {
        return Err(Error::InsufficientData(format!("{} points, window of {m}", data.len())));
    }
    let order = sorted_order(data);
    let xs: Vec<f64> = order.iter().map(|&i| data[i].x[0]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| data[i].y).collect();
    Ok(xs
        .windows(m)
        .zip(ys.windows(m))
        .map(|(wx, wy)| Metasample {
            x_rep: vec![wx.iter().sum::<f64>() / m as f64],
            labels: wy.to_vec(),
        })
        .collect())
}

/// Index tuples (into `data`, ordered by ascending `x`) of every `m`-subset
/// whose `x`-span is at most ε.
///
/// Errors with [`Error::CapExceeded`] before enumerating when more than `cap`
/// tuples qualify.
pub fn epsilon_nearby_tuples(data: &[LabeledPoint], m: usize, epsilon: f64, cap: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    check_epsilon(epsilon)?;
    check_one_dimensional(data)?;
    if data.len() < m {
        return Err(Error::InsufficientData(format!("{} points, tuples of {m}", data.len())));
    }
    let order = sorted_order(data);
    let xs: Vec<f64> = order.iter().map(|&i| data[i].x[0]).collect();

    // Last sorted position within ε of each start.
    let mut reach = Vec::with_capacity(xs.len());
    let mut k = 0;
    for (i, &x) in xs.iter().enumerate() {
        k = k.max(i);
        while k + 1 < xs.len() && xs[k + 1] - x <= epsilon {
            k += 1;
        }
        reach.push(k);
    }

    let total = reach.iter().enumerate().fold(0u128, |acc, (i, &k)| {
        acc.saturating_add(binomial((k - i) as u64, (m - 1) as u64))
    });
    if total > cap as u128 {
        return Err(Error::CapExceeded { cap });
    }

    let mut tuples = Vec::with_capacity(total as usize);
    let mut combo: Vec<usize> = Vec::with_capacity(m - 1);
    for (first, &last) in reach.iter().enumerate() {
        let span = last - first;
        if span < m - 1 {
            continue;
        }
        // Lexicographic (m−1)-combinations of first+1..=last.
        combo.clear();
        combo.extend(first + 1..first + m);
        loop {
            let mut tuple = Vec::with_capacity(m);
            tuple.push(order[first]);
            tuple.extend(combo.iter().map(|&p| order[p]));
            tuples.push(tuple);

            let r = combo.len();
            let Some(pos) = (0..r).rev().find(|&p| combo[p] < last - (r - 1 - p)) else {
                break;
            };
            combo[pos] += 1;
            for q in pos + 1..r {
                combo[q] = combo[q - 1] + 1;
            }
        }
    }
    Ok(tuples)
}

/// ε-Nearby: one metasample per `m`-subset of points whose `x`-values lie in
/// an interval of length ε; `x_rep` is the subset's mean `x`.
pub fn epsilon_nearby(data: &[LabeledPoint], m: usize, epsilon: f64, cap: usize) -> Result<Vec<Metasample>> {
    let tuples = epsilon_nearby_tuples(data, m, epsilon, cap)?;
    Ok(tuples
        .into_iter()
        .map(|t| Metasample {
            x_rep: vec![t.iter().map(|&i| data[i].x[0]).sum::<f64>() / m as f64],
            labels: t.iter().map(|&i| data[i].y).collect(),
        })
        .collect())
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}
