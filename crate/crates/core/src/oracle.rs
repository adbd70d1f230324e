//! Exact expectations of sampled ranking metrics.
//!
//! With `N` universe negatives of which `R - 1` outrank the target, the
//! number `X` of outranking negatives among `n` drawn uniformly without
//! replacement is `Hypergeometric(N, R - 1, n)`. The sampled rank is
//! `1 + X`, so every expected sampled metric is a finite sum over the
//! support of `X`, and mixing over a scorer's full-rank distribution gives
//! the scorer-level expectation. Ranks are integer and tie-free here.

use alloc::vec::Vec;

use crate::stats::CompensatedSum;
use crate::{Error, Result};

/// Populations up to this size use exact integer binomials.
const EXACT_LIMIT: u64 = 30;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn binom_exact(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// `ln C(n, k)`; summed term by term when `min(k, n - k)` is small,
/// through `lgamma` otherwise.
pub fn ln_binom(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if k <= 64 {
        let mut acc = CompensatedSum::new();
        for i in 1..=k {
            acc.add(libm::log((n - k + i) as f64 / i as f64));
        }
        acc.value()
    } else {
        let ln_fact = |m: u64| libm::lgamma(m as f64 + 1.0);
        ln_fact(n) - ln_fact(k) - ln_fact(n - k)
    }
}

fn check_params(population: u64, successes: u64, draws: u64) -> Result<()> {
    if successes > population || draws > population {
        return Err(Error::InvalidParameter(alloc::format!(
            "hypergeometric needs successes <= population and draws <= population, got N={population}, A={successes}, n={draws}"
        )));
    }
    Ok(())
}

fn support(population: u64, successes: u64, draws: u64) -> (u64, u64) {
    let lo = draws.saturating_sub(population - successes);
    (lo, successes.min(draws))
}

fn ln_pmf(population: u64, successes: u64, draws: u64, x: u64) -> f64 {
    ln_binom(successes, x) + ln_binom(population - successes, draws - x)
        - ln_binom(population, draws)
}

fn exact_pmf(population: u64, successes: u64, draws: u64, x: u64) -> f64 {
    let num = binom_exact(successes, x) * binom_exact(population - successes, draws - x);
    let den = binom_exact(population, draws);
    let g = gcd(num, den).max(1);
    (num / g) as f64 / (den / g) as f64
}

/// `P[X = x]` for `X ~ Hypergeometric(population, successes, draws)`.
pub fn hypergeom_pmf(population: u64, successes: u64, draws: u64, x: u64) -> Result<f64> {
    check_params(population, successes, draws)?;
    let (lo, hi) = support(population, successes, draws);
    if x < lo || x > hi {
        return Ok(0.0);
    }
    if population <= EXACT_LIMIT {
        return Ok(exact_pmf(population, successes, draws, x));
    }
    Ok(libm::exp(ln_pmf(population, successes, draws, x)))
}

/// The whole mass function over its support.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergeometric {
    /// Smallest value in the support; `masses[i]` is `P[X = lo + i]`.
    pub lo: u64,
    pub masses: Vec<f64>,
}

impl Hypergeometric {
    /// Builds the mass function, anchoring at the mode in log space and
    /// walking outward with the term ratio so no mass underflows early.
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        check_params(population, successes, draws)?;
        let (lo, hi) = support(population, successes, draws);
        let len = (hi - lo + 1) as usize;
        if population <= EXACT_LIMIT {
            let masses = (lo..=hi)
                .map(|x| exact_pmf(population, successes, draws, x))
                .collect();
            return Ok(Self { lo, masses });
        }
        let mode = (((draws + 1) as u128 * (successes + 1) as u128 / (population + 2) as u128) as u64)
            .clamp(lo, hi);
        let mut masses = alloc::vec![0.0; len];
        let at = |x: u64| (x - lo) as usize;
        masses[at(mode)] = libm::exp(ln_pmf(population, successes, draws, mode));
        let (nf, af, df) = (population as f64, successes as f64, draws as f64);
        // P(x+1) / P(x) = (A - x)(n - x) / ((x + 1)(N - A - n + x + 1))
        for x in mode..hi {
            let xf = x as f64;
            let ratio = (af - xf) * (df - xf) / ((xf + 1.0) * (nf - af - df + xf + 1.0));
            masses[at(x + 1)] = masses[at(x)] * ratio;
        }
        for x in (lo + 1..=mode).rev() {
            let xf = (x - 1) as f64;
            let ratio = (af - xf) * (df - xf) / ((xf + 1.0) * (nf - af - df + xf + 1.0));
            masses[at(x - 1)] = masses[at(x)] / ratio;
        }
        // the anchor carries the lgamma error; the ratios do not
        let total = crate::stats::compensated_sum(masses.iter().copied());
        masses.iter_mut().for_each(|m| *m /= total);
        Ok(Self { lo, masses })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.masses.iter().enumerate().map(|(i, &m)| (self.lo + i as u64, m))
    }

    pub fn expectation(&self, f: impl Fn(u64) -> f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (x, m) in self.iter() {
            acc.add(m * f(x));
        }
        acc.value()
    }

    pub fn cdf(&self, x: u64) -> f64 {
        if x + 1 >= self.lo + self.masses.len() as u64 {
            return 1.0;
        }
        let mut acc = CompensatedSum::new();
        for (_, m) in self.iter().take_while(|&(v, _)| v <= x) {
            acc.add(m);
        }
        acc.value().min(1.0)
    }
}

fn check_rank(rank: u64, universe: u64, n_s: u64) -> Result<()> {
    if rank == 0 || rank > universe + 1 {
        return Err(Error::InvalidParameter(alloc::format!(
            "rank {rank} outside [1, {}]",
            universe + 1
        )));
    }
    if n_s > universe {
        return Err(Error::InvalidParameter(alloc::format!(
            "sample size {n_s} exceeds universe negatives {universe}"
        )));
    }
    Ok(())
}

/// Distribution of the count of sampled negatives outranking a target of full rank `rank`.
pub fn outranking_count(rank: u64, universe: u64, n_s: u64) -> Result<Hypergeometric> {
    check_rank(rank, universe, n_s)?;
    Hypergeometric::new(universe, rank - 1, n_s)
}

/// `E[1 / (1 + X)]`.
pub fn expected_sampled_mrr(rank: u64, universe: u64, n_s: u64) -> Result<f64> {
    Ok(outranking_count(rank, universe, n_s)?.expectation(|x| 1.0 / (1.0 + x as f64)))
}

/// `P[X <= k - 1]`.
pub fn expected_sampled_hits(rank: u64, universe: u64, n_s: u64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("Hits@K needs K >= 1".into()));
    }
    Ok(outranking_count(rank, universe, n_s)?.cdf(k - 1))
}

/// A scorer's distribution over full ranks.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankHistogram {
    universe_negatives: u64,
    /// `(rank, mass)` sorted by rank, ranks distinct.
    masses: Vec<(u64, f64)>,
}

impl RankHistogram {
    pub fn new(universe_negatives: u64, mut masses: Vec<(u64, f64)>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidHistogram("no mass".into()));
        }
        masses.sort_by_key(|&(r, _)| r);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(masses.len());
        for (r, m) in masses {
            if r == 0 || r > universe_negatives + 1 {
                return Err(Error::InvalidHistogram(alloc::format!(
                    "rank {r} outside [1, {}]",
                    universe_negatives + 1
                )));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidHistogram(alloc::format!("mass {m} at rank {r}")));
            }
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += m,
                _ => merged.push((r, m)),
            }
        }
        let total: f64 = crate::stats::compensated_sum(merged.iter().map(|e| e.1));
        if libm::fabs(total - 1.0) > 1e-12 {
            return Err(Error::InvalidHistogram(alloc::format!("masses sum to {total}")));
        }
        Ok(Self {
            universe_negatives,
            masses: merged,
        })
    }

    /// Normalises non-negative weights into a histogram.
    pub fn from_weights(universe_negatives: u64, weights: Vec<(u64, f64)>) -> Result<Self> {
        let total = crate::stats::compensated_sum(weights.iter().map(|e| e.1));
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidHistogram("weights must have positive finite sum".into()));
        }
        Self::new(
            universe_negatives,
            weights.into_iter().map(|(r, w)| (r, w / total)).collect(),
        )
    }

    pub fn universe_negatives(&self) -> u64 {
        self.universe_negatives
    }

    pub fn masses(&self) -> &[(u64, f64)] {
        &self.masses
    }

    fn weighted(&self, f: impl Fn(u64) -> f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(r, m) in &self.masses {
            acc.add(m * f(r));
        }
        acc.value()
    }

    pub fn full_mrr(&self) -> f64 {
        self.weighted(|r| 1.0 / r as f64)
    }

    pub fn mean_rank(&self) -> f64 {
        self.weighted(|r| r as f64)
    }

    pub fn full_hits(&self, k: u64) -> f64 {
        self.weighted(|r| if r <= k { 1.0 } else { 0.0 })
    }

    pub fn full_auc(&self) -> f64 {
        1.0 - (self.mean_rank() - 1.0) / self.universe_negatives as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ExpectedMetric {
    SampledMrr,
    SampledHits(u64),
    MrHat,
    AucHat,
}

/// Mass-weighted expectation of a sampled metric at sample size `n_s`.
///
/// `MrHat` and `AucHat` are computed through the hypergeometric law of the
/// sampled rank rather than from the unbiasedness identity, so comparing
/// them with [`RankHistogram::mean_rank`] is a genuine check.
pub fn expected_metric(hist: &RankHistogram, n_s: u64, metric: ExpectedMetric) -> Result<f64> {
    if n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    let universe = hist.universe_negatives;
    let scale = universe as f64 / n_s as f64;
    let mut acc = CompensatedSum::new();
    for &(rank, mass) in &hist.masses {
        let count = outranking_count(rank, universe, n_s)?;
        let value = match metric {
            ExpectedMetric::SampledMrr => count.expectation(|x| 1.0 / (1.0 + x as f64)),
            ExpectedMetric::SampledHits(k) => {
                if k == 0 {
                    return Err(Error::InvalidParameter("Hits@K needs K >= 1".into()));
                }
                count.cdf(k - 1)
            }
            ExpectedMetric::MrHat => count.expectation(|x| 1.0 + scale * x as f64),
            ExpectedMetric::AucHat => count.expectation(|x| 1.0 - scale * x as f64 / universe as f64),
        };
        acc.add(mass * value);
    }
    Ok(acc.value())
}

/// Expected metric at each sample size, for plotting convergence curves.
pub fn expected_curve(
    hist: &RankHistogram,
    metric: ExpectedMetric,
    sample_sizes: &[u64],
) -> Result<Vec<(u64, f64)>> {
    sample_sizes
        .iter()
        .map(|&n| expected_metric(hist, n, metric).map(|v| (n, v)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Order {
    /// A scores better.
    AFirst,
    BFirst,
    Tie,
}

impl Order {
    fn of(a: f64, b: f64, higher_is_better: bool) -> Self {
        let tol = 1e-12 * libm::fmax(1.0, libm::fmax(libm::fabs(a), libm::fabs(b)));
        if libm::fabs(a - b) <= tol {
            Order::Tie
        } else if (a > b) == higher_is_better {
            Order::AFirst
        } else {
            Order::BFirst
        }
    }

    fn reverses(self, other: Order) -> bool {
        matches!(
            (self, other),
            (Order::AFirst, Order::BFirst) | (Order::BFirst, Order::AFirst)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlipReport {
    pub universe_negatives: u64,
    pub n_s: u64,
    pub full_mrr: (f64, f64),
    pub expected_sampled_mrr: (f64, f64),
    pub full_mean_rank: (f64, f64),
    pub expected_mr_hat: (f64, f64),
    pub full_mrr_order: Order,
    pub sampled_mrr_order: Order,
    pub mean_rank_order: Order,
    pub mr_hat_order: Order,
    /// Full and expected sampled MRR strictly disagree on which scorer is better.
    pub flip: bool,
    /// Expected `R̂` orders the scorers like the full mean rank does.
    pub mr_hat_consistent: bool,
}

/// Compares two scorers under full MRR, expected sampled MRR and the
/// expected mean-rank estimate.
pub fn ordering_flip_check(a: &RankHistogram, b: &RankHistogram, n_s: u64) -> Result<FlipReport> {
    if a.universe_negatives != b.universe_negatives {
        return Err(Error::UniverseMismatch(a.universe_negatives, b.universe_negatives));
    }
    let full_mrr = (a.full_mrr(), b.full_mrr());
    let expected_sampled_mrr = (
        expected_metric(a, n_s, ExpectedMetric::SampledMrr)?,
        expected_metric(b, n_s, ExpectedMetric::SampledMrr)?,
    );
    let full_mean_rank = (a.mean_rank(), b.mean_rank());
    let expected_mr_hat = (
        expected_metric(a, n_s, ExpectedMetric::MrHat)?,
        expected_metric(b, n_s, ExpectedMetric::MrHat)?,
    );
    let full_mrr_order = Order::of(full_mrr.0, full_mrr.1, true);
    let sampled_mrr_order = Order::of(expected_sampled_mrr.0, expected_sampled_mrr.1, true);
    let mean_rank_order = Order::of(full_mean_rank.0, full_mean_rank.1, false);
    let mr_hat_order = Order::of(expected_mr_hat.0, expected_mr_hat.1, false);
    Ok(FlipReport {
        universe_negatives: a.universe_negatives,
        n_s,
        full_mrr,
        expected_sampled_mrr,
        full_mean_rank,
        expected_mr_hat,
        full_mrr_order,
        sampled_mrr_order,
        mean_rank_order,
        mr_hat_order,
        flip: full_mrr_order.reverses(sampled_mrr_order),
        mr_hat_consistent: mr_hat_order == mean_rank_order,
    })
}
