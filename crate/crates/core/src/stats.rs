//! Correlation machinery and order-stable summation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Neumaier-compensated accumulator. Summing the same values in the same
/// order always gives the same bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

/// Compensated mean; `None` for an empty input.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut acc = CompensatedSum::new();
    let mut n = 0usize;
    for x in values {
        acc.add(x);
        n += 1;
    }
    (n > 0).then(|| acc.value() / n as f64)
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations(x.len()));
    }
    let mx = mean(x.iter().copied()).unwrap_or(0.0);
    let my = mean(y.iter().copied()).unwrap_or(0.0);
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("x".into()));
    }
    if syy <= 0.0 {
        return Err(Error::ZeroVariance("y".into()));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing the average of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewObservations(a.len()));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimpsonReport {
    pub groups: Vec<String>,
    /// Pearson r within each group, aligned with `groups`.
    pub within: Vec<f64>,
    pub pooled: f64,
    /// Every within-group r has the same strict sign and the pooled r has the opposite one.
    pub paradox: bool,
}

/// Simpson's-paradox check over labelled `(x, y)` point groups.
pub fn simpson_check(groups: &[(String, Vec<(f64, f64)>)]) -> Result<SimpsonReport> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter(alloc::format!(
            "simpson check needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    let mut within = Vec::with_capacity(groups.len());
    let mut all_x = Vec::new();
    let mut all_y = Vec::new();
    for (label, points) in groups {
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        let r = pearson(&x, &y).map_err(|e| match e {
            Error::ZeroVariance(axis) => Error::ZeroVariance(alloc::format!("group `{label}` ({axis})")),
            Error::TooFewObservations(n) => Error::InvalidParameter(alloc::format!(
                "group `{label}` has {n} points, need at least 2"
            )),
            other => other,
        })?;
        within.push(r);
        all_x.extend(x);
        all_y.extend(y);
    }
    let pooled = pearson(&all_x, &all_y)?;
    Ok(SimpsonReport {
        groups: groups.iter().map(|(l, _)| l.clone()).collect(),
        paradox: paradox_flag(&within, pooled),
        within,
        pooled,
    })
}

/// The sign predicate behind [`SimpsonReport::paradox`].
pub fn paradox_flag(within: &[f64], pooled: f64) -> bool {
    let all_pos = within.iter().all(|&r| r > 0.0);
    let all_neg = within.iter().all(|&r| r < 0.0);
    (all_pos && pooled < 0.0) || (all_neg && pooled > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use alloc::vec;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn pearson_examples() {
        let x = [0.0, 1.0, 2.0, 3.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < EPS);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < EPS);
        assert!(pearson(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap().abs() < EPS);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0], &[1.0]), Err(Error::TooFewObservations(1)));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(2, 1)));
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn spearman_examples() {
        let v = [3.0, 1.0, 4.0, 1.5];
        assert!((spearman(&v, &v).unwrap() - 1.0).abs() < EPS);
        let rev = [1.0, 2.0, 3.0];
        assert!((spearman(&rev, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < EPS);
        // 1 - 6 * 2 / (3 * 8)
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap() - 0.5).abs() < EPS);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn simpson_fixture() {
        let report = simpson_check(&fixtures::simpson_groups()).unwrap();
        assert!(report.within.iter().all(|r| (r - 1.0).abs() < 1e-9));
        assert!(report.pooled < -0.3);
        assert!(report.paradox);
    }

    #[test]
    fn simpson_on_one_line_is_not_paradox() {
        let g = |o: f64| (0..3).map(|i| (o + i as f64, 2.0 * (o + i as f64))).collect::<Vec<_>>();
        let report = simpson_check(&[("a".into(), g(0.0)), ("b".into(), g(5.0))]).unwrap();
        assert!((report.pooled - 1.0).abs() < EPS);
        assert!(!report.paradox);
    }

    #[test]
    fn simpson_constant_group_is_named() {
        let err = simpson_check(&[
            ("flat".into(), vec![(0.0, 1.0), (1.0, 1.0)]),
            ("ok".into(), vec![(0.0, 0.0), (1.0, 1.0)]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref m) if m.contains("flat")));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(values), 2.0);
    }

    proptest! {
        #[test]
        fn spearman_self_and_reversal(v in proptest::collection::vec(-1e3f64..1e3, 2..30)) {
            prop_assume!(v.iter().any(|x| *x != v[0]));
            prop_assert!((spearman(&v, &v).unwrap() - 1.0).abs() < 1e-9);
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert!((spearman(&v, &neg).unwrap() + 1.0).abs() < 1e-9);
        }

        #[test]
        fn paradox_flag_is_sign_rule(groups in proptest::collection::vec(
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..8), 2..4)) {
            let labelled: Vec<(String, Vec<(f64, f64)>)> = groups
                .into_iter()
                .enumerate()
                .map(|(i, g)| (alloc::format!("g{i}"), g))
                .collect();
            if let Ok(report) = simpson_check(&labelled) {
                let pos = report.within.iter().all(|r| *r > 0.0);
                let neg = report.within.iter().all(|r| *r < 0.0);
                let expected = (pos && report.pooled < 0.0) || (neg && report.pooled > 0.0);
                prop_assert_eq!(report.paradox, expected);
            }
        }
    }
}
