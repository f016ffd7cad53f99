use crate::error::{invalid, Result};

/// Subjects partitioned by the median predicted risk.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskSplit {
    pub median: f64,
    /// Indices with risk at or below the median.
    pub low: Vec<usize>,
    /// Indices with risk strictly above the median.
    pub high: Vec<usize>,
    /// True when one side is empty (e.g. all risks equal).
    pub degenerate: bool,
}

impl RiskSplit {
    pub fn select<T: Clone>(&self, items: &[T]) -> (Vec<T>, Vec<T>) {
        (
            self.low.iter().map(|&i| items[i].clone()).collect(),
            self.high.iter().map(|&i| items[i].clone()).collect(),
        )
    }
}

/// Median of the values; the mean of the two central order statistics for
/// even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn median_risk_split(risks: &[f64]) -> Result<RiskSplit> {
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(invalid("risk scores must be finite"));
    }
    let median = median(risks).ok_or_else(|| invalid("median split of no subjects"))?;
    let (high, low): (Vec<usize>, Vec<usize>) = (0..risks.len()).partition(|&i| risks[i] > median);
    let degenerate = high.is_empty() || low.is_empty();
    Ok(RiskSplit {
        median,
        low,
        high,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_to_four() {
        let s = median_risk_split(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.low, vec![0, 1]);
        assert_eq!(s.high, vec![2, 3]);
        assert!(!s.degenerate);
    }

    #[test]
    fn all_equal_is_degenerate() {
        let s = median_risk_split(&[0.7; 5]).unwrap();
        assert_eq!(s.low.len(), 5);
        assert!(s.high.is_empty());
        assert!(s.degenerate);
    }

    #[test]
    fn distinct_risks_split_within_one_exhaustively() {
        // Every ordering of 1..=n for n <= 8 is the same multiset, so
        // enumerating sizes suffices; permutations are covered by proptest.
        for n in 1..=8usize {
            let risks: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 2.0).collect();
            let s = median_risk_split(&risks).unwrap();
            assert!(s.low.len().abs_diff(s.high.len()) <= 1, "n = {n}");
            assert_eq!(s.low.len() + s.high.len(), n);
        }
    }

    proptest! {
        #[test]
        fn split_sizes_differ_by_at_most_one(mut risks in proptest::collection::hash_set(-1000i32..1000, 1..40)
            .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())) {
            risks.reverse();
            let s = median_risk_split(&risks).unwrap();
            prop_assert!(s.low.len().abs_diff(s.high.len()) <= 1);
            for &i in &s.high { prop_assert!(risks[i] > s.median); }
            for &i in &s.low { prop_assert!(risks[i] <= s.median); }
        }
    }
}
