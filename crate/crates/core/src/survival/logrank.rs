use super::{validate_records, SurvivalRecord};
use crate::error::{invalid, Result};
use crate::special::chi_square_sf;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRankResult {
    /// `(O_A - E_A)^2 / Var`, chi-square with one degree of freedom.
    pub statistic: f64,
    pub p_value: f64,
    pub observed_a: f64,
    pub expected_a: f64,
    pub variance: f64,
}

/// Two-group log-rank test.
pub fn log_rank_test(group_a: &[SurvivalRecord], group_b: &[SurvivalRecord]) -> Result<LogRankResult> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(invalid("log-rank test needs subjects in both groups"));
    }
    validate_records(group_a)?;
    validate_records(group_b)?;
    let mut times: Vec<f64> = group_a
        .iter()
        .chain(group_b)
        .filter(|r| r.event)
        .map(|r| r.follow_up)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let count = |g: &[SurvivalRecord], t: f64| {
        let at_risk = g.iter().filter(|r| r.follow_up >= t).count() as f64;
        let deaths = g.iter().filter(|r| r.event && r.follow_up == t).count() as f64;
        (at_risk, deaths)
    };
    let (mut observed, mut expected, mut variance) = (0.0, 0.0, 0.0);
    for t in times {
        let (na, da) = count(group_a, t);
        let (nb, db) = count(group_b, t);
        let (n, d) = (na + nb, da + db);
        observed += da;
        expected += d * na / n;
        if n > 1.0 {
            variance += d * (na / n) * (nb / n) * (n - d) / (n - 1.0);
        }
    }
    let statistic = if variance > 0.0 {
        (observed - expected).powi(2) / variance
    } else {
        0.0
    };
    Ok(LogRankResult {
        statistic,
        p_value: chi_square_sf(statistic, 1.0),
        observed_a: observed,
        expected_a: expected,
        variance,
    })
}
