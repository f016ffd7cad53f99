//! Censored-survival machinery: the Cox partial-likelihood loss for neural
//! risk scores, Kaplan–Meier curves, the two-group log-rank test, and
//! median-risk stratification.

pub mod cohort;
pub mod cox;
pub mod km;
pub mod logrank;
pub mod split;

pub use cohort::{read_cohort_csv, write_cohort_csv, CohortRow};
pub use cox::{concordance_index, cox_loss, cox_loss_and_grad, cox_loss_on_tape};
pub use km::{kaplan_meier, KmCurve};
pub use logrank::{log_rank_test, LogRankResult};
pub use split::{median_risk_split, RiskSplit};

/// Follow-up of one subject. `follow_up` is in months; `event` is true when
/// death was observed at `follow_up`, false when the subject was censored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalRecord {
    pub follow_up: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(follow_up: f64, event: bool) -> Self {
        Self { follow_up, event }
    }
}

pub(crate) fn validate_records(records: &[SurvivalRecord]) -> crate::Result<()> {
    match records
        .iter()
        .find(|r| !r.follow_up.is_finite() || r.follow_up < 0.0)
    {
        Some(r) => Err(crate::error::invalid(format!(
            "follow-up must be finite and nonnegative, got {}",
            r.follow_up
        ))),
        None => Ok(()),
    }
}
