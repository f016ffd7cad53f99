//! Metric reports for held-out predictions.

use std::io::Write;

use crate::config::EvaluateConfig;
use crate::error::{invalid, Result};
use crate::metrics::{auc_roc, pearson, spearman, spearman_ci_bootstrap, spearman_ci_fisher};
use crate::survival::{concordance_index, kaplan_meier, log_rank_test, median_risk_split, KmCurve, SurvivalRecord};

/// Named scalar results, written as a `metric,value` CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, f64)>,
}

impl Report {
    pub fn push(&mut self, name: &str, value: f64) {
        self.entries.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|e| e.1)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        for (name, v) in &self.entries {
            out.write_record([name.as_str(), &v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Spearman correlation with a Fisher-z interval and, when resamples are
/// configured, a percentile-bootstrap interval.
pub fn evaluate_regression(pred: &[f64], target: &[f64], cfg: &EvaluateConfig, seed: u64) -> Result<Report> {
    let rho = spearman(pred, target)?;
    let mut r = Report::default();
    r.push("n", pred.len() as f64);
    r.push("rho", rho);
    let fisher = spearman_ci_fisher(rho, pred.len(), cfg.level)?;
    r.push("ci_fisher_lo", fisher.lo);
    r.push("ci_fisher_hi", fisher.hi);
    if cfg.bootstrap_resamples > 0 {
        let boot = spearman_ci_bootstrap(pred, target, cfg.level, cfg.bootstrap_resamples, seed)?;
        r.push("ci_bootstrap_lo", boot.lo);
        r.push("ci_bootstrap_hi", boot.hi);
    }
    r.push("pearson", pearson(pred, target)?);
    Ok(r)
}

/// ROC AUC of class-1 scores, plus accuracy at the 0.5 threshold.
pub fn evaluate_classification(scores: &[f64], classes: &[usize]) -> Result<Report> {
    if scores.len() != classes.len() {
        return Err(invalid("scores and labels differ in length"));
    }
    let positive: Vec<bool> = classes.iter().map(|&c| c == 1).collect();
    let correct = scores.iter().zip(&positive).filter(|(s, &p)| (**s > 0.5) == p).count();
    let mut r = Report::default();
    r.push("n", scores.len() as f64);
    r.push("auc", auc_roc(scores, &positive)?);
    r.push("accuracy", correct as f64 / scores.len() as f64);
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct SurvivalEvaluation {
    pub report: Report,
    pub low: KmCurve,
    pub high: KmCurve,
}

/// Median-risk split of the cohort, the log-rank test between the halves,
/// and their Kaplan–Meier curves.
pub fn evaluate_survival(risks: &[f64], records: &[SurvivalRecord]) -> Result<SurvivalEvaluation> {
    if risks.len() != records.len() {
        return Err(invalid("risks and records differ in length"));
    }
    let split = median_risk_split(risks)?;
    if split.degenerate {
        return Err(invalid("all predicted risks are equal: the median split has an empty group"));
    }
    let (low, high) = split.select(records);
    let test = log_rank_test(&low, &high)?;
    let mut r = Report::default();
    r.push("n", records.len() as f64);
    r.push("events", records.iter().filter(|r| r.event).count() as f64);
    r.push("median_risk", split.median);
    r.push("n_low", low.len() as f64);
    r.push("n_high", high.len() as f64);
    r.push("chi_square", test.statistic);
    r.push("p_value", test.p_value);
    if let Some(c) = concordance_index(risks, records) {
        r.push("c_index", c);
    }
    Ok(SurvivalEvaluation {
        report: r,
        low: kaplan_meier(&low)?,
        high: kaplan_meier(&high)?,
    })
}
