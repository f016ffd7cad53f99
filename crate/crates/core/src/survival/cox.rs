//! Negative Cox partial log-likelihood of per-subject risk scores.
//!
//! For risks `f` and records `(t, e)`:
//!
//! ```text
//! loss = -sum_{i: e_i} [ f_i - ln sum_{j: t_j >= t_i} exp(f_j) ]
//! ```
//!
//! Tied event times share one risk-set denominator (Breslow), and subjects
//! censored exactly at an event time stay in that event's risk set. The
//! baseline hazard does not appear: it cancels in the partial likelihood.

use std::cmp::Ordering;

use nic_autodiff::{Tape, Tensor, Var};

use super::{validate_records, SurvivalRecord};
use crate::error::{invalid, Result};

fn check_inputs(risks: &[f64], records: &[SurvivalRecord]) -> Result<()> {
    if risks.len() != records.len() {
        return Err(invalid(format!(
            "{} risks for {} survival records",
            risks.len(),
            records.len()
        )));
    }
    validate_records(records)?;
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(invalid("risk scores must be finite"));
    }
    if !records.iter().any(|r| r.event) {
        return Err(invalid("partial likelihood needs at least one observed event"));
    }
    Ok(())
}

/// Groups of subject indices sharing a follow-up time, latest time first.
fn time_groups(records: &[SurvivalRecord]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .follow_up
            .total_cmp(&records[a].follow_up)
            .then(a.cmp(&b))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if records[g[0]].follow_up.total_cmp(&records[i].follow_up) == Ordering::Equal => {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Loss and its gradient with respect to the risks, in `O(N log N)`.
pub fn cox_loss_and_grad(risks: &[f64], records: &[SurvivalRecord]) -> Result<(f64, Vec<f64>)> {
    check_inputs(risks, records)?;
    let shift = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = risks.iter().map(|f| (f - shift).exp()).collect();
    let groups = time_groups(records);

    // Descending time: the risk set of a group is everything seen so far.
    let mut running = 0.0;
    let mut loss = 0.0;
    let mut group_share = vec![0.0; groups.len()];
    for (g, members) in groups.iter().enumerate() {
        running += members.iter().map(|&j| w[j]).sum::<f64>();
        let log_denominator = shift + running.ln();
        let mut deaths = 0usize;
        for &i in members.iter().filter(|&&i| records[i].event) {
            loss += log_denominator - risks[i];
            deaths += 1;
        }
        group_share[g] = deaths as f64 / running;
    }

    // Ascending time: subject j belongs to the risk sets of all groups at or
    // before its own follow-up.
    let mut grad = vec![0.0; risks.len()];
    let mut cumulative = 0.0;
    for (g, members) in groups.iter().enumerate().rev() {
        cumulative += group_share[g];
        for &j in members {
            grad[j] = w[j] * cumulative - if records[j].event { 1.0 } else { 0.0 };
        }
    }
    Ok((loss, grad))
}

pub fn cox_loss(risks: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    cox_loss_and_grad(risks, records).map(|(l, _)| l)
}

/// Records the loss on `tape` as a differentiable function of `risks`
/// (any shape with one value per record).
pub fn cox_loss_on_tape(tape: &mut Tape, risks: Var, records: &[SurvivalRecord]) -> Result<Var> {
    let (loss, grad) = cox_loss_and_grad(tape.value(risks).data(), records)?;
    Ok(tape.custom(
        &[risks],
        Tensor::scalar(loss),
        Box::new(move |g, _, _| vec![grad.iter().map(|d| d * g[0]).collect()]),
    ))
}

/// Harrell's concordance between risk scores and observed survival:
/// among comparable pairs (the earlier time is an observed event), the
/// fraction where the earlier subject has the higher risk; risk ties count
/// one half. Returns `None` when no pair is comparable.
pub fn concordance_index(risks: &[f64], records: &[SurvivalRecord]) -> Option<f64> {
    let mut concordant = 0.0;
    let mut comparable = 0usize;
    for (i, ri) in records.iter().enumerate() {
        if !ri.event {
            continue;
        }
        for (j, rj) in records.iter().enumerate() {
            if rj.follow_up > ri.follow_up {
                comparable += 1;
                concordant += match risks[i].total_cmp(&risks[j]) {
                    Ordering::Greater => 1.0,
                    Ordering::Equal => 0.5,
                    Ordering::Less => 0.0,
                };
            }
        }
    }
    (comparable > 0).then(|| concordant / comparable as f64)
}
