use std::io::Write;

use super::{validate_records, SurvivalRecord};
use crate::error::{invalid, Result};

/// Product-limit survival estimate, one step per distinct event time.
#[derive(Clone, Debug, PartialEq)]
pub struct KmCurve {
    pub times: Vec<f64>,
    /// Survival probability just after each event time.
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl KmCurve {
    /// `S(t)`: 1 before the first event time.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.times.iter().rposition(|&x| x <= t) {
            Some(i) => self.survival[i],
            None => 1.0,
        }
    }

    /// CSV with columns `time,survival,at_risk,events`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "survival", "at_risk", "events"])?;
        for i in 0..self.times.len() {
            out.write_record([
                self.times[i].to_string(),
                self.survival[i].to_string(),
                self.at_risk[i].to_string(),
                self.events[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn kaplan_meier(records: &[SurvivalRecord]) -> Result<KmCurve> {
    if records.is_empty() {
        return Err(invalid("Kaplan-Meier estimate of an empty cohort"));
    }
    validate_records(records)?;
    let mut event_times: Vec<f64> = records
        .iter()
        .filter(|r| r.event)
        .map(|r| r.follow_up)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let mut curve = KmCurve {
        times: Vec::with_capacity(event_times.len()),
        survival: Vec::with_capacity(event_times.len()),
        at_risk: Vec::with_capacity(event_times.len()),
        events: Vec::with_capacity(event_times.len()),
    };
    let mut s = 1.0;
    for t in event_times {
        let n = records.iter().filter(|r| r.follow_up >= t).count();
        let d = records.iter().filter(|r| r.event && r.follow_up == t).count();
        s *= (n - d) as f64 / n as f64;
        curve.times.push(t);
        curve.survival.push(s);
        curve.at_risk.push(n);
        curve.events.push(d);
    }
    Ok(curve)
}
