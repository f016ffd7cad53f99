//! Cohort CSV: `subject_id,follow_up_months,event[,risk]`.

use std::io::{Read, Write};

use super::SurvivalRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CohortRow {
    pub subject_id: String,
    pub record: SurvivalRecord,
    pub risk: Option<f64>,
}

pub fn read_cohort_csv<R: Read>(r: R) -> Result<Vec<CohortRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(id), Some(t), Some(e)) = (col("subject_id"), col("follow_up_months"), col("event")) else {
        return Err(Error::Data(
            "cohort CSV needs subject_id, follow_up_months and event columns".into(),
        ));
    };
    let risk = col("risk");
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::Data(format!("cohort row {}: bad {what}", line + 2));
        let follow_up: f64 = field(t).parse().map_err(|_| bad("follow_up_months"))?;
        if !follow_up.is_finite() || follow_up < 0.0 {
            return Err(bad("follow_up_months"));
        }
        let event = match field(e) {
            "1" => true,
            "0" => false,
            _ => return Err(bad("event (expected 0 or 1)")),
        };
        let risk = match risk.map(field) {
            None | Some("") => None,
            Some(v) => Some(v.parse().map_err(|_| bad("risk"))?),
        };
        rows.push(CohortRow {
            subject_id: field(id).to_string(),
            record: SurvivalRecord::new(follow_up, event),
            risk,
        });
    }
    Ok(rows)
}

pub fn write_cohort_csv<W: Write>(w: W, rows: &[CohortRow]) -> Result<()> {
    let with_risk = rows.iter().any(|r| r.risk.is_some());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["subject_id", "follow_up_months", "event"];
    if with_risk {
        header.push("risk");
    }
    out.write_record(&header)?;
    for r in rows {
        let mut fields = vec![
            r.subject_id.clone(),
            r.record.follow_up.to_string(),
            if r.record.event { "1" } else { "0" }.to_string(),
        ];
        if with_risk {
            fields.push(r.risk.map(|v| v.to_string()).unwrap_or_default());
        }
        out.write_record(&fields)?;
    }
    out.flush()?;
    Ok(())
}
