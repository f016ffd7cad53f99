//! Which tasks went into each encoder, and how the image-level result
//! depended on each task's inclusion.

use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::metrics::rank::spearman;
use crate::models::Task;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AblationRow {
    /// Inclusion flag per task, in [`Task::ALL`] order.
    pub include: [bool; 4],
    pub correlation: f64,
}

impl AblationRow {
    pub fn tasks(&self) -> Vec<Task> {
        Task::ALL
            .iter()
            .zip(self.include)
            .filter(|(_, inc)| *inc)
            .map(|(t, _)| *t)
            .collect()
    }
}

/// Spearman correlation, per task, between the inclusion flag (0/1) and the
/// achieved correlation, over all rows.
pub fn task_inclusion_correlation(rows: &[AblationRow]) -> Result<[f64; 4]> {
    if rows.iter().any(|r| !r.include.iter().any(|&b| b)) {
        return Err(invalid("ablation row includes no task"));
    }
    let y: Vec<f64> = rows.iter().map(|r| r.correlation).collect();
    let mut out = [0.0; 4];
    for (t, o) in out.iter_mut().enumerate() {
        let x: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.include[t]))).collect();
        *o = spearman(&x, &y)
            .map_err(|e| invalid(format!("task {}: {e}", Task::ALL[t].name())))?;
    }
    Ok(out)
}

/// Reads rows with columns `lymph,mitosis,prostate,colorectal,correlation`;
/// flags are `Yes`/`No`.
pub fn read_ablation_csv<R: Read>(r: R) -> Result<Vec<AblationRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Data(format!("ablation CSV lacks column {name}")))
    };
    let mut flag_cols = [0; 4];
    for (c, task) in flag_cols.iter_mut().zip(Task::ALL) {
        *c = col(task.name())?;
    }
    let corr_col = col("correlation")?;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Data(format!("ablation row {} is malformed", line + 2));
        let mut include = [false; 4];
        for (inc, &c) in include.iter_mut().zip(&flag_cols) {
            *inc = match rec.get(c).map(str::trim) {
                Some(v) if v.eq_ignore_ascii_case("yes") => true,
                Some(v) if v.eq_ignore_ascii_case("no") => false,
                _ => return Err(bad()),
            };
        }
        let correlation = rec
            .get(corr_col)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(bad)?;
        rows.push(AblationRow {
            include,
            correlation,
        });
    }
    Ok(rows)
}

pub fn write_ablation_csv<W: Write>(w: W, rows: &[AblationRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lymph", "mitosis", "prostate", "colorectal", "correlation"])?;
    for r in rows {
        let mut rec: Vec<String> = r
            .include
            .iter()
            .map(|&b| if b { "Yes" } else { "No" }.to_string())
            .collect();
        rec.push(r.correlation.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
