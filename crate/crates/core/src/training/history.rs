use std::io::Write;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Values of [`History::metric_names`], in order.
    pub metrics: Vec<f64>,
}

/// Per-epoch training record, written as CSV
/// `epoch,lr,train_loss,<metric columns>`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub metric_names: Vec<String>,
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn new(metric_names: Vec<String>) -> Self {
        Self {
            metric_names,
            epochs: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["epoch".to_string(), "lr".into(), "train_loss".into()];
        header.extend(self.metric_names.iter().cloned());
        out.write_record(&header)?;
        for e in &self.epochs {
            let mut rec = vec![e.epoch.to_string(), e.lr.to_string(), e.train_loss.to_string()];
            rec.extend(e.metrics.iter().map(|m| m.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}
