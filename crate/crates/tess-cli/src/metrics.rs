//! Training metrics as a CSV log. One row per split per epoch; all numeric
//! formatting is fixed so identical runs produce identical bytes.

use crate::error::{io_err, CliResult};
use std::fs;

pub const HEADER: &str = "epoch,split,loss,accuracy,lr,wall_seconds,lsg_macs,trace_scalars";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub epoch: u32,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
    pub wall_seconds: f64,
    pub lsg_macs: u64,
    pub trace_scalars: u64,
}

pub fn format_row(r: &Row) -> String {
    format!(
        "{},{},{:.6},{:.6},{},{:.3},{},{}",
        r.epoch, r.split, r.loss, r.accuracy, r.lr, r.wall_seconds, r.lsg_macs, r.trace_scalars
    )
}

#[derive(Debug, Default)]
pub struct MetricsLog {
    rows: Vec<Row>,
}

impl MetricsLog {
    pub fn new() -> MetricsLog {
        MetricsLog::default()
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&format_row(row));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &str) -> CliResult<()> {
        fs::write(path, self.render()).map_err(|e| io_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_format_with_fixed_precision() {
        let row = Row {
            epoch: 3,
            split: "train",
            loss: 0.6931471805599453,
            accuracy: 0.96875,
            lr: 0.0005,
            wall_seconds: 0.0,
            lsg_macs: 12800,
            trace_scalars: 66,
        };
        assert_eq!(format_row(&row), "3,train,0.693147,0.968750,0.0005,0.000,12800,66");
    }

    #[test]
    fn render_is_header_plus_rows() {
        let mut log = MetricsLog::new();
        log.push(Row {
            epoch: 0,
            split: "val",
            loss: 1.0,
            accuracy: 0.5,
            lr: 0.001,
            wall_seconds: 0.0,
            lsg_macs: 0,
            trace_scalars: 0,
        });
        let text = log.render();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(HEADER));
        assert_eq!(lines.next(), Some("0,val,1.000000,0.500000,0.001,0.000,0,0"));
        assert_eq!(lines.next(), None);
        assert!(text.ends_with('\n'));
    }
}
