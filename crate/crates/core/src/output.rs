//! CSV and JSON emission.
//!
//! Trace CSVs are in long format, one row per present flow per recorded slot,
//! with the column order in [`TRACE_COLUMNS`]. `lambda` is empty for
//! open-loop flows.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::engine::{MetricsReport, SlotTrace, TraceSink};
use crate::error::Result;

pub const TRACE_COLUMNS: [&str; 13] = [
    "t",
    "s_t",
    "flow",
    "a_t",
    "s_alloc",
    "d_drop",
    "served_actual",
    "dropped_actual",
    "q_before",
    "q_after",
    "y_after",
    "z_after",
    "lambda",
];

/// Writes slot traces as CSV rows.
pub struct CsvTraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl CsvTraceWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(TRACE_COLUMNS)?;
        Ok(CsvTraceWriter { inner })
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner.into_inner().map_err(|e| e.into_error())?)
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn record(&mut self, trace: &SlotTrace) -> Result<()> {
        for f in &trace.flows {
            self.inner.write_record([
                trace.t.to_string(),
                trace.s_t.to_string(),
                f.id.to_string(),
                f.a_t.to_string(),
                f.s_alloc.to_string(),
                f.d_drop.to_string(),
                f.served_actual.to_string(),
                f.dropped_actual.to_string(),
                f.q_before.to_string(),
                f.q_after.to_string(),
                f.y_after.to_string(),
                f.z_after.to_string(),
                f.lambda.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(())
    }
}

pub fn write_summary(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(report.to_json().as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Renders traces to an in-memory CSV string.
pub fn traces_to_csv(traces: &[SlotTrace]) -> Result<String> {
    let mut w = CsvTraceWriter::new(Vec::new())?;
    for t in traces {
        w.record(t)?;
    }
    Ok(String::from_utf8(w.finish()?).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::FlowTrace;

    #[test]
    fn header_and_rows() {
        let trace = SlotTrace {
            t: 3,
            s_t: 50,
            flows: vec![FlowTrace {
                id: 1,
                a_t: 4,
                s_alloc: 50,
                d_drop: 0,
                served_actual: 2,
                dropped_actual: 0,
                q_before: 2,
                q_after: 4,
                y_after: 0.5,
                z_after: 0.0,
                lambda: None,
            }],
        };
        let text = traces_to_csv(&[trace]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "3,50,1,4,50,0,2,0,2,4,0.5,0,");
        assert!(lines.next().is_none());
    }
}
