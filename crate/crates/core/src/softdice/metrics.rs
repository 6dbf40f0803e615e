use std::io::Write;

use crate::Result;

pub const METRICS_HEADER: [&str; 7] =
    ["step", "j_e", "j_pi", "j_gp", "policy_entropy", "eval_return_mean", "eval_return_std"];

/// One row of the training log. Absent values become empty CSV cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepMetrics {
    pub step: u64,
    pub j_e: Option<f64>,
    pub j_pi: Option<f64>,
    pub j_gp: Option<f64>,
    pub policy_entropy: Option<f64>,
    pub eval_return_mean: Option<f64>,
    pub eval_return_std: Option<f64>,
}

impl StepMetrics {
    fn cells(&self) -> [String; 7] {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.step.to_string(),
            f(self.j_e),
            f(self.j_pi),
            f(self.j_gp),
            f(self.policy_entropy),
            f(self.eval_return_mean),
            f(self.eval_return_std),
        ]
    }
}

/// Receives metrics as training progresses, so a diverged run keeps its prefix.
pub trait MetricsSink {
    fn record(&mut self, m: &StepMetrics) -> Result<()>;
}

impl MetricsSink for Vec<StepMetrics> {
    fn record(&mut self, m: &StepMetrics) -> Result<()> {
        self.push(m.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _m: &StepMetrics) -> Result<()> {
        Ok(())
    }
}

/// Streams rows as CSV; the header is written on construction.
pub struct CsvMetrics<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvMetrics<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
        writer.write_record(METRICS_HEADER)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }
}

impl<W: Write> MetricsSink for CsvMetrics<W> {
    fn record(&mut self, m: &StepMetrics) -> Result<()> {
        self.writer.write_record(m.cells())?;
        self.writer.flush()?;
        Ok(())
    }
}
