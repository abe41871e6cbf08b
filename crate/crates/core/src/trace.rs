use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const TRACE_HEADER: &str = "t,n_evals,n_updates,H_of_mu,gamma,gamma_prev,tcmp,sigma_trace";

/// One observable row of a run. Batch baselines leave `gamma_prev` and
/// `tcmp` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub n_evals: u64,
    pub n_updates: u64,
    #[serde(rename = "H_of_mu")]
    pub h_of_mu: f64,
    pub gamma: f64,
    pub gamma_prev: Option<f64>,
    pub tcmp: Option<f64>,
    pub sigma_trace: f64,
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> csv::Result<Vec<TraceRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
