//! Sweep CSV format.

use std::io::{Read, Write};

use qpe_core::analysis::ErrorSample;
use serde::{Deserialize, Serialize};

use crate::scenario::TrialRecord;

pub const SWEEP_HEADER: &str = "seed,delta_c,subroutine,n_phi,T,phase_index,true_phase,estimate,error,failure";

/// One line of a sweep CSV: one true phase of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub delta_c: f64,
    pub subroutine: String,
    pub n_phi: usize,
    #[serde(rename = "T")]
    pub cost: f64,
    pub phase_index: usize,
    pub true_phase: f64,
    pub estimate: f64,
    pub error: f64,
    pub failure: String,
}

pub fn rows(records: &[TrialRecord]) -> Vec<SweepRow> {
    records
        .iter()
        .flat_map(|r| {
            r.rows.iter().enumerate().map(move |(i, e)| SweepRow {
                seed: r.seed,
                delta_c: r.delta_c,
                subroutine: r.subroutine.name().to_string(),
                n_phi: r.n_phi,
                cost: r.total_cost,
                phase_index: i,
                true_phase: e.true_phase.value(),
                estimate: e.estimate.value(),
                error: e.error,
                failure: r.failure.name().to_string(),
            })
        })
        .collect()
}

pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(SWEEP_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn error_samples(rows: &[SweepRow]) -> Vec<ErrorSample> {
    rows.iter().map(|r| ErrorSample { cost: r.cost, error: r.error }).collect()
}
