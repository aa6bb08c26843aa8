//! JSON run traces and spectrum files.

use std::path::Path;

use anyhow::Context;
use qpe_core::adaptive::{AdaptiveConfig, Failure, RoundRecord, RunResult, ShiftChoice};
use qpe_core::analysis::{closest_errors, PhaseError};
use qpe_core::{Phase, Spectrum};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ResultSummary<'a> {
    pub final_estimates: &'a [Phase],
    #[serde(rename = "T")]
    pub total_cost: f64,
    pub failure: Failure,
    pub d_f: usize,
    pub k_final: f64,
    pub shift: Option<ShiftChoice>,
    pub errors: Vec<PhaseError>,
}

/// `{config, spectrum, rounds, result}` for one run.
#[derive(Debug, Serialize)]
pub struct RunTrace<'a> {
    pub config: &'a AdaptiveConfig,
    pub spectrum: &'a Spectrum,
    pub rounds: &'a [RoundRecord],
    pub result: ResultSummary<'a>,
}

impl<'a> RunTrace<'a> {
    pub fn new(config: &'a AdaptiveConfig, spectrum: &'a Spectrum, run: &'a RunResult) -> Self {
        RunTrace {
            config,
            spectrum,
            rounds: &run.trace,
            result: ResultSummary {
                final_estimates: &run.final_estimates,
                total_cost: run.total_cost,
                failure: run.failure,
                d_f: run.d_f,
                k_final: run.k_final,
                shift: run.shift,
                errors: closest_errors(&spectrum.phases(), &run.final_estimates),
            },
        }
    }
}

/// Reads `{"lines": [{"phase": φ, "prob": A}, ...]}`.
pub fn load_spectrum(path: &Path) -> anyhow::Result<Spectrum> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing spectrum {}", path.display()))
}
