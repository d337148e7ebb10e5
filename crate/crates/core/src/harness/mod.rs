//! Experiment orchestration: full training loops for both tracks, the
//! robust multi-environment mode, baselines, persistence, plotting, and the
//! verification suite.

mod config;
mod continuous;
mod discrete;
mod npg;
mod plot;
mod record;
mod robust;
mod verify;

pub use config::{AdvantageCost, Baseline, ExperimentConfig, PolicyArch, Track};
pub use continuous::{build_lti_env, run_dpi_continuous, ContinuousOutcome};
pub use discrete::{run_cpi_discrete, run_dpi_discrete};
pub use npg::run_npg_baseline;
pub use plot::emit_plot;
pub use record::{read_csv, write_csv, IterationRow, RunRecord, CSV_HEADER};
pub use robust::{run_robust, RobustArm};
pub use verify::{verify, CheckResult, VerifyOptions, VerifyReport};

use crate::error::Result;
use std::path::Path;

/// Run every seed of a config and persist the standard outputs
/// (`metrics.csv`, `config.json`, `policy.json`, `plot.svg`) under `out`.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let mut records = Vec::new();
    let mut first_policy_written = false;
    for &seed in &cfg.seeds {
        let (record, policy_json) = run_one(cfg, seed)?;
        if !first_policy_written {
            std::fs::write(out.join("policy.json"), &policy_json)?;
            first_policy_written = true;
        } else {
            std::fs::write(out.join(format!("policy_{seed}.json")), &policy_json)?;
        }
        records.push(record);
    }
    record::write_csv(&records, &out.join("metrics.csv"))?;
    emit_plot(&records, &out.join("plot.svg"))?;
    Ok(records)
}

/// Run a single seed of a config, returning the record and the serialized
/// final policy.
pub fn run_one(cfg: &ExperimentConfig, seed: u64) -> Result<(RunRecord, String)> {
    match (cfg.track, cfg.baseline) {
        (Track::Tabular, Baseline::Cpi) => run_cpi_discrete(cfg, seed),
        (Track::Tabular, _) => run_dpi_discrete(cfg, seed),
        (Track::Cartpole | Track::Lti, Baseline::Npg) => run_npg_baseline(cfg, seed),
        (Track::Cartpole | Track::Lti, _) => {
            let outcome = run_dpi_continuous(cfg, seed)?;
            Ok((outcome.record, serde_json::to_string_pretty(&outcome.policy.to_json())?))
        }
        (Track::Robust, _) => run_robust(cfg, seed, RobustArm::Robust),
        (Track::Verify, _) => Err(crate::error::DpiError::invalid(
            "the verify track does not produce run records; call harness::verify",
        )),
    }
}
