//! Numeric verification of the improvement theory on seeded instance
//! families: the performance-difference identity, the visitation-shift and
//! expectation-switch bounds, and the per-iteration improvement bound.

use crate::error::{DpiError, Result};
use crate::mdp::{
    expectation_switch_check, pdl_gap, random_dense_mdp, visitation_tv_bound_check, MdpJson,
    TabularPolicy,
};
use crate::par;
use crate::seeding::{self, tags};
use crate::tabular::theorem2_check;
use rand::Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Worst margin observed: max of (quantity - bound); negative margins
    /// mean the inequality held with room.
    pub worst_margin: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<22} {:>9} {:>10} {:>14}  result",
            "check", "instances", "violations", "worst margin"
        )
        .unwrap();
        for c in &self.checks {
            writeln!(
                out,
                "{:<22} {:>9} {:>10} {:>14.3e}  {}",
                c.name,
                c.instances,
                c.violations,
                c.worst_margin,
                if c.pass { "pass" } else { "FAIL" }
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Scale the identity's right-hand side; anything but 1.0 is a
    /// deliberate corruption used to exercise the failure path.
    pub pdl_rhs_scale: f64,
    /// Where to dump offending instances.
    pub dump_dir: Option<PathBuf>,
    pub pdl_instances: usize,
    pub lemma3_instances: usize,
    pub lemma4_instances: usize,
    pub theorem2_instances: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            pdl_rhs_scale: 1.0,
            dump_dir: None,
            pdl_instances: 200,
            lemma3_instances: 200,
            lemma4_instances: 500,
            theorem2_instances: 20,
        }
    }
}

#[derive(Serialize)]
struct OffendingInstance {
    check: &'static str,
    seed: u64,
    mdp: MdpJson,
    pi: Vec<f64>,
    pi_prime: Vec<f64>,
    lhs: f64,
    rhs: f64,
}

const PDL_TOL: f64 = 1e-8;
const LEMMA3_TOL: f64 = 1e-10;
const THEOREM2_GRID: f64 = 0.05;
const THEOREM2_GAMMA: f64 = 0.9;

fn dump(opts: &VerifyOptions, name: &str, payload: &impl Serialize) {
    if let Some(dir) = &opts.dump_dir {
        let _ = std::fs::create_dir_all(dir);
        if let Ok(json) = serde_json::to_string_pretty(payload) {
            let _ = std::fs::write(dir.join(format!("violation-{name}.json")), json);
        }
    }
}

fn summarize(
    name: &'static str,
    margins: Vec<(f64, bool)>,
    detail: String,
) -> CheckResult {
    let violations = margins.iter().filter(|(_, ok)| !ok).count();
    let worst = margins
        .iter()
        .map(|(m, _)| *m)
        .fold(f64::NEG_INFINITY, f64::max);
    CheckResult {
        name,
        instances: margins.len(),
        violations,
        worst_margin: worst,
        pass: violations == 0,
        detail,
    }
}

fn check_pdl(opts: &VerifyOptions) -> Result<CheckResult> {
    let results: Vec<Result<(f64, bool, u64)>> = par::map_indexed(opts.pdl_instances, |i| {
        let seed = i as u64;
        let mut rng = seeding::rng(seed, tags::VERIFY, 1);
        let s_n = rng.gen_range(2..=50);
        let a_n = rng.gen_range(2..=5);
        let mdp = random_dense_mdp(seed, s_n, a_n, 0.9)?;
        let pi = TabularPolicy::random(s_n, a_n, &mut rng);
        let pi_prime = TabularPolicy::random(s_n, a_n, &mut rng);
        let (lhs, rhs) = pdl_gap(&mdp, &pi, &pi_prime)?;
        let rhs = rhs * opts.pdl_rhs_scale;
        let gap = (lhs - rhs).abs();
        if gap > PDL_TOL {
            dump(
                opts,
                "pdl",
                &OffendingInstance {
                    check: "pdl",
                    seed,
                    mdp: MdpJson::from(&mdp),
                    pi: pi.probs().to_vec(),
                    pi_prime: pi_prime.probs().to_vec(),
                    lhs,
                    rhs,
                },
            );
        }
        Ok((gap - PDL_TOL, gap <= PDL_TOL, seed))
    });
    let mut margins = Vec::new();
    let mut max_gap = 0.0f64;
    for r in results {
        let (margin, ok, _) = r?;
        max_gap = max_gap.max(margin + PDL_TOL);
        margins.push((margin, ok));
    }
    Ok(summarize(
        "pdl-identity",
        margins,
        format!("max |lhs - rhs| = {max_gap:.3e} (tolerance {PDL_TOL:.1e})"),
    ))
}

fn check_lemma3(opts: &VerifyOptions) -> Result<CheckResult> {
    let results: Vec<Result<(f64, bool)>> = par::map_indexed(opts.lemma3_instances, |i| {
        let seed = 10_000 + i as u64;
        let mut rng = seeding::rng(seed, tags::VERIFY, 2);
        let s_n = rng.gen_range(2..=50);
        let a_n = rng.gen_range(2..=5);
        let mdp = random_dense_mdp(seed, s_n, a_n, 0.9)?;
        let pi1 = TabularPolicy::random(s_n, a_n, &mut rng);
        let pi2 = TabularPolicy::random(s_n, a_n, &mut rng);
        let (tv_d, _, bound) = visitation_tv_bound_check(&mdp, &pi1, &pi2)?;
        let margin = tv_d - bound - LEMMA3_TOL;
        Ok((margin, margin <= 0.0))
    });
    let mut margins = Vec::new();
    for r in results {
        margins.push(r?);
    }
    Ok(summarize(
        "visitation-shift",
        margins,
        format!("|d1 - d2|_1 <= 2 alpha / (1 - gamma) + {LEMMA3_TOL:.1e}"),
    ))
}

fn check_lemma4(opts: &VerifyOptions) -> Result<CheckResult> {
    let results: Vec<Result<(f64, bool)>> = par::map_indexed(opts.lemma4_instances, |i| {
        let seed = 20_000 + i as u64;
        let mut rng = seeding::rng(seed, tags::VERIFY, 3);
        let dim = 10;
        let mut draw_dist = || {
            let mut v: Vec<f64> = (0..dim)
                .map(|_| -(rng.gen::<f64>().max(f64::MIN_POSITIVE)).ln())
                .collect();
            let sum: f64 = v.iter().sum();
            for x in &mut v {
                *x /= sum;
            }
            v
        };
        let p = draw_dist();
        let q = draw_dist();
        let f: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (diff, bound) = expectation_switch_check(&p, &q, &f)?;
        Ok((diff - bound, diff <= bound))
    });
    let mut margins = Vec::new();
    for r in results {
        margins.push(r?);
    }
    Ok(summarize(
        "expectation-switch",
        margins,
        "diff <= max|f| * |p - q|_1, no slack".to_string(),
    ))
}

fn check_theorem2(opts: &VerifyOptions) -> Result<CheckResult> {
    let slack = 2.0 * THEOREM2_GRID / ((1.0 - THEOREM2_GAMMA) * (1.0 - THEOREM2_GAMMA));
    let results: Vec<Result<(f64, bool)>> = par::map_indexed(opts.theorem2_instances, |i| {
        let seed = 30_000 + i as u64;
        let mut rng = seeding::rng(seed, tags::VERIFY, 4);
        let mdp = random_dense_mdp(seed, 3, 2, THEOREM2_GAMMA)?;
        let pi_n = TabularPolicy::random(3, 2, &mut rng);
        let out = theorem2_check(&mdp, &pi_n, 0.1, 0.05, THEOREM2_GRID)?;
        let margin = out.lhs - out.rhs_bound - slack;
        Ok((margin, margin <= 0.0))
    });
    let mut margins = Vec::new();
    for r in results {
        margins.push(r?);
    }
    Ok(summarize(
        "improvement-bound",
        margins,
        format!("grid 0.05, gamma {THEOREM2_GAMMA}, slack {slack:.3}"),
    ))
}

/// Run the full verification suite.
pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.pdl_instances == 0
        || opts.lemma3_instances == 0
        || opts.lemma4_instances == 0
        || opts.theorem2_instances == 0
    {
        return Err(DpiError::invalid("instance counts must be positive"));
    }
    Ok(VerifyReport {
        checks: vec![
            check_pdl(opts)?,
            check_lemma3(opts)?,
            check_lemma4(opts)?,
            check_theorem2(opts)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_opts() -> VerifyOptions {
        VerifyOptions {
            pdl_instances: 12,
            lemma3_instances: 12,
            lemma4_instances: 30,
            theorem2_instances: 2,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn default_suite_passes_on_sampled_instances() {
        let report = verify(&fast_opts()).unwrap();
        assert!(report.all_pass(), "{}", report.render_table());
        assert!(report.render_table().contains("pass"));
    }

    #[test]
    fn corrupted_pdl_fails_and_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let opts = VerifyOptions {
            pdl_rhs_scale: 1.01,
            dump_dir: Some(dir.path().to_path_buf()),
            ..fast_opts()
        };
        let report = verify(&opts).unwrap();
        assert!(!report.all_pass());
        let pdl = &report.checks[0];
        assert!(pdl.violations > 0);
        assert!(dir.path().join("violation-pdl.json").exists());
    }
}
