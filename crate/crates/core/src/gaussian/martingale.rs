//! Ensemble statistics of the martingale `Z` over clean-protocol runs.

use serde::Serialize;

use super::clean::CleanupRun;
use crate::error::{Error, Result};
use crate::stats::Moments;

pub const MIN_ENSEMBLE: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepStat {
    pub step: usize,
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub studentized: f64,
    /// `|mean| ≤ 4·stderr`; `None` below 30 samples.
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub runs: usize,
    pub per_step: Vec<StepStat>,
    pub quadratic_variation: Vec<f64>,
    pub mean_qv: f64,
    pub qv_stderr: f64,
    /// `4·√(mean QV)` and its delta-method standard error.
    pub growth_bound: f64,
    pub growth_bound_stderr: f64,
}

impl MartingaleReport {
    pub fn martingale_ok(&self) -> bool {
        self.per_step.iter().all(|s| s.pass != Some(false))
    }

    /// Per-step rows `step,count,mean,stderr,studentized,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,count,mean,stderr,studentized,pass\n");
        for s in &self.per_step {
            let pass = match s.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "",
            };
            out.push_str(&format!("{},{},{:.9e},{:.9e},{:.4},{}\n", s.step, s.count, s.mean, s.stderr, s.studentized, pass));
        }
        out
    }
}

pub fn martingale_report(runs: &[CleanupRun]) -> Result<MartingaleReport> {
    if runs.len() < MIN_ENSEMBLE {
        return Err(Error::EnsembleTooSmall { got: runs.len(), need: MIN_ENSEMBLE });
    }
    let longest = runs.iter().map(|r| r.steps.len()).max().unwrap_or(0);
    let mut per_step = Vec::with_capacity(longest);
    for t in 0..longest {
        let m: Moments = runs.iter().filter_map(|r| r.steps.get(t)).map(|s| s.delta_z).collect();
        let count = m.count() as usize;
        let (mean, stderr) = (m.mean(), m.stderr());
        let studentized = if stderr > 0.0 { mean / stderr } else { 0.0 };
        let pass = (count >= MIN_ENSEMBLE).then(|| mean.abs() <= 4.0 * stderr + 1e-15);
        per_step.push(StepStat { step: t + 1, count, mean, stderr, studentized, pass });
    }
    let quadratic_variation: Vec<f64> = runs.iter().map(CleanupRun::quadratic_variation).collect();
    let qv: Moments = quadratic_variation.iter().copied().collect();
    let mean_qv = qv.mean();
    let growth_bound = 4.0 * mean_qv.sqrt();
    let growth_bound_stderr = if mean_qv > 0.0 { 2.0 * qv.stderr() / mean_qv.sqrt() } else { 0.0 };
    Ok(MartingaleReport {
        runs: runs.len(),
        per_step,
        quadratic_variation,
        mean_qv,
        qv_stderr: qv.stderr(),
        growth_bound,
        growth_bound_stderr,
    })
}
