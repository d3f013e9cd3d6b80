use std::io::Write;

use super::config::ExperimentConfig;
use super::run::{run_experiment, ExperimentOutcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cores: usize,
    pub total_seconds: f64,
    /// Relative to the first row; `None` for the first row itself.
    pub speedup: Option<f64>,
    pub jacobian_seconds: f64,
    pub residual_seconds: f64,
    pub residual_speedup: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<ExperimentOutcome>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let fmt = |v: Option<f64>| v.map_or("—".to_string(), |s| format!("{s:.3}"));
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "cores",
            "total_time",
            "speedup",
            "jacobian_time",
            "residual_time",
            "residual_speedup",
        ])?;
        for r in &self.rows {
            wr.write_record([
                r.cores.to_string(),
                format!("{:.6}", r.total_seconds),
                fmt(r.speedup),
                format!("{:.6}", r.jacobian_seconds),
                format!("{:.6}", r.residual_seconds),
                fmt(r.residual_speedup),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Repeats one experiment per thread count and checks that the numerical
/// results are bitwise identical.
pub fn scaling_sweep(cfg: &ExperimentConfig, thread_counts: &[usize]) -> Result<SweepTable> {
    if thread_counts.is_empty() || thread_counts.contains(&0) {
        return Err(Error::Config("thread counts must be positive and non-empty".into()));
    }
    let mut outcomes: Vec<ExperimentOutcome> = Vec::new();
    for &t in thread_counts {
        let mut c = cfg.clone();
        c.solver.threads = t;
        c.output.dir = cfg.output.dir.as_ref().map(|d| d.join(format!("threads-{t}")));
        let out = run_experiment(&c)?;
        if let Some(first) = outcomes.first() {
            check_identical(first, &out)?;
        }
        outcomes.push(out);
    }
    let base = &outcomes[0];
    let rows = outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let ratio = |a: f64, b: f64| (k > 0 && b > 0.0).then(|| a / b);
            SweepRow {
                cores: o.threads,
                total_seconds: o.total_seconds,
                speedup: ratio(base.total_seconds, o.total_seconds),
                jacobian_seconds: o.report.jacobian_seconds(),
                residual_seconds: o.report.residual_seconds(),
                residual_speedup: ratio(base.report.residual_seconds(), o.report.residual_seconds()),
            }
        })
        .collect();
    Ok(SweepTable { rows, outcomes })
}

fn check_identical(a: &ExperimentOutcome, b: &ExperimentOutcome) -> Result<()> {
    let ra = &a.report.records;
    let rb = &b.report.records;
    let same = ra.len() == rb.len()
        && a.report.termination == b.report.termination
        && ra.iter().zip(rb).all(|(x, y)| {
            x.residual_norm.to_bits() == y.residual_norm.to_bits() && x.gmres_iterations == y.gmres_iterations
        })
        && a.solution.iter().zip(&b.solution).all(|(x, y)| x.to_bits() == y.to_bits());
    if same {
        Ok(())
    } else {
        Err(Error::Determinism(format!(
            "{} threads: final residual {:e} after {} steps; {} threads: {:e} after {} steps",
            a.threads,
            a.report.final_residual(),
            a.report.outer_iterations(),
            b.threads,
            b.report.final_residual(),
            b.report.outer_iterations()
        )))
    }
}
