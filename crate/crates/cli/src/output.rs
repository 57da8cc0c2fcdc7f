//! CSV writers. Floats use Rust's shortest round-trip formatting, so equal
//! values always print identically.

use std::fs::File;
use std::path::Path;

use gotensor::sim::{CellComparison, CellOutcome, GapCell, SweepResult, TraceRecord};

use crate::error::{CliError, Result};

pub const TRACE_HEADER: [&str; 14] = [
    "t", "x", "xhat", "phi", "aS", "aA", "h", "aoi", "aos", "aoii", "aoci", "mse", "got", "cost",
];
pub const SWEEP_HEADER: [&str; 5] = ["policy", "param", "rate", "cost", "stderr"];
pub const COMPARE_HEADER: [&str; 4] = ["pS", "CS", "policy", "cost"];
pub const GAP_HEADER: [&str; 5] = ["pS", "CS", "theta_bf", "theta_jesp", "gap"];
pub const DECOMP_HEADER: [&str; 5] = ["pS", "CS", "sampling", "actuation", "inherent"];

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        let h = match r.h {
            Some(true) => "1".to_string(),
            Some(false) => "0".to_string(),
            None => String::new(),
        };
        w.write_record([
            r.t.to_string(),
            r.x.to_string(),
            r.xhat.to_string(),
            r.phi.to_string(),
            u8::from(r.sample).to_string(),
            r.action.to_string(),
            h,
            r.aoi.to_string(),
            r.aos.to_string(),
            r.aoii.to_string(),
            r.aoci.to_string(),
            r.mse.to_string(),
            r.got.to_string(),
            r.cost.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_sweep(path: &Path, rows: &[SweepResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.param.map_or_else(String::new, |p| p.to_string()),
            r.sampling_rate.to_string(),
            r.average_cost.to_string(),
            r.stderr.to_string(),
        ])?;
    }
    finish(w, path)
}

/// One row per policy in each successful cell; failed cells are skipped.
pub fn write_compare(path: &Path, cells: &[CellOutcome<CellComparison>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COMPARE_HEADER)?;
    for cell in cells {
        if let Ok(c) = &cell.result {
            for (label, cost) in c.costs() {
                w.write_record([
                    cell.p_success.to_string(),
                    cell.sampling_cost.to_string(),
                    label.to_string(),
                    cost.to_string(),
                ])?;
            }
        }
    }
    finish(w, path)
}

/// Decomposition of the co-designed policy's cost per cell.
pub fn write_decomposition(path: &Path, cells: &[CellOutcome<CellComparison>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DECOMP_HEADER)?;
    for cell in cells {
        if let Ok(c) = &cell.result {
            let d = c.got.breakdown.decomposition();
            w.write_record([
                cell.p_success.to_string(),
                cell.sampling_cost.to_string(),
                d.sampling.to_string(),
                d.actuation.to_string(),
                d.inherent.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

pub fn write_gap(path: &Path, cells: &[CellOutcome<GapCell>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(GAP_HEADER)?;
    for cell in cells {
        if let Ok(g) = &cell.result {
            w.write_record([
                cell.p_success.to_string(),
                cell.sampling_cost.to_string(),
                g.theta_bf.to_string(),
                g.theta_jesp.to_string(),
                g.gap.to_string(),
            ])?;
        }
    }
    finish(w, path)
}
