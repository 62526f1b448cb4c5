//! CSV export of optimization and simulation traces.
//!
//! Values are written with the shortest round-trip float formatting, so a
//! trace produced from the same seed serializes to identical bytes.

use crate::central::DofTrace;
use crate::optimizer::RunTrace;
use std::io::{self, Write};

/// Write the weight trajectory: header `t,w1..wN`, one row per recorded
/// descent step.
pub fn write_weight_trace(out: &mut impl Write, trace: &RunTrace) -> io::Result<()> {
    let n = trace.steps.first().map_or(0, |s| s.w.len());
    write!(out, "t")?;
    for i in 1..=n {
        write!(out, ",w{i}")?;
    }
    writeln!(out)?;
    for step in &trace.steps {
        write!(out, "{}", step.t)?;
        for w in &step.w {
            write!(out, ",{w}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Write the extreme-eigenvalue trajectory: header `t,lambdaN,lambda2`.
pub fn write_eigen_trace(out: &mut impl Write, trace: &RunTrace) -> io::Result<()> {
    writeln!(out, "t,lambdaN,lambda2")?;
    for step in &trace.steps {
        writeln!(out, "{},{},{}", step.t, step.lambda_n, step.lambda_2)?;
    }
    Ok(())
}

/// Write the multiplier schedule: header `sigma,t`, one row per multiplier
/// update with the inner-iteration count at which it fired.
pub fn write_multiplier_trace(out: &mut impl Write, trace: &RunTrace) -> io::Result<()> {
    writeln!(out, "sigma,t")?;
    for update in &trace.multiplier_updates {
        writeln!(out, "{},{}", update.sigma, update.t)?;
    }
    Ok(())
}

/// Write agent state trajectories: header `k,x11,x12,..,xN1,xN2` (agent
/// index then state index), one row per simulation step.
pub fn write_state_trajectory(out: &mut impl Write, trace: &DofTrace) -> io::Result<()> {
    let n = trace.states.first().map_or(0, |row| row.len());
    write!(out, "k")?;
    for i in 1..=n {
        write!(out, ",x{i}1,x{i}2")?;
    }
    writeln!(out)?;
    for (k, row) in trace.states.iter().enumerate() {
        write!(out, "{k}")?;
        for s in row {
            write!(out, ",{},{}", s[0], s[1])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Write noise inputs and performance outputs: header `k,xi1..xiN,z1..zN`.
pub fn write_inout_trajectory(out: &mut impl Write, trace: &DofTrace) -> io::Result<()> {
    let n = trace.noise.first().map_or(0, |row| row.len());
    write!(out, "k")?;
    for i in 1..=n {
        write!(out, ",xi{i}")?;
    }
    for i in 1..=n {
        write!(out, ",z{i}")?;
    }
    writeln!(out)?;
    for (k, (xi, z)) in trace.noise.iter().zip(&trace.z).enumerate() {
        write!(out, "{k}")?;
        for v in xi {
            write!(out, ",{v}")?;
        }
        for v in z {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
