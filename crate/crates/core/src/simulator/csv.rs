//! Trajectory CSV export and import.

use std::io::{BufRead, Write};

use nalgebra::Vector3;

use super::{Sample, SaturationMode, Trajectory};
use crate::dynamics::RelativeState;
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub const CSV_HEADER: &str = "t,x,y,z,vx,vy,vz,fx,fy,fz,wq,Jp,Jq,Jtotal";

/// Writes one row per sample with 17 significant digits.
pub fn write_csv<T: Real, W: Write>(traj: &Trajectory<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &traj.samples {
        let row = [
            s.t, s.state.x, s.state.y, s.state.z, s.state.vx, s.state.vy, s.state.vz, s.thrust.x, s.thrust.y,
            s.thrust.z, s.disturbance, s.jp, s.jq, s.j_total,
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{:.16e}", to_f64(*v))).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}

/// Reads a trajectory written by [`write_csv`]. The disturbance energy is
/// not stored and comes back as zero.
pub fn read_csv<T: Real, R: BufRead>(input: R, saturation: SaturationMode) -> Result<Trajectory<T>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("empty trajectory file".into()))?
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected trajectory header `{}`", header.trim())));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("row {}: {e}", i + 2)))?;
        if v.len() != 14 {
            return Err(Error::InvalidConfig(format!("row {}: expected 14 columns, got {}", i + 2, v.len())));
        }
        let c = |k: usize| lit::<T>(v[k]);
        samples.push(Sample {
            t: c(0),
            state: RelativeState::from_array([c(1), c(2), c(3), c(4), c(5), c(6)]),
            thrust: Vector3::new(c(7), c(8), c(9)),
            disturbance: c(10),
            jp: c(11),
            jq: c(12),
            j_total: c(13),
            w_energy: T::zero(),
        });
    }
    Ok(Trajectory { samples, saturation })
}
