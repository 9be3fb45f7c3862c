//! Binary field dumps, parameter files and plot-ready CSV output.
//!
//! Field dump layout (little-endian): magic `FCTL`, version `u32`, `n u32`,
//! `N u32`, `dt f64`, `L f64`, then `N + 1` slices of `n + 1` `f64`
//! coefficients, row-major.
//!
//! Parameter files: magic `FCTP`, version `u32`, count `u64`, then the `f64`
//! entries.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::Trajectory;
use crate::optimize::HistoryRow;
use crate::riccati::RiccatiSolution;

pub const DUMP_MAGIC: &[u8; 4] = b"FCTL";
pub const PARAMS_MAGIC: &[u8; 4] = b"FCTP";
pub const FORMAT_VERSION: u32 = 1;

/// Header of a field dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    /// Highest mode or element count; slices hold `n + 1` coefficients.
    pub n: u32,
    /// Number of time steps; the dump holds `N + 1` slices.
    pub steps: u32,
    pub dt: f64,
    pub length: f64,
}

/// Writes `(N + 1) × (n + 1)` row-major values with a dump header.
pub fn write_dump(mut w: impl Write, header: &DumpHeader, data: &[f64]) -> Result<()> {
    let expected = (header.n as usize + 1) * (header.steps as usize + 1);
    if data.len() != expected {
        return Err(Error::Format(format!("dump holds {} values, header implies {expected}", data.len())));
    }
    let mut buf = Vec::with_capacity(32 + 8 * data.len());
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&header.n.to_le_bytes());
    buf.extend_from_slice(&header.steps.to_le_bytes());
    buf.extend_from_slice(&header.dt.to_le_bytes());
    buf.extend_from_slice(&header.length.to_le_bytes());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dump(mut r: impl Read) -> Result<(DumpHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 32 || &bytes[..4] != DUMP_MAGIC {
        return Err(Error::Format("not a field dump (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dump version {version}")));
    }
    let header = DumpHeader { n: u32_at(8), steps: u32_at(12), dt: f64_at(16), length: f64_at(24) };
    let count = (header.n as usize + 1) * (header.steps as usize + 1);
    if bytes.len() != 32 + 8 * count {
        return Err(Error::Format(format!("dump body has {} bytes, header implies {}", bytes.len() - 32, 8 * count)));
    }
    let data = bytes[32..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, data))
}

/// Dumps the states of a trajectory.
pub fn dump_trajectory(path: &Path, traj: &Trajectory, length: f64) -> Result<()> {
    let header = DumpHeader {
        n: (traj.dim - 1) as u32,
        steps: traj.steps() as u32,
        dt: if traj.steps() > 0 { traj.times[1] - traj.times[0] } else { 0.0 },
        length,
    };
    write_dump(BufWriter::new(fs::File::create(path)?), &header, &traj.states)
}

pub fn write_params(mut w: impl Write, alpha: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 8 * alpha.len());
    buf.extend_from_slice(PARAMS_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(alpha.len() as u64).to_le_bytes());
    for v in alpha {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_params(mut r: impl Read) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != PARAMS_MAGIC {
        return Err(Error::Format("not a parameter file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported parameter file version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * count {
        return Err(Error::Format(format!("parameter file should hold {count} values")));
    }
    Ok(bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Full-precision float formatting that round-trips through parsing.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub const HISTORY_HEADER: &str = "iteration,cost,cost_std_error,grad_norm,step_size,failures,wall_time";

pub fn write_history_csv(mut w: impl Write, rows: &[HistoryRow]) -> Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.3}",
            r.iteration,
            num(r.cost),
            num(r.cost_std_error),
            num(r.grad_norm),
            num(r.step_size),
            r.failures,
            r.wall_time
        )?;
    }
    Ok(())
}

/// One row per `(t, k)`.
pub fn write_gains_csv(mut w: impl Write, sol: &RiccatiSolution) -> Result<()> {
    writeln!(w, "t,k,p")?;
    for j in 0..=sol.steps() {
        let t = j as f64 * sol.dt();
        for k in 0..sol.dim() {
            writeln!(w, "{},{k},{}", num(t), num(sol.gain(k, j)))?;
        }
    }
    Ok(())
}

/// `t` followed by one column per series.
pub fn write_series_csv(mut w: impl Write, times: &[f64], names: &[&str], columns: &[Vec<f64>]) -> Result<()> {
    write!(w, "t")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for (j, t) in times.iter().enumerate() {
        write!(w, "{}", num(*t))?;
        for c in columns {
            write!(w, ",{}", num(c[j]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let header = DumpHeader { n: 2, steps: 1, dt: 0.05, length: 20.0 };
        let data = vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5, 1e300, -7.25];
        let mut buf = Vec::new();
        write_dump(&mut buf, &header, &data).unwrap();
        assert_eq!(&buf[..4], b"FCTL");
        assert_eq!(buf.len(), 32 + 48);
        let (h, d) = read_dump(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(d.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        write_dump(&mut buf, &DumpHeader { n: 0, steps: 0, dt: 1.0, length: 1.0 }, &[2.0]).unwrap();
        assert!(read_dump(&buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(read_dump(&buf[..]).is_err());
        assert!(write_dump(Vec::new(), &DumpHeader { n: 1, steps: 0, dt: 1.0, length: 1.0 }, &[2.0]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let alpha = vec![0.25, -1e-12, 3.0];
        let mut buf = Vec::new();
        write_params(&mut buf, &alpha).unwrap();
        assert_eq!(read_params(&buf[..]).unwrap(), alpha);
        assert!(read_params(&buf[..10]).is_err());
    }

    #[test]
    fn empty_history_is_header_only() {
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{HISTORY_HEADER}\n"));
    }
}
