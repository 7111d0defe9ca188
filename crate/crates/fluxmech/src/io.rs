//! File formats: binary and CSV time traces, spectrum CSV, S21 trace CSV and
//! sensitivity-map CSV.
//!
//! Binary trace layout (little endian): magic `LEVI`, u32 version, u32
//! channel count, u64 sample count, f64 sample rate, then the channels one
//! after the other as f64 arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::SensitivityMapRow;
use crate::spectral::{SpectrumRecord, TimeTrace};

const TRACE_MAGIC: &[u8; 4] = b"LEVI";
const TRACE_VERSION: u32 = 1;

pub fn write_trace_binary(path: &Path, trace: &TimeTrace) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(TRACE_MAGIC)?;
    out.write_all(&TRACE_VERSION.to_le_bytes())?;
    out.write_all(&2u32.to_le_bytes())?;
    out.write_all(&(trace.len() as u64).to_le_bytes())?;
    out.write_all(&trace.sample_rate.to_le_bytes())?;
    for channel in [&trace.i, &trace.q] {
        for v in channel {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_binary(path: &Path) -> Result<TimeTrace> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != TRACE_MAGIC {
        return Err(Error::Argument(format!(
            "{} is not a trace file (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != TRACE_VERSION {
        return Err(Error::Argument(format!(
            "unsupported trace version {version}"
        )));
    }
    input.read_exact(&mut u32buf)?;
    let channels = u32::from_le_bytes(u32buf);
    if channels != 2 {
        return Err(Error::Argument(format!(
            "expected 2 channels, found {channels}"
        )));
    }
    let mut u64buf = [0u8; 8];
    input.read_exact(&mut u64buf)?;
    let samples = u64::from_le_bytes(u64buf) as usize;
    input.read_exact(&mut u64buf)?;
    let sample_rate = f64::from_le_bytes(u64buf);
    let mut read_channel = |n: usize| -> Result<Vec<f64>> {
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok(data)
    };
    let i = read_channel(samples)?;
    let q = read_channel(samples)?;
    TimeTrace::new(sample_rate, i, q)
}

pub fn write_trace_csv(path: &Path, trace: &TimeTrace) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# fs_Hz = {}", trace.sample_rate)?;
    writeln!(out, "i_V,q_V")?;
    for (i, q) in trace.i.iter().zip(&trace.q) {
        writeln!(out, "{i},{q}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<TimeTrace> {
    let input = BufReader::new(File::open(path)?);
    let mut sample_rate = None;
    let mut i_ch = Vec::new();
    let mut q_ch = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                if key.trim() == "fs_Hz" {
                    sample_rate = Some(value.trim().parse::<f64>().map_err(|e| {
                        Error::Argument(format!("bad fs_Hz on line {}: {e}", lineno + 1))
                    })?);
                }
            }
            continue;
        }
        if t.starts_with(|c: char| c.is_alphabetic()) {
            continue; // header row
        }
        let mut cols = t.split(',');
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            return Err(Error::Argument(format!(
                "line {}: expected two columns",
                lineno + 1
            )));
        };
        i_ch.push(a.trim().parse::<f64>().map_err(|e| {
            Error::Argument(format!("line {}: {e}", lineno + 1))
        })?);
        q_ch.push(b.trim().parse::<f64>().map_err(|e| {
            Error::Argument(format!("line {}: {e}", lineno + 1))
        })?);
    }
    let sample_rate = sample_rate
        .ok_or_else(|| Error::Argument("trace CSV misses the `# fs_Hz = ...` header".into()))?;
    TimeTrace::new(sample_rate, i_ch, q_ch)
}

/// Read a trace in either format, sniffing the binary magic.
pub fn read_trace(path: &Path) -> Result<TimeTrace> {
    let mut probe = [0u8; 4];
    {
        let mut f = File::open(path)?;
        let n = f.read(&mut probe)?;
        if n < 4 {
            return Err(Error::Argument(format!("{} is too short", path.display())));
        }
    }
    if &probe == TRACE_MAGIC {
        read_trace_binary(path)
    } else {
        read_trace_csv(path)
    }
}

pub fn write_spectrum_csv(path: &Path, spectrum: &SpectrumRecord) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# units = {}", spectrum.units)?;
    writeln!(out, "# enbw_Hz = {}", spectrum.enbw)?;
    writeln!(out, "freq_Hz,psd_{}", spectrum.units.label().replace('/', "_per_"))?;
    for (f, v) in spectrum.freqs.iter().zip(&spectrum.psd) {
        writeln!(out, "{f},{v:e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a VNA trace with columns frequency_Hz, re_S21, im_S21.
pub fn read_s21_csv(path: &Path) -> Result<Vec<(f64, Complex64)>> {
    let input = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() < 3 {
            return Err(Error::Argument(format!(
                "line {}: expected frequency_Hz,re_S21,im_S21",
                lineno + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("line {}: {e}", lineno + 1)))
        };
        let freq = parse(cols[0])?;
        rows.push((
            crate::constants::TAU * freq,
            Complex64::new(parse(cols[1])?, parse(cols[2])?),
        ));
    }
    if rows.is_empty() {
        return Err(Error::Argument("S21 CSV contains no data rows".into()));
    }
    Ok(rows)
}

pub fn write_s21_csv(path: &Path, trace: &[(f64, Complex64)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "frequency_Hz,re_S21,im_S21")?;
    for (omega, s) in trace {
        writeln!(out, "{},{},{}", omega / crate::constants::TAU, s.re, s.im)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sensitivity_map_csv(path: &Path, rows: &[SensitivityMapRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "dx_m,dy_m,F_x,F_y,F_z")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e}",
            row.dx, row.dy, row.f_factor[0], row.f_factor[1], row.f_factor[2]
        )?;
    }
    out.flush()?;
    Ok(())
}
