//! Output formats: observable CSV, `HRT3` binary snapshots, JSON reports.
//!
//! `HRT3` layout, all little-endian: magic `b"HRT3"`, version `u32`, `M` `u32`,
//! snapshot count `u32`, then per snapshot `t: f64` followed by `M³`
//! interleaved `(re, im)` `f64` pairs in x-fastest order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::observables::ObservableRecord;
use crate::spectral::{Field, Grid};

pub const CSV_HEADER: &str = "t,mass,kinetic,potential,total_energy,h1,hsc,linf";
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"HRT3";
pub const SNAPSHOT_VERSION: u32 = 1;

/// 17 significant digits, so every value round-trips exactly.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn records_to_csv(records: &[ObservableRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let cols = [r.t, r.mass, r.kinetic, r.potential, r.total_energy, r.h1, r.hsc, r.linf];
        let line: Vec<String> = cols.iter().map(|&c| fmt(c)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ObservableRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Format(format!("CSV header must be `{CSV_HEADER}`"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let v = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("CSV line {}: {e}", i + 2)))?;
            if v.len() != 8 {
                return Err(Error::Format(format!("CSV line {}: expected 8 columns", i + 2)));
            }
            Ok(ObservableRecord {
                t: v[0],
                mass: v[1],
                kinetic: v[2],
                potential: v[3],
                total_energy: v[4],
                h1: v[5],
                hsc: v[6],
                linf: v[7],
            })
        })
        .collect()
}

pub fn write_snapshots<W: Write>(mut w: W, grid: &Grid, snapshots: &[(f64, &Field)]) -> Result<()> {
    let m = u32::try_from(grid.modes()).map_err(|_| Error::Format("grid too large".into()))?;
    let count = u32::try_from(snapshots.len()).map_err(|_| Error::Format("too many snapshots".into()))?;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&m.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * grid.len());
    for (t, field) in snapshots {
        grid.check_same(field.grid())?;
        w.write_all(&t.to_le_bytes())?;
        buf.clear();
        for z in field.physical() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshots<R: Read>(mut r: R) -> Result<(Grid, Vec<(f64, Field)>)> {
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if &word != SNAPSHOT_MAGIC {
        return Err(Error::Format("not an HRT3 file".into()));
    }
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = read_u32(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported HRT3 version {version}")));
    }
    let m = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let grid = Grid::new(m)?;
    let mut out = Vec::with_capacity(count);
    let mut bytes = vec![0u8; 16 * grid.len()];
    let mut eight = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut eight)?;
        let t = f64::from_le_bytes(eight);
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        out.push((t, Field::from_physical(&grid, values)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last snapshot".into()));
    }
    Ok((grid, out))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_snapshot_file(path: &Path, grid: &Grid, snapshots: &[(f64, &Field)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let file = fs::File::create(path)?;
    write_snapshots(std::io::BufWriter::new(file), grid, snapshots)
}

pub fn read_snapshot_file(path: &Path) -> Result<(Grid, Vec<(f64, Field)>)> {
    read_snapshots(std::io::BufReader::new(fs::File::open(path)?))
}
