//! On-disk formats: binary field snapshots and the energy CSV.
//!
//! Snapshot layout (little-endian): 8-byte magic `CNSKFLD1`, `u32` dim,
//! `u32` points per axis, `f64` side length, `u32` component count, `f64`
//! time, then `ncomp · N^dim` `f64` values, component-major in the order
//! `ρ, m_1..m_d, c`, each component in row-major grid order (last axis
//! fastest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ScalarField, State};
use crate::functionals::{EnergyReport, ENERGY_CSV_COLUMNS};
use crate::grid::TorusGrid;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CNSKFLD1";

pub fn write_snapshot(path: &Path, state: &State) -> Result<()> {
    let grid = state.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&grid.side_length().to_le_bytes())?;
    w.write_all(&(state.component_count() as u32).to_le_bytes())?;
    w.write_all(&state.time.to_le_bytes())?;
    for comp in state.components() {
        for v in comp.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads a snapshot, reusing `grid` when it matches the header.
pub fn read_snapshot(path: &Path, grid: Option<&Arc<TorusGrid>>) -> Result<State> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!("{}: bad snapshot magic", path.display())));
    }
    let dim = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let side = read_f64(&mut r)?;
    let ncomp = read_u32(&mut r)? as usize;
    let time = read_f64(&mut r)?;
    if ncomp != dim + 2 {
        return Err(Error::Format(format!(
            "{}: {ncomp} components for a {dim}-dimensional state",
            path.display()
        )));
    }
    let grid = match grid {
        Some(g) if g.dim() == dim && g.points_per_axis() == n && g.side_length() == side => g.clone(),
        _ => Arc::new(TorusGrid::new(dim, n, side)?),
    };
    let mut buf = vec![0u8; grid.len() * 8];
    let mut comps = Vec::with_capacity(ncomp);
    for _ in 0..ncomp {
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
            .collect();
        comps.push(ScalarField::new(grid.clone(), values)?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{}: trailing bytes", path.display())));
    }
    State::from_components(comps, time)
}

pub fn write_energy_csv(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if reports.is_empty() {
        w.write_record(ENERGY_CSV_COLUMNS)?;
    }
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyReport>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ENERGY_CSV_COLUMNS {
        return Err(Error::Format(format!("{}: unexpected energy CSV header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_initial_data;
    use crate::model::{ModelParams, RegParams};

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let g = Arc::new(TorusGrid::periodic(2, 8).unwrap());
        let mut s = make_initial_data(g.clone(), 1, 2, 0.3, 1.0, 1.0).unwrap().to_state();
        s.time = 0.125;
        write_snapshot(&path, &s).unwrap();
        let back = read_snapshot(&path, Some(&g)).unwrap();
        assert_eq!(back.time, 0.125);
        for (a, b) in s.components().iter().zip(back.components()) {
            assert_eq!(a.values(), b.values());
        }
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 8 + 4 + 4 + 8 + 4 + 8 + 4 * 64 * 8);
    }

    #[test]
    fn snapshot_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(matches!(read_snapshot(&path, None), Err(Error::Format(_))));
    }

    #[test]
    fn energy_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let g = Arc::new(TorusGrid::periodic(2, 8).unwrap());
        let s = make_initial_data(g, 1, 2, 0.3, 1.0, 1.0).unwrap().to_state();
        let r = EnergyReport::evaluate(&s, &ModelParams::default(), &RegParams::default()).unwrap();
        write_energy_csv(&path, &[r, r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), ENERGY_CSV_COLUMNS.join(","));
        let back = read_energy_csv(&path).unwrap();
        assert_eq!(back, vec![r, r]);
    }

    #[test]
    fn empty_energy_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_energy_csv(&path, &[]).unwrap();
        assert!(read_energy_csv(&path).unwrap().is_empty());
    }
}
