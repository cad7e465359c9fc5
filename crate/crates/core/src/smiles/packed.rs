//! Packed on-disk grid format.
//!
//! Header: magic `BESG`, version `u16`, cols `u16`, rows `u16`, reserved
//! `u16`, record count `u64`. Each record: source index `u64`, row count
//! `u16`, then that many `u64` rows. All little-endian.

use std::io::{self, Read, Write};

use super::{BesGrid, GRID_COLS, GRID_ROWS};

pub const PACKED_MAGIC: &[u8; 4] = b"BESG";
pub const PACKED_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridRecord {
    /// Row index of the molecule in the source dataset.
    pub source_index: u64,
    pub grid: BesGrid,
}

pub fn write_grids<W: Write>(mut w: W, records: &[GridRecord]) -> io::Result<()> {
    w.write_all(PACKED_MAGIC)?;
    w.write_all(&PACKED_VERSION.to_le_bytes())?;
    w.write_all(&(GRID_COLS as u16).to_le_bytes())?;
    w.write_all(&(GRID_ROWS as u16).to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        w.write_all(&rec.source_index.to_le_bytes())?;
        let len = rec.grid.length();
        w.write_all(&(len as u16).to_le_bytes())?;
        for &row in &rec.grid.rows()[..len] {
            w.write_all(&row.to_le_bytes())?;
        }
    }
    w.flush()
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_grids<R: Read>(mut r: R) -> io::Result<Vec<GridRecord>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PACKED_MAGIC {
        return Err(invalid("not a packed grid file"));
    }
    let version = read_u16(&mut r)?;
    if version != PACKED_VERSION {
        return Err(invalid(format!("unsupported grid file version {version}")));
    }
    let cols = read_u16(&mut r)? as usize;
    let rows = read_u16(&mut r)? as usize;
    if cols != GRID_COLS || rows != GRID_ROWS {
        return Err(invalid(format!("grid shape {rows}x{cols} not supported")));
    }
    read_u16(&mut r)?;
    let count = read_u64(&mut r)?;
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let source_index = read_u64(&mut r)?;
        let len = read_u16(&mut r)? as usize;
        if len > GRID_ROWS {
            return Err(invalid(format!("record with {len} rows")));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(read_u64(&mut r)?);
        }
        let grid = BesGrid::from_rows(&data).ok_or_else(|| invalid("row has bits past column 56"))?;
        out.push(GridRecord { source_index, grid });
    }
    Ok(out)
}
